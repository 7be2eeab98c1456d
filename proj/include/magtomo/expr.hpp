#pragma once

#include "magtomo/core.hpp"

#include <memory>
#include <string>

namespace magtomo {

// Compiled arithmetic expression over the chart coordinates.
// Variables: z1..zN (1-based), x/y/z as aliases of z1/z2/z3, r = Euclidean |z|, pi.
// Functions: sin cos tan exp log sqrt abs tanh sinh cosh atan pow(a,b) min(a,b) max(a,b).
class Expr {
 public:
  struct Node;

  Expr() = default;
  static Expr parse(const std::string& text);

  double operator()(const Vec& z) const;
  const std::string& text() const { return text_; }
  bool valid() const { return root_ != nullptr; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace magtomo
