#include "magtomo/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

namespace magtomo {

struct Expr::Node {
  enum Kind { Const, Var, Radius, Neg, Add, Sub, Mul, Div, Pow, Call1, Call2 } kind;
  double value = 0.0;
  int var = 0;
  double (*f1)(double) = nullptr;
  double (*f2)(double, double) = nullptr;
  std::shared_ptr<const Node> a, b;

  explicit Node(Kind k) : kind(k) {}

  double eval(const Vec& z) const {
    switch (kind) {
      case Const: return value;
      case Var: return var < z.size() ? z[var] : 0.0;
      case Radius: return z.norm();
      case Neg: return -a->eval(z);
      case Add: return a->eval(z) + b->eval(z);
      case Sub: return a->eval(z) - b->eval(z);
      case Mul: return a->eval(z) * b->eval(z);
      case Div: return a->eval(z) / b->eval(z);
      case Pow: return std::pow(a->eval(z), b->eval(z));
      case Call1: return f1(a->eval(z));
      case Call2: return f2(a->eval(z), b->eval(z));
    }
    return 0.0;
  }
};

namespace {

using NodeP = std::shared_ptr<const Expr::Node>;

NodeP make(Expr::Node n) { return std::make_shared<const Expr::Node>(std::move(n)); }

NodeP binary(Expr::Node::Kind k, NodeP a, NodeP b) {
  Expr::Node n{k};
  n.a = std::move(a);
  n.b = std::move(b);
  return make(std::move(n));
}

double fmin2(double a, double b) { return std::fmin(a, b); }
double fmax2(double a, double b) { return std::fmax(a, b); }
double fpow2(double a, double b) { return std::pow(a, b); }
double fsin(double a) { return std::sin(a); }
double fcos(double a) { return std::cos(a); }
double ftan(double a) { return std::tan(a); }
double fexp(double a) { return std::exp(a); }
double flog(double a) { return std::log(a); }
double fsqrt(double a) { return std::sqrt(a); }
double fabs1(double a) { return std::fabs(a); }
double ftanh(double a) { return std::tanh(a); }
double fsinh(double a) { return std::sinh(a); }
double fcosh(double a) { return std::cosh(a); }
double fatan(double a) { return std::atan(a); }

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?
class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodeP parse() {
    NodeP n = expr();
    skip();
    if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
    return n;
  }

 private:
  const std::string& s_;
  std::size_t i_ = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("expression", msg + " at offset " + std::to_string(i_) + " in \"" + s_ + "\"");
  }
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool eat(char c) {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }

  NodeP expr() {
    NodeP n = term();
    for (;;) {
      if (eat('+')) n = binary(Expr::Node::Add, n, term());
      else if (eat('-')) n = binary(Expr::Node::Sub, n, term());
      else return n;
    }
  }
  NodeP term() {
    NodeP n = unary();
    for (;;) {
      if (eat('*')) n = binary(Expr::Node::Mul, n, unary());
      else if (eat('/')) n = binary(Expr::Node::Div, n, unary());
      else return n;
    }
  }
  NodeP unary() {
    if (eat('-')) {
      Expr::Node n{Expr::Node::Neg};
      n.a = unary();
      return make(std::move(n));
    }
    if (eat('+')) return unary();
    return power();
  }
  NodeP power() {
    NodeP base = atom();
    if (eat('^')) return binary(Expr::Node::Pow, base, unary());
    return base;
  }
  NodeP atom() {
    skip();
    if (i_ >= s_.size()) fail("unexpected end");
    char c = s_[i_];
    if (eat('(')) {
      NodeP n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + i_;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) fail("bad number");
      i_ += static_cast<std::size_t>(end - begin);
      Expr::Node n{Expr::Node::Const};
      n.value = v;
      return make(std::move(n));
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = i_;
      while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
      std::string id = s_.substr(start, i_ - start);
      return identifier(id);
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodeP identifier(const std::string& id) {
    skip();
    bool call = i_ < s_.size() && s_[i_] == '(';
    if (call) {
      static const std::vector<std::pair<const char*, double (*)(double)>> f1 = {
          {"sin", fsin},   {"cos", fcos},   {"tan", ftan},   {"exp", fexp},   {"log", flog},
          {"sqrt", fsqrt}, {"abs", fabs1},  {"tanh", ftanh}, {"sinh", fsinh}, {"cosh", fcosh},
          {"atan", fatan}};
      static const std::vector<std::pair<const char*, double (*)(double, double)>> f2 = {
          {"pow", fpow2}, {"min", fmin2}, {"max", fmax2}};
      eat('(');
      for (const auto& [name, fn] : f1) {
        if (id == name) {
          Expr::Node n{Expr::Node::Call1};
          n.f1 = fn;
          n.a = expr();
          if (!eat(')')) fail("expected ')'");
          return make(std::move(n));
        }
      }
      for (const auto& [name, fn] : f2) {
        if (id == name) {
          Expr::Node n{Expr::Node::Call2};
          n.f2 = fn;
          n.a = expr();
          if (!eat(',')) fail("expected ','");
          n.b = expr();
          if (!eat(')')) fail("expected ')'");
          return make(std::move(n));
        }
      }
      fail("unknown function '" + id + "'");
    }
    if (id == "pi") {
      Expr::Node n{Expr::Node::Const};
      n.value = std::numbers::pi;
      return make(std::move(n));
    }
    if (id == "r") return make(Expr::Node{Expr::Node::Radius});
    Expr::Node n{Expr::Node::Var};
    if (id == "x") n.var = 0;
    else if (id == "y") n.var = 1;
    else if (id == "z") n.var = 2;
    else if (id.size() >= 2 && id[0] == 'z' && std::all_of(id.begin() + 1, id.end(), ::isdigit)) {
      n.var = std::stoi(id.substr(1)) - 1;
      if (n.var < 0) fail("coordinate index starts at 1");
    } else {
      fail("unknown identifier '" + id + "'");
    }
    return make(std::move(n));
  }
};

}  // namespace

Expr Expr::parse(const std::string& text) {
  Expr e;
  e.root_ = Parser(text).parse();
  e.text_ = text;
  return e;
}

double Expr::operator()(const Vec& z) const { return root_->eval(z); }

}  // namespace magtomo
