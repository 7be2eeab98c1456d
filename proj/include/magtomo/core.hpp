#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>

namespace magtomo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Numerical failures carry a stable code; the CLI maps them to exit status 3.
enum class ErrorCode {
  SingularMetric,
  NotOnBoundary,
  LeftChart,
  StepUnderflow,
  EmptyFamily,
  DegenerateLevel,
  TrappedPath,
  TrappedOrbit,
  ConjugationOverflow,
  NotFound,
  NonConvergence,
  IllPosed,
  LayerFailure,
  EmptyKernel,
  Validation,
};

const char* error_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Config validation failures (exit status 2). `path` is a JSON-pointer-like field path.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

using ScalarFn = std::function<double(const Vec&)>;
using VecFn = std::function<Vec(const Vec&)>;
using MatFn = std::function<Mat(const Vec&)>;

const char* version();

}  // namespace magtomo
