#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace icl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorKind {
  DegenerateMeasure,
  InputOutsideBall,
  UnsupportedClass,
  EmptyGrid,
  NegativeThreshold,
  DimensionMismatch,
  NoConvergence,
  ShapeMismatch,
  InvalidDepth,
  NonPositiveTau,
  ColumnInconsistency,
  TraceMissing,
  BankMismatch,
  InvalidConfig,
};

const char* to_string(ErrorKind kind);

// Validation errors come from bad inputs; the rest are runtime failures.
bool is_validation_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Kahan-Babuska-Neumaier compensated summation.
struct NeumaierSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) noexcept {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const noexcept { return sum + comp; }
};

// Independent 64-bit seed for a named substream of `base`.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace icl
