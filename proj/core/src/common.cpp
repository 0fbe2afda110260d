#include "icl/common.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <random>

namespace icl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateMeasure: return "DegenerateMeasure";
    case ErrorKind::InputOutsideBall: return "InputOutsideBall";
    case ErrorKind::UnsupportedClass: return "UnsupportedClass";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::NegativeThreshold: return "NegativeThreshold";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidDepth: return "InvalidDepth";
    case ErrorKind::NonPositiveTau: return "NonPositiveTau";
    case ErrorKind::ColumnInconsistency: return "ColumnInconsistency";
    case ErrorKind::TraceMissing: return "TraceMissing";
    case ErrorKind::BankMismatch: return "BankMismatch";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

bool is_validation_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InputOutsideBall:
    case ErrorKind::EmptyGrid:
    case ErrorKind::NegativeThreshold:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::InvalidDepth:
    case ErrorKind::NonPositiveTau:
    case ErrorKind::BankMismatch:
    case ErrorKind::InvalidConfig:
    case ErrorKind::UnsupportedClass:
    case ErrorKind::DegenerateMeasure:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x1c1u};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

}  // namespace icl
