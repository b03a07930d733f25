#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbs {

using cplx = std::complex<double>;
using Configuration = std::vector<int>;

/// Thrown for malformed user input (bad lattice sizes, descriptors, config keys).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a quantity is undefined for the current configuration,
/// e.g. an amplitude ratio out of a zero-amplitude configuration.
class ZeroAmplitudeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A complex number stored as log-magnitude and phase. Exact zero has
/// log_abs == -inf.
struct LogAmplitude {
  double log_abs = -std::numeric_limits<double>::infinity();
  double phase = 0.0;

  static LogAmplitude from(cplx z) {
    if (z == cplx(0.0, 0.0)) return {};
    return {std::log(std::abs(z)), std::arg(z)};
  }

  bool is_zero() const { return std::isinf(log_abs) && log_abs < 0; }

  cplx value() const {
    if (is_zero()) return {0.0, 0.0};
    return std::polar(std::exp(log_abs), phase);
  }

  LogAmplitude& operator*=(cplx z) {
    if (z == cplx(0.0, 0.0)) {
      *this = {};
    } else if (!is_zero()) {
      log_abs += std::log(std::abs(z));
      phase += std::arg(z);
    }
    return *this;
  }
};

/// numerator / denominator as an ordinary complex number.
inline cplx ratio_of(const LogAmplitude& numerator, const LogAmplitude& denominator) {
  if (denominator.is_zero()) throw ZeroAmplitudeError("ratio with zero denominator");
  if (numerator.is_zero()) return {0.0, 0.0};
  return std::polar(std::exp(numerator.log_abs - denominator.log_abs),
                    numerator.phase - denominator.phase);
}

struct SiteChange {
  int site = 0;
  int level = 0;
};

}  // namespace sbs
