#include "surroseq/normal.hpp"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "surroseq/error.hpp"

namespace surroseq {

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericalError("normal quantile requires p in (0, 1)");
  }
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double two_sided_critical(double alpha) {
  return normal_quantile(1.0 - alpha / 2.0);
}

} // namespace surroseq
