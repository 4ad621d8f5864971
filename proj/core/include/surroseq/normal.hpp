#pragma once

namespace surroseq {

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile, Phi^{-1}(p) for p in (0, 1).
double normal_quantile(double p);

/// Two-sided critical value Phi^{-1}(1 - alpha/2).
double two_sided_critical(double alpha);

} // namespace surroseq
