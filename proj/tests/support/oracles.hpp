#pragma once

// Brute-force reference implementations. These deliberately share no code
// with the library: every quantity is recomputed from its defining sum.

#include <cstddef>
#include <vector>

namespace oracle {

struct Sample {
  std::vector<double> s;
  std::vector<double> y;
};

double gaussian_kernel(double u);
double epanechnikov_kernel(double u);

/// sum K_h(S_i - s) Y_i / sum K_h(S_i - s), with K_h(u) = K(u/h)/h.
double mu(const std::vector<double> &s, const std::vector<double> &y, double h, bool gaussian,
          double query);

/// Treated mean of mu minus control mean of mu.
double delta(const std::vector<double> &train_s, const std::vector<double> &train_y, double h,
             const std::vector<double> &control, const std::vector<double> &treated);

/// sum over arms of (1/n) [mean(mu^2) - mean(mu)^2].
double var_hat(const std::vector<double> &train_s, const std::vector<double> &train_y, double h,
               const std::vector<double> &control, const std::vector<double> &treated);

/// c_jj' = (1/n) sum m_j m_j' - mean(m_j) mean(m_j'), double loop over subjects.
/// m[i][j] is the conditional mean for subject i at analysis j.
std::vector<std::vector<double>> arm_covariance(const std::vector<std::vector<double>> &m);

/// Standard normal CDF and its inverse by bisection on erfc.
double phi(double z);
double phi_inverse(double p);

/// b with (2 Phi(b) - 1)^J = 1 - alpha.
double sidak(double alpha, std::size_t looks);

/// Phi^{-1}(1 - alpha / (2J)).
double bonferroni(double alpha, std::size_t looks);

/// Two-look linear spending with independent statistics:
/// b1 = Phi^{-1}(1 - alpha/4), P(|X1| < b1) P(|X2| >= b2) = alpha/2.
double spending_b1(double alpha);
double spending_b2(double alpha);

/// Reference bandwidth rule computed from scratch.
double bandwidth(std::vector<double> s);

} // namespace oracle
