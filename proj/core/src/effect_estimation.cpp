#include "surroseq/effect_estimation.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "surroseq/error.hpp"

namespace surroseq {

std::vector<double> arm_mu_values(const FittedConditionalMean &f, const StudyBSnapshot &b,
                                  std::size_t look, int group) {
  if (look < 1 || look > b.j_obs) {
    throw DataError("analysis column missing: look " + std::to_string(look) +
                    " not in snapshot (j_obs = " + std::to_string(b.j_obs) + ")");
  }
  std::vector<double> values;
  for (const auto &subject : b.subjects) {
    if (subject.group != group) {
      continue;
    }
    const double s = subject.surrogates[look - 1];
    auto v = f.try_evaluate(s);
    if (!v) {
      throw NumericalError("no effective neighbors at query point s = " + std::to_string(s) +
                           " for Study B subject '" + subject.id + "' at analysis " +
                           std::to_string(look));
    }
    values.push_back(*v);
  }
  return values;
}

namespace {

struct ArmMoments {
  double n = 0.0;
  double mean = 0.0;
  double second = 0.0;
};

ArmMoments moments(const std::vector<double> &v) {
  ArmMoments m;
  m.n = static_cast<double>(v.size());
  for (double x : v) {
    m.mean += x;
    m.second += x * x;
  }
  m.mean /= m.n;
  m.second /= m.n;
  return m;
}

void require_arms(const StudyBSnapshot &b, std::size_t minimum) {
  for (int g : {0, 1}) {
    if (b.arm_size(g) < minimum) {
      throw DataError(std::string(g == 0 ? "control" : "treatment") + " arm has " +
                      std::to_string(b.arm_size(g)) + " subjects, need at least " +
                      std::to_string(minimum));
    }
  }
}

} // namespace

double delta_e_at(const FittedConditionalMean &f, const StudyBSnapshot &b, std::size_t look) {
  require_arms(b, 1);
  const auto m0 = moments(arm_mu_values(f, b, look, 0));
  const auto m1 = moments(arm_mu_values(f, b, look, 1));
  return m1.mean - m0.mean;
}

double var_hat_at(const FittedConditionalMean &f, const StudyBSnapshot &b, std::size_t look) {
  require_arms(b, 2);
  double var = 0.0;
  for (int g : {0, 1}) {
    const auto m = moments(arm_mu_values(f, b, look, g));
    var += (m.second - m.mean * m.mean) / m.n;
  }
  return std::max(var, 0.0);
}

EffectEstimate w_stat_at(const FittedConditionalMean &f, const StudyBSnapshot &b,
                         std::size_t look) {
  require_arms(b, 2);
  const auto m0 = moments(arm_mu_values(f, b, look, 0));
  const auto m1 = moments(arm_mu_values(f, b, look, 1));
  EffectEstimate est;
  est.look = look;
  est.n_b0 = static_cast<std::size_t>(m0.n);
  est.n_b1 = static_cast<std::size_t>(m1.n);
  est.delta_e = m1.mean - m0.mean;
  est.var_hat = std::max((m0.second - m0.mean * m0.mean) / m0.n +
                             (m1.second - m1.mean * m1.mean) / m1.n,
                         0.0);
  if (!(est.var_hat > 0.0)) {
    throw NumericalError("degenerate variance at analysis " + std::to_string(look) +
                         ": mu_hat is constant over Study B surrogates");
  }
  est.w_stat = est.delta_e / std::sqrt(est.var_hat);
  return est;
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd &m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition failed");
  }
  Eigen::VectorXd lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -kPsdTolerance) {
      throw NumericalError("correlation estimate not PSD: eigenvalue " +
                           std::to_string(lambda(i)));
    }
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  const Eigen::MatrixXd &v = eig.eigenvectors();
  Eigen::MatrixXd root = v * lambda.asDiagonal() * v.transpose();
  return 0.5 * (root + root.transpose());
}

namespace {

Eigen::MatrixXd unit_diagonal(const Eigen::MatrixXd &m) {
  const Eigen::Index n = m.rows();
  Eigen::VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i) = 1.0 / std::sqrt(m(i, i));
  }
  Eigen::MatrixXd c = d.asDiagonal() * m * d.asDiagonal();
  c = 0.5 * (c + c.transpose());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      c(i, k) = i == k ? 1.0 : std::clamp(c(i, k), -1.0, 1.0);
    }
  }
  return c;
}

} // namespace

CorrelationModel correlation_from_covariance(const Eigen::MatrixXd &sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw NumericalError("covariance matrix must be square and nonempty");
  }
  const Eigen::Index n = sigma.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(sigma(i, i) > 0.0)) {
      throw NumericalError("degenerate variance at analysis " + std::to_string(i + 1) +
                           " in the covariance model");
    }
  }
  CorrelationModel model;
  model.looks = static_cast<std::size_t>(n);
  model.sigma_tilde = 0.5 * (sigma + sigma.transpose());

  Eigen::MatrixXd raw = model.sigma_tilde;
  {
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      d(i) = 1.0 / std::sqrt(raw(i, i));
    }
    raw = d.asDiagonal() * raw * d.asDiagonal();
    raw = 0.5 * (raw + raw.transpose());
    raw.diagonal().setOnes();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(raw(i, k)) > 1.0 + kPsdTolerance) {
        throw NumericalError("correlation estimate not PSD: |corr(" + std::to_string(i + 1) + "," +
                             std::to_string(k + 1) + ")| > 1");
      }
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(raw);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition failed");
  }
  model.min_eigenvalue = eig.eigenvalues().minCoeff();
  if (model.min_eigenvalue < -kPsdTolerance) {
    throw NumericalError("correlation estimate not PSD: minimum eigenvalue " +
                         std::to_string(model.min_eigenvalue));
  }
  if (model.min_eigenvalue < 0.0) {
    Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
    raw = eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
  }
  model.corr = unit_diagonal(raw);
  model.sqrt_corr = symmetric_sqrt(model.corr);
  return model;
}

CorrelationModel CorrelationModel::prefix(std::size_t j) const {
  if (j < 1 || j > looks) {
    throw Error("correlation prefix size out of range");
  }
  const auto n = static_cast<Eigen::Index>(j);
  CorrelationModel out;
  out.looks = j;
  out.sigma_tilde = sigma_tilde.topLeftCorner(n, n);
  out.corr = corr.topLeftCorner(n, n);
  out.sqrt_corr = symmetric_sqrt(out.corr);
  out.n_b0 = n_b0;
  out.n_b1 = n_b1;
  out.kernel = kernel;
  out.min_eigenvalue = min_eigenvalue;
  return out;
}

Eigen::MatrixXd plugin_covariance(const Eigen::MatrixXd &control_values,
                                  const Eigen::MatrixXd &treated_values, double n_b0,
                                  double n_b1) {
  const Eigen::Index looks = control_values.cols();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(looks, looks);
  const Eigen::MatrixXd *arms[2] = {&control_values, &treated_values};
  const double n_b[2] = {n_b0, n_b1};
  for (int g = 0; g < 2; ++g) {
    const Eigen::MatrixXd &m = *arms[g];
    const double n = static_cast<double>(m.rows());
    const Eigen::VectorXd mean = m.colwise().sum().transpose() / n;
    for (Eigen::Index j = 0; j < looks; ++j) {
      for (Eigen::Index k = 0; k < looks; ++k) {
        const double cross = m.col(j).dot(m.col(k)) / n;
        sigma(j, k) += (cross - mean(j) * mean(k)) / n_b[g];
      }
    }
  }
  return sigma;
}

std::vector<FittedConditionalMean> fit_schedule(const StudyADataset &a,
                                                const AnalysisSchedule &schedule,
                                                const KernelSpec &kernel) {
  schedule.validate(a.num_times());
  std::vector<FittedConditionalMean> fits;
  fits.reserve(schedule.looks());
  for (std::size_t j = 1; j <= schedule.looks(); ++j) {
    fits.push_back(fit_mu(a, 0, schedule.study_a_column[j - 1], kernel));
  }
  return fits;
}

CorrelationModel build_correlation_model(const StudyADataset &a, const AnalysisSchedule &schedule,
                                         double n_b0, double n_b1, const KernelSpec &kernel) {
  if (!(n_b0 > 0.0) || !(n_b1 > 0.0)) {
    throw Error("planned Study B arm sizes must be positive");
  }
  const auto fits = fit_schedule(a, schedule, kernel);
  const auto looks = static_cast<Eigen::Index>(schedule.looks());
  Eigen::MatrixXd values[2];
  for (int g = 0; g < 2; ++g) {
    values[g].resize(static_cast<Eigen::Index>(a.arm_size(g)), looks);
    for (Eigen::Index j = 0; j < looks; ++j) {
      const auto column = schedule.study_a_column[static_cast<std::size_t>(j)];
      Eigen::Index row = 0;
      for (const auto &subject : a.subjects) {
        if (subject.group != g) {
          continue;
        }
        const double s = subject.surrogates[column - 1];
        auto v = fits[static_cast<std::size_t>(j)].try_evaluate(s);
        if (!v) {
          throw NumericalError("no effective neighbors at query point s = " + std::to_string(s) +
                               " for Study A subject '" + subject.id + "' at analysis " +
                               std::to_string(j + 1));
        }
        values[g](row++, j) = *v;
      }
    }
  }
  auto model = correlation_from_covariance(plugin_covariance(values[0], values[1], n_b0, n_b1));
  model.n_b0 = n_b0;
  model.n_b1 = n_b1;
  model.kernel = kernel;
  return model;
}

CorrelationModel build_study_b_correlation(const std::vector<FittedConditionalMean> &fits,
                                           const StudyBSnapshot &b) {
  if (fits.size() < b.j_obs) {
    throw Error("need one fitted conditional mean per observed analysis");
  }
  require_arms(b, 2);
  const auto looks = static_cast<Eigen::Index>(b.j_obs);
  Eigen::MatrixXd values[2];
  for (int g = 0; g < 2; ++g) {
    values[g].resize(static_cast<Eigen::Index>(b.arm_size(g)), looks);
    for (Eigen::Index j = 0; j < looks; ++j) {
      const auto col = arm_mu_values(fits[static_cast<std::size_t>(j)], b,
                                     static_cast<std::size_t>(j + 1), g);
      for (std::size_t i = 0; i < col.size(); ++i) {
        values[g](static_cast<Eigen::Index>(i), j) = col[i];
      }
    }
  }
  const double n0 = static_cast<double>(b.arm_size(0));
  const double n1 = static_cast<double>(b.arm_size(1));
  auto model = correlation_from_covariance(plugin_covariance(values[0], values[1], n0, n1));
  model.n_b0 = n0;
  model.n_b1 = n1;
  return model;
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd &m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      row.push_back(m(i, k));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json &j, std::size_t n) {
  const auto dim = static_cast<Eigen::Index>(n);
  if (!j.is_array() || j.size() != n) {
    throw DataError("matrix JSON must have " + std::to_string(n) + " rows");
  }
  Eigen::MatrixXd m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const auto &row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || row.size() != n) {
      throw DataError("matrix JSON rows must have " + std::to_string(n) + " entries");
    }
    for (Eigen::Index k = 0; k < dim; ++k) {
      m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
  }
  return m;
}

} // namespace

void to_json(nlohmann::json &j, const KernelSpec &k) {
  j = nlohmann::json{{"kind", to_string(k.kind)}};
  if (k.bandwidth) {
    j["bandwidth"] = *k.bandwidth;
  } else {
    j["bandwidth"] = "auto";
  }
}

void from_json(const nlohmann::json &j, KernelSpec &k) {
  k.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
  const auto &bw = j.at("bandwidth");
  if (bw.is_string()) {
    if (bw.get<std::string>() != "auto") {
      throw DataError("kernel bandwidth must be a number or \"auto\"");
    }
    k.bandwidth.reset();
  } else {
    k.bandwidth = bw.get<double>();
  }
  k.validate();
}

void to_json(nlohmann::json &j, const CorrelationModel &m) {
  j = nlohmann::json{{"J", m.looks},
                     {"n_b0", m.n_b0},
                     {"n_b1", m.n_b1},
                     {"kernel", m.kernel},
                     {"min_eigenvalue", m.min_eigenvalue},
                     {"sigma_tilde", matrix_to_json(m.sigma_tilde)},
                     {"corr", matrix_to_json(m.corr)},
                     {"sqrt_corr", matrix_to_json(m.sqrt_corr)}};
}

void from_json(const nlohmann::json &j, CorrelationModel &m) {
  m.looks = j.at("J").get<std::size_t>();
  m.n_b0 = j.at("n_b0").get<double>();
  m.n_b1 = j.at("n_b1").get<double>();
  m.kernel = j.at("kernel").get<KernelSpec>();
  m.min_eigenvalue = j.value("min_eigenvalue", 0.0);
  m.sigma_tilde = matrix_from_json(j.at("sigma_tilde"), m.looks);
  m.corr = matrix_from_json(j.at("corr"), m.looks);
  m.sqrt_corr = matrix_from_json(j.at("sqrt_corr"), m.looks);
}

void to_json(nlohmann::json &j, const EffectEstimate &e) {
  j = nlohmann::json{{"j", e.look},         {"delta_e", e.delta_e}, {"var_hat", e.var_hat},
                     {"w_stat", e.w_stat},  {"n_b0", e.n_b0},       {"n_b1", e.n_b1}};
}

} // namespace surroseq
