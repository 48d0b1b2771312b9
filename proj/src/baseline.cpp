#include "eegvid/baseline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace eegvid {
namespace {

MatD normalized_covariance(const MatD& trial) {
  MatD cov = trial * trial.transpose();
  const double tr = cov.trace();
  if (!(tr > 0.0)) throw std::invalid_argument("zero-variance trial");
  return cov / tr;
}

int count_classes(const std::vector<int>& labels) {
  int n = 0;
  for (int label : labels) {
    if (label < 0) throw std::invalid_argument("negative label");
    n = std::max(n, label + 1);
  }
  return n;
}

}  // namespace

CspModel csp_fit(const std::vector<MatD>& trials, const std::vector<int>& labels, int m) {
  if (trials.empty() || trials.size() != labels.size())
    throw std::invalid_argument("trials and labels must be nonempty and aligned");
  if (m < 1) throw std::invalid_argument("need m >= 1");
  const int channels = static_cast<int>(trials[0].rows());
  if (2 * m > channels) throw std::invalid_argument("need 2m <= channels");

  const int n_classes = count_classes(labels);
  if (n_classes < 2) throw std::invalid_argument("need at least 2 classes");
  std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
  for (int label : labels) ++counts[static_cast<std::size_t>(label)];
  for (int c : counts)
    if (c < 2) throw std::invalid_argument("every class needs at least 2 trials");

  std::vector<MatD> covs;
  covs.reserve(trials.size());
  for (const MatD& trial : trials) {
    if (trial.rows() != channels) throw std::invalid_argument("channel-count mismatch");
    covs.push_back(normalized_covariance(trial));
  }

  CspModel model;
  model.m = m;
  model.filters.reserve(static_cast<std::size_t>(n_classes));
  for (int k = 0; k < n_classes; ++k) {
    MatD own = MatD::Zero(channels, channels);
    MatD rest = MatD::Zero(channels, channels);
    int n_own = 0, n_rest = 0;
    for (std::size_t i = 0; i < covs.size(); ++i) {
      if (labels[i] == k) {
        own += covs[i];
        ++n_own;
      } else {
        rest += covs[i];
        ++n_rest;
      }
    }
    own /= n_own;
    rest /= n_rest;

    MatD composite = own + rest;
    composite += (1e-6 * composite.trace() / channels) * MatD::Identity(channels, channels);

    Eigen::GeneralizedSelfAdjointEigenSolver<MatD> solver(own, composite);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("singular composite covariance");

    // Eigenvalues come out ascending; keep the extreme m of each end, order preserved.
    MatD filt(2 * m, channels);
    for (int j = 0; j < m; ++j) filt.row(j) = solver.eigenvectors().col(j).transpose();
    for (int j = 0; j < m; ++j)
      filt.row(m + j) = solver.eigenvectors().col(channels - m + j).transpose();
    model.filters.push_back(std::move(filt));
  }
  return model;
}

VecD csp_features(const CspModel& model, const MatD& trial) {
  if (model.filters.empty()) throw std::invalid_argument("empty model");
  if (trial.rows() != model.n_channels()) throw std::invalid_argument("channel-count mismatch");

  const int per_model = 2 * model.m;
  VecD feats(static_cast<Eigen::Index>(model.filters.size()) * per_model);
  Eigen::Index at = 0;
  for (const MatD& filt : model.filters) {
    const MatD projected = filt * trial;
    VecD vars(per_model);
    for (int j = 0; j < per_model; ++j) {
      const auto row = projected.row(j);
      const double mean = row.mean();
      vars(j) = (row.array() - mean).square().mean();
    }
    const double total = vars.sum();
    for (int j = 0; j < per_model; ++j) {
      const double ratio = total > 0.0 ? vars(j) / total : 0.0;
      feats(at++) = std::log(std::max(ratio, 1e-12));
    }
  }
  return feats;
}

LdaModel lda_fit(const MatD& features, const std::vector<int>& labels) {
  const Eigen::Index dim = features.rows();
  const Eigen::Index n = features.cols();
  if (n == 0 || static_cast<std::size_t>(n) != labels.size())
    throw std::invalid_argument("features and labels must be nonempty and aligned");

  const int n_classes = count_classes(labels);
  if (n_classes < 2) throw std::invalid_argument("need at least 2 classes");

  LdaModel model;
  model.means = MatD::Zero(dim, n_classes);
  VecD counts = VecD::Zero(n_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.means.col(labels[static_cast<std::size_t>(i)]) += features.col(i);
    counts(labels[static_cast<std::size_t>(i)]) += 1.0;
  }
  for (int k = 0; k < n_classes; ++k) {
    if (counts(k) == 0.0) throw std::invalid_argument("class absent from training set");
    model.means.col(k) /= counts(k);
  }
  model.log_priors = (counts / static_cast<double>(n)).array().log();

  MatD pooled = MatD::Zero(dim, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VecD centered = features.col(i) - model.means.col(labels[static_cast<std::size_t>(i)]);
    pooled.noalias() += centered * centered.transpose();
  }
  pooled /= std::max<double>(1.0, static_cast<double>(n - n_classes));

  if (n < dim + 1) {
    const double gamma = 0.1;
    pooled = (1.0 - gamma) * pooled + gamma * MatD(pooled.diagonal().asDiagonal());
  }

  // Escalating ridge keeps the pooled covariance positive definite.
  const double base = std::max(pooled.trace() / static_cast<double>(dim), 1e-300);
  double ridge = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    Eigen::LLT<MatD> llt(pooled + ridge * MatD::Identity(dim, dim));
    if (llt.info() == Eigen::Success) {
      model.cov_inv = llt.solve(MatD::Identity(dim, dim));
      return model;
    }
    ridge = ridge == 0.0 ? 1e-10 * base : ridge * 100.0;
  }
  throw std::runtime_error("pooled covariance is not positive definite");
}

int lda_predict(const LdaModel& model, const VecD& feature) {
  if (feature.size() != model.dim()) throw std::invalid_argument("feature dimension mismatch");
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < model.n_classes(); ++k) {
    const VecD alpha = model.cov_inv * model.means.col(k);
    const double score =
        alpha.dot(feature) - 0.5 * alpha.dot(model.means.col(k)) + model.log_priors(k);
    if (score > best_score) {
      best_score = score;
      best = k;
    }
  }
  return best;
}

}  // namespace eegvid
