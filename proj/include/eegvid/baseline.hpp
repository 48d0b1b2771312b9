#pragma once

#include <vector>

#include "eegvid/types.hpp"

namespace eegvid {

// One-vs-rest CSP bank: filters[k] is the (2m x channels) spatial filter matrix for
// class k against the rest, rows sorted by generalized eigenvalue ascending (bottom m
// first, top m last).
struct CspModel {
  std::vector<MatD> filters;
  int m = 2;

  int n_classes() const { return static_cast<int>(filters.size()); }
  int n_channels() const { return filters.empty() ? 0 : static_cast<int>(filters[0].cols()); }
};

struct LdaModel {
  MatD means;     // dim x classes
  MatD cov_inv;   // shared (pooled) covariance inverse
  VecD log_priors;

  int n_classes() const { return static_cast<int>(means.cols()); }
  int dim() const { return static_cast<int>(means.rows()); }
};

// trials: channels x samples each. Per one-vs-rest split solves
// sigma_1 w = lambda (sigma_1 + sigma_2) w on trial-normalized covariances
// (X X^T / trace) and keeps the m top and m bottom eigenvectors.
CspModel csp_fit(const std::vector<MatD>& trials, const std::vector<int>& labels, int m = 2);

// Log-normalized variance of each spatially filtered signal, concatenated over the
// one-vs-rest models: log(var(w^T X) / sum_j var(w_j^T X)), floored at log(1e-12).
VecD csp_features(const CspModel& model, const MatD& trial);

// features: dim x samples. Pooled-covariance Gaussian classifier; covariance is shrunk
// toward its diagonal (gamma = 0.1) when samples < dim + 1.
LdaModel lda_fit(const MatD& features, const std::vector<int>& labels);

// Argmax of the linear discriminant scores, ties toward the lowest index.
int lda_predict(const LdaModel& model, const VecD& feature);

}  // namespace eegvid
