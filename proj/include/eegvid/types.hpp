#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace eegvid {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatF = Mat<float>;
using MatD = Mat<double>;
using VecF = Vec<float>;
using VecD = Vec<double>;

// Scalp rasters are fixed at 32x32 everywhere (frames, flow fields, images).
inline constexpr int kFrameSize = 32;

// One gray frame of an EEG video: raw interpolated amplitude, no rescale.
using Frame = Eigen::Matrix<double, kFrameSize, kFrameSize>;

}  // namespace eegvid
