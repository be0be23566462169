#pragma once

#include <Eigen/Dense>

namespace vdpm {

// Project-wide scalar. Kernels that need another precision are templated.
using Scalar = double;

template <class S>
using MatrixRMT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixRM = MatrixRMT<Scalar>;
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using IntGrid = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Luma image, values in [0,255].
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Finite stand-in for -inf in score maps (unreachable part placements).
inline constexpr Scalar kNegInfScore = -1e15;

}  // namespace vdpm
