#pragma once

#include <Eigen/Dense>
#include <complex>

namespace qdm {

using cplx = std::complex<double>;

// System matrices never exceed 3x3; fixed upper bounds keep them on the stack.
inline constexpr int kMaxDim = 3;

using RealMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using RealVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using ComplexMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;
using ComplexVector = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

}  // namespace qdm
