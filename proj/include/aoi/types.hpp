#pragma once

#include <Eigen/Dense>

namespace aoi {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

/// 1x1 matrix holding a scalar; scalar systems are carried this way throughout.
inline Matrix scalar_matrix(double value) { return Matrix::Constant(1, 1, value); }

inline bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

}  // namespace aoi
