#pragma once

#include <Eigen/Dense>

namespace c3 {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
using RowX = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatXd = MatX<double>;
using VecXd = VecX<double>;

}  // namespace c3
