#pragma once

#include <Eigen/Core>

namespace advstego {

// Row-major so that one frame (or one time step) is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

}  // namespace advstego
