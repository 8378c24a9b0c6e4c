#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dtsg {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using FloatMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

// true = valid position
using Mask = std::vector<std::uint8_t>;

inline Mask all_valid(std::size_t n) { return Mask(n, 1); }

}  // namespace dtsg
