#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace gddsg {

using ClassId = std::uint32_t;
using GroupId = std::uint32_t;

using Vector = Eigen::VectorXd;
// Samples are stored one per row.
using Matrix = Eigen::MatrixXd;

}  // namespace gddsg
