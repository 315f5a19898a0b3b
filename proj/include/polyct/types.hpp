#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace polyct {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

}  // namespace polyct
