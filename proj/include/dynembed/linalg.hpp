#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace dynembed {

// Row-major so that a batch of node vectors is a contiguous block of rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

}  // namespace dynembed
