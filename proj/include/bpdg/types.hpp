#ifndef BPDG_TYPES_HPP
#define BPDG_TYPES_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace bpdg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Column-major sparse storage; assembled from triplets.
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

} // namespace bpdg

#endif
