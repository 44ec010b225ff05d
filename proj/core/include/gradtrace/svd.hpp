#ifndef GRADTRACE_SVD_HPP
#define GRADTRACE_SVD_HPP

#include <Eigen/Core>

namespace gradtrace {

/* Thin singular value decomposition A = U * diag(sigma) * V^T with sigma
   sorted in nonincreasing order.  For an m x n input with m >= n, U is
   m x n and V is n x n; inputs with m < n are handled by transposition.
   Columns of U matching a zero singular value are left as zero vectors,
   which is all the reconstruction paths here need. */
struct SvdResult {
  Eigen::MatrixXd u;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd v;
};

/* One-sided Jacobi SVD.  Sweeps rotate column pairs until every pair is
   orthogonal to within tol relative to the column norms; the sweep count is
   capped, and hitting the cap raises NumericalError with the sweep count and
   the worst remaining pair, never a silent truncation.  When singular
   vectors are not needed and the matrix is tall, a Householder QR pass first
   reduces the work to the n x n triangular factor.  The routine is fully
   deterministic: no randomized pivoting, no threading. */
SvdResult jacobi_svd(const Eigen::MatrixXd& a, bool want_vectors,
                     int max_sweeps = 64);

// Convenience wrapper returning just the sorted singular values.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& a, int max_sweeps = 64);

}  // namespace gradtrace

#endif
