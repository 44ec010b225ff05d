#include "gradtrace/svd.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gradtrace/errors.hpp"

namespace gradtrace {

namespace {

// A column pair counts as orthogonal once |w_p . w_q| drops below this
// fraction of the geometric mean of the squared column norms.
const double kPairTol = 1e-14;

struct JacobiOutcome {
  bool converged = false;
  int sweeps_used = 0;
  double worst_ratio = 0.0;
};

/* Orthogonalizes the columns of w in place by plane rotations; v, when
   present, accumulates the right-hand rotations.  Classic cyclic one-sided
   Jacobi: per sweep every (p, q) pair is visited in a fixed order, so the
   result is deterministic for a given input. */
JacobiOutcome orthogonalize_columns(Eigen::MatrixXd& w, Eigen::MatrixXd* v,
                                    int max_sweeps) {
  const Eigen::Index n = w.cols();
  JacobiOutcome outcome;
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    bool rotated = false;
    outcome.worst_ratio = 0.0;
    for (Eigen::Index p = 0; p + 1 < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double app = w.col(p).squaredNorm();
        const double aqq = w.col(q).squaredNorm();
        const double apq = w.col(p).dot(w.col(q));
        if (app == 0.0 || aqq == 0.0 || apq == 0.0) continue;
        const double denom = std::sqrt(app) * std::sqrt(aqq);
        const double ratio = std::abs(apq) / denom;
        if (ratio > outcome.worst_ratio) outcome.worst_ratio = ratio;
        if (ratio <= kPairTol) continue;

        const double zeta = (aqq - app) / (2.0 * apq);
        // hypot keeps the tangent formula finite for extreme zeta.
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double cs = 1.0 / std::hypot(1.0, t);
        const double sn = cs * t;

        const Eigen::VectorXd wp = w.col(p);
        w.col(p) = cs * wp - sn * w.col(q);
        w.col(q) = sn * wp + cs * w.col(q);
        if (v != nullptr) {
          const Eigen::VectorXd vp = v->col(p);
          v->col(p) = cs * vp - sn * v->col(q);
          v->col(q) = sn * vp + cs * v->col(q);
        }
        rotated = true;
      }
    }
    outcome.sweeps_used = sweep;
    if (!rotated) {
      outcome.converged = true;
      return outcome;
    }
  }
  return outcome;
}

}  // namespace

SvdResult jacobi_svd(const Eigen::MatrixXd& a, bool want_vectors,
                     int max_sweeps) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw PreconditionError("svd of an empty matrix");
  }

  const bool transposed = a.rows() < a.cols();
  Eigen::MatrixXd w = transposed ? a.transpose() : a;
  const Eigen::Index n = w.cols();

  // Values-only on a tall matrix: a QR pass shrinks the working set to the
  // n x n triangular factor, which shares the singular values.
  if (!want_vectors && w.rows() > 2 * n) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
    w = qr.matrixQR()
            .topRows(n)
            .template triangularView<Eigen::Upper>()
            .toDenseMatrix();
  }

  Eigen::MatrixXd v;
  if (want_vectors) v = Eigen::MatrixXd::Identity(n, n);

  const JacobiOutcome outcome =
      orthogonalize_columns(w, want_vectors ? &v : nullptr, max_sweeps);
  if (!outcome.converged) {
    throw NumericalError(
        "one-sided Jacobi failed to converge after " +
        std::to_string(outcome.sweeps_used) + " sweeps; worst remaining " +
        "pair correlation " + std::to_string(outcome.worst_ratio));
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd norms(n);
  for (Eigen::Index i = 0; i < n; ++i) norms[i] = w.col(i).norm();
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) {
                     return norms[x] > norms[y];
                   });

  SvdResult result;
  result.sigma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) result.sigma[i] = norms[order[static_cast<std::size_t>(i)]];

  if (want_vectors) {
    Eigen::MatrixXd u(w.rows(), n);
    Eigen::MatrixXd vs(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index src = order[static_cast<std::size_t>(i)];
      vs.col(i) = v.col(src);
      if (result.sigma[i] > 0.0) {
        u.col(i) = w.col(src) / result.sigma[i];
      } else {
        u.col(i).setZero();
      }
    }
    if (transposed) {
      result.u = vs;
      result.v = u;
    } else {
      result.u = u;
      result.v = vs;
    }
  }
  return result;
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& a, int max_sweeps) {
  return jacobi_svd(a, false, max_sweeps).sigma;
}

}  // namespace gradtrace
