#ifndef GRADTRACE_PROJECTION_HPP
#define GRADTRACE_PROJECTION_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "gradtrace/trace.hpp"

namespace gradtrace {

/* A Gaussian sketching matrix R of shape k x d with entries drawn i.i.d.
   from N(0, 1/k), generated by the counter-based engine in rng.hpp.  The
   seed and generator id travel with the matrix so a stored projection can be
   reproduced bit for bit; analyses always reuse the stored matrix rather
   than regenerating it. */
struct ProjectionSpec {
  std::uint64_t seed = 0;
  std::uint32_t generator_id = 1;
  Eigen::MatrixXd matrix;  // k x d

  Eigen::Index k() const { return matrix.rows(); }
  Eigen::Index d() const { return matrix.cols(); }
};

ProjectionSpec make_projection(Eigen::Index d, Eigen::Index k,
                               std::uint64_t seed);

void save_projection(const ProjectionSpec& proj, const std::string& path);
ProjectionSpec load_projection(const std::string& path);

/* Maps every step of a trace through R.  The result is a k-dimensional
   trace whose metadata records the projection lineage (seed, k, source
   dimension) on top of the source metadata. */
GradientTrace apply_projection(const ProjectionSpec& proj,
                               const GradientTrace& trace);

/* Norm-preservation diagnostics for a set of probe vectors (one per column;
   zero columns are skipped).  ratios holds ||Rx||^2 / ||x||^2 per usable
   vector.  fraction_within counts squared-norm distortion |ratio - 1|
   against a tolerance; max_relative_norm_error is the worst |  ||Rx||/||x||
   - 1 |.  These are diagnostics, not certified bounds. */
struct DistortionStats {
  Eigen::Index pair_count = 0;
  double max_relative_norm_error = 0.0;
  std::vector<double> ratios;

  double fraction_within(double tolerance) const;
};

DistortionStats distortion_check(const ProjectionSpec& proj,
                                 const Eigen::MatrixXd& vectors);

}  // namespace gradtrace

#endif
