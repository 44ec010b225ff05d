#ifndef GRADTRACE_SPECTRAL_HPP
#define GRADTRACE_SPECTRAL_HPP

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "gradtrace/trace.hpp"

namespace gradtrace {

/* Columns h_t = g_t - g_{t-1} for t = 1 .. T, exact float subtraction of
   adjacent trace columns.  A trace with T+1 steps yields T columns. */
struct IncrementMatrix {
  Eigen::MatrixXd columns;

  Eigen::Index dim() const { return columns.rows(); }
  Eigen::Index count() const { return columns.cols(); }
};

IncrementMatrix increment_matrix(const GradientTrace& trace);

/* Singular spectrum of an increment matrix.  total_energy is the compensated
   sum of squared singular values and matches ||H||_F^2; cumulative_fractions
   is left empty when the matrix is all zero, in which case rank queries are
   undefined rather than zero. */
struct Spectrum {
  std::vector<double> singular_values;  // nonincreasing
  double total_energy = 0.0;
  std::vector<double> cumulative_fractions;  // c_r, nondecreasing, ends at 1
};

Spectrum singular_spectrum(const IncrementMatrix& increments);

/* Smallest r whose cumulative energy fraction reaches 1 - epsilon.  The
   comparison is an exact >= with no tolerance slack, so ties resolve to the
   smaller rank.  Requires 0 < epsilon < 1 and positive total energy. */
Eigen::Index predictable_rank(const Spectrum& spectrum, double epsilon);

/* Sum of squared singular values past the first r (r = 0 gives the total). */
double tail_energy(const Spectrum& spectrum, Eigen::Index r);

/* Squared Frobenius error of the best rank-r approximation, computed by
   explicitly forming the truncated SVD reconstruction and summing the
   squared residual entries.  By Eckart-Young this equals tail_energy(r);
   keeping the two code paths separate is what makes comparing them a real
   consistency check. */
double best_rank_r_residual(const IncrementMatrix& increments, Eigen::Index r);

/* r*(epsilon) for a list of thresholds against one fixed spectrum.  Ranks
   are nonincreasing as epsilon grows. */
struct RankProfile {
  std::vector<double> epsilons;
  std::vector<Eigen::Index> ranks;
};

RankProfile rank_profile(const Spectrum& spectrum,
                         const std::vector<double>& epsilons);

/* Ranks on a sliding window.  Each window spans window_len consecutive
   steps of the trace and uses only the window_len - 1 increments interior
   to it; increments never straddle a window boundary.  Windows with zero
   increment energy get an empty rank. */
struct WindowedRank {
  Eigen::Index start = 0;
  Eigen::Index end = 0;  // inclusive
  std::optional<Eigen::Index> rank;
};

struct WindowedRankSeries {
  Eigen::Index window_len = 0;
  Eigen::Index stride = 0;
  double epsilon = 0.0;
  std::vector<WindowedRank> entries;
};

WindowedRankSeries windowed_rank(const GradientTrace& trace,
                                 Eigen::Index window_len, Eigen::Index stride,
                                 double epsilon);

}  // namespace gradtrace

#endif
