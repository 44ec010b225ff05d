#include "gradtrace/spectral.hpp"

#include <cmath>

#include "gradtrace/errors.hpp"
#include "gradtrace/numeric.hpp"
#include "gradtrace/svd.hpp"

namespace gradtrace {

IncrementMatrix increment_matrix(const GradientTrace& trace) {
  if (trace.steps() < 2) {
    throw PreconditionError("increments need at least two steps, trace has " +
                            std::to_string(trace.steps()));
  }
  IncrementMatrix h;
  h.columns.resize(trace.dim(), trace.steps() - 1);
  for (Eigen::Index t = 1; t < trace.steps(); ++t) {
    h.columns.col(t - 1) = trace.values().col(t) - trace.values().col(t - 1);
  }
  return h;
}

Spectrum singular_spectrum(const IncrementMatrix& increments) {
  Spectrum spec;
  const Eigen::VectorXd sigma = singular_values(increments.columns);
  spec.singular_values.assign(sigma.data(), sigma.data() + sigma.size());

  CompensatedSum energy;
  for (double s : spec.singular_values) energy.add(s * s);
  spec.total_energy = energy.value();

  // Parseval guard: the rotations are orthogonal, so losing Frobenius mass
  // means the decomposition itself went wrong.
  CompensatedSum frob;
  for (Eigen::Index j = 0; j < increments.count(); ++j) {
    frob.add(compensated_squared_norm(increments.columns.col(j)));
  }
  const double frob_sq = frob.value();
  if (std::abs(spec.total_energy - frob_sq) >
      1e-8 * std::max(frob_sq, 1e-300)) {
    throw NumericalError("singular spectrum lost Frobenius mass: sum of "
                         "squares " + std::to_string(spec.total_energy) +
                         " vs matrix energy " + std::to_string(frob_sq));
  }

  if (spec.total_energy > 0.0) {
    spec.cumulative_fractions.reserve(spec.singular_values.size());
    CompensatedSum prefix;
    for (double s : spec.singular_values) {
      prefix.add(s * s);
      spec.cumulative_fractions.push_back(prefix.value() / spec.total_energy);
    }
  }
  return spec;
}

Eigen::Index predictable_rank(const Spectrum& spectrum, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must lie strictly inside (0, 1)");
  }
  if (!(spectrum.total_energy > 0.0)) {
    throw UndefinedMetricError(
        "predictable rank is undefined: increment energy is zero");
  }
  const double target = 1.0 - epsilon;
  const auto& fractions = spectrum.cumulative_fractions;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    // Exact comparison, no slack: ties resolve to the smaller rank.
    if (fractions[i] >= target) return static_cast<Eigen::Index>(i + 1);
  }
  // Rounding can leave the final fraction a hair under 1; every direction is
  // then needed.
  return static_cast<Eigen::Index>(fractions.size());
}

double tail_energy(const Spectrum& spectrum, Eigen::Index r) {
  if (r < 0 ||
      r > static_cast<Eigen::Index>(spectrum.singular_values.size())) {
    throw PreconditionError("tail index out of range");
  }
  CompensatedSum acc;
  for (std::size_t i = static_cast<std::size_t>(r);
       i < spectrum.singular_values.size(); ++i) {
    acc.add(spectrum.singular_values[i] * spectrum.singular_values[i]);
  }
  return acc.value();
}

double best_rank_r_residual(const IncrementMatrix& increments,
                            Eigen::Index r) {
  const Eigen::Index max_rank =
      std::min(increments.dim(), increments.count());
  if (r < 1 || r > max_rank) {
    throw PreconditionError("rank " + std::to_string(r) +
                            " outside [1, " + std::to_string(max_rank) + "]");
  }
  const SvdResult svd = jacobi_svd(increments.columns, true);

  Eigen::MatrixXd approx =
      Eigen::MatrixXd::Zero(increments.dim(), increments.count());
  for (Eigen::Index i = 0; i < r; ++i) {
    approx.noalias() +=
        svd.sigma[i] * svd.u.col(i) * svd.v.col(i).transpose();
  }

  const Eigen::MatrixXd residual = increments.columns - approx;
  CompensatedSum acc;
  for (Eigen::Index j = 0; j < residual.cols(); ++j) {
    for (Eigen::Index i = 0; i < residual.rows(); ++i) {
      acc.add(residual(i, j) * residual(i, j));
    }
  }
  return acc.value();
}

RankProfile rank_profile(const Spectrum& spectrum,
                         const std::vector<double>& epsilons) {
  RankProfile profile;
  profile.epsilons = epsilons;
  profile.ranks.reserve(epsilons.size());
  for (double eps : epsilons) {
    profile.ranks.push_back(predictable_rank(spectrum, eps));
  }
  return profile;
}

WindowedRankSeries windowed_rank(const GradientTrace& trace,
                                 Eigen::Index window_len, Eigen::Index stride,
                                 double epsilon) {
  if (window_len < 2) {
    throw PreconditionError("rank windows need at least two steps");
  }
  if (stride < 1) throw PreconditionError("stride must be >= 1");
  if (window_len > trace.steps()) {
    throw PreconditionError("window length " + std::to_string(window_len) +
                            " exceeds the trace's " +
                            std::to_string(trace.steps()) + " steps");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ConfigError("epsilon must lie strictly inside (0, 1)");
  }

  WindowedRankSeries out;
  out.window_len = window_len;
  out.stride = stride;
  out.epsilon = epsilon;
  for (Eigen::Index start = 0; start + window_len <= trace.steps();
       start += stride) {
    // Only the increments interior to the window: steps start .. end give
    // window_len - 1 differences, none crossing the boundary.
    IncrementMatrix h;
    h.columns.resize(trace.dim(), window_len - 1);
    for (Eigen::Index t = 1; t < window_len; ++t) {
      h.columns.col(t - 1) = trace.values().col(start + t) -
                             trace.values().col(start + t - 1);
    }
    WindowedRank entry;
    entry.start = start;
    entry.end = start + window_len - 1;
    const Spectrum spec = singular_spectrum(h);
    if (spec.total_energy > 0.0) {
      entry.rank = predictable_rank(spec, epsilon);
    }
    out.entries.push_back(entry);
  }
  return out;
}

}  // namespace gradtrace
