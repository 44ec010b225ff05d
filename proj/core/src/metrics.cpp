#include "gradtrace/metrics.hpp"

#include <cmath>

#include "gradtrace/errors.hpp"
#include "gradtrace/numeric.hpp"

namespace gradtrace {

double path_length(const ResidualSeries& res) {
  CompensatedSum acc;
  for (double sq : res.per_step_sq_norms) acc.add(sq);
  return acc.value();
}

double predictability_index(const ResidualSeries& res,
                            const TraceDiagnostics& diag) {
  if (!(diag.total_energy > 0.0)) {
    throw UndefinedMetricError(
        "predictability index is undefined: trace energy G_T is zero");
  }
  return path_length(res) / diag.total_energy;
}

MagnitudeRatio magnitude_ratio_diagnostic(const GradientTrace& trace,
                                          const PredictionSeries& pred) {
  if (pred.values.rows() != trace.dim() ||
      pred.values.cols() != trace.steps()) {
    throw DimensionError("prediction series shape does not match the trace");
  }
  MagnitudeRatio out;
  double worst = -1.0;
  for (Eigen::Index t = 0; t < trace.steps(); ++t) {
    const double g = trace.values().col(t).norm();
    const double m = pred.values.col(t).norm();
    if (g == 0.0) {
      if (m != 0.0) out.zero_gradient_conflicts.push_back(t);
      continue;
    }
    const double ratio = m / g;
    if (ratio > worst) worst = ratio;
  }
  if (worst >= 0.0) {
    out.alpha = worst;
    out.alpha_bound = (1.0 + worst) * (1.0 + worst);
  }
  return out;
}

WindowedKappaSeries windowed_kappa(const GradientTrace& trace,
                                   const PredictorConfig& config,
                                   Eigen::Index window_len,
                                   Eigen::Index stride) {
  if (window_len < 1) throw PreconditionError("window length must be >= 1");
  if (stride < 1) throw PreconditionError("stride must be >= 1");
  if (window_len > trace.steps()) {
    throw PreconditionError("window length " + std::to_string(window_len) +
                            " exceeds the trace's " +
                            std::to_string(trace.steps()) + " steps");
  }

  // One predictor pass over the whole trace; windows only partition the
  // sums, they never reset the recurrence.
  const PredictionSeries pred = run_predictor(trace, config);
  const ResidualSeries res = residuals(trace, pred);

  std::vector<double> grad_sq(static_cast<std::size_t>(trace.steps()));
  for (Eigen::Index t = 0; t < trace.steps(); ++t) {
    grad_sq[static_cast<std::size_t>(t)] =
        compensated_squared_norm(trace.values().col(t));
  }

  WindowedKappaSeries out;
  out.window_len = window_len;
  out.stride = stride;
  for (Eigen::Index start = 0; start + window_len <= trace.steps();
       start += stride) {
    CompensatedSum num, den;
    for (Eigen::Index t = start; t < start + window_len; ++t) {
      num.add(res.per_step_sq_norms[static_cast<std::size_t>(t)]);
      den.add(grad_sq[static_cast<std::size_t>(t)]);
    }
    WindowedKappa entry;
    entry.start = start;
    entry.end = start + window_len - 1;
    const double d = den.value();
    if (d > 0.0) entry.kappa = num.value() / d;
    out.entries.push_back(entry);
  }
  return out;
}

PredictabilityReport make_report(const GradientTrace& trace,
                                 const PredictorConfig& config) {
  PredictabilityReport report;
  report.config = config;
  const PredictionSeries pred = run_predictor(trace, config);
  const ResidualSeries res = residuals(trace, pred);
  const TraceDiagnostics diag = validate_trace(trace);
  report.path_length = path_length(res);
  report.energy = diag.total_energy;
  report.kappa = predictability_index(res, diag);
  report.ratio = magnitude_ratio_diagnostic(trace, pred);
  return report;
}

}  // namespace gradtrace
