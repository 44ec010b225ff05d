#ifndef GRADTRACE_METRICS_HPP
#define GRADTRACE_METRICS_HPP

#include <optional>
#include <string>
#include <vector>

#include "gradtrace/predictors.hpp"
#include "gradtrace/trace.hpp"

namespace gradtrace {

/* Prediction-based path length P_T(m) = sum_t ||g_t - m_t||^2. */
double path_length(const ResidualSeries& res);

/* Predictability index kappa = P_T(m) / G_T.  Defined only when the trace
   energy G_T is positive; throws UndefinedMetricError otherwise.  With the
   zero predictor the numerator and denominator are the same sum, so the
   result is exactly 1. */
double predictability_index(const ResidualSeries& res,
                            const TraceDiagnostics& diag);

/* alpha = sup over steps with g_t != 0 of ||m_t|| / ||g_t||, and the bound
   kappa <= (1 + alpha)^2 that comes with it.  alpha has no value when every
   gradient is zero.  Steps where g_t = 0 but m_t != 0 break the bound's
   hypothesis; they are listed and the bound is marked inapplicable. */
struct MagnitudeRatio {
  std::optional<double> alpha;
  std::optional<double> alpha_bound;
  std::vector<Eigen::Index> zero_gradient_conflicts;

  bool bound_applicable() const {
    return alpha.has_value() && zero_gradient_conflicts.empty();
  }
};

MagnitudeRatio magnitude_ratio_diagnostic(const GradientTrace& trace,
                                          const PredictionSeries& pred);

/* Per-window predictability.  Windows are [start, end] inclusive, exactly
   window_len steps each, placed at start = 0, stride, 2*stride, ...; a
   trailing partial window is dropped.  Predictor state crosses window
   boundaries: the recurrence runs once over the whole trace and windows
   only partition the sums.  kappa is empty for a window whose gradient
   energy is zero. */
struct WindowedKappa {
  Eigen::Index start = 0;
  Eigen::Index end = 0;
  std::optional<double> kappa;
};

struct WindowedKappaSeries {
  Eigen::Index window_len = 0;
  Eigen::Index stride = 0;
  std::vector<WindowedKappa> entries;
};

WindowedKappaSeries windowed_kappa(const GradientTrace& trace,
                                   const PredictorConfig& config,
                                   Eigen::Index window_len,
                                   Eigen::Index stride);

/* Everything the analyzer reports for one (trace, predictor) pair. */
struct PredictabilityReport {
  PredictorConfig config;
  double path_length = 0.0;
  double energy = 0.0;
  double kappa = 0.0;
  MagnitudeRatio ratio;
  WindowedKappaSeries windows;  // empty unless windowing was requested
};

PredictabilityReport make_report(const GradientTrace& trace,
                                 const PredictorConfig& config);

}  // namespace gradtrace

#endif
