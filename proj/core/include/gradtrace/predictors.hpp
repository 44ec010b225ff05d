#ifndef GRADTRACE_PREDICTORS_HPP
#define GRADTRACE_PREDICTORS_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "gradtrace/trace.hpp"

namespace gradtrace {

enum class PredictorFamily { zero, one_step, ema, trend };

/* Which predictor to run and with what parameters.  beta is read only for
   the ema family and must lie strictly inside (0, 1); gamma is read only for
   the trend family and defaults to 1. */
struct PredictorConfig {
  PredictorFamily family = PredictorFamily::zero;
  double beta = 0.9;
  double gamma = 1.0;

  // Accepts "zero", "one-step", "ema:<beta>", "trend", "trend:<gamma>".
  static PredictorConfig parse(const std::string& text);

  // Table-style label: "zero", "one-step", "ema-0.9", "trend", "trend-0.5".
  std::string display_name() const;

  void validate() const;
};

/* Predictions m_0 .. m_T for a trace, one column per step, produced by the
   recurrences below.  Every m_t is a function of g_0 .. g_{t-1} only:

     zero      m_t = 0
     one-step  m_0 = 0,  m_t = g_{t-1}
     ema       m_0 = 0,  m_t = beta * m_{t-1} + (1 - beta) * g_{t-1}
     trend     m_0 = 0,  m_1 = g_0,
               m_t = g_{t-1} + gamma * (g_{t-1} - g_{t-2})   for t >= 2

   The ema form carries no bias correction. */
struct PredictionSeries {
  Eigen::MatrixXd values;
  PredictorConfig config;
};

/* Residuals delta_t = g_t - m_t together with their squared norms. */
struct ResidualSeries {
  Eigen::MatrixXd values;
  std::vector<double> per_step_sq_norms;
};

PredictionSeries run_predictor(const GradientTrace& trace,
                               const PredictorConfig& config);

ResidualSeries residuals(const GradientTrace& trace,
                         const PredictionSeries& predictions);

namespace detail {

/* Streaming form of the recurrences, used internally by run_predictor and by
   the simulation harness, where gradients arrive one at a time.  predict()
   returns m_t given the gradients observed so far; observe() appends g_t.
   Keeping the state machine here makes the no-peek property structural. */
class OnlinePredictor {
 public:
  OnlinePredictor(const PredictorConfig& config, Eigen::Index dim);

  Eigen::VectorXd predict() const;
  void observe(const Eigen::Ref<const Eigen::VectorXd>& g);

 private:
  PredictorConfig config_;
  Eigen::VectorXd ema_state_;
  Eigen::VectorXd last_;
  Eigen::VectorXd second_last_;
  long seen_ = 0;
};

}  // namespace detail

}  // namespace gradtrace

#endif
