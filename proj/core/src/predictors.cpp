#include "gradtrace/predictors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "gradtrace/errors.hpp"
#include "gradtrace/numeric.hpp"

namespace gradtrace {

namespace {

// Shortest decimal that round-trips, for display names like "ema-0.9".
std::string trim_number(double x) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

}  // namespace

PredictorConfig PredictorConfig::parse(const std::string& text) {
  PredictorConfig cfg;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg =
      colon == std::string::npos ? std::string() : text.substr(colon + 1);

  auto parse_arg = [&](const char* what) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(arg, &pos);
      if (pos != arg.size()) throw std::invalid_argument(arg);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("bad ") + what + " in predictor spec '" +
                        text + "'");
    }
  };

  if (name == "zero") {
    cfg.family = PredictorFamily::zero;
    if (!arg.empty()) throw ConfigError("zero predictor takes no parameter");
  } else if (name == "one-step") {
    cfg.family = PredictorFamily::one_step;
    if (!arg.empty()) throw ConfigError("one-step predictor takes no parameter");
  } else if (name == "ema") {
    cfg.family = PredictorFamily::ema;
    if (arg.empty()) throw ConfigError("ema predictor needs a beta, e.g. ema:0.9");
    cfg.beta = parse_arg("beta");
  } else if (name == "trend") {
    cfg.family = PredictorFamily::trend;
    if (!arg.empty()) cfg.gamma = parse_arg("gamma");
  } else {
    throw ConfigError("unknown predictor '" + text + "'");
  }
  cfg.validate();
  return cfg;
}

std::string PredictorConfig::display_name() const {
  switch (family) {
    case PredictorFamily::zero:
      return "zero";
    case PredictorFamily::one_step:
      return "one-step";
    case PredictorFamily::ema:
      return "ema-" + trim_number(beta);
    case PredictorFamily::trend:
      return gamma == 1.0 ? "trend" : "trend-" + trim_number(gamma);
  }
  return "?";
}

void PredictorConfig::validate() const {
  if (family == PredictorFamily::ema) {
    if (!(beta > 0.0 && beta < 1.0)) {
      throw ConfigError("ema beta must lie strictly inside (0, 1), got " +
                        trim_number(beta));
    }
  }
  if (family == PredictorFamily::trend && !std::isfinite(gamma)) {
    throw ConfigError("trend gamma must be finite");
  }
}

namespace detail {

OnlinePredictor::OnlinePredictor(const PredictorConfig& config,
                                 Eigen::Index dim)
    : config_(config),
      ema_state_(Eigen::VectorXd::Zero(dim)),
      last_(Eigen::VectorXd::Zero(dim)),
      second_last_(Eigen::VectorXd::Zero(dim)) {
  config_.validate();
}

Eigen::VectorXd OnlinePredictor::predict() const {
  switch (config_.family) {
    case PredictorFamily::zero:
      return Eigen::VectorXd::Zero(last_.size());
    case PredictorFamily::one_step:
      return seen_ == 0 ? Eigen::VectorXd::Zero(last_.size()) : last_;
    case PredictorFamily::ema:
      return ema_state_;
    case PredictorFamily::trend:
      if (seen_ == 0) return Eigen::VectorXd::Zero(last_.size());
      if (seen_ == 1) return last_;
      return last_ + config_.gamma * (last_ - second_last_);
  }
  return Eigen::VectorXd::Zero(last_.size());
}

void OnlinePredictor::observe(const Eigen::Ref<const Eigen::VectorXd>& g) {
  ema_state_ = config_.beta * ema_state_ + (1.0 - config_.beta) * g;
  second_last_ = last_;
  last_ = g;
  ++seen_;
}

}  // namespace detail

PredictionSeries run_predictor(const GradientTrace& trace,
                               const PredictorConfig& config) {
  config.validate();
  PredictionSeries out;
  out.config = config;
  out.values.resize(trace.dim(), trace.steps());

  // Feeding columns one at a time makes it structurally impossible for m_t
  // to read g_t or anything later.
  detail::OnlinePredictor state(config, trace.dim());
  for (Eigen::Index t = 0; t < trace.steps(); ++t) {
    out.values.col(t) = state.predict();
    state.observe(trace.values().col(t));
  }
  return out;
}

ResidualSeries residuals(const GradientTrace& trace,
                         const PredictionSeries& predictions) {
  if (predictions.values.rows() != trace.dim() ||
      predictions.values.cols() != trace.steps()) {
    throw DimensionError(
        "prediction series shape does not match the trace: trace is " +
        std::to_string(trace.dim()) + "x" + std::to_string(trace.steps()) +
        ", predictions are " + std::to_string(predictions.values.rows()) +
        "x" + std::to_string(predictions.values.cols()));
  }
  ResidualSeries res;
  res.values = trace.values() - predictions.values;
  res.per_step_sq_norms.reserve(static_cast<std::size_t>(trace.steps()));
  for (Eigen::Index t = 0; t < trace.steps(); ++t) {
    res.per_step_sq_norms.push_back(compensated_squared_norm(res.values.col(t)));
  }
  return res;
}

}  // namespace gradtrace
