#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <string>

#include "gradtrace/errors.hpp"
#include "gradtrace/harness.hpp"
#include "gradtrace/metrics.hpp"
#include "gradtrace/spectral.hpp"
#include "testutil.hpp"

using namespace gradtrace;
using namespace testutil;

namespace {

double predictor_path_on_losses(const OnlineLinearProblem& problem,
                                const char* spec) {
  const GradientTrace trace{Eigen::MatrixXd(problem.losses)};
  const auto pred = run_predictor(trace, PredictorConfig::parse(spec));
  return path_length(residuals(trace, pred));
}

double kappa_of(const GradientTrace& trace, const char* spec) {
  const auto pred = run_predictor(trace, PredictorConfig::parse(spec));
  return predictability_index(residuals(trace, pred), validate_trace(trace));
}

LogRegParams regularization_dominated_params() {
  LogRegParams p;
  p.n_samples = 200;
  p.dim = 20;
  p.steps = 40;
  p.l2_lambda = 50.0;
  p.label_flip_prob = 0.1;
  p.sgd_lr = 0.03;
  p.sgd_momentum = 0.0;
  return p;
}

}  // namespace

TEST_CASE("online problem construction validates its inputs") {
  CHECK_THROWS_AS(
      OnlineLinearProblem::make(LossGenerator::constant, 1, 10, 1, 1, 0, 0),
      ConfigError);
  CHECK_THROWS_AS(
      OnlineLinearProblem::make(LossGenerator::constant, 4, 0, 1, 1, 0, 0),
      ConfigError);
  CHECK_THROWS_AS(
      OnlineLinearProblem::make(LossGenerator::constant, 4, 10, 0, 1, 0, 0),
      ConfigError);
  CHECK_THROWS_AS(
      OnlineLinearProblem::make(LossGenerator::constant, 4, 10, 1, 0, 0, 0),
      ConfigError);
}

TEST_CASE("loss generators produce unit-speed rotations at the stated scale") {
  const double scale = 2.5;
  const auto constant = OnlineLinearProblem::make(LossGenerator::constant, 6,
                                                  20, 1.0, scale, 0.0, 11);
  for (Eigen::Index t = 0; t < 20; ++t) {
    CHECK(rel_close(constant.losses.col(t).norm(), scale, 1e-12));
    CHECK((constant.losses.col(t) - constant.losses.col(0))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  const double omega = 0.3;
  const auto drifting = OnlineLinearProblem::make(LossGenerator::drifting, 6,
                                                  20, 1.0, scale, omega, 11);
  for (Eigen::Index t = 0; t + 1 < 20; ++t) {
    CHECK(rel_close(drifting.losses.col(t).norm(), scale, 1e-12));
    const double dot = drifting.losses.col(t).dot(drifting.losses.col(t + 1));
    CHECK(std::abs(dot - scale * scale * std::cos(omega)) <= 1e-12);
  }

  const auto adversarial = OnlineLinearProblem::make(
      LossGenerator::adversarial_rotation, 6, 20, 1.0, scale, 0.0, 11);
  CHECK(adversarial.omega == doctest::Approx(std::acos(-1.0) / 2).epsilon(1e-15));
  for (Eigen::Index t = 0; t + 1 < 20; ++t) {
    CHECK(std::abs(adversarial.losses.col(t).dot(
              adversarial.losses.col(t + 1))) <= 1e-12);
  }
}

TEST_CASE("all-zero losses give zero regret and a nonnegative bound") {
  OnlineLinearProblem problem;
  problem.dim = 3;
  problem.horizon = 4;
  problem.radius = 1.0;
  problem.scale = 1.0;
  problem.losses = Eigen::MatrixXd::Zero(3, 4);
  const OmdRun run = run_omd(problem, PredictorConfig::parse("one-step"), 0.5,
                             OmdVariant::two_step);
  CHECK(run.measured_regret == 0.0);
  CHECK(run.bound_untuned >= 0.0);
  CHECK(run.residual_path == 0.0);
  CHECK(run.satisfied);
}

TEST_CASE("constant losses are learned after one round") {
  const auto problem = OnlineLinearProblem::make(LossGenerator::constant, 4,
                                                 50, 1.5, 2.0, 0.0, 3);
  const OmdRun run = run_omd(problem, PredictorConfig::parse("one-step"), 0.1,
                             OmdVariant::two_step);
  CHECK(rel_close(run.residual_path, 4.0, 1e-12));
  CHECK(run.predictions.col(0).norm() == 0.0);
  for (Eigen::Index t = 1; t < 50; ++t) {
    CHECK((run.predictions.col(t) - problem.losses.col(t - 1))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  CHECK(run.satisfied);
  CHECK(run.measured_regret <= run.bound_untuned + 1e-9);
  CHECK(rel_close(run.d_phi, std::sqrt(2.0) * 1.5, 1e-15));
  CHECK(rel_close(run.max_grad_norm, 2.0, 1e-12));
}

TEST_CASE("played points stay inside the feasible ball") {
  const auto problem = OnlineLinearProblem::make(LossGenerator::drifting, 5,
                                                 120, 0.8, 1.0, 0.2, 21);
  for (const auto variant : {OmdVariant::two_step, OmdVariant::as_written}) {
    const OmdRun run = run_omd(problem, PredictorConfig::parse("ema:0.9"), 1.0,
                               variant);
    for (Eigen::Index t = 0; t < run.iterates.cols(); ++t) {
      CHECK(run.iterates.col(t).norm() <= 0.8 * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("the two update variants genuinely differ") {
  const auto problem = OnlineLinearProblem::make(LossGenerator::drifting, 4,
                                                 60, 1.0, 1.0, 0.4, 9);
  const auto config = PredictorConfig::parse("one-step");
  const OmdRun two = run_omd(problem, config, 0.2, OmdVariant::two_step);
  const OmdRun one = run_omd(problem, config, 0.2, OmdVariant::as_written);
  CHECK((two.iterates - one.iterates).cwiseAbs().maxCoeff() > 1e-6);
  CHECK(two.residual_path == one.residual_path);
}

TEST_CASE("nonpositive step sizes are rejected") {
  const auto problem = OnlineLinearProblem::make(LossGenerator::constant, 3,
                                                 5, 1.0, 1.0, 0.0, 1);
  CHECK_THROWS_AS(run_omd(problem, PredictorConfig::parse("zero"), 0.0,
                          OmdVariant::two_step),
                  ConfigError);
  CHECK_THROWS_AS(run_omd(problem, PredictorConfig::parse("zero"), -0.2,
                          OmdVariant::two_step),
                  ConfigError);
}

TEST_CASE("online and batch predictors agree on the residual path") {
  const auto problem = OnlineLinearProblem::make(LossGenerator::drifting, 8,
                                                 150, 1.0, 1.0, 0.07, 33);
  for (const char* spec : {"one-step", "ema:0.9", "trend"}) {
    const OmdRun run = run_omd(problem, PredictorConfig::parse(spec), 0.3,
                               OmdVariant::two_step);
    CHECK(rel_close(run.residual_path, predictor_path_on_losses(problem, spec),
                    1e-12));
  }
}

TEST_CASE("tuned step sizes keep regret under the path-length bound") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto problem = OnlineLinearProblem::make(LossGenerator::drifting, 8,
                                                   200, 1.0, 1.0, 0.05, seed);
    const double path = predictor_path_on_losses(problem, "one-step");
    REQUIRE(path > 0.0);
    const double eta = tune_eta(path, std::sqrt(2.0) * problem.radius);
    const OmdRun run = run_omd(problem, PredictorConfig::parse("one-step"),
                               eta, OmdVariant::two_step);
    CHECK(run.satisfied);
    CHECK(run.measured_regret <= 2.0 * run.bound_tuned + 1e-9);
    CHECK(rel_close(run.bound_tuned,
                    std::sqrt(2.0) * run.d_phi * std::sqrt(path), 1e-12));
  }
}

TEST_CASE("tune_eta implements d_phi over root path") {
  CHECK(tune_eta(4.0, 1.0) == 0.5);
  CHECK(tune_eta(2.25, 3.0) == 2.0);
  std::mt19937_64 rng(269);
  std::uniform_real_distribution<double> uniform(0.1, 50.0);
  for (int rep = 0; rep < 20; ++rep) {
    const double path = uniform(rng);
    const double d_phi = uniform(rng);
    CHECK(rel_close(tune_eta(path, d_phi), d_phi / std::sqrt(path), 1e-15));
  }
  CHECK_THROWS_AS(tune_eta(0.0, 1.0), DegenerateTuningError);
  CHECK_THROWS_AS(tune_eta(-1.0, 1.0), DegenerateTuningError);
  CHECK_THROWS_AS(tune_eta(1.0, 0.0), ConfigError);
}

TEST_CASE("planted top eigenvalues survive the power iteration round trip") {
  for (std::uint64_t seed : {2ull, 7ull, 19ull}) {
    const auto obj = SmoothObjective::make(ObjectiveFamily::quadratic, 16, 0.0,
                                           seed);
    CHECK(obj.planted_top_eigenvalue > 0.0);
    CHECK(rel_close(power_iteration_top_eigenvalue(obj.a),
                    obj.planted_top_eigenvalue, 1e-8));
    CHECK(obj.smoothness >= obj.planted_top_eigenvalue);
    CHECK(rel_close(obj.smoothness, obj.planted_top_eigenvalue, 1e-6));
    CHECK(obj.lower_bound == 0.0);
  }
}

TEST_CASE("the cosine term shifts smoothness and the lower bound") {
  const auto obj =
      SmoothObjective::make(ObjectiveFamily::quad_plus_cos, 12, 0.5, 4);
  CHECK(rel_close(obj.smoothness, obj.planted_top_eigenvalue + 0.5, 1e-6));
  CHECK(obj.lower_bound == doctest::Approx(-6.0).epsilon(1e-12));
  CHECK_THROWS_AS(
      SmoothObjective::make(ObjectiveFamily::quad_plus_cos, 4, -0.1, 1),
      ConfigError);
  CHECK_THROWS_AS(SmoothObjective::make(ObjectiveFamily::quadratic, 0, 0.0, 1),
                  ConfigError);
}

TEST_CASE("objective gradients match central differences") {
  std::mt19937_64 rng(271);
  for (const auto family :
       {ObjectiveFamily::quadratic, ObjectiveFamily::quad_plus_cos}) {
    const double c = family == ObjectiveFamily::quadratic ? 0.0 : 0.4;
    const auto obj = SmoothObjective::make(family, 7, c, 13);
    const Eigen::VectorXd theta = random_matrix(rng, 7, 1);
    const Eigen::VectorXd g = obj.gradient(theta);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 7; ++i) {
      Eigen::VectorXd lo = theta, hi = theta;
      lo[i] -= h;
      hi[i] += h;
      const double fd = (obj.value(hi) - obj.value(lo)) / (2.0 * h);
      CHECK(std::abs(g[i] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("power iteration needs a square matrix and enough iterations") {
  CHECK_THROWS_AS(power_iteration_top_eigenvalue(Eigen::MatrixXd::Zero(2, 3)),
                  PreconditionError);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 0) = 2.0;
  a(1, 1) = 1.0;
  CHECK_THROWS_AS(power_iteration_top_eigenvalue(a, 1e-14, 1), NumericalError);
  CHECK(rel_close(power_iteration_top_eigenvalue(a), 2.0, 1e-9));
  CHECK(rel_close(power_iteration_top_eigenvalue(Eigen::MatrixXd::Identity(5, 5)),
                  1.0, 1e-9));
}

TEST_CASE("the zero predictor freezes the proxy descent") {
  const auto obj = SmoothObjective::make(ObjectiveFamily::quadratic, 6, 0.0, 5);
  const Eigen::VectorXd theta0 = Eigen::VectorXd::Ones(6);
  const ProxyGdRun run = run_proxy_gd(obj, PredictorConfig::parse("zero"),
                                      1.0 / obj.smoothness, 25, theta0);
  for (Eigen::Index t = 0; t <= 25; ++t) {
    CHECK((run.iterates.col(t) - theta0).cwiseAbs().maxCoeff() == 0.0);
  }
  const double g0_sq = obj.gradient(theta0).squaredNorm();
  CHECK(rel_close(run.avg_sq_grad, g0_sq, 1e-12));
  CHECK(rel_close(run.min_sq_grad, g0_sq, 1e-12));
  CHECK(run.satisfied);
}

TEST_CASE("proxy descent certificates hold on the quadratic family") {
  for (std::uint64_t seed = 11; seed <= 16; ++seed) {
    const auto obj =
        SmoothObjective::make(ObjectiveFamily::quadratic, 10, 0.0, seed);
    std::mt19937_64 rng(277 + seed);
    const Eigen::VectorXd theta0 = random_matrix(rng, 10, 1);
    for (const char* spec : {"one-step", "ema:0.9"}) {
      const ProxyGdRun run =
          run_proxy_gd(obj, PredictorConfig::parse(spec),
                       1.0 / obj.smoothness, 300, theta0);
      CHECK(run.satisfied);
      CHECK(run.min_sq_grad <= run.avg_sq_grad);
      const LemmaC1Report lemma = lemma_c1_check(run);
      CHECK(lemma.violations == 0);
    }
  }
}

TEST_CASE("proxy descent certificates hold on the cosine family") {
  for (std::uint64_t seed = 21; seed <= 24; ++seed) {
    const auto obj =
        SmoothObjective::make(ObjectiveFamily::quad_plus_cos, 10, 0.3, seed);
    std::mt19937_64 rng(281 + seed);
    const Eigen::VectorXd theta0 = random_matrix(rng, 10, 1);
    for (const char* spec : {"one-step", "ema:0.99"}) {
      const ProxyGdRun run =
          run_proxy_gd(obj, PredictorConfig::parse(spec),
                       1.0 / obj.smoothness, 300, theta0);
      CHECK(run.satisfied);
      const LemmaC1Report lemma = lemma_c1_check(run);
      CHECK(lemma.violations == 0);
    }
  }
}

TEST_CASE("step sizes above 1/L are refused") {
  const auto obj = SmoothObjective::make(ObjectiveFamily::quadratic, 5, 0.0, 8);
  CHECK_THROWS_AS(run_proxy_gd(obj, PredictorConfig::parse("one-step"),
                               1.01 / obj.smoothness, 10,
                               Eigen::VectorXd::Ones(5)),
                  PreconditionError);
  CHECK_THROWS_AS(run_proxy_gd(obj, PredictorConfig::parse("one-step"),
                               1.0 / obj.smoothness, 10,
                               Eigen::VectorXd::Ones(4)),
                  DimensionError);
  CHECK_THROWS_AS(run_proxy_gd(obj, PredictorConfig::parse("one-step"), 0.0,
                               10, Eigen::VectorXd::Ones(5)),
                  ConfigError);
}

TEST_CASE("the trend predictor destabilizes proxy descent at eta = 1/L") {
  const auto obj = SmoothObjective::make(ObjectiveFamily::quadratic, 4, 0.0, 6);
  std::mt19937_64 rng(283);
  const Eigen::VectorXd theta0 = random_matrix(rng, 4, 1);
  CHECK_THROWS_AS(run_proxy_gd(obj, PredictorConfig::parse("trend"),
                               1.0 / obj.smoothness, 8000, theta0),
                  NumericalError);
}

TEST_CASE("planted traces validate their parameters") {
  CHECK_THROWS_AS(generate_planted_trace(0, 10, 1, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_planted_trace(10, 0, 1, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_planted_trace(10, 10, 0, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_planted_trace(10, 20, 11, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_planted_trace(10, 20, 1, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(generate_planted_trace(10, 20, 1, -0.1, 1), ConfigError);
}

TEST_CASE("planted traces have the promised shape and lineage") {
  const GradientTrace trace = generate_planted_trace(10, 30, 3, 0.0, 1);
  CHECK(trace.dim() == 10);
  CHECK(trace.steps() == 31);
  CHECK(trace.meta().at("generator") == "planted");
  CHECK(trace.meta().at("params").find("rank=3") != std::string::npos);

  const GradientTrace again = generate_planted_trace(10, 30, 3, 0.0, 1);
  CHECK(std::memcmp(trace.values().data(), again.values().data(),
                    sizeof(double) * 10 * 31) == 0);
  const GradientTrace other = generate_planted_trace(10, 30, 3, 0.0, 2);
  CHECK(std::memcmp(trace.values().data(), other.values().data(),
                    sizeof(double) * 10 * 31) != 0);
}

TEST_CASE("a noiseless rank-1 plant is spectrally rank 1") {
  const GradientTrace trace = generate_planted_trace(16, 40, 1, 0.0, 12);
  const Spectrum spec = singular_spectrum(increment_matrix(trace));
  CHECK(rel_close(spec.singular_values[0], 1.0, 1e-8));
  CHECK(spec.singular_values[1] <= 1e-10 * spec.singular_values[0]);
  for (double eps : {0.5, 0.1, 0.01}) {
    CHECK(predictable_rank(spec, eps) == 1);
  }
}

TEST_CASE("a noiseless rank-5 plant spreads energy evenly") {
  const GradientTrace trace = generate_planted_trace(32, 120, 5, 0.0, 14);
  const Spectrum spec = singular_spectrum(increment_matrix(trace));
  for (int i = 0; i < 5; ++i) {
    CHECK(rel_close(spec.singular_values[static_cast<std::size_t>(i)], 1.0,
                    1e-8));
  }
  for (double eps : {0.01, 0.05, 0.1, 0.15}) {
    CHECK(predictable_rank(spec, eps) == 5);
  }
  CHECK(predictable_rank(spec, 0.21) == 4);
  CHECK(predictable_rank(spec, 0.5) == 3);
}

TEST_CASE("light noise does not move the recovered rank") {
  const GradientTrace trace = generate_planted_trace(64, 300, 5, 0.005, 31);
  const Spectrum spec = singular_spectrum(increment_matrix(trace));
  CHECK(predictable_rank(spec, 0.01) == 5);
  CHECK(tail_energy(spec, 5) / spec.total_energy <= 0.005 + 1e-9);
}

TEST_CASE("logistic-regression generation validates its parameters") {
  LogRegParams p;
  p.steps = 0;
  CHECK_THROWS_AS(generate_logreg_trace(p, LogRegOptimizer::sgd_momentum, 0),
                  ConfigError);
  p = LogRegParams{};
  p.n_samples = 0;
  CHECK_THROWS_AS(generate_logreg_trace(p, LogRegOptimizer::sgd_momentum, 0),
                  ConfigError);
  p = LogRegParams{};
  p.l2_lambda = -0.5;
  CHECK_THROWS_AS(generate_logreg_trace(p, LogRegOptimizer::sgd_momentum, 0),
                  ConfigError);
}

TEST_CASE("logistic-regression traces are a pure function of their inputs") {
  LogRegParams p;
  p.steps = 60;
  for (const auto optimizer :
       {LogRegOptimizer::sgd_momentum, LogRegOptimizer::adamw_like}) {
    const GradientTrace a = generate_logreg_trace(p, optimizer, 7);
    const GradientTrace b = generate_logreg_trace(p, optimizer, 7);
    REQUIRE(a.dim() == p.dim);
    REQUIRE(a.steps() == 60);
    CHECK(std::memcmp(a.values().data(), b.values().data(),
                      sizeof(double) * static_cast<std::size_t>(
                          a.values().size())) == 0);
    const GradientTrace c = generate_logreg_trace(p, optimizer, 8);
    CHECK(std::memcmp(a.values().data(), c.values().data(),
                      sizeof(double) * static_cast<std::size_t>(
                          a.values().size())) != 0);
  }
  const GradientTrace sgd =
      generate_logreg_trace(p, LogRegOptimizer::sgd_momentum, 7);
  const GradientTrace adam =
      generate_logreg_trace(p, LogRegOptimizer::adamw_like, 7);
  CHECK(sgd.meta().at("optimizer") == "sgd-momentum");
  CHECK(adam.meta().at("optimizer") == "adamw-like");
  CHECK((sgd.values() - adam.values()).cwiseAbs().maxCoeff() > 1e-12);
}

TEST_CASE("a regularization-dominated run orders the predictor families") {
  const GradientTrace trace = generate_logreg_trace(
      regularization_dominated_params(), LogRegOptimizer::sgd_momentum, 0);
  REQUIRE(trace.steps() == 40);
  for (Eigen::Index t = 1; t < trace.steps(); ++t) {
    CHECK(trace.values().col(t).norm() < trace.values().col(t - 1).norm());
  }
  const double smooth = kappa_of(trace, "ema:0.99");
  const double reactive = kappa_of(trace, "one-step");
  const double extrapolating = kappa_of(trace, "trend");
  CHECK(smooth < reactive);
  CHECK(reactive < extrapolating);
}

TEST_CASE("the shipped config files mirror the built-in defaults") {
  const LogRegParams defaults;
  const LogRegParams sgd = LogRegParams::from_json_file(
      std::string(GRADTRACE_CONFIG_DIR) + "/logreg_sgd_momentum.json",
      LogRegOptimizer::sgd_momentum);
  CHECK(sgd.n_samples == defaults.n_samples);
  CHECK(sgd.dim == defaults.dim);
  CHECK(sgd.steps == defaults.steps);
  CHECK(sgd.l2_lambda == defaults.l2_lambda);
  CHECK(sgd.label_flip_prob == defaults.label_flip_prob);
  CHECK(sgd.sgd_lr == defaults.sgd_lr);
  CHECK(sgd.sgd_momentum == defaults.sgd_momentum);

  const LogRegParams adam = LogRegParams::from_json_file(
      std::string(GRADTRACE_CONFIG_DIR) + "/logreg_adamw.json",
      LogRegOptimizer::adamw_like);
  CHECK(adam.n_samples == defaults.n_samples);
  CHECK(adam.dim == defaults.dim);
  CHECK(adam.steps == defaults.steps);
  CHECK(adam.l2_lambda == defaults.l2_lambda);
  CHECK(adam.label_flip_prob == defaults.label_flip_prob);
  CHECK(adam.adam_lr == defaults.adam_lr);
  CHECK(adam.adam_beta1 == defaults.adam_beta1);
  CHECK(adam.adam_beta2 == defaults.adam_beta2);
  CHECK(adam.adam_eps == defaults.adam_eps);
  CHECK(adam.adam_weight_decay == defaults.adam_weight_decay);

  CHECK_THROWS_AS(LogRegParams::from_json_file(
                      std::string(GRADTRACE_CONFIG_DIR) + "/absent.json",
                      LogRegOptimizer::sgd_momentum),
                  IoError);
}
