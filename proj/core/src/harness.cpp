#include "gradtrace/harness.hpp"

#include <Eigen/QR>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "gradtrace/errors.hpp"
#include "gradtrace/numeric.hpp"
#include "gradtrace/rng.hpp"

namespace gradtrace {

namespace {

const double kPi = 3.14159265358979323846;

Eigen::VectorXd seeded_normal_vector(Philox& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.next_normal();
  return v;
}

Eigen::MatrixXd seeded_normal_matrix(Philox& rng, Eigen::Index rows,
                                     Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
  }
  return m;
}

Eigen::VectorXd project_to_ball(const Eigen::VectorXd& x, double radius) {
  const double norm = x.norm();
  if (norm <= radius) return x;
  return x * (radius / norm);
}

void check_finite_column(const Eigen::VectorXd& v, const char* what,
                         Eigen::Index step) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NumericalError(std::string(what) + " left the finite range at step " +
                           std::to_string(step));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Online linear losses
// ---------------------------------------------------------------------------

OnlineLinearProblem OnlineLinearProblem::make(LossGenerator generator,
                                              Eigen::Index dim,
                                              Eigen::Index horizon,
                                              double radius, double scale,
                                              double omega,
                                              std::uint64_t seed) {
  if (dim < 2) throw ConfigError("online problems need dimension >= 2");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (!(radius > 0.0)) throw ConfigError("the feasible ball needs a positive radius");
  if (!(scale > 0.0)) throw ConfigError("loss scale must be positive");

  OnlineLinearProblem p;
  p.dim = dim;
  p.horizon = horizon;
  p.radius = radius;
  p.scale = scale;
  p.generator = generator;
  p.seed = seed;

  // A seeded orthonormal 2-plane; rotations happen inside it.
  Philox rng(seed);
  Eigen::VectorXd e1 = seeded_normal_vector(rng, dim);
  e1.normalize();
  Eigen::VectorXd e2 = seeded_normal_vector(rng, dim);
  e2 -= e1.dot(e2) * e1;
  e2.normalize();

  switch (generator) {
    case LossGenerator::constant:
      p.omega = 0.0;
      break;
    case LossGenerator::drifting:
      p.omega = omega;
      break;
    case LossGenerator::adversarial_rotation:
      p.omega = kPi / 2.0;
      break;
  }

  p.losses.resize(dim, horizon);
  for (Eigen::Index t = 0; t < horizon; ++t) {
    const double angle = p.omega * static_cast<double>(t);
    p.losses.col(t) =
        scale * (std::cos(angle) * e1 + std::sin(angle) * e2);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Optimistic mirror descent
// ---------------------------------------------------------------------------

OmdRun run_omd(const OnlineLinearProblem& problem,
               const PredictorConfig& predictor, double eta,
               OmdVariant variant) {
  if (!(eta > 0.0)) throw ConfigError("step size must be positive");
  predictor.validate();

  const Eigen::Index d = problem.dim;
  const Eigen::Index horizon = problem.horizon;
  const double radius = problem.radius;

  OmdRun run;
  run.variant = variant;
  run.eta = eta;
  run.d_phi = std::sqrt(2.0) * radius;
  run.iterates.resize(d, horizon);
  run.predictions.resize(d, horizon);
  run.residual_sq_norms.reserve(static_cast<std::size_t>(horizon));

  detail::OnlinePredictor pred(predictor, d);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d);      // two_step half state
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);  // as_written iterate

  CompensatedSum played_loss;
  CompensatedSum residual_path;
  Eigen::VectorXd loss_sum = Eigen::VectorXd::Zero(d);

  for (Eigen::Index t = 0; t < horizon; ++t) {
    const Eigen::VectorXd g = problem.losses.col(t);
    const Eigen::VectorXd m = pred.predict();  // prediction of g, history only

    Eigen::VectorXd played;
    if (variant == OmdVariant::two_step) {
      played = project_to_ball(z - eta * m, radius);
      z = project_to_ball(z - eta * g, radius);
    } else {
      played = theta;
      theta = project_to_ball(theta - eta * m, radius);
    }
    check_finite_column(played, "omd iterate", t);
    if (played.norm() > radius * (1.0 + 1e-9)) {
      throw NumericalError("omd iterate escaped the feasible ball at step " +
                           std::to_string(t));
    }

    run.iterates.col(t) = played;
    run.predictions.col(t) = m;
    const double res_sq = compensated_squared_norm(g - m);
    run.residual_sq_norms.push_back(res_sq);
    residual_path.add(res_sq);
    played_loss.add(g.dot(played));
    loss_sum += g;
    const double gnorm = g.norm();
    if (gnorm > run.max_grad_norm) run.max_grad_norm = gnorm;

    pred.observe(g);
  }

  run.residual_path = residual_path.value();

  // Exact offline comparator for linear losses over the ball: the best fixed
  // point is -radius * s / ||s|| for s the summed loss vector.
  const double best = -radius * loss_sum.norm();
  run.measured_regret = played_loss.value() - best;

  run.bound_untuned =
      run.d_phi * run.d_phi / eta + 0.5 * eta * run.residual_path;
  run.bound_tuned = std::sqrt(2.0) * run.d_phi * std::sqrt(run.residual_path);
  run.satisfied = run.measured_regret <=
                  run.bound_untuned +
                      1e-6 * std::max(1.0, std::abs(run.bound_untuned));
  return run;
}

double tune_eta(double proxy_path, double d_phi) {
  if (!(d_phi > 0.0)) throw ConfigError("d_phi must be positive");
  if (!(proxy_path > 0.0)) {
    throw DegenerateTuningError(
        "tuning radicand is not positive (perfect prediction); fall back to "
        "a configured step size");
  }
  return d_phi / std::sqrt(proxy_path);
}

// ---------------------------------------------------------------------------
// Smooth objectives
// ---------------------------------------------------------------------------

double power_iteration_top_eigenvalue(const Eigen::MatrixXd& a, double tol,
                                      long max_iters) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw PreconditionError("power iteration needs a nonempty square matrix");
  }
  // Deterministic, mildly uneven start so it is not orthogonal to the top
  // eigenvector by accident of symmetry.
  Eigen::VectorXd v(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    v[i] = 1.0 + 1e-3 * static_cast<double>(i);
  }
  v.normalize();

  double lambda = 0.0;
  for (long it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd w = a * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;  // the zero matrix
    const double next = v.dot(w);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= tol * std::max(std::abs(next), 1e-300)) {
      return next;
    }
    lambda = next;
  }
  throw NumericalError("power iteration did not settle within " +
                       std::to_string(max_iters) + " iterations");
}

double SmoothObjective::value(
    const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  double v = 0.5 * theta.dot(a * theta);
  if (family == ObjectiveFamily::quad_plus_cos) {
    CompensatedSum acc;
    for (Eigen::Index i = 0; i < theta.size(); ++i) acc.add(std::cos(theta[i]));
    v += c * acc.value();
  }
  return v;
}

Eigen::VectorXd SmoothObjective::gradient(
    const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  Eigen::VectorXd g = a * theta;
  if (family == ObjectiveFamily::quad_plus_cos) {
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      g[i] -= c * std::sin(theta[i]);
    }
  }
  return g;
}

SmoothObjective SmoothObjective::make(ObjectiveFamily family,
                                      Eigen::Index dim, double c,
                                      std::uint64_t seed) {
  if (dim < 1) throw ConfigError("objective dimension must be >= 1");
  if (family == ObjectiveFamily::quad_plus_cos && !(c >= 0.0)) {
    throw ConfigError("the cosine weight must be nonnegative");
  }

  SmoothObjective obj;
  obj.family = family;
  obj.c = family == ObjectiveFamily::quad_plus_cos ? c : 0.0;

  // Spectrum with a planted, well separated top eigenvalue so the power
  // iteration estimate has an oracle to answer to.
  Philox rng(seed);
  const double top = 1.0 + rng.next_uniform();  // in [1, 2)
  Eigen::VectorXd lambda(dim);
  lambda[0] = top;
  for (Eigen::Index i = 1; i < dim; ++i) {
    lambda[i] = top * (0.05 + 0.85 * rng.next_uniform());
  }

  const Eigen::MatrixXd gauss = seeded_normal_matrix(rng, dim, dim);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
  Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
  obj.a = 0.5 * (a + a.transpose());  // kill rounding asymmetry
  obj.planted_top_eigenvalue = top;

  // Inflating the estimate keeps eta = 1/L on the safe side of the true
  // smoothness constant (the Rayleigh quotient approaches from below).
  const double est = power_iteration_top_eigenvalue(obj.a);
  obj.smoothness = est * (1.0 + 1e-8) + obj.c;
  obj.lower_bound = family == ObjectiveFamily::quad_plus_cos
                        ? -obj.c * static_cast<double>(dim)
                        : 0.0;
  return obj;
}

// ---------------------------------------------------------------------------
// Proxy gradient descent
// ---------------------------------------------------------------------------

ProxyGdRun run_proxy_gd(const SmoothObjective& objective,
                        const PredictorConfig& predictor, double eta,
                        Eigen::Index horizon, const Eigen::VectorXd& theta0) {
  if (!(eta > 0.0)) throw ConfigError("step size must be positive");
  if (eta > 1.0 / objective.smoothness) {
    throw PreconditionError("step size " + std::to_string(eta) +
                            " exceeds 1/L = " +
                            std::to_string(1.0 / objective.smoothness));
  }
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (theta0.size() != objective.a.rows()) {
    throw DimensionError("theta0 has dimension " +
                         std::to_string(theta0.size()) +
                         ", objective expects " +
                         std::to_string(objective.a.rows()));
  }
  predictor.validate();

  const Eigen::Index d = theta0.size();
  ProxyGdRun run;
  run.objective = objective;
  run.predictor = predictor;
  run.eta = eta;
  run.iterates.resize(d, horizon + 1);
  run.gradients.resize(d, horizon);
  run.predictions.resize(d, horizon);
  run.residual_sq_norms.reserve(static_cast<std::size_t>(horizon));

  detail::OnlinePredictor pred(predictor, d);
  Eigen::VectorXd theta = theta0;
  run.iterates.col(0) = theta;

  CompensatedSum grad_energy;
  CompensatedSum path;
  run.min_sq_grad = std::numeric_limits<double>::infinity();

  for (Eigen::Index t = 0; t < horizon; ++t) {
    const Eigen::VectorXd g = objective.gradient(theta);
    check_finite_column(g, "gradient", t);
    const Eigen::VectorXd m = pred.predict();

    run.gradients.col(t) = g;
    run.predictions.col(t) = m;
    const double g_sq = compensated_squared_norm(g);
    const double res_sq = compensated_squared_norm(g - m);
    grad_energy.add(g_sq);
    path.add(res_sq);
    run.residual_sq_norms.push_back(res_sq);
    if (g_sq < run.min_sq_grad) run.min_sq_grad = g_sq;

    theta -= eta * m;  // the update consumes the prediction, not g
    check_finite_column(theta, "iterate", t + 1);
    run.iterates.col(t + 1) = theta;
    pred.observe(g);
  }

  run.proxy_path = path.value();
  run.avg_sq_grad = grad_energy.value() / static_cast<double>(horizon);
  const double gap = objective.value(theta0) - objective.lower_bound;
  run.bound = 2.0 * gap / (eta * static_cast<double>(horizon)) +
              run.proxy_path / static_cast<double>(horizon);
  run.satisfied =
      run.avg_sq_grad <= run.bound + 1e-9 * std::max(1.0, std::abs(run.bound));
  return run;
}

LemmaC1Report lemma_c1_check(const ProxyGdRun& run) {
  LemmaC1Report report;
  report.worst_gap = -std::numeric_limits<double>::infinity();
  const Eigen::Index horizon = run.gradients.cols();
  double f_cur = run.objective.value(run.iterates.col(0));
  for (Eigen::Index t = 0; t < horizon; ++t) {
    const double f_next = run.objective.value(run.iterates.col(t + 1));
    const double g_sq = compensated_squared_norm(run.gradients.col(t));
    const double res_sq = run.residual_sq_norms[static_cast<std::size_t>(t)];
    const double rhs = f_cur - 0.5 * run.eta * g_sq + 0.5 * run.eta * res_sq;
    const double gap = f_next - rhs;
    if (gap > report.worst_gap) report.worst_gap = gap;
    if (gap > 1e-9 * std::max(1.0, std::abs(f_cur))) ++report.violations;
    f_cur = f_next;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Trace generators
// ---------------------------------------------------------------------------

GradientTrace generate_planted_trace(Eigen::Index dim, Eigen::Index count,
                                     Eigen::Index rank, double rho,
                                     std::uint64_t seed) {
  if (dim < 1 || count < 1) throw ConfigError("need positive dim and count");
  if (rank < 1 || rank > std::min(dim, count)) {
    throw ConfigError("planted rank must lie in [1, min(dim, count)]");
  }
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw ConfigError("noise fraction must lie in [0, 1)");
  }

  Philox rng(seed);

  // Orthonormal factors with equal per-direction energy; the signal is
  // S = U V^T, so ||S||_F^2 = rank exactly.
  const Eigen::MatrixXd gu = seeded_normal_matrix(rng, dim, rank);
  Eigen::HouseholderQR<Eigen::MatrixXd> qru(gu);
  const Eigen::MatrixXd u =
      qru.householderQ() * Eigen::MatrixXd::Identity(dim, rank);
  const Eigen::MatrixXd gv = seeded_normal_matrix(rng, count, rank);
  Eigen::HouseholderQR<Eigen::MatrixXd> qrv(gv);
  const Eigen::MatrixXd v =
      qrv.householderQ() * Eigen::MatrixXd::Identity(count, rank);
  const Eigen::MatrixXd s = u * v.transpose();

  Eigen::MatrixXd h = s;
  if (rho > 0.0) {
    Eigen::MatrixXd n = seeded_normal_matrix(rng, dim, count);
    // Remove the component along S so signal and noise energies add
    // exactly; then a single scale factor realizes the requested fraction.
    const double s_sq = s.squaredNorm();
    n -= (n.cwiseProduct(s).sum() / s_sq) * s;
    const double n_sq = n.squaredNorm();
    if (n_sq == 0.0) throw NumericalError("degenerate noise draw");
    const double alpha = std::sqrt(rho / (1.0 - rho) * s_sq / n_sq);
    h = s + alpha * n;

    const double realized = (alpha * alpha * n_sq) / h.squaredNorm();
    if (std::abs(realized - rho) > 1e-6) {
      throw NumericalError("noise fraction missed its target: requested " +
                           std::to_string(rho) + ", realized " +
                           std::to_string(realized));
    }
  }

  Eigen::MatrixXd values(dim, count + 1);
  values.col(0) = seeded_normal_vector(rng, dim);
  for (Eigen::Index t = 0; t < count; ++t) {
    values.col(t + 1) = values.col(t) + h.col(t);
  }

  std::map<std::string, std::string> meta;
  meta["generator"] = "planted";
  meta["params"] = "rank=" + std::to_string(rank) +
                   ",rho=" + std::to_string(rho) +
                   ",seed=" + std::to_string(seed);
  return GradientTrace(std::move(values), std::move(meta));
}

LogRegParams LogRegParams::from_json_file(const std::string& path,
                                          LogRegOptimizer optimizer) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw FormatError("config file is not a JSON object: " + path);
  }

  LogRegParams p;
  try {
    p.n_samples = j.at("n_samples").get<Eigen::Index>();
    p.dim = j.at("dim").get<Eigen::Index>();
    p.steps = j.at("steps").get<Eigen::Index>();
    p.l2_lambda = j.at("l2_lambda").get<double>();
    p.label_flip_prob = j.at("label_flip_prob").get<double>();
    if (optimizer == LogRegOptimizer::sgd_momentum) {
      p.sgd_lr = j.at("lr").get<double>();
      p.sgd_momentum = j.at("momentum").get<double>();
    } else {
      p.adam_lr = j.at("lr").get<double>();
      p.adam_beta1 = j.at("beta1").get<double>();
      p.adam_beta2 = j.at("beta2").get<double>();
      p.adam_eps = j.at("eps").get<double>();
      p.adam_weight_decay = j.at("weight_decay").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is missing fields: " + e.what());
  }
  return p;
}

GradientTrace generate_logreg_trace(const LogRegParams& params,
                                    LogRegOptimizer optimizer,
                                    std::uint64_t seed) {
  if (params.n_samples < 1 || params.dim < 1) {
    throw ConfigError("need positive sample count and dimension");
  }
  if (params.steps < 1) throw ConfigError("need at least one step");
  if (!(params.l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be >= 0");

  const Eigen::Index n = params.n_samples;
  const Eigen::Index d = params.dim;

  Philox rng(seed);
  Eigen::VectorXd w_true = seeded_normal_vector(rng, d);
  w_true.normalize();
  const Eigen::MatrixXd x = seeded_normal_matrix(rng, n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double label = x.row(i).dot(w_true) >= 0.0 ? 1.0 : -1.0;
    if (rng.next_uniform() < params.label_flip_prob) label = -label;
    y[i] = label;
  }

  // Exact full-batch gradient of the l2-regularized logistic loss.
  auto full_gradient = [&](const Eigen::VectorXd& w) {
    const Eigen::VectorXd z = (x * w).cwiseProduct(y);
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s[i] = 1.0 / (1.0 + std::exp(z[i]));  // sigmoid(-z), saturates cleanly
    }
    Eigen::VectorXd g = -(x.transpose() * s.cwiseProduct(y)) /
                            static_cast<double>(n) +
                        params.l2_lambda * w;
    return g;
  };

  Eigen::MatrixXd values(d, params.steps);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(d);

  for (Eigen::Index t = 0; t < params.steps; ++t) {
    const Eigen::VectorXd g = full_gradient(w);
    check_finite_column(g, "logistic gradient", t);
    values.col(t) = g;

    if (optimizer == LogRegOptimizer::sgd_momentum) {
      velocity = params.sgd_momentum * velocity + g;
      w -= params.sgd_lr * velocity;
    } else {
      const double step = static_cast<double>(t + 1);
      m1 = params.adam_beta1 * m1 + (1.0 - params.adam_beta1) * g;
      m2 = params.adam_beta2 * m2 +
           (1.0 - params.adam_beta2) * g.cwiseProduct(g);
      const Eigen::VectorXd m1_hat =
          m1 / (1.0 - std::pow(params.adam_beta1, step));
      const Eigen::VectorXd m2_hat =
          m2 / (1.0 - std::pow(params.adam_beta2, step));
      const Eigen::VectorXd denom =
          (m2_hat.cwiseSqrt().array() + params.adam_eps).matrix();
      const Eigen::VectorXd update = m1_hat.cwiseQuotient(denom);
      w -= params.adam_lr * (update + params.adam_weight_decay * w);
    }
    check_finite_column(w, "logistic iterate", t);
  }

  std::map<std::string, std::string> meta;
  const bool sgd = optimizer == LogRegOptimizer::sgd_momentum;
  meta["generator"] = "logreg";
  meta["optimizer"] = sgd ? "sgd-momentum" : "adamw-like";
  meta["params"] = "n=" + std::to_string(params.n_samples) +
                   ",d=" + std::to_string(params.dim) +
                   ",steps=" + std::to_string(params.steps) +
                   ",lambda=" + std::to_string(params.l2_lambda) +
                   ",opt=" + (sgd ? "sgd-momentum" : "adamw-like") +
                   ",seed=" + std::to_string(seed);
  return GradientTrace(std::move(values), std::move(meta));
}

}  // namespace gradtrace
