#ifndef GRADTRACE_HARNESS_HPP
#define GRADTRACE_HARNESS_HPP

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "gradtrace/predictors.hpp"
#include "gradtrace/trace.hpp"

namespace gradtrace {

// ---------------------------------------------------------------------------
// Online linear losses and optimistic mirror descent
// ---------------------------------------------------------------------------

enum class LossGenerator { constant, drifting, adversarial_rotation };

/* Online sequence f_t(theta) = <u_t, theta> over the Euclidean ball of the
   given radius.  losses stores u_1 .. u_T one per column.  Generators:
   constant holds a fixed vector, drifting rotates it by omega radians per
   round inside a seeded 2-plane, adversarial_rotation rotates by pi/2 per
   round.  All vectors have norm `scale`. */
struct OnlineLinearProblem {
  Eigen::Index dim = 0;
  Eigen::Index horizon = 0;
  double radius = 1.0;
  double scale = 1.0;
  double omega = 0.0;
  LossGenerator generator = LossGenerator::constant;
  std::uint64_t seed = 0;
  Eigen::MatrixXd losses;  // d x T

  static OnlineLinearProblem make(LossGenerator generator, Eigen::Index dim,
                                  Eigen::Index horizon, double radius,
                                  double scale, double omega,
                                  std::uint64_t seed);
};

/* Two implementations of the optimistic update, kept side by side because
   they genuinely differ:

   as_written   one sequence, theta_{t+1} = Proj(theta_t - eta * m_t), where
                m_t is the prediction of g_t.  The observed gradient never
                enters the update directly.
   two_step     the standard predictable-sequences scheme: a half-step state
                z_t is updated with observed gradients, and the played point
                is the optimistic step theta_t = Proj(z_{t-1} - eta * m_t).

   The regret guarantee certified by the test suite binds to two_step; the
   as_written numbers are reported for comparison only. */
enum class OmdVariant { as_written, two_step };

struct OmdRun {
  OmdVariant variant = OmdVariant::two_step;
  double eta = 0.0;
  double d_phi = 0.0;  // sqrt(2) * radius for the Euclidean mirror map
  Eigen::MatrixXd iterates;     // d x T, played points
  Eigen::MatrixXd predictions;  // d x T
  std::vector<double> residual_sq_norms;
  double residual_path = 0.0;  // sum_t ||g_t - m_t||^2 over t = 1 .. T
  double max_grad_norm = 0.0;  // logged only; nothing is enforced with it
  double measured_regret = 0.0;
  double bound_untuned = 0.0;  // D^2/eta + (eta/2) * residual_path
  double bound_tuned = 0.0;    // sqrt(2) * D * sqrt(residual_path)
  bool satisfied = false;      // measured_regret <= bound_untuned + slack
};

OmdRun run_omd(const OnlineLinearProblem& problem,
               const PredictorConfig& predictor, double eta,
               OmdVariant variant);

/* eta = D_phi / sqrt(radicand), where the radicand is the residual path of
   the prediction sequence.  Throws DegenerateTuningError when the radicand
   is not positive (perfect prediction); callers fall back to a configured
   step size. */
double tune_eta(double proxy_path, double d_phi);

// ---------------------------------------------------------------------------
// Smooth objectives and proxy gradient descent
// ---------------------------------------------------------------------------

enum class ObjectiveFamily { quadratic, quad_plus_cos };

/* F(theta) = 0.5 * theta' A theta  (+ c * sum_i cos(theta_i) for the
   nonconvex family), with A symmetric positive semidefinite drawn as
   Q diag(lambda) Q' from a seed.  The largest eigenvalue is planted, so
   tests can cross-check the power-iteration estimate against it.  The
   smoothness constant is lambda_max(A) (+ c), estimated by power iteration
   and inflated by 1e-8 relative so that eta = 1/L never lands above the
   true threshold.  lower_bound is 0 for the quadratic and -c*d for the
   cosine variant. */
struct SmoothObjective {
  ObjectiveFamily family = ObjectiveFamily::quadratic;
  Eigen::MatrixXd a;
  double c = 0.0;
  double smoothness = 0.0;   // L
  double lower_bound = 0.0;  // F_star
  double planted_top_eigenvalue = 0.0;

  double value(const Eigen::Ref<const Eigen::VectorXd>& theta) const;
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  static SmoothObjective make(ObjectiveFamily family, Eigen::Index dim,
                              double c, std::uint64_t seed);
};

/* Largest eigenvalue of a symmetric PSD matrix by plain power iteration
   with a deterministic seeded start vector.  Stops when the Rayleigh
   quotient moves by less than tol relative; raises NumericalError if the
   iteration cap is hit first. */
double power_iteration_top_eigenvalue(const Eigen::MatrixXd& a,
                                      double tol = 1e-10,
                                      long max_iters = 100000);

/* Updates theta_{t+1} = theta_t - eta * m_t, where m_t is the prediction of
   the true gradient g_t = grad F(theta_t).  Requires 0 < eta <= 1/L.  The
   descent certificate per averaged gradients is

     (1/T) sum_{t<T} ||g_t||^2  <=  2 (F(theta_0) - F_star) / (eta T)
                                     + proxy_path / T

   recorded here with its measured left side.  Any non-finite quantity along
   the run raises NumericalError naming the offending step. */
struct ProxyGdRun {
  SmoothObjective objective;
  PredictorConfig predictor;
  double eta = 0.0;
  Eigen::MatrixXd iterates;    // d x (T+1)
  Eigen::MatrixXd gradients;   // d x T, true gradients at theta_0 .. theta_{T-1}
  Eigen::MatrixXd predictions; // d x T
  std::vector<double> residual_sq_norms;
  double proxy_path = 0.0;  // sum_{t<T} ||g_t - m_t||^2
  double avg_sq_grad = 0.0;
  double min_sq_grad = 0.0;
  double bound = 0.0;
  bool satisfied = false;
};

ProxyGdRun run_proxy_gd(const SmoothObjective& objective,
                        const PredictorConfig& predictor, double eta,
                        Eigen::Index horizon,
                        const Eigen::VectorXd& theta0);

/* Checks the per-step descent inequality

     F(theta_{t+1}) <= F(theta_t) - (eta/2) ||g_t||^2 + (eta/2) ||delta_t||^2

   on a finished run and returns the number of violating steps, judged with
   1e-9 relative slack.  A certified run must report zero. */
struct LemmaC1Report {
  Eigen::Index violations = 0;
  double worst_gap = 0.0;  // most positive lhs - rhs, slack excluded
};

LemmaC1Report lemma_c1_check(const ProxyGdRun& run);

// ---------------------------------------------------------------------------
// Trace generators
// ---------------------------------------------------------------------------

/* Trace whose increment matrix is H = S + N with S of exact rank r and the
   noise fraction ||N||_F^2 / ||H||_F^2 realized to within 1e-6 of rho.  The
   planted directions carry equal energy.  N is projected orthogonal to S in
   the Frobenius inner product and rescaled, which is what makes the realized
   fraction exact rather than approximate.  g_0 is a seeded vector and
   g_t = g_0 + sum of the first t increments. */
GradientTrace generate_planted_trace(Eigen::Index dim, Eigen::Index count,
                                     Eigen::Index rank, double rho,
                                     std::uint64_t seed);

enum class LogRegOptimizer { sgd_momentum, adamw_like };

/* Hyperparameters for the logistic-regression trace generator.  Defaults
   mirror configs/logreg_sgd_momentum.json and configs/logreg_adamw.json;
   the two must stay in sync (a unit test compares them). */
struct LogRegParams {
  Eigen::Index n_samples = 200;
  Eigen::Index dim = 20;
  Eigen::Index steps = 400;
  double l2_lambda = 0.05;
  double label_flip_prob = 0.1;
  // sgd_momentum
  double sgd_lr = 6.0;
  double sgd_momentum = 0.9;
  // adamw_like
  double adam_lr = 1.6;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double adam_weight_decay = 0.01;

  static LogRegParams from_json_file(const std::string& path,
                                     LogRegOptimizer optimizer);
};

/* Full-batch gradient trace of l2-regularized logistic regression on a
   seeded synthetic binary classification set.  Gradients are exact (no
   minibatching), the logged vector is the complete gradient including the
   regularizer, and the whole run is a pure function of (params, optimizer,
   seed).  Divergence raises NumericalError naming the step. */
GradientTrace generate_logreg_trace(const LogRegParams& params,
                                    LogRegOptimizer optimizer,
                                    std::uint64_t seed);

}  // namespace gradtrace

#endif
