#ifndef GRADTRACE_TESTS_TESTUTIL_HPP
#define GRADTRACE_TESTS_TESTUTIL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "gradtrace/predictors.hpp"
#include "gradtrace/trace.hpp"

/* Reference implementations used as test oracles.  They are deliberately
   written in the most naive possible style (scalar loops, extended-precision
   accumulators, dense eigen-decompositions of Gram matrices) and share no
   code with the library paths they check. */

namespace testutil {

inline double slow_sum(const std::vector<double>& xs) {
  long double acc = 0.0L;
  for (double x : xs) acc += static_cast<long double>(x);
  return static_cast<double>(acc);
}

inline double slow_squared_norm(const Eigen::VectorXd& v) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    acc += static_cast<long double>(v[i]) * static_cast<long double>(v[i]);
  }
  return static_cast<double>(acc);
}

inline double slow_energy(const Eigen::MatrixXd& m) {
  long double acc = 0.0L;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      acc += static_cast<long double>(m(i, j)) * static_cast<long double>(m(i, j));
    }
  }
  return static_cast<double>(acc);
}

inline bool rel_close(double a, double b, double tol) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= tol * scale;
}

// Per-coordinate scalar recurrences, one coordinate at a time.
inline Eigen::MatrixXd ema_reference(const Eigen::MatrixXd& g, double beta) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.rows(), g.cols());
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    double state = 0.0;
    for (Eigen::Index t = 1; t < g.cols(); ++t) {
      state = beta * state + (1.0 - beta) * g(i, t - 1);
      m(i, t) = state;
    }
  }
  return m;
}

inline Eigen::MatrixXd one_step_reference(const Eigen::MatrixXd& g) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.rows(), g.cols());
  for (Eigen::Index t = 1; t < g.cols(); ++t) m.col(t) = g.col(t - 1);
  return m;
}

inline Eigen::MatrixXd trend_reference(const Eigen::MatrixXd& g, double gamma) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(g.rows(), g.cols());
  if (g.cols() > 1) m.col(1) = g.col(0);
  for (Eigen::Index t = 2; t < g.cols(); ++t) {
    m.col(t) = g.col(t - 1) + gamma * (g.col(t - 1) - g.col(t - 2));
  }
  return m;
}

/* Windowed kappa recomputed from scratch: the predictor runs over the full
   prefix (long-double residual and energy sums restricted to the window). */
inline double windowed_kappa_reference(const Eigen::MatrixXd& g,
                                       const gradtrace::PredictorConfig& config,
                                       Eigen::Index start, Eigen::Index len) {
  const gradtrace::GradientTrace trace{Eigen::MatrixXd(g)};
  const auto pred = gradtrace::run_predictor(trace, config);
  long double res = 0.0L;
  long double energy = 0.0L;
  for (Eigen::Index t = start; t < start + len; ++t) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const long double d =
          static_cast<long double>(g(i, t)) - pred.values(i, t);
      res += d * d;
      energy += static_cast<long double>(g(i, t)) *
                static_cast<long double>(g(i, t));
    }
  }
  return static_cast<double>(res / energy);
}

/* Singular values via the eigenvalues of the smaller Gram matrix; an
   algorithm family entirely different from one-sided Jacobi. */
inline std::vector<double> gram_singular_values(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd gram = m.rows() <= m.cols()
                                   ? Eigen::MatrixXd(m * m.transpose())
                                   : Eigen::MatrixXd(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  std::vector<double> out;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    out.push_back(std::sqrt(std::max(0.0, es.eigenvalues()[i])));
  }
  std::sort(out.begin(), out.end(), std::greater<double>());
  return out;
}

inline Eigen::Index rank_scan_reference(const std::vector<double>& sigma,
                                        double epsilon) {
  long double total = 0.0L;
  for (double s : sigma) total += static_cast<long double>(s) * s;
  long double prefix = 0.0L;
  for (std::size_t r = 0; r < sigma.size(); ++r) {
    prefix += static_cast<long double>(sigma[r]) * sigma[r];
    if (static_cast<double>(prefix / total) >= 1.0 - epsilon) {
      return static_cast<Eigen::Index>(r + 1);
    }
  }
  return static_cast<Eigen::Index>(sigma.size());
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                                     Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

inline Eigen::MatrixXd random_orthogonal(std::mt19937_64& rng, Eigen::Index n) {
  const Eigen::MatrixXd g = random_matrix(rng, n, n);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (r(i, i) < 0.0) q.col(i) = -q.col(i);
  }
  return q;
}

inline gradtrace::GradientTrace random_trace(std::mt19937_64& rng,
                                             Eigen::Index dim,
                                             Eigen::Index steps) {
  return gradtrace::GradientTrace{random_matrix(rng, dim, steps)};
}

// Unique scratch path in the working directory; removed on destruction.
class TempFile {
 public:
  explicit TempFile(const std::string& tag) {
    static int counter = 0;
    path_ = "scratch_" + tag + "_" + std::to_string(counter++);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  ~TempFile() {
    std::remove(path_.c_str());
    std::remove((path_ + ".meta.json").c_str());
  }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline std::string read_file_bytes(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (f == nullptr) return {};
  std::string data;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) data.append(buf, n);
  std::fclose(f);
  return data;
}

}  // namespace testutil

#endif
