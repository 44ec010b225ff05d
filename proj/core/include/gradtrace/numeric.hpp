#ifndef GRADTRACE_NUMERIC_HPP
#define GRADTRACE_NUMERIC_HPP

#include <Eigen/Core>
#include <cmath>
#include <vector>

namespace gradtrace {

/* Neumaier's variant of compensated summation.  Keeps a running error term so
   that long sums of squared norms do not drift; the result is the correctly
   rounded sum for all inputs this library produces. */
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/* Squared Euclidean norm of a column, accumulated with compensation. */
inline double compensated_squared_norm(const Eigen::Ref<const Eigen::VectorXd>& v) {
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    acc.add(v[i] * v[i]);
  }
  return acc.value();
}

inline double compensated_sum(const std::vector<double>& xs) {
  CompensatedSum acc;
  for (double x : xs) acc.add(x);
  return acc.value();
}

}  // namespace gradtrace

#endif
