#ifndef GRADTRACE_TRACE_HPP
#define GRADTRACE_TRACE_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gradtrace {

/* A finite sequence of gradient vectors g_0 .. g_T, stored densely with one
   column per step.  Values are float64 internally; files holding float32 are
   widened on load.  Construction validates shape and finiteness, and the
   payload is not mutated afterwards.  The metadata map is free-form and
   carried opaquely (run labels, optimizer settings, projection lineage). */
class GradientTrace {
 public:
  GradientTrace(Eigen::MatrixXd values,
                std::map<std::string, std::string> meta = {});

  Eigen::Index dim() const { return values_.rows(); }
  Eigen::Index steps() const { return values_.cols(); }

  const Eigen::MatrixXd& values() const { return values_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

 private:
  Eigen::MatrixXd values_;
  std::map<std::string, std::string> meta_;
};

enum class TraceFormat { binary, csv };

/* Summary statistics of a trace.  Zero-norm steps are recorded here rather
   than rejected: downstream diagnostics need to know where they are. */
struct TraceDiagnostics {
  std::vector<Eigen::Index> zero_gradient_steps;
  double total_energy = 0.0;  // sum over t of ||g_t||^2, compensated
  double min_norm = 0.0;
  double max_norm = 0.0;
};

GradientTrace load_trace(const std::string& path, TraceFormat format);
void save_trace(const GradientTrace& trace, const std::string& path,
                TraceFormat format);

// Reads the magic bytes and picks the format; falls back to csv.
TraceFormat sniff_trace_format(const std::string& path);

TraceDiagnostics validate_trace(const GradientTrace& trace);

}  // namespace gradtrace

#endif
