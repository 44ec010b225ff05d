#ifndef GRADTRACE_REPORT_IO_HPP
#define GRADTRACE_REPORT_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "gradtrace/harness.hpp"
#include "gradtrace/metrics.hpp"
#include "gradtrace/spectral.hpp"

namespace gradtrace {

/* Serialization of analysis results.  JSON is the canonical machine format;
   the CSV tables are for plotting.  Output is deterministic:
   fixed key order, no timestamps, and numbers that parse back to the exact
   double (JSON uses shortest exact formatting, CSV prints 17 significant
   digits). */

struct AnalysisResult {
  std::string run;
  std::string trace_path;
  Eigen::Index dim = 0;
  Eigen::Index steps = 0;

  bool projected = false;
  std::uint64_t projection_seed = 0;
  Eigen::Index projection_k = 0;
  Eigen::Index source_dim = 0;

  std::vector<PredictabilityReport> reports;
  RankProfile ranks;
  std::vector<WindowedRankSeries> windowed_ranks;

  struct SeedRanks {
    std::uint64_t seed = 0;
    RankProfile ranks;
  };
  std::vector<SeedRanks> rank_sweep;  // filled by the projection seed sweep

  std::string params;  // free-form, from trace metadata, for the rank table
};

std::string analysis_to_json(const AnalysisResult& result);

// One row per run; one column per predictor, labeled by display name.
std::string kappa_table_csv(const AnalysisResult& result);

// Columns: run, r*(eps) per requested epsilon, params.
std::string rank_table_csv(const AnalysisResult& result);

// Columns: index, sigma, sigma_sq, cumulative_fraction.
std::string spectrum_to_csv(const Spectrum& spectrum);

struct OmdSimReport {
  OnlineLinearProblem problem;
  PredictorConfig predictor;
  OmdRun run;
  bool tuned = false;
};

std::string omd_sims_to_json(const std::vector<OmdSimReport>& sims);

struct ProxySimReport {
  std::uint64_t seed = 0;
  PredictorConfig predictor;
  ProxyGdRun run;
  LemmaC1Report lemma;
};

std::string proxy_sims_to_json(const std::vector<ProxySimReport>& sims);

// "%.17g" rendering used by every CSV writer.
std::string format_sig17(double x);

}  // namespace gradtrace

#endif
