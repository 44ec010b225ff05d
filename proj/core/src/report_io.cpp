#include "gradtrace/report_io.hpp"

#include <cstdio>

#include <nlohmann/json.hpp>

#include "gradtrace/errors.hpp"

namespace gradtrace {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* generator_name(LossGenerator g) {
  switch (g) {
    case LossGenerator::constant:
      return "constant";
    case LossGenerator::drifting:
      return "drifting";
    case LossGenerator::adversarial_rotation:
      return "adversarial-rotation";
  }
  return "?";
}

const char* variant_name(OmdVariant v) {
  return v == OmdVariant::two_step ? "two-step" : "as-written";
}

const char* family_name(ObjectiveFamily f) {
  return f == ObjectiveFamily::quadratic ? "quadratic" : "quad-plus-cos";
}

std::string epsilon_header(double eps) {
  char buf[32];
  if (eps >= 0.01 && eps < 1.0) {
    std::snprintf(buf, sizeof(buf), "r*(%.2f)", eps);
  } else {
    std::snprintf(buf, sizeof(buf), "r*(%g)", eps);
  }
  return buf;
}

ordered_json windows_to_json(const WindowedKappaSeries& windows) {
  ordered_json arr = ordered_json::array();
  for (const auto& w : windows.entries) {
    ordered_json entry;
    entry["start"] = w.start;
    entry["end"] = w.end;
    if (w.kappa.has_value()) {
      entry["kappa"] = *w.kappa;
    } else {
      entry["kappa"] = nullptr;
    }
    arr.push_back(entry);
  }
  return arr;
}

ordered_json report_to_json(const std::string& run,
                            const PredictabilityReport& report) {
  ordered_json j;
  j["run"] = run;
  j["predictor"] = report.config.display_name();
  j["path_length"] = report.path_length;
  j["energy"] = report.energy;
  j["kappa"] = report.kappa;
  if (report.ratio.alpha.has_value()) {
    j["alpha"] = *report.ratio.alpha;
    j["alpha_bound"] = *report.ratio.alpha_bound;
  } else {
    j["alpha"] = nullptr;
    j["alpha_bound"] = nullptr;
  }
  ordered_json conflicts = ordered_json::array();
  for (auto t : report.ratio.zero_gradient_conflicts) conflicts.push_back(t);
  j["conflicts"] = conflicts;
  j["windows"] = windows_to_json(report.windows);
  return j;
}

// RFC 4180 quoting, applied only when the field needs it so simple values
// stay byte-stable.
std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string quoted = "\"";
  for (char ch : text) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  quoted += '"';
  return quoted;
}

}  // namespace

std::string format_sig17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string analysis_to_json(const AnalysisResult& result) {
  ordered_json j;
  j["run"] = result.run;
  ordered_json trace;
  trace["path"] = result.trace_path;
  trace["dim"] = result.dim;
  trace["steps"] = result.steps;
  j["trace"] = trace;

  if (result.projected) {
    ordered_json proj;
    proj["seed"] = result.projection_seed;
    proj["k"] = result.projection_k;
    proj["source_dim"] = result.source_dim;
    j["projection"] = proj;
  } else {
    j["projection"] = nullptr;
  }

  ordered_json reports = ordered_json::array();
  for (const auto& r : result.reports) {
    reports.push_back(report_to_json(result.run, r));
  }
  j["predictors"] = reports;

  if (!result.reports.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.reports.size(); ++i) {
      if (result.reports[i].path_length < result.reports[best].path_length) {
        best = i;
      }
    }
    ordered_json min_block;
    min_block["label"] = "min over implemented families";
    min_block["predictor"] = result.reports[best].config.display_name();
    min_block["path_length"] = result.reports[best].path_length;
    min_block["kappa"] = result.reports[best].kappa;
    j["min_over_families"] = min_block;
  } else {
    j["min_over_families"] = nullptr;
  }

  if (!result.ranks.epsilons.empty()) {
    ordered_json ranks;
    ranks["epsilons"] = result.ranks.epsilons;
    ranks["ranks"] = result.ranks.ranks;
    j["rank_profile"] = ranks;
  } else {
    j["rank_profile"] = nullptr;
  }

  ordered_json wr_arr = ordered_json::array();
  for (const auto& series : result.windowed_ranks) {
    ordered_json s;
    s["epsilon"] = series.epsilon;
    s["window"] = series.window_len;
    s["stride"] = series.stride;
    ordered_json entries = ordered_json::array();
    for (const auto& e : series.entries) {
      ordered_json entry;
      entry["start"] = e.start;
      entry["end"] = e.end;
      if (e.rank.has_value()) {
        entry["rank"] = *e.rank;
      } else {
        entry["rank"] = nullptr;
      }
      entries.push_back(entry);
    }
    s["entries"] = entries;
    wr_arr.push_back(s);
  }
  j["windowed_ranks"] = wr_arr;

  ordered_json sweep = ordered_json::array();
  for (const auto& sr : result.rank_sweep) {
    ordered_json s;
    s["seed"] = sr.seed;
    s["epsilons"] = sr.ranks.epsilons;
    s["ranks"] = sr.ranks.ranks;
    sweep.push_back(s);
  }
  j["rank_sweep"] = sweep;
  j["params"] = result.params;

  return j.dump(2) + "\n";
}

std::string kappa_table_csv(const AnalysisResult& result) {
  std::string out = "run";
  for (const auto& r : result.reports) {
    out += ',';
    out += r.config.display_name();
  }
  out += '\n';
  out += csv_field(result.run);
  for (const auto& r : result.reports) {
    out += ',';
    out += format_sig17(r.kappa);
  }
  out += '\n';
  return out;
}

std::string rank_table_csv(const AnalysisResult& result) {
  std::string out = "run";
  for (double eps : result.ranks.epsilons) {
    out += ',';
    out += epsilon_header(eps);
  }
  out += ",params\n";
  out += csv_field(result.run);
  for (auto r : result.ranks.ranks) {
    out += ',';
    out += std::to_string(r);
  }
  out += ',';
  out += csv_field(result.params);
  out += '\n';
  return out;
}

std::string spectrum_to_csv(const Spectrum& spectrum) {
  std::string out = "index,sigma,sigma_sq,cumulative_fraction\n";
  for (std::size_t i = 0; i < spectrum.singular_values.size(); ++i) {
    const double s = spectrum.singular_values[i];
    out += std::to_string(i + 1);
    out += ',';
    out += format_sig17(s);
    out += ',';
    out += format_sig17(s * s);
    out += ',';
    if (i < spectrum.cumulative_fractions.size()) {
      out += format_sig17(spectrum.cumulative_fractions[i]);
    }
    out += '\n';
  }
  return out;
}

std::string omd_sims_to_json(const std::vector<OmdSimReport>& sims) {
  ordered_json runs = ordered_json::array();
  long satisfied = 0;
  for (const auto& sim : sims) {
    ordered_json j;
    ordered_json problem;
    problem["generator"] = generator_name(sim.problem.generator);
    problem["dim"] = sim.problem.dim;
    problem["horizon"] = sim.problem.horizon;
    problem["radius"] = sim.problem.radius;
    problem["scale"] = sim.problem.scale;
    problem["omega"] = sim.problem.omega;
    problem["seed"] = sim.problem.seed;
    j["problem"] = problem;
    j["predictor"] = sim.predictor.display_name();
    j["variant"] = variant_name(sim.run.variant);
    j["eta"] = sim.run.eta;
    j["tuned"] = sim.tuned;
    j["d_phi"] = sim.run.d_phi;
    j["residual_path"] = sim.run.residual_path;
    j["max_grad_norm"] = sim.run.max_grad_norm;
    j["measured_regret"] = sim.run.measured_regret;
    j["bound_untuned"] = sim.run.bound_untuned;
    j["bound_tuned"] = sim.run.bound_tuned;
    j["satisfied"] = sim.run.satisfied;
    if (sim.run.satisfied) ++satisfied;
    runs.push_back(j);
  }
  ordered_json root;
  root["runs"] = runs;
  ordered_json summary;
  summary["total"] = sims.size();
  summary["satisfied"] = satisfied;
  root["summary"] = summary;
  return root.dump(2) + "\n";
}

std::string proxy_sims_to_json(const std::vector<ProxySimReport>& sims) {
  ordered_json runs = ordered_json::array();
  long satisfied = 0;
  long lemma_total = 0;
  for (const auto& sim : sims) {
    ordered_json j;
    ordered_json objective;
    objective["family"] = family_name(sim.run.objective.family);
    objective["dim"] = sim.run.objective.a.rows();
    objective["c"] = sim.run.objective.c;
    objective["smoothness"] = sim.run.objective.smoothness;
    objective["lower_bound"] = sim.run.objective.lower_bound;
    objective["seed"] = sim.seed;
    j["objective"] = objective;
    j["predictor"] = sim.predictor.display_name();
    j["eta"] = sim.run.eta;
    j["horizon"] = sim.run.gradients.cols();
    j["avg_sq_grad"] = sim.run.avg_sq_grad;
    j["min_sq_grad"] = sim.run.min_sq_grad;
    j["proxy_path"] = sim.run.proxy_path;
    j["bound"] = sim.run.bound;
    j["satisfied"] = sim.run.satisfied;
    j["lemma_violations"] = sim.lemma.violations;
    j["lemma_worst_gap"] = sim.lemma.worst_gap;
    if (sim.run.satisfied) ++satisfied;
    lemma_total += sim.lemma.violations;
    runs.push_back(j);
  }
  ordered_json root;
  root["runs"] = runs;
  ordered_json summary;
  summary["total"] = sims.size();
  summary["satisfied"] = satisfied;
  summary["lemma_violations_total"] = lemma_total;
  root["summary"] = summary;
  return root.dump(2) + "\n";
}

}  // namespace gradtrace
