#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gradtrace/errors.hpp"
#include "gradtrace/harness.hpp"
#include "gradtrace/metrics.hpp"
#include "gradtrace/predictors.hpp"
#include "gradtrace/projection.hpp"
#include "gradtrace/report_io.hpp"
#include "gradtrace/rng.hpp"
#include "gradtrace/spectral.hpp"
#include "gradtrace/trace.hpp"

namespace {

using namespace gradtrace;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  for (char ch : text) {
    if (ch == ',') {
      parts.push_back(current);
      current.clear();
    } else {
      current.push_back(ch);
    }
  }
  parts.push_back(current);
  return parts;
}

double parse_double_strict(const std::string& text, const char* what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ConfigError(std::string("cannot parse ") + what + ": '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64_strict(const std::string& text, const char* what) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw ConfigError(std::string("cannot parse ") + what + ": '" + text + "'");
  }
  return static_cast<std::uint64_t>(v);
}

std::vector<PredictorConfig> parse_predictor_list(const std::string& text) {
  std::vector<PredictorConfig> out;
  for (const auto& part : split_list(text)) {
    if (part.empty()) continue;
    out.push_back(PredictorConfig::parse(part));
  }
  if (out.empty()) throw ConfigError("predictor list is empty");
  return out;
}

std::vector<double> parse_epsilon_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split_list(text)) {
    if (part.empty()) continue;
    out.push_back(parse_double_strict(part, "epsilon"));
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split_list(text)) {
    if (part.empty()) continue;
    out.push_back(parse_u64_strict(part, "seed"));
  }
  return out;
}

std::string path_stem(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name.resize(dot);
  return name;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Output traces are binary unless the target name says csv.
TraceFormat format_for_output(const std::string& path) {
  return ends_with(path, ".csv") ? TraceFormat::csv : TraceFormat::binary;
}

GradientTrace load_input_trace(const std::string& path,
                               const std::string& format_flag) {
  TraceFormat fmt;
  if (format_flag == "auto") {
    fmt = sniff_trace_format(path);
  } else if (format_flag == "binary") {
    fmt = TraceFormat::binary;
  } else if (format_flag == "csv") {
    fmt = TraceFormat::csv;
  } else {
    throw ConfigError("unknown trace format: '" + format_flag +
                      "' (expected auto, binary, or csv)");
  }
  return load_trace(path, fmt);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path);
}

// Empty path means stdout.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_text_file(path, text);
  }
}

LossGenerator parse_generator(const std::string& text) {
  if (text == "constant") return LossGenerator::constant;
  if (text == "drifting") return LossGenerator::drifting;
  if (text == "adversarial-rotation") return LossGenerator::adversarial_rotation;
  throw ConfigError("unknown loss generator: '" + text +
                    "' (expected constant, drifting, or adversarial-rotation)");
}

OmdVariant parse_variant(const std::string& text) {
  if (text == "as-written") return OmdVariant::as_written;
  if (text == "two-step") return OmdVariant::two_step;
  throw ConfigError("unknown variant: '" + text +
                    "' (expected as-written or two-step)");
}

ObjectiveFamily parse_objective(const std::string& text) {
  if (text == "quadratic") return ObjectiveFamily::quadratic;
  if (text == "quad-plus-cos") return ObjectiveFamily::quad_plus_cos;
  throw ConfigError("unknown objective: '" + text +
                    "' (expected quadratic or quad-plus-cos)");
}

LogRegOptimizer parse_optimizer(const std::string& text) {
  if (text == "sgd-momentum") return LogRegOptimizer::sgd_momentum;
  if (text == "adamw") return LogRegOptimizer::adamw_like;
  throw ConfigError("unknown optimizer: '" + text +
                    "' (expected sgd-momentum or adamw)");
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string trace_path;
  std::string format = "auto";
  std::string run;
  std::string predictors = "one-step,ema:0.9,ema:0.99,trend";
  std::string epsilons = "0.10,0.05,0.01";
  std::int64_t window = 0;
  std::int64_t stride = 0;
  std::string proj_path;
  std::string sweep_seeds;
  std::int64_t k = 256;
  std::string out_json;
  std::string out_csv;
  std::string out_rank_csv;
};

int run_analyze(const AnalyzeOpts& opts) {
  const GradientTrace source = load_input_trace(opts.trace_path, opts.format);
  const auto predictor_list = parse_predictor_list(opts.predictors);
  const auto epsilon_list = parse_epsilon_list(opts.epsilons);

  AnalysisResult result;
  result.run = opts.run.empty() ? path_stem(opts.trace_path) : opts.run;
  result.trace_path = opts.trace_path;

  GradientTrace trace = source;
  if (!opts.proj_path.empty()) {
    const ProjectionSpec proj = load_projection(opts.proj_path);
    trace = apply_projection(proj, source);
    result.projected = true;
    result.projection_seed = proj.seed;
    result.projection_k = proj.k();
    result.source_dim = source.dim();
  } else if (const auto& meta = source.meta();
             meta.count("projection.seed") && meta.count("projection.k") &&
             meta.count("projection.source_dim")) {
    result.projected = true;
    result.projection_seed = std::stoull(meta.at("projection.seed"));
    result.projection_k = std::stoll(meta.at("projection.k"));
    result.source_dim = std::stoll(meta.at("projection.source_dim"));
  }
  result.dim = trace.dim();
  result.steps = trace.steps();

  const Eigen::Index window = opts.window;
  const Eigen::Index stride = opts.stride > 0 ? opts.stride : window;

  for (const auto& config : predictor_list) {
    PredictabilityReport report = make_report(trace, config);
    if (window > 0) {
      report.windows = windowed_kappa(trace, config, window, stride);
    }
    result.reports.push_back(std::move(report));
  }

  if (!epsilon_list.empty()) {
    const Spectrum spectrum = singular_spectrum(increment_matrix(trace));
    result.ranks = rank_profile(spectrum, epsilon_list);
    if (window > 0) {
      for (double eps : epsilon_list) {
        result.windowed_ranks.push_back(
            windowed_rank(trace, window, stride, eps));
      }
    }
    if (!opts.sweep_seeds.empty()) {
      for (std::uint64_t seed : parse_seed_list(opts.sweep_seeds)) {
        const ProjectionSpec proj = make_projection(source.dim(), opts.k, seed);
        const GradientTrace sketched = apply_projection(proj, source);
        const Spectrum s = singular_spectrum(increment_matrix(sketched));
        result.rank_sweep.push_back({seed, rank_profile(s, epsilon_list)});
      }
    }
  }

  const auto& meta = trace.meta();
  if (auto it = meta.find("params"); it != meta.end()) {
    result.params = it->second;
  }

  if (!opts.out_json.empty()) write_text_file(opts.out_json, analysis_to_json(result));
  if (!opts.out_csv.empty()) write_text_file(opts.out_csv, kappa_table_csv(result));
  if (!opts.out_rank_csv.empty()) {
    write_text_file(opts.out_rank_csv, rank_table_csv(result));
  }
  if (opts.out_json.empty() && opts.out_csv.empty() &&
      opts.out_rank_csv.empty()) {
    emit("", analysis_to_json(result));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// spectrum
// ---------------------------------------------------------------------------

struct SpectrumOpts {
  std::string trace_path;
  std::string format = "auto";
  std::string out_csv;
};

int run_spectrum(const SpectrumOpts& opts) {
  const GradientTrace trace = load_input_trace(opts.trace_path, opts.format);
  const Spectrum spectrum = singular_spectrum(increment_matrix(trace));
  if (!(spectrum.total_energy > 0.0)) {
    throw UndefinedMetricError(
        "singular spectrum undefined: increment energy is zero");
  }
  emit(opts.out_csv, spectrum_to_csv(spectrum));
  return 0;
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

struct ProjectOpts {
  std::string trace_path;
  std::string format = "auto";
  std::int64_t k = 256;
  std::uint64_t seed = 0;
  std::string proj_path;
  std::string proj_out;
  std::string trace_out;
};

int run_project(const ProjectOpts& opts) {
  if (opts.proj_out.empty() && opts.trace_out.empty()) {
    throw ConfigError("nothing to do: pass --proj-out and/or --trace-out");
  }
  const GradientTrace source = load_input_trace(opts.trace_path, opts.format);
  const ProjectionSpec proj =
      opts.proj_path.empty()
          ? make_projection(source.dim(), opts.k, opts.seed)
          : load_projection(opts.proj_path);
  if (!opts.proj_out.empty()) save_projection(proj, opts.proj_out);
  if (!opts.trace_out.empty()) {
    const GradientTrace sketched = apply_projection(proj, source);
    save_trace(sketched, opts.trace_out, format_for_output(opts.trace_out));
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate omd
// ---------------------------------------------------------------------------

struct OmdOpts {
  std::int64_t dim = 10;
  std::int64_t horizon = 500;
  double radius = 1.0;
  double scale = 1.0;
  double omega = 0.05;
  std::string generator = "drifting";
  std::string predictor = "one-step";
  std::string variant = "two-step";
  double eta = 0.0;
  bool eta_given = false;
  bool tune = false;
  std::int64_t seeds = 1;
  std::uint64_t seed = 0;
  std::string out_json;
};

int run_simulate_omd(const OmdOpts& opts) {
  if (opts.eta_given && opts.tune) {
    throw ConfigError("--eta and --tune are mutually exclusive");
  }
  if (opts.seeds < 1) throw ConfigError("--seeds must be >= 1");
  const LossGenerator generator = parse_generator(opts.generator);
  const PredictorConfig predictor = PredictorConfig::parse(opts.predictor);
  const OmdVariant variant = parse_variant(opts.variant);
  const bool tuned = !opts.eta_given;

  std::vector<OmdSimReport> reports;
  for (std::int64_t i = 0; i < opts.seeds; ++i) {
    const std::uint64_t seed_i = opts.seed + static_cast<std::uint64_t>(i);
    OnlineLinearProblem problem =
        OnlineLinearProblem::make(generator, opts.dim, opts.horizon,
                                  opts.radius, opts.scale, opts.omega, seed_i);
    double eta = opts.eta;
    if (tuned) {
      // Linear losses make the gradient sequence oblivious to the iterates,
      // so the residual path is known before the game is played.
      const GradientTrace loss_trace{Eigen::MatrixXd(problem.losses)};
      const auto preds = run_predictor(loss_trace, predictor);
      const auto res = residuals(loss_trace, preds);
      eta = tune_eta(path_length(res), std::sqrt(2.0) * opts.radius);
    }
    OmdRun run = run_omd(problem, predictor, eta, variant);
    reports.push_back({std::move(problem), predictor, std::move(run), tuned});
  }
  emit(opts.out_json, omd_sims_to_json(reports));
  return 0;
}

// ---------------------------------------------------------------------------
// simulate proxy-gd
// ---------------------------------------------------------------------------

struct ProxyOpts {
  std::string objective = "quadratic";
  std::int64_t dim = 20;
  double c = 0.5;
  std::int64_t horizon = 2000;
  double eta = 0.0;
  bool eta_given = false;
  std::string predictor = "one-step";
  std::int64_t seeds = 1;
  std::uint64_t seed = 0;
  std::string out_json;
};

Eigen::VectorXd seeded_start_point(Eigen::Index dim, std::uint64_t seed) {
  Philox rng(seed, 17);
  Eigen::VectorXd theta0(dim);
  for (Eigen::Index i = 0; i < dim; ++i) theta0[i] = 2.0 * rng.next_normal();
  return theta0;
}

int run_simulate_proxy(const ProxyOpts& opts) {
  if (opts.seeds < 1) throw ConfigError("--seeds must be >= 1");
  const ObjectiveFamily family = parse_objective(opts.objective);
  const PredictorConfig predictor = PredictorConfig::parse(opts.predictor);

  std::vector<ProxySimReport> reports;
  for (std::int64_t i = 0; i < opts.seeds; ++i) {
    const std::uint64_t seed_i = opts.seed + static_cast<std::uint64_t>(i);
    const SmoothObjective objective =
        SmoothObjective::make(family, opts.dim, opts.c, seed_i);
    const double eta =
        opts.eta_given ? opts.eta : 1.0 / objective.smoothness;
    ProxyGdRun run = run_proxy_gd(objective, predictor, eta, opts.horizon,
                                  seeded_start_point(opts.dim, seed_i));
    const LemmaC1Report lemma = lemma_c1_check(run);
    reports.push_back({seed_i, predictor, std::move(run), lemma});
  }
  emit(opts.out_json, proxy_sims_to_json(reports));
  return 0;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct PlantedOpts {
  std::int64_t dim = 64;
  std::int64_t count = 300;
  std::int64_t rank = 5;
  double noise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate_planted(const PlantedOpts& opts) {
  const GradientTrace trace = generate_planted_trace(
      opts.dim, opts.count, opts.rank, opts.noise, opts.seed);
  save_trace(trace, opts.out, format_for_output(opts.out));
  return 0;
}

struct LogRegOpts {
  std::string optimizer = "sgd-momentum";
  std::int64_t samples = 0;
  std::int64_t dim = 0;
  std::int64_t steps = 0;
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

int run_generate_logreg(const LogRegOpts& opts) {
  const LogRegOptimizer optimizer = parse_optimizer(opts.optimizer);
  LogRegParams params = opts.config.empty()
                            ? LogRegParams{}
                            : LogRegParams::from_json_file(opts.config, optimizer);
  if (opts.samples > 0) params.n_samples = opts.samples;
  if (opts.dim > 0) params.dim = opts.dim;
  if (opts.steps > 0) params.steps = opts.steps;
  const GradientTrace trace =
      generate_logreg_trace(params, optimizer, opts.seed);
  save_trace(trace, opts.out, format_for_output(opts.out));
  return 0;
}

// ---------------------------------------------------------------------------
// wiring
// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
  CLI::App app{"Temporal-complexity analysis of gradient trajectories"};
  app.require_subcommand(1);

  AnalyzeOpts analyze;
  auto* cmd_analyze =
      app.add_subcommand("analyze", "Predictability and rank report for a trace");
  cmd_analyze->add_option("--trace", analyze.trace_path, "Input trace file")
      ->required();
  cmd_analyze->add_option("--format", analyze.format,
                          "Input format: auto, binary, csv");
  cmd_analyze->add_option("--run", analyze.run,
                          "Run label (default: trace file stem)");
  cmd_analyze->add_option("--predictors", analyze.predictors,
                          "Comma list, e.g. one-step,ema:0.9,trend");
  cmd_analyze->add_option("--epsilons", analyze.epsilons,
                          "Comma list of rank thresholds; empty skips ranks");
  cmd_analyze->add_option("--window", analyze.window, "Window length in steps");
  cmd_analyze->add_option("--stride", analyze.stride,
                          "Window stride (default: window length)");
  cmd_analyze->add_option("--proj", analyze.proj_path,
                          "Stored projection to apply before analysis");
  cmd_analyze->add_option("--sweep-seeds", analyze.sweep_seeds,
                          "Comma list of projection seeds for a rank sweep");
  cmd_analyze->add_option("--k", analyze.k, "Sketch rows for --sweep-seeds");
  cmd_analyze->add_option("--out-json", analyze.out_json, "JSON report path");
  cmd_analyze->add_option("--out-csv", analyze.out_csv, "Kappa table CSV path");
  cmd_analyze->add_option("--out-rank-csv", analyze.out_rank_csv,
                          "Rank table CSV path");

  SpectrumOpts spectrum;
  auto* cmd_spectrum =
      app.add_subcommand("spectrum", "Singular spectrum of the increment matrix");
  cmd_spectrum->add_option("--trace", spectrum.trace_path, "Input trace file")
      ->required();
  cmd_spectrum->add_option("--format", spectrum.format,
                           "Input format: auto, binary, csv");
  cmd_spectrum->add_option("--out-csv", spectrum.out_csv,
                           "Output CSV (default: stdout)");

  ProjectOpts project;
  auto* cmd_project =
      app.add_subcommand("project", "Sketch a trace with a Gaussian projection");
  cmd_project->add_option("--trace", project.trace_path, "Input trace file")
      ->required();
  cmd_project->add_option("--format", project.format,
                          "Input format: auto, binary, csv");
  cmd_project->add_option("--k", project.k, "Sketch rows");
  cmd_project->add_option("--seed", project.seed, "Projection seed");
  cmd_project->add_option("--proj", project.proj_path,
                          "Reuse a stored projection instead of generating");
  cmd_project->add_option("--proj-out", project.proj_out,
                          "Where to store the projection matrix");
  cmd_project->add_option("--trace-out", project.trace_out,
                          "Where to store the projected trace");

  auto* cmd_simulate = app.add_subcommand("simulate", "Certification drivers");
  cmd_simulate->require_subcommand(1);

  OmdOpts omd;
  auto* cmd_omd = cmd_simulate->add_subcommand(
      "omd", "Optimistic mirror descent on online linear losses");
  cmd_omd->add_option("--d", omd.dim, "Dimension");
  cmd_omd->add_option("--T", omd.horizon, "Rounds");
  cmd_omd->add_option("--radius", omd.radius, "Feasible ball radius");
  cmd_omd->add_option("--scale", omd.scale, "Loss vector norm");
  cmd_omd->add_option("--omega", omd.omega,
                      "Drift angle per round (drifting generator)");
  cmd_omd->add_option("--generator", omd.generator,
                      "constant, drifting, or adversarial-rotation");
  cmd_omd->add_option("--predictor", omd.predictor, "Predictor spec");
  cmd_omd->add_option("--variant", omd.variant, "as-written or two-step");
  auto* omd_eta = cmd_omd->add_option("--eta", omd.eta, "Fixed step size");
  cmd_omd->add_flag("--tune", omd.tune,
                    "Tune eta from the predictor's residual path (default)");
  cmd_omd->add_option("--seeds", omd.seeds, "Number of consecutive seeds");
  cmd_omd->add_option("--seed", omd.seed, "Base seed");
  cmd_omd->add_option("--out-json", omd.out_json,
                      "Output JSON (default: stdout)");

  ProxyOpts proxy;
  auto* cmd_proxy = cmd_simulate->add_subcommand(
      "proxy-gd", "Descent with predicted gradients on a smooth objective");
  cmd_proxy->add_option("--objective", proxy.objective,
                        "quadratic or quad-plus-cos");
  cmd_proxy->add_option("--d", proxy.dim, "Dimension");
  cmd_proxy->add_option("--c", proxy.c, "Cosine amplitude (quad-plus-cos)");
  cmd_proxy->add_option("--T", proxy.horizon, "Steps");
  auto* proxy_eta =
      cmd_proxy->add_option("--eta", proxy.eta, "Step size (default: 1/L)");
  cmd_proxy->add_option("--predictor", proxy.predictor, "Predictor spec");
  cmd_proxy->add_option("--seeds", proxy.seeds, "Number of consecutive seeds");
  cmd_proxy->add_option("--seed", proxy.seed, "Base seed");
  cmd_proxy->add_option("--out-json", proxy.out_json,
                        "Output JSON (default: stdout)");

  auto* cmd_generate = app.add_subcommand("generate", "Trace generators");
  cmd_generate->require_subcommand(1);

  PlantedOpts planted;
  auto* cmd_planted = cmd_generate->add_subcommand(
      "planted", "Trace with a planted low-rank increment matrix");
  cmd_planted->add_option("--d", planted.dim, "Dimension");
  cmd_planted->add_option("--T", planted.count, "Number of increments");
  cmd_planted->add_option("--rank", planted.rank, "Planted rank");
  cmd_planted->add_option("--noise", planted.noise,
                          "Noise energy fraction in [0, 1)");
  cmd_planted->add_option("--seed", planted.seed, "Seed");
  cmd_planted->add_option("--out", planted.out, "Output trace path")->required();

  LogRegOpts logreg;
  auto* cmd_logreg = cmd_generate->add_subcommand(
      "logreg", "Full-batch logistic-regression gradient trace");
  cmd_logreg->add_option("--optimizer", logreg.optimizer,
                         "sgd-momentum or adamw");
  cmd_logreg->add_option("--samples", logreg.samples, "Training set size");
  cmd_logreg->add_option("--d", logreg.dim, "Feature dimension");
  cmd_logreg->add_option("--steps", logreg.steps, "Training steps");
  cmd_logreg->add_option("--seed", logreg.seed, "Seed");
  cmd_logreg->add_option("--config", logreg.config,
                         "JSON hyperparameter file (configs/*.json)");
  cmd_logreg->add_option("--out", logreg.out, "Output trace path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  omd.eta_given = omd_eta->count() > 0;
  proxy.eta_given = proxy_eta->count() > 0;

  if (cmd_analyze->parsed()) return run_analyze(analyze);
  if (cmd_spectrum->parsed()) return run_spectrum(spectrum);
  if (cmd_project->parsed()) return run_project(project);
  if (cmd_simulate->parsed()) {
    if (cmd_omd->parsed()) return run_simulate_omd(omd);
    if (cmd_proxy->parsed()) return run_simulate_proxy(proxy);
  }
  if (cmd_generate->parsed()) {
    if (cmd_planted->parsed()) return run_generate_planted(planted);
    if (cmd_logreg->parsed()) return run_generate_logreg(logreg);
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const UndefinedMetricError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 1;
  }
}
