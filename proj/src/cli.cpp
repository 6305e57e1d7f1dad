#include "bregalt/cli.hpp"

#include <CLI/CLI.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bregalt/alternator.hpp"
#include "bregalt/diagnostics.hpp"
#include "bregalt/em.hpp"
#include "bregalt/geometry.hpp"
#include "bregalt/io.hpp"

namespace bregalt {
namespace {

namespace fs = std::filesystem;

struct GlobalFlags {
  std::string out_dir = ".";
  std::optional<unsigned long long> seed;
  std::optional<int> max_iters;
  bool quiet = false;
};

nlohmann::json load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
}

std::string config_stem(const nlohmann::json& cfg, const std::string& path) {
  if (cfg.contains("label") && cfg.at("label").is_string()) {
    const std::string l = cfg.at("label").get<std::string>();
    if (!l.empty()) return l;
  }
  return fs::path(path).stem().string();
}

std::string out_path(const GlobalFlags& flags, const std::string& name) {
  fs::create_directories(flags.out_dir);
  return (fs::path(flags.out_dir) / name).string();
}

// "runs/foo.trace.csv" -> "foo", so derived outputs become foo.rate.json etc.
std::string trace_stem(const std::string& trace_path) {
  std::string stem = fs::path(trace_path).stem().string();
  if (stem.size() > 6 && stem.ends_with(".trace")) stem.resize(stem.size() - 6);
  return stem;
}

std::string join_coords(const Vector& v) {
  std::string s;
  for (int i = 0; i < v.size(); ++i) {
    if (i > 0) s += ';';
    s += fmt17(v[i]);
  }
  return s;
}

// A parsed experiment: either a plain two-set run or one of the em
// instances, plus the run configuration shared by all of them.
struct Experiment {
  std::string kind;  // run | em_discrete | em_expfam | dspect
  Generator gen;     // generator driving the executed alternation
  RunConfig rc;
  // kind == run
  std::optional<SetSpec> A, B;
  Vector start;
  // em payloads; em_start is start_param / start_theta_prime.
  std::optional<DiscreteEmProblem> em_discrete;
  std::optional<ExpFamilySpec> expfam;
  std::optional<DspectProblem> dspect;
  Vector em_start;
};

struct ExecutionResult {
  Trace trace;
  std::optional<EmTrace> em;
};

RunConfig run_config_from_json(const nlohmann::json& cfg, const GlobalFlags& flags) {
  RunConfig rc;
  const std::string orient = cfg.value("orientation", std::string("rl"));
  if (orient == "rl") {
    rc.orientation = Orientation::rl;
  } else if (orient == "lr") {
    rc.orientation = Orientation::lr;
  } else {
    throw ConfigError("orientation must be rl or lr");
  }
  rc.stop = stop_rules_from_json(cfg.contains("stop") ? cfg.at("stop") : nlohmann::json());
  rc.solver =
      solver_options_from_json(cfg.contains("solver") ? cfg.at("solver") : nlohmann::json());
  if (cfg.contains("start_param")) {
    rc.start_param = json_to_vector(cfg.at("start_param"), "start_param");
  }
  if (flags.seed.has_value()) rc.solver.seed = *flags.seed;
  if (flags.max_iters.has_value()) rc.stop.max_iterations = *flags.max_iters;
  return rc;
}

Experiment parse_experiment(const nlohmann::json& cfg, const GlobalFlags& flags) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  Experiment ex;
  ex.kind = cfg.value("kind", std::string("run"));
  ex.rc = run_config_from_json(cfg, flags);
  if (ex.kind == "run") {
    if (!cfg.contains("generator") || !cfg.contains("A") || !cfg.contains("B") ||
        !cfg.contains("start")) {
      throw ConfigError("run config needs generator, A, B, start");
    }
    ex.gen = generator_from_json(cfg.at("generator"));
    ex.A = set_from_json(cfg.at("A"));
    ex.B = set_from_json(cfg.at("B"));
    ex.start = json_to_vector(cfg.at("start"), "start");
    if (ex.start.size() != ex.gen.dim) throw ConfigError("start dimension != generator dim");
  } else if (ex.kind == "em_discrete") {
    if (!cfg.contains("T") || !cfg.contains("p_hat") || !cfg.contains("model") ||
        !cfg.contains("start_param")) {
      throw ConfigError("em_discrete config needs T, p_hat, model, start_param");
    }
    ex.em_discrete = make_discrete_em_problem(json_to_ints(cfg.at("T"), "T"),
                                              json_to_vector(cfg.at("p_hat"), "p_hat"),
                                              set_from_json(cfg.at("model")));
    ex.em_start = json_to_vector(cfg.at("start_param"), "start_param");
    ex.gen = make_generator("negentropy", ex.em_discrete->I());
    ex.rc.start_param.reset();  // consumed as the explicit em start
  } else if (ex.kind == "em_expfam") {
    if (!cfg.contains("generator") || !cfg.contains("observed") || !cfg.contains("y_hat") ||
        !cfg.contains("model") || !cfg.contains("start_theta_prime")) {
      throw ConfigError(
          "em_expfam config needs generator, observed, y_hat, model, start_theta_prime");
    }
    ex.expfam = make_exp_family_spec(generator_from_json(cfg.at("generator")),
                                     json_to_ints(cfg.at("observed"), "observed"),
                                     json_to_vector(cfg.at("y_hat"), "y_hat"),
                                     set_from_json(cfg.at("model")));
    ex.em_start = json_to_vector(cfg.at("start_theta_prime"), "start_theta_prime");
    ex.gen = ex.expfam->generator;
  } else if (ex.kind == "dspect") {
    for (const char* key : {"n", "m", "K", "prony", "c", "start_param"}) {
      if (!cfg.contains(key)) throw ConfigError(std::string("dspect config needs ") + key);
    }
    ex.dspect = build_dspect_problem(cfg.at("n").get<int>(), cfg.at("m").get<int>(),
                                     cfg.at("K").get<int>(),
                                     json_to_vector(cfg.at("prony"), "prony"),
                                     json_to_vector(cfg.at("c"), "c"));
    ex.em_start = json_to_vector(cfg.at("start_param"), "start_param");
    ex.gen = ex.dspect->gen;
    ex.rc.start_param.reset();
  } else {
    throw ConfigError("unknown config kind: " + ex.kind);
  }
  return ex;
}

ExecutionResult execute(const Experiment& ex, const std::optional<Vector>& start_override) {
  RunConfig rc = ex.rc;
  if (start_override.has_value()) rc.start_param.reset();
  ExecutionResult res;
  if (ex.kind == "run") {
    res.trace = run(ex.gen, *ex.A, *ex.B, start_override.value_or(ex.start), rc);
  } else if (ex.kind == "em_discrete") {
    res.em = run_em_discrete(*ex.em_discrete, start_override.value_or(ex.em_start), rc);
  } else if (ex.kind == "em_expfam") {
    res.em = run_em_expfam(*ex.expfam, start_override.value_or(ex.em_start), rc);
  } else {
    res.em = run_em_dspect(*ex.dspect, start_override.value_or(ex.em_start), rc);
  }
  if (res.em.has_value()) res.trace = res.em->trace;
  return res;
}

nlohmann::json make_summary(const Experiment& ex, const ExecutionResult& res) {
  nlohmann::json j;
  j["kind"] = ex.kind;
  j["orientation"] = to_string(res.trace.orientation);
  j["blocks"] = res.trace.size();
  j["stop_reason"] = to_string(res.trace.stop_reason);
  if (!res.trace.violation_message.empty()) j["violation_message"] = res.trace.violation_message;
  try {
    const GapEstimate gap = detect_gap(res.trace);
    j["r_star"] = gap.r_star;
    j["feasible"] = gap.feasible;
    j["gap"] = gap_to_json(gap);
  } catch (const TooShort&) {
    j["r_star"] = nullptr;
    j["feasible"] = nullptr;
    j["gap"] = nullptr;
  }
  if (res.em.has_value()) {
    j["left_role"] = res.em->left_role;
    j["right_role"] = res.em->right_role;
    j["fixed_point_residual"] = res.em->fixed_point_residual;
  }
  return j;
}

std::string render_csv(const Experiment& ex, const ExecutionResult& res, bool with_diag) {
  std::optional<TraceDiagnostics> td;
  if (with_diag) td = compute_trace_diagnostics(ex.gen, res.trace);
  const TraceDiagnostics* dp = td.has_value() ? &*td : nullptr;
  return res.em.has_value() ? em_trace_to_csv(*res.em, dp) : trace_to_csv(res.trace, dp);
}

int exit_code_for(const Trace& trace) {
  return trace.stop_reason == StopReason::domain_violation ? 2 : 0;
}

int cmd_run(const std::string& config_path, const GlobalFlags& flags) {
  const nlohmann::json cfg = load_config(config_path);
  const Experiment ex = parse_experiment(cfg, flags);
  const ExecutionResult res = execute(ex, std::nullopt);
  const std::string stem = config_stem(cfg, config_path);
  const nlohmann::json outputs = cfg.value("outputs", nlohmann::json::object());
  const std::string trace_name = outputs.value("trace", stem + ".trace.csv");
  const std::string summary_name = outputs.value("summary", stem + ".summary.json");

  const std::string csv = render_csv(ex, res, cfg.value("diagnostics", false));
  const nlohmann::json summary = make_summary(ex, res);
  const std::string trace_path = out_path(flags, trace_name);
  const std::string summary_path = out_path(flags, summary_name);
  write_text_file(trace_path, csv);
  write_text_file(summary_path, summary.dump(2) + "\n");
  if (!flags.quiet) {
    std::cout << "trace: " << trace_path << "\n";
    std::cout << "summary: " << summary_path << "\n";
    std::cout << "stop_reason=" << to_string(res.trace.stop_reason)
              << " blocks=" << res.trace.size();
    if (summary.at("r_star").is_number()) {
      std::cout << " r_star=" << fmt17(summary.at("r_star").get<double>());
    }
    std::cout << "\n";
  }
  return exit_code_for(res.trace);
}

int cmd_rate(const std::string& trace_path, const std::string& column,
             const GlobalFlags& flags) {
  const CsvTable table = read_csv(trace_path);
  const std::vector<double> errors = table.numeric_column(column);
  const RateEstimate rate = fit_rate(errors);  // TooShort propagates -> exit 1
  const std::string stem = trace_stem(trace_path);
  const std::string rate_path = out_path(flags, stem + ".rate.json");
  write_text_file(rate_path, rate_to_json(rate).dump(2) + "\n");
  if (!flags.quiet) {
    std::cout << "rate: " << rate_path << "\n";
    std::cout << "kind=" << to_string(rate.kind) << " q=" << fmt17(rate.q)
              << " rho=" << fmt17(rate.rho) << " residual=" << fmt17(rate.residual)
              << " window=[" << rate.fit_window.first << "," << rate.fit_window.second << "]\n";
  }
  return 0;
}

// Every cell present in `before` must survive unchanged in `after`;
// regenerating a trace from its config is required to be deterministic.
void check_round_trip(const CsvTable& before, const CsvTable& after) {
  if (before.rows.size() != after.rows.size()) {
    throw ConfigError("trace does not match the config output: row count differs");
  }
  for (size_t c = 0; c < before.header.size(); ++c) {
    const int ac = after.column(before.header[c]);
    if (ac < 0) throw ConfigError("trace has an unknown column: " + before.header[c]);
    for (size_t r = 0; r < before.rows.size(); ++r) {
      const auto& row = before.rows[r];
      if (c >= row.size() || row[c].empty()) continue;
      const auto& arow = after.rows[r];
      const std::string regenerated =
          static_cast<size_t>(ac) < arow.size() ? arow[static_cast<size_t>(ac)] : std::string();
      if (row[c] != regenerated) {
        throw ConfigError("trace does not match the config output at row " +
                          std::to_string(r + 1) + ", column " + before.header[c] + ": " +
                          row[c] + " vs " + regenerated);
      }
    }
  }
}

nlohmann::json curvature_section(const Experiment& ex, const nlohmann::json& spec) {
  BregmanBall ball;
  const std::string side = spec.value("side", std::string("left"));
  if (side == "left") {
    ball.side = BallSide::left;
  } else if (side == "right") {
    ball.side = BallSide::right;
  } else {
    throw ConfigError("curvature side must be left or right");
  }
  ball.center = json_to_vector(spec.at("center"), "curvature center");
  ball.radius = spec.at("radius").get<double>();
  const CurvatureBounds cb =
      curvature_bounds(ex.gen, ball, spec.value("boundary_samples", 64),
                       spec.value("seed", 0ULL), spec.value("directions", 32));
  return {{"kappa_lo", cb.kappa_lo},
          {"kappa_hi", cb.kappa_hi},
          {"inner_radius", cb.inner_radius},
          {"outer_radius", cb.outer_radius}};
}

int cmd_diag(const std::string& trace_path, const std::string& config_path,
             const GlobalFlags& flags) {
  const CsvTable input = read_csv(trace_path);
  const nlohmann::json cfg = load_config(config_path);
  const Experiment ex = parse_experiment(cfg, flags);
  const ExecutionResult res = execute(ex, std::nullopt);
  const std::string filled = render_csv(ex, res, true);
  check_round_trip(input, parse_csv(filled));

  const std::string stem = trace_stem(trace_path);
  const std::string diag_csv_path = out_path(flags, stem + ".diag.csv");
  write_text_file(diag_csv_path, filled);

  nlohmann::json report;
  report["transversality"] = to_string(classify_transversality(res.trace));
  report["gap"] = nullptr;
  report["probe"] = nullptr;
  try {
    const GapEstimate gap = detect_gap(res.trace);
    report["gap"] = gap_to_json(gap);
    report["probe"] = probe_to_json(angle_condition_probe(res.trace, gap.r_star));
  } catch (const TooShort&) {
    // Keep whichever sections were already filled; a probe that lacks usable
    // tail blocks must not discard a valid gap estimate.
  }

  const nlohmann::json diag_cfg = cfg.value("diag", nlohmann::json::object());
  if (diag_cfg.contains("curvature")) {
    report["curvature"] = curvature_section(ex, diag_cfg.at("curvature"));
  }
  std::string reach_csv_path;
  if (diag_cfg.contains("reach")) {
    if (ex.kind != "run") throw ConfigError("reach diagnostics need a plain run config");
    if (res.trace.size() == 0) throw ConfigError("reach diagnostics need a non-empty trace");
    const Block& last = res.trace.blocks.back();
    const ReachEstimate re = estimate_reach(ex.gen, *ex.B, last.b_plus, last.a_plus,
                                            diag_cfg.at("reach").value("grid", 1000));
    nlohmann::json rj{{"lambda", re.lambda},
                      {"capped", re.capped},
                      {"samples_used", re.samples_used},
                      {"method", re.method}};
    rj["value"] = std::isfinite(re.value) ? nlohmann::json(re.value) : nlohmann::json();
    rj["value_text"] = fmt17(re.value);
    report["reach"] = rj;
    std::ostringstream rc;
    rc << "lambda,radius,empty_interior_flag\n";
    for (const ReachProbe& p : re.probes) {
      rc << fmt17(p.lambda) << ',' << (std::isfinite(p.radius) ? fmt17(p.radius) : std::string())
         << ',' << (p.empty_interior ? 1 : 0) << '\n';
    }
    reach_csv_path = out_path(flags, stem + ".reach.csv");
    write_text_file(reach_csv_path, rc.str());
  }

  const std::string report_path = out_path(flags, stem + ".diag.json");
  write_text_file(report_path, report.dump(2) + "\n");
  if (!flags.quiet) {
    std::cout << "diag: " << diag_csv_path << "\n";
    std::cout << "report: " << report_path << "\n";
    if (!reach_csv_path.empty()) std::cout << "reach: " << reach_csv_path << "\n";
    std::cout << "transversality=" << report.at("transversality").get<std::string>() << "\n";
  }
  return exit_code_for(res.trace);
}

std::vector<Vector> sweep_starts(const nlohmann::json& cfg) {
  std::vector<Vector> starts;
  if (cfg.contains("starts")) {
    const auto& arr = cfg.at("starts");
    if (!arr.is_array()) throw ConfigError("starts must be an array of points");
    for (const auto& s : arr) starts.push_back(json_to_vector(s, "sweep start"));
  } else if (cfg.contains("start_grid")) {
    const auto& grid = cfg.at("start_grid");
    const Vector lo = json_to_vector(grid.at("lo"), "start_grid lo");
    const Vector hi = json_to_vector(grid.at("hi"), "start_grid hi");
    const std::vector<int> count = json_to_ints(grid.at("count"), "start_grid count");
    if (lo.size() != hi.size() || static_cast<int>(count.size()) != lo.size()) {
      throw ConfigError("start_grid lo, hi, count must have equal lengths");
    }
    long long total = 1;
    for (int c : count) {
      if (c < 1) throw ConfigError("start_grid count entries must be >= 1");
      total *= c;
      if (total > 1000000) throw ConfigError("start_grid is too large (over 1e6 points)");
    }
    // Row-major lattice: the last coordinate varies fastest.
    std::vector<int> idx(count.size(), 0);
    for (long long t = 0; t < total; ++t) {
      Vector p(lo.size());
      for (int d = 0; d < lo.size(); ++d) {
        p[d] = count[static_cast<size_t>(d)] == 1
                   ? lo[d]
                   : lo[d] + (hi[d] - lo[d]) * idx[static_cast<size_t>(d)] /
                                 (count[static_cast<size_t>(d)] - 1);
      }
      starts.push_back(std::move(p));
      for (int d = static_cast<int>(count.size()) - 1; d >= 0; --d) {
        if (++idx[static_cast<size_t>(d)] < count[static_cast<size_t>(d)]) break;
        idx[static_cast<size_t>(d)] = 0;
      }
    }
  }
  if (starts.empty()) throw ConfigError("sweep needs a non-empty starts list or start_grid");
  return starts;
}

struct SweepRow {
  Vector start;
  int blocks = 0;
  StopReason stop_reason = StopReason::max_iterations;
  double r_star = std::numeric_limits<double>::quiet_NaN();
  bool has_gap = false;
  bool feasible = false;
  std::optional<std::pair<Vector, Vector>> limit_pair;
  std::string error;
};

int cmd_sweep(const std::string& config_path, const GlobalFlags& flags) {
  const nlohmann::json cfg = load_config(config_path);
  const Experiment ex = parse_experiment(cfg, flags);
  const std::vector<Vector> starts = sweep_starts(cfg);
  const int n = static_cast<int>(starts.size());
  std::vector<SweepRow> rows(static_cast<size_t>(n));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    SweepRow& row = rows[static_cast<size_t>(i)];
    row.start = starts[static_cast<size_t>(i)];
    try {
      const ExecutionResult res = execute(ex, starts[static_cast<size_t>(i)]);
      row.blocks = res.trace.size();
      row.stop_reason = res.trace.stop_reason;
      try {
        const GapEstimate gap = detect_gap(res.trace);
        row.has_gap = true;
        row.r_star = gap.r_star;
        row.feasible = gap.feasible;
        row.limit_pair = gap.limit_pair;
      } catch (const TooShort&) {
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }
  for (const SweepRow& row : rows) {
    if (!row.error.empty()) throw SolverFailure("sweep run failed: " + row.error);
  }

  std::ostringstream out;
  out << "index,start,blocks,stop_reason,r_star,feasible,limit_b,limit_a\n";
  for (int i = 0; i < n; ++i) {
    const SweepRow& row = rows[static_cast<size_t>(i)];
    out << i << ',' << join_coords(row.start) << ',' << row.blocks << ','
        << to_string(row.stop_reason) << ',' << (row.has_gap ? fmt17(row.r_star) : std::string())
        << ',' << (row.has_gap ? std::string(row.feasible ? "1" : "0") : std::string()) << ',';
    if (row.limit_pair.has_value()) {
      out << join_coords(row.limit_pair->first) << ',' << join_coords(row.limit_pair->second);
    } else {
      out << ',';
    }
    out << '\n';
  }
  const std::string stem = config_stem(cfg, config_path);
  const std::string sweep_path = out_path(flags, stem + ".sweep.csv");
  write_text_file(sweep_path, out.str());
  if (!flags.quiet) {
    std::cout << "sweep: " << sweep_path << "\n";
    std::cout << "starts=" << n << "\n";
  }
  return 0;
}

int cmd_list_generators() {
  for (const std::string& name : generator_names()) std::cout << name << "\n";
  return 0;
}

int cmd_list_fixtures() {
  const fs::path dir = fixtures_dir();
  if (!fs::exists(dir) || !fs::is_directory(dir)) {
    throw ConfigError("fixture directory not found: " + dir.string());
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  for (const std::string& name : names) std::cout << name << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Alternating Bregman projections: experiment runs, diagnostics, rate reports"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags flags;
  unsigned long long seed_val = 0;
  int max_iters_val = 0;
  auto* out_opt = app.add_option("--out", flags.out_dir, "Output directory");
  out_opt->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed_val, "Override the solver RNG seed");
  auto* iters_opt =
      app.add_option("--max-iters", max_iters_val, "Override the maximum block count");
  app.add_flag("--quiet", flags.quiet, "Suppress normal stdout reporting");

  std::string config_path, trace_path;
  std::string rate_column = "step_b";

  auto* run_cmd = app.add_subcommand("run", "Execute a config; write trace CSV + summary JSON");
  run_cmd->add_option("--config", config_path, "Experiment config JSON")->required();

  auto* rate_cmd = app.add_subcommand("rate", "Fit a convergence rate to a trace CSV column");
  rate_cmd->add_option("trace", trace_path, "Trace CSV path")->required();
  rate_cmd->add_option("--column", rate_column, "CSV column to fit")->capture_default_str();

  auto* diag_cmd =
      app.add_subcommand("diag", "Fill diagnostic columns and write probe/report JSON");
  diag_cmd->add_option("trace", trace_path, "Trace CSV path")->required();
  diag_cmd->add_option("--config", config_path, "Config that produced the trace")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of starts; one summary row each");
  sweep_cmd->add_option("--config", config_path, "Sweep config JSON")->required();

  auto* lg_cmd = app.add_subcommand("list-generators", "List registered generator names");
  auto* lf_cmd = app.add_subcommand("list-fixtures", "List shipped fixture configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (seed_opt->count() > 0) flags.seed = seed_val;
  if (iters_opt->count() > 0) {
    if (max_iters_val <= 0) {
      std::cerr << "error: --max-iters must be positive\n";
      return 1;
    }
    flags.max_iters = max_iters_val;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(config_path, flags);
    if (rate_cmd->parsed()) return cmd_rate(trace_path, rate_column, flags);
    if (diag_cmd->parsed()) return cmd_diag(trace_path, config_path, flags);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, flags);
    if (lg_cmd->parsed()) return cmd_list_generators();
    if (lf_cmd->parsed()) return cmd_list_fixtures();
  } catch (const SolverFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DomainViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace bregalt
