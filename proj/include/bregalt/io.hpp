#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "bregalt/alternator.hpp"
#include "bregalt/diagnostics.hpp"
#include "bregalt/em.hpp"
#include "bregalt/generator.hpp"
#include "bregalt/sets.hpp"
#include "bregalt/types.hpp"

namespace bregalt {

// Shortest decimal form that round-trips a binary double (up to 17
// significant digits); used for every number in CSV and JSON outputs so that
// identical runs produce byte-identical files.
std::string fmt17(double v);

// ---------------------------------------------------------------------------
// Trace CSV. Fixed column order:
//   k,D_bk_ak,D_bkm1_ak,step_b,step_a,angle_rl,angle_lr,ell_rl
// NaN / missing values are written as empty cells. The three diagnostics
// columns are empty unless filled via TraceDiagnostics.

struct TraceDiagnostics {
  std::vector<std::optional<double>> angle_rl;
  std::vector<std::optional<double>> angle_lr;
  std::vector<std::optional<double>> ell_rl;
};

TraceDiagnostics compute_trace_diagnostics(const Generator& g, const Trace& trace);

std::string trace_to_csv(const Trace& trace, const TraceDiagnostics* diag = nullptr);

// Adds step_role and fixed_point_residual columns (residual on the last row).
std::string em_trace_to_csv(const EmTrace& em, const TraceDiagnostics* diag = nullptr);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // raw cells, empty string = missing

  int column(const std::string& name) const;  // -1 when absent
  std::vector<double> numeric_column(const std::string& name) const;  // skips empties
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// JSON -> numeric conversions with uniform ConfigError reporting.
Vector json_to_vector(const nlohmann::json& j, const char* what = "vector");
std::vector<int> json_to_ints(const nlohmann::json& j, const char* what = "indices");

// ---------------------------------------------------------------------------
// JSON (de)serialization of configs.

nlohmann::json generator_to_json(const Generator& g);
Generator generator_from_json(const nlohmann::json& j);

nlohmann::json set_to_json(const SetSpec& s);
SetSpec set_from_json(const nlohmann::json& j);

StopRules stop_rules_from_json(const nlohmann::json& j);
SolverOptions solver_options_from_json(const nlohmann::json& j);

nlohmann::json gap_to_json(const GapEstimate& gap);
nlohmann::json rate_to_json(const RateEstimate& rate);
nlohmann::json probe_to_json(const AngleConditionProbe& probe);

// Directory holding the shipped experiment configs: the BREGALT_FIXTURES
// environment variable when set, else the compiled-in default.
std::string fixtures_dir();

}  // namespace bregalt
