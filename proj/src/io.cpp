#include "bregalt/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace bregalt {

std::string fmt17(double v) {
  char buf[64];
  // Shortest precision that round-trips; falls back to 17 significant digits.
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = std::strtod(buf, nullptr);
    if (back == v || (std::isnan(back) && std::isnan(v))) return buf;
  }
  return buf;
}

Vector json_to_vector(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be a numeric array");
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + " must be a numeric array");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw ConfigError(std::string(what) + " contains a non-finite entry");
  }
  return v;
}

std::vector<int> json_to_ints(const nlohmann::json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an integer array");
  std::vector<int> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number_integer()) throw ConfigError(std::string(what) + " must be an integer array");
    out.push_back(e.get<int>());
  }
  return out;
}

namespace {

std::string cell(double v) { return std::isnan(v) ? std::string() : fmt17(v); }

std::string cell(const std::optional<double>& v) {
  return v.has_value() ? cell(*v) : std::string();
}

nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

// rows[i] becomes row i of the matrix.
Matrix rows_from_json(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ConfigError(std::string(what) + " must be a non-empty array of rows");
  const int rows = static_cast<int>(j.size());
  Vector first = json_to_vector(j[0], what);
  Matrix m(rows, first.size());
  m.row(0) = first;
  for (int r = 1; r < rows; ++r) {
    Vector row = json_to_vector(j[r], what);
    if (row.size() != m.cols()) throw ConfigError(std::string(what) + " rows have unequal lengths");
    m.row(r) = row;
  }
  return m;
}

nlohmann::json matrix_rows_to_json(const Matrix& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) arr.push_back(vector_to_json(m.row(r)));
  return arr;
}

}  // namespace

TraceDiagnostics compute_trace_diagnostics(const Generator& g, const Trace& trace) {
  TraceDiagnostics d;
  const int n = trace.size();
  d.angle_rl.resize(n);
  d.angle_lr.resize(n);
  d.ell_rl.resize(n);
  for (int k = 0; k < n; ++k) {
    const Block& blk = trace.blocks[static_cast<size_t>(k)];
    d.angle_rl[static_cast<size_t>(k)] = angle_rl(blk);
    d.angle_lr[static_cast<size_t>(k)] = angle_lr(g, blk);
    d.ell_rl[static_cast<size_t>(k)] = three_point_ell(g, blk, ThreePointSide::rl);
  }
  return d;
}

namespace {

void append_trace_rows(std::ostringstream& out, const Trace& trace, const TraceDiagnostics* diag,
                       const EmTrace* em) {
  const int n = trace.size();
  for (int k = 0; k < n; ++k) {
    const Block& blk = trace.blocks[static_cast<size_t>(k)];
    out << (k + 1) << ',' << cell(blk.D_bplus_aplus) << ',' << cell(blk.D_b_aplus) << ','
        << cell(trace.step_b[static_cast<size_t>(k)]) << ','
        << cell(trace.step_a[static_cast<size_t>(k)]);
    if (diag != nullptr && k < static_cast<int>(diag->angle_rl.size())) {
      out << ',' << cell(diag->angle_rl[static_cast<size_t>(k)]) << ','
          << cell(diag->angle_lr[static_cast<size_t>(k)]) << ','
          << cell(diag->ell_rl[static_cast<size_t>(k)]);
    } else {
      out << ",,,";
    }
    if (em != nullptr) {
      const std::string step_role = trace.orientation == Orientation::lr
                                        ? em->left_role + "/" + em->right_role
                                        : em->right_role + "/" + em->left_role;
      out << ',' << step_role << ','
          << (k + 1 == n ? cell(em->fixed_point_residual) : std::string());
    }
    out << '\n';
  }
}

}  // namespace

std::string trace_to_csv(const Trace& trace, const TraceDiagnostics* diag) {
  std::ostringstream out;
  out << "k,D_bk_ak,D_bkm1_ak,step_b,step_a,angle_rl,angle_lr,ell_rl\n";
  append_trace_rows(out, trace, diag, nullptr);
  return out.str();
}

std::string em_trace_to_csv(const EmTrace& em, const TraceDiagnostics* diag) {
  std::ostringstream out;
  out << "k,D_bk_ak,D_bkm1_ak,step_b,step_a,angle_rl,angle_lr,ell_rl,step_role,"
         "fixed_point_residual\n";
  append_trace_rows(out, em.trace, diag, &em);
  return out.str();
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> CsvTable::numeric_column(const std::string& name) const {
  const int c = column(name);
  if (c < 0) throw ConfigError("missing CSV column: " + name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    if (c >= static_cast<int>(row.size())) continue;
    const std::string& s = row[static_cast<size_t>(c)];
    if (s.empty()) continue;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ConfigError("non-numeric cell in column " + name + ": " + s);
    out.push_back(v);
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw ConfigError("empty CSV content");
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open CSV file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file for writing: " + path);
  out << content;
  if (!out) throw ConfigError("failed writing output file: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json generator_to_json(const Generator& g) {
  return {{"name", g.name}, {"dim", g.dim}, {"params", g.params}};
}

Generator generator_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("name") || !j.contains("dim")) {
    throw ConfigError("generator spec needs {name, dim}");
  }
  const std::string name = j.at("name").get<std::string>();
  const int dim = j.at("dim").get<int>();
  if (dim <= 0) throw ConfigError("generator dim must be positive");
  return make_generator(name, dim, j.value("params", nlohmann::json::object()));
}

nlohmann::json set_to_json(const SetSpec& s) {
  nlohmann::json j;
  if (const auto* a = std::get_if<AffineSet>(&s.body)) {
    j["type"] = "affine";
    j["point"] = vector_to_json(a->point);
    nlohmann::json dirs = nlohmann::json::array();
    for (int c = 0; c < a->basis.cols(); ++c) dirs.push_back(vector_to_json(a->basis.col(c)));
    j["directions"] = dirs;
  } else if (const auto* p = std::get_if<PolyhedronSet>(&s.body)) {
    j["type"] = "polyhedron";
    j["normals"] = matrix_rows_to_json(p->normals);
    j["offsets"] = vector_to_json(p->offsets);
  } else if (const auto* f = std::get_if<FiniteSet>(&s.body)) {
    j["type"] = "finite";
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& pt : f->points) pts.push_back(vector_to_json(pt));
    j["points"] = pts;
  } else if (const auto* pm = std::get_if<ParametricSet>(&s.body)) {
    j["type"] = "parametric";
    j["map"] = {{"name", pm->map.name}, {"params", pm->map.params}};
    j["grid"] = pm->grid;
  } else if (const auto* d = std::get_if<DataSetKL>(&s.body)) {
    j["type"] = "data_kl";
    j["group"] = d->group;
    j["target"] = vector_to_json(d->target);
    j["probability"] = d->probability;
  } else if (const auto* da = std::get_if<DualAffineSet>(&s.body)) {
    j["type"] = "dual_affine";
    j["index"] = da->index;
    j["value"] = vector_to_json(da->value);
  }
  j["convex"] = s.declared_convex;
  j["membership_tol"] = s.membership_tol;
  if (!s.label.empty()) j["label"] = s.label;
  return j;
}

SetSpec set_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("set spec needs a type field");
  const std::string type = j.at("type").get<std::string>();
  const std::string label = j.value("label", std::string());
  SetSpec s;
  if (type == "affine") {
    Vector point = json_to_vector(j.at("point"), "affine point");
    if (!j.contains("directions")) throw ConfigError("affine set needs directions");
    const auto& dirs = j.at("directions");
    if (!dirs.is_array() || dirs.empty()) throw ConfigError("affine directions must be non-empty");
    Matrix basis(point.size(), static_cast<int>(dirs.size()));
    for (int c = 0; c < basis.cols(); ++c) {
      Vector d = json_to_vector(dirs[static_cast<size_t>(c)], "affine direction");
      if (d.size() != point.size()) throw ConfigError("affine direction dimension mismatch");
      basis.col(c) = d;
    }
    s = make_affine(std::move(point), std::move(basis), label);
  } else if (type == "polyhedron") {
    Matrix normals = rows_from_json(j.at("normals"), "polyhedron normals");
    Vector offsets = json_to_vector(j.at("offsets"), "polyhedron offsets");
    if (normals.rows() != offsets.size()) throw ConfigError("polyhedron rows/offsets mismatch");
    s = make_polyhedron(std::move(normals), std::move(offsets), label);
  } else if (type == "finite") {
    if (!j.contains("points") || !j.at("points").is_array() || j.at("points").empty()) {
      throw ConfigError("finite set needs a non-empty points array");
    }
    std::vector<Vector> pts;
    for (const auto& p : j.at("points")) pts.push_back(json_to_vector(p, "finite point"));
    s = make_finite(std::move(pts), label);
  } else if (type == "parametric") {
    if (!j.contains("map") || !j.at("map").is_object()) throw ConfigError("parametric set needs a map object");
    const auto& m = j.at("map");
    ParametricMap map = make_parametric_map(m.at("name").get<std::string>(),
                                            m.value("params", nlohmann::json::object()));
    s = make_parametric(std::move(map), j.value("grid", 1024), label);
  } else if (type == "data_kl") {
    s = make_data_set_kl(json_to_ints(j.at("group"), "data_kl group"),
                         json_to_vector(j.at("target"), "data_kl target"),
                         j.value("probability", true), label);
  } else if (type == "dual_affine") {
    s = make_dual_affine(json_to_ints(j.at("index"), "dual_affine index"),
                         json_to_vector(j.at("value"), "dual_affine value"), label);
  } else {
    throw ConfigError("unknown set type: " + type);
  }
  if (j.contains("convex")) s.declared_convex = j.at("convex").get<bool>();
  if (j.contains("membership_tol")) s.membership_tol = j.at("membership_tol").get<double>();
  return s;
}

StopRules stop_rules_from_json(const nlohmann::json& j) {
  StopRules r;
  if (j.is_null()) return r;
  if (!j.is_object()) throw ConfigError("stop rules must be an object");
  r.max_iterations = j.value("max_iterations", r.max_iterations);
  r.divergence_stagnation = j.value("divergence_stagnation", r.divergence_stagnation);
  r.divergence_floor = j.value("divergence_floor", r.divergence_floor);
  r.step_stagnation = j.value("step_stagnation", r.step_stagnation);
  r.interiority_margin = j.value("interiority_margin", r.interiority_margin);
  if (r.max_iterations <= 0) throw ConfigError("max_iterations must be positive");
  return r;
}

SolverOptions solver_options_from_json(const nlohmann::json& j) {
  SolverOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw ConfigError("solver options must be an object");
  o.max_iterations = j.value("max_iterations", o.max_iterations);
  o.tol = j.value("tol", o.tol);
  o.armijo = j.value("armijo", o.armijo);
  o.backtrack = j.value("backtrack", o.backtrack);
  o.multistart = j.value("multistart", o.multistart);
  o.seed = j.value("seed", o.seed);
  const std::string exec = j.value("exec", std::string("openmp"));
  if (exec == "serial") {
    o.exec = par::Exec::serial;
  } else if (exec == "openmp") {
    o.exec = par::Exec::openmp;
  } else {
    throw ConfigError("solver exec must be serial or openmp");
  }
  return o;
}

nlohmann::json gap_to_json(const GapEstimate& gap) {
  nlohmann::json j{{"r_star", gap.r_star},
                   {"tail_mean", gap.tail_mean},
                   {"uncertainty", gap.uncertainty},
                   {"feasible", gap.feasible}};
  if (gap.limit_pair.has_value()) {
    j["limit_pair"] = {{"b", vector_to_json(gap.limit_pair->first)},
                       {"a", vector_to_json(gap.limit_pair->second)}};
  } else {
    j["limit_pair"] = nullptr;
  }
  return j;
}

nlohmann::json rate_to_json(const RateEstimate& rate) {
  return {{"kind", to_string(rate.kind)},
          {"q", rate.q},
          {"rho", rate.rho},
          {"fit_window", {rate.fit_window.first, rate.fit_window.second}},
          {"residual", rate.residual}};
}

nlohmann::json probe_to_json(const AngleConditionProbe& probe) {
  return {{"sigma_family", probe.sigma_family},
          {"theta_grid", probe.theta_grid},
          {"gammas", probe.gammas},
          {"theta_best", probe.theta_best},
          {"gamma_lower", probe.gamma_lower},
          {"violations", probe.violations}};
}

std::string fixtures_dir() {
  if (const char* env = std::getenv("BREGALT_FIXTURES")) {
    if (env[0] != '\0') return env;
  }
#ifdef BREGALT_DEFAULT_FIXTURES
  return BREGALT_DEFAULT_FIXTURES;
#else
  return "fixtures";
#endif
}

}  // namespace bregalt
