#include "mvexpectile/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mvexpectile/analysis.hpp"
#include "mvexpectile/properties.hpp"

namespace mvexpectile::cli {

using nlohmann::json;

namespace {

const std::map<std::string, Command>& command_table() {
  static const std::map<std::string, Command> table = {
      {"solve", Command::Solve},           {"empirical", Command::Empirical},
      {"estimate", Command::Estimate},     {"sweep-alpha", Command::SweepAlpha},
      {"sweep-steps", Command::SweepSteps}, {"props", Command::Props}};
  return table;
}

constexpr const char* kVersion = "mvexpectile 1.0.0";

struct HelpRequested {
  std::string text;
};

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError(field + ": " + why);
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(const std::string& text, const std::string& field) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    fail(field, "not a number: '" + text + "'");
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& field) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, field));
  if (out.empty()) fail(field, "empty list");
  return out;
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  return j.get<double>();
}

std::size_t get_count(const json& j, const std::string& field, std::size_t min = 1) {
  if (!j.is_number()) fail(field, "expected an integer");
  const double v = j.get<double>();
  if (v != std::floor(v) || v < static_cast<double>(min) || v > 1e15)
    fail(field, "expected an integer >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

std::vector<double> get_numbers(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) fail(field, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(get_number(e, field));
  return out;
}

MarginalSpec marginal_from_json(const json& j) {
  if (!j.is_object() || !j.contains("family")) fail("model.marginals", "expected {family, ...}");
  const std::string fam = j.at("family").get<std::string>();
  if (fam == "exponential" || fam == "exp") {
    return MarginalSpec::exponential(get_number(j.at("rate"), "model.marginals.rate"));
  }
  if (fam == "pareto") {
    return MarginalSpec::pareto(get_number(j.at("shape"), "model.marginals.shape"),
                                get_number(j.at("scale"), "model.marginals.scale"));
  }
  fail("model.marginals.family", "unknown family '" + fam + "'");
}

ModelSpec model_from_json(const json& j) {
  if (j.is_string()) return parse_model(j.get<std::string>());
  if (!j.is_object() || !j.contains("marginals")) fail("model", "expected a string or {marginals, copula}");
  std::vector<MarginalSpec> marginals;
  for (const auto& m : j.at("marginals")) marginals.push_back(marginal_from_json(m));
  CopulaSpec copula = CopulaSpec::independence();
  if (j.contains("copula")) {
    const json& c = j.at("copula");
    const std::string fam = c.is_string() ? c.get<std::string>() : c.value("family", "");
    if (fam == "fgm") copula = CopulaSpec::fgm(get_number(c.at("theta"), "model.copula.theta"));
    else if (fam != "independence") fail("model.copula", "unknown copula '" + fam + "'");
  }
  return ModelSpec(std::move(marginals), copula);
}

ScoringMatrix sigma_from_json(const json& j, std::size_t dim) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "identity") return ScoringMatrix::identity(dim);
    if (s == "ones") return ScoringMatrix::ones(dim);
    fail("sigma", "expected 'identity', 'ones' or a matrix literal");
  }
  if (!j.is_array() || j.empty()) fail("sigma", "expected 'identity', 'ones' or a matrix literal");
  const auto d = static_cast<Eigen::Index>(j.size());
  Matrix m(d, d);
  for (Eigen::Index r = 0; r < d; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) fail("sigma", "matrix must be square");
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = get_number(row[static_cast<std::size_t>(c)], "sigma");
  }
  return ScoringMatrix(std::move(m));
}

StepSchedule schedule_from_json(const json& j, const std::string& field) {
  if (!j.is_object()) fail(field, "expected {a, b, kappa}");
  StepSchedule s;
  for (const auto& [key, value] : j.items()) {
    if (key == "a") s.a = get_number(value, field + ".a");
    else if (key == "b") s.b = get_number(value, field + ".b");
    else if (key == "kappa") s.kappa = get_number(value, field + ".kappa");
    else fail(field + "." + key, "unknown key");
  }
  try {
    s.validate();
  } catch (const Error& e) {
    fail(field, e.what());
  }
  return s;
}

json text_to_json(const std::string& text) {
  const std::string t = trim(text);
  if (!t.empty() && (t.front() == '[' || t.front() == '{')) {
    try {
      return json::parse(t);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed JSON value: ") + e.what());
    }
  }
  return t;
}

bool needs_model(Command c) { return c != Command::Empirical && c != Command::Props; }

std::size_t data_dim(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  }
  fail("data", "file is empty");
}

RunConfig from_json_impl(const json& j, std::uint64_t default_seed) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  static const std::vector<std::string> known = {
      "command",  "model",      "data",   "sample_size",    "sigma",     "alpha",
      "alphas",   "p",          "tol",    "max_iter",       "iterations", "runs",
      "seed",     "schedule",   "schedules", "x0",          "threads",   "trace_every",
      "validation_draws", "instances", "property_tol", "output", "trace"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) fail(key, "unknown key");
  }

  RunConfig cfg;
  cfg.seed = default_seed;
  if (!j.contains("command") || !j.at("command").is_string()) fail("command", "required");
  const auto it = command_table().find(j.at("command").get<std::string>());
  if (it == command_table().end()) fail("command", "unknown command '" + j.at("command").get<std::string>() + "'");
  cfg.command = it->second;

  try {
    if (j.contains("seed")) cfg.seed = get_count(j.at("seed"), "seed", 0);
    if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
  } catch (const Error& e) {
    fail("model", e.what());
  }
  if (j.contains("data")) {
    if (!j.at("data").is_string()) fail("data", "expected a path");
    cfg.data_path = j.at("data").get<std::string>();
    if (!std::filesystem::is_regular_file(cfg.data_path)) fail("data", "no such file '" + cfg.data_path + "'");
  }
  if (j.contains("sample_size")) cfg.sample_size = get_count(j.at("sample_size"), "sample_size", 2);

  if (needs_model(cfg.command) && !cfg.model) fail("model", "required for " + std::string(command_name(cfg.command)));
  if (cfg.command == Command::Empirical && !cfg.model && cfg.data_path.empty())
    fail("data", "empirical needs either data or model");
  if (cfg.command == Command::Empirical && cfg.model && !cfg.data_path.empty())
    fail("data", "give either data or model, not both");

  std::size_t dim = 0;
  if (cfg.model) dim = cfg.model->dim();
  else if (!cfg.data_path.empty()) dim = data_dim(cfg.data_path);

  if (j.contains("p")) {
    cfg.p = get_number(j.at("p"), "p");
    if (!(*cfg.p >= 1.0) || !std::isfinite(*cfg.p)) fail("p", "must satisfy 1 <= p < inf");
  }
  if (cfg.command != Command::Props) {
    const json sig = j.contains("sigma") ? j.at("sigma") : json(cfg.p ? "ones" : "");
    if (sig.is_string() && sig.get<std::string>().empty()) fail("sigma", "required");
    try {
      cfg.sigma = sigma_from_json(sig, dim);
    } catch (const Error& e) {
      fail("sigma", e.what());
    }
    if (cfg.sigma->dim() != dim)
      fail("sigma", "dimension " + std::to_string(cfg.sigma->dim()) + " does not match the data dimension " +
                        std::to_string(dim));
  }

  auto check_level = [](double a, const std::string& field) {
    try {
      Level{a};
    } catch (const Error& e) {
      fail(field, e.what());
    }
  };
  if (j.contains("alpha") && j.contains("alphas")) fail("alpha", "give either alpha or alphas");
  if (j.contains("alpha")) cfg.alphas = {get_number(j.at("alpha"), "alpha")};
  if (j.contains("alphas")) cfg.alphas = get_numbers(j.at("alphas"), "alphas");
  if (cfg.alphas.empty()) {
    if (cfg.command == Command::SweepAlpha) cfg.alphas = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    else if (cfg.command != Command::Props) fail("alpha", "required");
  }
  for (double a : cfg.alphas) check_level(a, j.contains("alphas") ? "alphas" : "alpha");
  std::sort(cfg.alphas.begin(), cfg.alphas.end());

  if (j.contains("tol")) {
    const double tol = get_number(j.at("tol"), "tol");
    if (!(tol > 0.0)) fail("tol", "must be positive");
    cfg.newton.tol = cfg.empirical.tol = tol;
  }
  if (j.contains("max_iter")) {
    const auto m = get_count(j.at("max_iter"), "max_iter");
    if (m > 100000000) fail("max_iter", "too large");
    cfg.newton.max_iter = cfg.empirical.max_iter = static_cast<int>(m);
  }

  if (j.contains("iterations")) cfg.rm.iterations = get_count(j.at("iterations"), "iterations");
  if (j.contains("runs")) cfg.rm.runs = get_count(j.at("runs"), "runs");
  if (j.contains("threads")) cfg.rm.threads = static_cast<unsigned>(get_count(j.at("threads"), "threads"));
  if (j.contains("trace_every")) cfg.rm.trace_every = get_count(j.at("trace_every"), "trace_every", 0);
  if (j.contains("validation_draws"))
    cfg.rm.validation_draws = get_count(j.at("validation_draws"), "validation_draws", 2);
  cfg.rm.seed = cfg.seed;
  if (j.contains("schedule")) cfg.rm.schedule = schedule_from_json(j.at("schedule"), "schedule");
  if (j.contains("schedules")) {
    const json& list = j.at("schedules");
    if (!list.is_array() || list.empty()) fail("schedules", "expected a non-empty array");
    for (const auto& s : list) cfg.schedules.push_back(schedule_from_json(s, "schedules"));
  } else if (cfg.command == Command::SweepSteps) {
    cfg.schedules = {{1.0, 0.0, 1.0}, {1.0, 0.0, 0.6}, {1.0, 0.0, 0.9}};
  }
  if (j.contains("x0")) {
    const auto v = get_numbers(j.at("x0"), "x0");
    if (v.size() != dim) fail("x0", "length does not match the model dimension");
    cfg.rm.x0 = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  if (j.contains("instances")) cfg.instances = get_count(j.at("instances"), "instances");
  if (j.contains("property_tol")) {
    cfg.property_tol = get_number(j.at("property_tol"), "property_tol");
    if (!(cfg.property_tol >= 0.0)) fail("property_tol", "must be non-negative");
  }
  if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
  if (j.contains("trace")) cfg.trace = j.at("trace").get<std::string>();
  if (!cfg.trace.empty() && cfg.rm.trace_every == 0)
    cfg.rm.trace_every = std::max<std::size_t>(1, cfg.rm.iterations / 100);

  try {
    cfg.rm.validate();
  } catch (const Error& e) {
    fail("schedule", e.what());
  }
  return cfg;
}

RunConfig from_json(const json& j, std::uint64_t default_seed) {
  try {
    return from_json_impl(j, default_seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

// --- output -----------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  CsvWriter& cell(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  CsvWriter& cell(double v) { return cell(format_double(v)); }
  CsvWriter& cell(std::size_t v) { return cell(std::to_string(v)); }
  CsvWriter& cell(int v) { return cell(std::to_string(v)); }
  CsvWriter& cells(const Vector& v) {
    for (double e : v) cell(e);
    return *this;
  }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ostream& out_;
  bool first_ = true;
};

std::vector<std::string> coord_names(const std::string& prefix, std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t k = 1; k <= d; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

void header(CsvWriter& w, std::initializer_list<std::vector<std::string>> groups) {
  for (const auto& g : groups)
    for (const auto& name : g) w.cell(name);
  w.end();
}

class OutputTarget {
 public:
  OutputTarget(const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
      stream_ = &fallback;
      return;
    }
    file_.open(path);
    if (!file_) throw ConfigError("output: cannot open '" + path + "' for writing");
    stream_ = &file_;
  }
  std::ostream& get() { return *stream_; }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

std::string point_text(const Vector& x) {
  std::string s = "(";
  for (Eigen::Index k = 0; k < x.size(); ++k) s += (k ? ", " : "") + format_double(x[k]);
  return s + ")";
}

int run_solve(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const std::size_t d = cfg.model->dim();
  std::vector<std::pair<double, ExpectileResult>> results;
  for (double a : cfg.alphas)
    results.emplace_back(a, solve_analytic(*cfg.model, *cfg.sigma, Level(a), cfg.newton));

  OutputTarget target(cfg.output, out);
  CsvWriter w(target.get());
  header(w, {{"alpha"}, coord_names("x_", d), {"residual_norm", "iterations"}});
  bool ok = true;
  for (const auto& [a, r] : results) {
    w.cell(a).cells(r.point).cell(r.residual_norm).cell(r.iterations).end();
    ok = ok && r.converged;
  }
  if (!cfg.trace.empty()) {
    OutputTarget tr(cfg.trace, out);
    CsvWriter t(tr.get());
    header(t, {{"alpha", "iteration"}, coord_names("x_", d)});
    for (const auto& [a, r] : results)
      for (std::size_t i = 0; i < r.trace.size(); ++i) t.cell(a).cell(i).cells(r.trace[i]).end();
  }
  const auto& last = results.back().second;
  log << "solve: " << results.size() << " level(s), last x = " << point_text(last.point)
      << ", residual " << format_double(last.residual_norm) << (ok ? "" : " [NOT CONVERGED]") << '\n';
  return ok ? kExitOk : kExitNotConverged;
}

int run_empirical(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const SampleMatrix data = cfg.data_path.empty() ? sample(*cfg.model, cfg.sample_size, cfg.seed)
                                                  : read_csv_sample(cfg.data_path);
  const std::size_t d = data.dim();
  std::vector<std::pair<double, ExpectileResult>> results;
  for (double a : cfg.alphas) {
    if (cfg.p) {
      LpConfig lp;
      lp.tol = cfg.empirical.tol;
      lp.max_iter = std::max(lp.max_iter, cfg.empirical.max_iter);
      results.emplace_back(a, solve_lp(data, *cfg.p, Level(a), lp));
    } else {
      results.emplace_back(a, solve_empirical(data, *cfg.sigma, Level(a), cfg.empirical));
    }
  }

  OutputTarget target(cfg.output, out);
  CsvWriter w(target.get());
  header(w, {{"alpha"}, coord_names("x_", d), {"residual_norm", "iterations"}});
  bool ok = true;
  for (const auto& [a, r] : results) {
    w.cell(a).cells(r.point).cell(r.residual_norm).cell(r.iterations).end();
    ok = ok && r.converged;
  }
  if (!cfg.trace.empty()) {
    OutputTarget tr(cfg.trace, out);
    CsvWriter t(tr.get());
    header(t, {{"alpha", "iteration"}, coord_names("x_", d)});
    for (const auto& [a, r] : results)
      for (std::size_t i = 0; i < r.trace.size(); ++i) t.cell(a).cell(i).cells(r.trace[i]).end();
  }
  log << "empirical: n = " << data.rows() << ", last x = " << point_text(results.back().second.point)
      << (ok ? "" : " [NOT CONVERGED]") << '\n';
  return ok ? kExitOk : kExitNotConverged;
}

int run_estimate(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const std::size_t d = cfg.model->dim();
  std::vector<std::pair<double, RmReport>> reports;
  for (double a : cfg.alphas) reports.emplace_back(a, rm_estimate(*cfg.model, *cfg.sigma, Level(a), cfg.rm));

  OutputTarget target(cfg.output, out);
  CsvWriter w(target.get());
  header(w, {{"alpha"}, coord_names("x_", d),
             {"residual_norm", "iterations", "runs", "diverged_runs"}});
  bool ok = true;
  for (const auto& [a, rep] : reports) {
    w.cell(a).cells(rep.result.point).cell(rep.result.residual_norm).cell(rep.result.iterations)
        .cell(cfg.rm.runs).cell(rep.diverged_runs).end();
    ok = ok && rep.result.converged;
  }
  if (!cfg.trace.empty()) {
    OutputTarget tr(cfg.trace, out);
    CsvWriter t(tr.get());
    header(t, {{"alpha", "run", "step"}, coord_names("x_", d)});
    for (const auto& [a, rep] : reports)
      for (std::size_t r = 0; r < rep.runs.size(); ++r)
        for (std::size_t i = 0; i < rep.runs[r].trace.size(); ++i)
          t.cell(a).cell(r).cell(rep.runs[r].trace_steps[i]).cells(rep.runs[r].trace[i]).end();
  }
  const auto& last = reports.back().second;
  log << "estimate: " << cfg.rm.runs << " runs x " << cfg.rm.iterations << " steps, x = "
      << point_text(last.result.point) << ", validation residual "
      << format_double(last.result.residual_norm) << (ok ? "" : " [NOT CONVERGED]") << '\n';
  return ok ? kExitOk : kExitNotConverged;
}

int run_sweep_alpha(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const std::size_t d = cfg.model->dim();
  AsymptoticOptions opts;
  opts.newton = cfg.newton;
  const AsymptoticTable table = asymptotic_sweep(*cfg.model, *cfg.sigma, cfg.alphas, opts);

  OutputTarget target(cfg.output, out);
  CsvWriter w(target.get());
  header(w, {{"alpha"}, coord_names("x_", d), {"residual_norm", "iterations"}});
  for (const auto& row : table.rows)
    w.cell(row.alpha).cells(row.result.point).cell(row.result.residual_norm)
        .cell(row.result.iterations).end();
  log << "sweep-alpha: " << table.rows.size() << " levels, " << table.failed_solves
      << " failed; increasing = " << (table.increasing ? "yes" : "no")
      << ", distance to 0 at smallest level = " << format_double(table.lower_gap)
      << ", x / mean at largest level = " << format_double(table.upper_ratio) << '\n';
  return table.failed_solves == 0 ? kExitOk : kExitNotConverged;
}

int run_sweep_steps(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const std::size_t d = cfg.model->dim();
  SweepBudget budget;
  budget.iterations = cfg.rm.iterations;
  budget.runs = cfg.rm.runs;
  budget.seed = cfg.seed;
  budget.threads = cfg.rm.threads;
  budget.trace_every = cfg.rm.trace_every != 0 ? cfg.rm.trace_every
                                               : std::max<std::size_t>(1, cfg.rm.iterations / 100);
  const Level level(cfg.alphas.front());
  const ScheduleSweep sweep = step_schedule_sweep(*cfg.model, *cfg.sigma, level, cfg.schedules, budget);

  OutputTarget target(cfg.output, out);
  CsvWriter w(target.get());
  header(w, {{"a", "b", "kappa"}, coord_names("x_", d), coord_names("rel_error_", d),
             {"max_rel_error"}});
  for (const auto& row : sweep.rows)
    w.cell(row.schedule.a).cell(row.schedule.b).cell(row.schedule.kappa)
        .cells(row.report.result.point).cells(row.relative_error).cell(row.max_relative_error).end();
  if (!cfg.trace.empty()) {
    OutputTarget tr(cfg.trace, out);
    CsvWriter t(tr.get());
    header(t, {{"schedule", "step", "max_rel_error"}});
    for (std::size_t s = 0; s < sweep.rows.size(); ++s)
      for (std::size_t i = 0; i < sweep.rows[s].error_steps.size(); ++i)
        t.cell(s).cell(sweep.rows[s].error_steps[i]).cell(sweep.rows[s].error_trace[i]).end();
  }
  log << "sweep-steps: " << sweep.rows.size() << " schedules against Newton solution "
      << point_text(sweep.oracle) << '\n';
  return kExitOk;
}

int run_props(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto reports = run_property_suite(cfg.seed, cfg.instances, cfg.property_tol);
  OutputTarget target(cfg.output, out);
  CsvWriter w(target.get());
  header(w, {{"property", "instances", "skipped", "max_violation", "tolerance", "passed"}});
  std::size_t passed = 0;
  for (const auto& r : reports) {
    w.cell(r.name).cell(r.instances).cell(r.skipped).cell(r.max_violation).cell(r.tolerance)
        .cell(r.passed ? 1 : 0).end();
    passed += r.passed ? 1 : 0;
  }
  log << "props: " << passed << "/" << reports.size() << " properties hold on " << cfg.instances
      << " instances\n";
  return passed == reports.size() ? kExitOk : kExitNotConverged;
}

}  // namespace

const char* command_name(Command c) {
  for (const auto& [name, cmd] : command_table())
    if (cmd == c) return name.c_str();
  return "?";
}

ModelSpec parse_model(const std::string& raw) {
  std::string text;
  for (char ch : raw)
    if (!std::isspace(static_cast<unsigned char>(ch))) text += ch;

  CopulaSpec copula = CopulaSpec::independence();
  if (text.rfind("fgm(", 0) == 0) {
    const auto close = text.find("):");
    if (close == std::string::npos) fail("model", "expected fgm(theta):<marginals>");
    copula = CopulaSpec::fgm(parse_number(text.substr(4, close - 4), "model"));
    text = text.substr(close + 2);
  }
  const auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')') fail("model", "cannot parse '" + raw + "'");
  const std::string family = text.substr(0, open);
  const std::string args = text.substr(open + 1, text.size() - open - 2);
  std::vector<MarginalSpec> marginals;
  if (family == "exp") {
    for (double r : parse_list(args, "model")) marginals.push_back(MarginalSpec::exponential(r));
  } else if (family == "pareto") {
    const auto semi = args.find(';');
    if (semi == std::string::npos) fail("model", "expected pareto(shape;scale1,...)");
    const double shape = parse_number(args.substr(0, semi), "model");
    for (double s : parse_list(args.substr(semi + 1), "model"))
      marginals.push_back(MarginalSpec::pareto(shape, s));
  } else {
    fail("model", "unknown family '" + family + "'");
  }
  return ModelSpec(std::move(marginals), copula);
}

RunConfig parse_config(const std::string& json_text, std::uint64_t default_seed) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return from_json(j, default_seed);
}

RunConfig parse_args(int argc, const char* const* argv) {
  CLI::App app{"Multivariate expectiles: closed-form, empirical and stochastic solvers"};
  app.set_version_flag("--version", kVersion);
  std::string command, config_path;
  std::map<std::string, std::string> flags;
  app.add_option("command", command, "solve | empirical | estimate | sweep-alpha | sweep-steps | props");
  app.add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);

  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  static const Flag table[] = {
      {"--model", "model", "model, e.g. exp(0.05,0.25), pareto(2;10,20), fgm(1):exp(0.05,0.25)"},
      {"--data", "data", "headerless CSV sample (empirical)"},
      {"--sample-size", "sample_size", "draws from --model for empirical"},
      {"--sigma", "sigma", "identity | ones | [[..],[..]]"},
      {"--alpha", "alpha", "level in (0,1)"},
      {"--alphas", "alphas", "comma-separated levels"},
      {"--p", "p", "L^p expectile (empirical)"},
      {"--tol", "tol", "solver tolerance"},
      {"--max-iter", "max_iter", "solver iteration cap"},
      {"--iterations", "iterations", "Robbins-Monro steps per run"},
      {"--runs", "runs", "Robbins-Monro replicas"},
      {"--seed", "seed", "master seed"},
      {"--schedule", "schedule", "a,b,kappa"},
      {"--x0", "x0", "comma-separated starting point"},
      {"--threads", "threads", "worker threads for replicas"},
      {"--trace-every", "trace_every", "trace stride in steps"},
      {"--validation-draws", "validation_draws", "validation sample size"},
      {"--instances", "instances", "property-suite instances"},
      {"--property-tol", "property_tol", "property-suite tolerance"},
      {"-o,--output", "output", "result CSV (default: stdout)"},
      {"--trace", "trace", "write iterate traces to this CSV"}};
  for (const auto& f : table) app.add_option(f.name, flags[f.key], f.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForVersion&) {
    throw HelpRequested{std::string(kVersion) + "\n"};
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  json j = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      j = json::parse(ss.str());
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  }
  if (!command.empty()) j["command"] = command;
  for (const auto& f : table) {
    const std::string& v = flags[f.key];
    if (app.count(std::string(f.name).substr(std::string(f.name).rfind(',') + 1)) == 0) continue;
    const std::string key = f.key;
    if (key == "model" || key == "sigma") j[key] = text_to_json(v);
    else if (key == "data" || key == "output" || key == "trace") j[key] = v;
    else if (key == "alphas" || key == "x0") j[key] = parse_list(v, key);
    else if (key == "schedule") {
      const auto s = parse_list(v, key);
      if (s.size() != 3) fail("schedule", "expected a,b,kappa");
      j[key] = {{"a", s[0]}, {"b", s[1]}, {"kappa", s[2]}};
    } else {
      j[key] = parse_number(v, key);
    }
  }

  std::uint64_t default_seed = 20240101;
  if (const char* env = std::getenv("MVEXPECTILE_SEED")) {
    const std::string s = env;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), default_seed);
    if (ec != std::errc() || ptr != s.data() + s.size()) fail("MVEXPECTILE_SEED", "not an unsigned integer");
  }
  return from_json(j, default_seed);
}

SampleMatrix read_csv_sample(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("data", "cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    rows.push_back(parse_list(line, "data line " + std::to_string(lineno)));
  }
  if (rows.empty()) fail("data", "file is empty");
  try {
    return SampleMatrix::from_rows(rows);
  } catch (const Error& e) {
    fail("data", e.what());
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  switch (cfg.command) {
    case Command::Solve: return run_solve(cfg, out, log);
    case Command::Empirical: return run_empirical(cfg, out, log);
    case Command::Estimate: return run_estimate(cfg, out, log);
    case Command::SweepAlpha: return run_sweep_alpha(cfg, out, log);
    case Command::SweepSteps: return run_sweep_steps(cfg, out, log);
    case Command::Props: return run_props(cfg, out, log);
  }
  return kExitConfig;
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& log) {
  RunConfig cfg;
  try {
    cfg = parse_args(argc, argv);
  } catch (const HelpRequested& h) {
    out << h.text;
    return kExitOk;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    return run(cfg, out, log);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidParameter& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionMismatch& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedParameter& e) {
    log << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return kExitNotConverged;
  }
}

}  // namespace mvexpectile::cli
