#pragma once

// Command-line front end: configuration, dispatch and CSV output.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvexpectile/core.hpp"
#include "mvexpectile/distributions.hpp"
#include "mvexpectile/solve_deterministic.hpp"
#include "mvexpectile/solve_stochastic.hpp"

namespace mvexpectile::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNotConverged = 3;

/// Rejected configuration; the message names the offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { Solve, Empirical, Estimate, SweepAlpha, SweepSteps, Props };

struct RunConfig {
  Command command = Command::Solve;
  std::optional<ModelSpec> model;
  std::string data_path;         // headerless CSV, n rows x d columns
  std::size_t sample_size = 1000;  // empirical solve on a model draw
  std::optional<ScoringMatrix> sigma;
  std::vector<double> alphas;    // ascending
  std::optional<double> p;       // empirical: L^p expectile instead of sigma
  NewtonConfig newton;
  EmpiricalConfig empirical;
  RmConfig rm;
  std::vector<StepSchedule> schedules;
  std::size_t instances = 50;
  double property_tol = 1e-6;
  std::string output;            // empty: CSV to stdout
  std::string trace;             // empty: no trace file
  std::uint64_t seed = 20240101;
};

const char* command_name(Command c);

/// Model grammar: "exp(r1,...,rd)", "pareto(shape;s1,...,sd)", optionally
/// prefixed "fgm(theta):" for a bivariate FGM dependence.
ModelSpec parse_model(const std::string& text);

/// Parses a JSON-shaped configuration. Seeds default to `default_seed`.
RunConfig parse_config(const std::string& json_text, std::uint64_t default_seed = 20240101);

/// Parses the command line: a command, an optional --config file, and flag
/// overrides. The MVEXPECTILE_SEED environment variable sets the default seed.
RunConfig parse_args(int argc, const char* const* argv);

SampleMatrix read_csv_sample(const std::string& path);

/// Shortest representation that reads back to the same double.
std::string format_double(double v);

/// Runs a validated configuration. Returns the process exit code.
int run(const RunConfig& config, std::ostream& out, std::ostream& log);

/// Full entry point: parse, run, map errors to exit codes.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& log);

}  // namespace mvexpectile::cli
