#pragma once

// Robbins-Monro stochastic approximation of the matrix expectile:
//   x_n = x_{n-1} + gamma_n Phi(x_{n-1}, X_n),   gamma_n = a / (b + n)^kappa,
// averaged over independent replicas.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mvexpectile/core.hpp"
#include "mvexpectile/distributions.hpp"

namespace mvexpectile {

struct StepSchedule {
  double a = 1.0;
  double b = 0.0;
  double kappa = 1.0;

  void validate() const;
  /// gamma_n for n >= 1.
  double operator()(std::size_t n) const;
};

struct ClipBox {
  Vector lower;
  Vector upper;
};

struct RmConfig {
  StepSchedule schedule;
  std::size_t iterations = 100000;
  std::size_t runs = 100;
  std::uint64_t seed = 20240101;
  std::optional<Vector> x0;            // default: marginal means
  std::size_t trace_every = 0;         // 0 disables per-run traces
  std::optional<ClipBox> clip;         // off by default
  std::size_t validation_draws = 100000;
  double divergence_bound = 1e12;
  unsigned threads = 1;

  void validate() const;
};

struct RmRun {
  Vector final_point;
  bool diverged = false;
  std::size_t steps = 0;
  std::vector<std::size_t> trace_steps;
  std::vector<Vector> trace;
};

struct RmReport {
  /// point: average of the non-diverged final iterates. residual_norm: max-norm
  /// of the residual on an independent validation sample. converged: no run
  /// diverged and residual_norm <= tolerance.
  ExpectileResult result;
  /// Four standard errors of the validation residual, the largest residual
  /// consistent with the point being the expectile.
  double tolerance = 0.0;
  std::size_t diverged_runs = 0;
  std::vector<RmRun> runs;
  /// Run-averaged iterate at each traced step (empty without tracing).
  std::vector<std::size_t> mean_trace_steps;
  std::vector<Vector> mean_trace;
};

/// Fills one observation per call.
using DrawFn = std::function<void(std::span<double>)>;
/// Builds an independent stream from a seed.
using StreamFactory = std::function<DrawFn(std::uint64_t)>;

RmReport rm_estimate(const ModelSpec& model, const ScoringMatrix& sigma, Level level,
                     const RmConfig& config = {});

/// Same algorithm over an arbitrary stream; config.x0 is required.
RmReport rm_estimate(const StreamFactory& streams, const ScoringMatrix& sigma, Level level,
                     const RmConfig& config);

struct SweepBudget {
  std::size_t iterations = 100000;
  std::size_t runs = 100;
  std::uint64_t seed = 20240101;
  std::size_t trace_every = 1000;
  unsigned threads = 1;
};

struct ScheduleRow {
  StepSchedule schedule;
  RmReport report;
  Vector relative_error;    // per coordinate, against the Newton solution
  double max_relative_error = 0.0;
  std::vector<std::size_t> error_steps;
  std::vector<double> error_trace;  // max relative error of the run average
};

struct ScheduleSweep {
  Vector oracle;
  std::vector<ScheduleRow> rows;
};

/// Runs rm_estimate once per schedule with shared seeds and compares each
/// with the Newton solution of the closed-form system.
ScheduleSweep step_schedule_sweep(const ModelSpec& model, const ScoringMatrix& sigma,
                                  Level level, const std::vector<StepSchedule>& schedules,
                                  const SweepBudget& budget = {});

}  // namespace mvexpectile
