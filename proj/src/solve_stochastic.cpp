#include "mvexpectile/solve_stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "mvexpectile/solve_deterministic.hpp"

namespace mvexpectile {

void StepSchedule::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw InvalidParameter("schedule a must be positive");
  if (!(b >= 0.0) || !std::isfinite(b)) throw InvalidParameter("schedule b must be non-negative");
  if (!(kappa > 0.5 && kappa <= 1.0)) throw InvalidParameter("schedule kappa must lie in (1/2, 1]");
}

double StepSchedule::operator()(std::size_t n) const {
  const double base = b + static_cast<double>(n);
  return kappa == 1.0 ? a / base : a / std::pow(base, kappa);
}

void RmConfig::validate() const {
  schedule.validate();
  if (iterations < 1) throw InvalidParameter("iterations must be at least 1");
  if (runs < 1) throw InvalidParameter("runs must be at least 1");
  if (validation_draws < 2) throw InvalidParameter("validation_draws must be at least 2");
  if (!(divergence_bound > 0.0)) throw InvalidParameter("divergence_bound must be positive");
  if (clip && (clip->lower.size() != clip->upper.size() ||
               (clip->lower.array() > clip->upper.array()).any())) {
    throw InvalidParameter("clip box must have lower <= upper");
  }
}

namespace {

constexpr std::uint64_t kValidationStream = 0x8000000000000000ULL;

// Phi(x, X) written into z, without allocation.
void observe(const double* x, const double* obs, const ScoringMatrix& sigma, double alpha,
             std::size_t d, double* z) {
  for (std::size_t k = 0; k < d; ++k) {
    double acc = 0.0;
    if (obs[k] > x[k]) {
      for (std::size_t i = 0; i < d; ++i)
        if (obs[i] > x[i]) acc += sigma(k, i) * (obs[i] - x[i]);
      acc *= alpha;
    } else if (obs[k] < x[k]) {
      for (std::size_t i = 0; i < d; ++i)
        if (obs[i] < x[i]) acc -= sigma(k, i) * (x[i] - obs[i]);
      acc *= 1.0 - alpha;
    }
    z[k] = acc;
  }
}

RmRun single_run(DrawFn draw, const ScoringMatrix& sigma, Level level, const RmConfig& config,
                 const Vector& x0) {
  const std::size_t d = sigma.dim();
  const double alpha = level.value();
  RmRun run;
  Vector x = x0;
  std::vector<double> obs(d), z(d);
  for (std::size_t n = 1; n <= config.iterations; ++n) {
    draw(obs);
    observe(x.data(), obs.data(), sigma, alpha, d, z.data());
    const double g = config.schedule(n);
    bool bad = false;
    for (std::size_t k = 0; k < d; ++k) {
      const auto ek = static_cast<Eigen::Index>(k);
      double v = x[ek] + g * z[k];
      if (config.clip) v = std::clamp(v, config.clip->lower[ek], config.clip->upper[ek]);
      x[ek] = v;
      if (!std::isfinite(v) || std::abs(v) > config.divergence_bound) bad = true;
    }
    run.steps = n;
    if (bad) {
      run.diverged = true;
      break;
    }
    if (config.trace_every != 0 && n % config.trace_every == 0) {
      run.trace_steps.push_back(n);
      run.trace.push_back(x);
    }
  }
  run.final_point = std::move(x);
  return run;
}

RmReport run_all(const StreamFactory& streams, const ScoringMatrix& sigma, Level level,
                 const RmConfig& config, const Vector& x0, const SampleMatrix& validation) {
  RmReport report;
  report.runs.resize(config.runs);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t r = first; r < config.runs; r += stride)
      report.runs[r] = single_run(streams(split_seed(config.seed, r)), sigma, level, config, x0);
  };
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(1U, config.threads), config.runs));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }

  // deterministic reduction in run order
  const auto d = static_cast<Eigen::Index>(sigma.dim());
  Vector sum = Vector::Zero(d);
  std::size_t good = 0;
  for (const auto& run : report.runs) {
    if (run.diverged) {
      ++report.diverged_runs;
      continue;
    }
    sum += run.final_point;
    ++good;
  }
  ExpectileResult& res = report.result;
  res.point = good > 0 ? Vector(sum / static_cast<double>(good)) : x0;
  res.iterations = static_cast<int>(config.iterations);

  if (config.trace_every != 0 && report.diverged_runs == 0) {
    report.mean_trace_steps = report.runs.front().trace_steps;
    for (std::size_t t = 0; t < report.mean_trace_steps.size(); ++t) {
      Vector m = Vector::Zero(d);
      for (const auto& run : report.runs) m += run.trace[t];
      report.mean_trace.push_back(m / static_cast<double>(report.runs.size()));
    }
    res.trace = report.mean_trace;
  }

  // validation residual and its standard error
  const std::size_t nv = validation.rows();
  const double alpha = level.value();
  Vector mean = Vector::Zero(d);
  Vector sq = Vector::Zero(d);
  std::vector<double> row(static_cast<std::size_t>(d)), z(static_cast<std::size_t>(d));
  for (std::size_t j = 0; j < nv; ++j) {
    for (Eigen::Index k = 0; k < d; ++k) row[static_cast<std::size_t>(k)] = validation(j, k);
    observe(res.point.data(), row.data(), sigma, alpha, sigma.dim(), z.data());
    for (Eigen::Index k = 0; k < d; ++k) {
      mean[k] += z[static_cast<std::size_t>(k)];
      sq[k] += z[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k)];
    }
  }
  const double nvd = static_cast<double>(nv);
  mean /= nvd;
  double worst_se = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double var = std::max(sq[k] / nvd - mean[k] * mean[k], 0.0) * nvd / (nvd - 1.0);
    worst_se = std::max(worst_se, std::sqrt(var / nvd));
  }
  res.residual_norm = mean.cwiseAbs().maxCoeff();
  report.tolerance = 4.0 * worst_se + 1e-8 * (1.0 + res.point.cwiseAbs().maxCoeff());
  res.converged = good == config.runs && res.residual_norm <= report.tolerance;
  return report;
}

SampleMatrix draw_sample(const DrawFn& draw, std::size_t n, std::size_t d) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<double> row(d);
  for (std::size_t j = 0; j < n; ++j) {
    draw(row);
    for (std::size_t k = 0; k < d; ++k)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = row[k];
  }
  return SampleMatrix(std::move(m));
}

}  // namespace

RmReport rm_estimate(const ModelSpec& model, const ScoringMatrix& sigma, Level level,
                     const RmConfig& config) {
  config.validate();
  require_same_dim(model.dim(), sigma.dim(), "model vs scoring matrix");
  const Vector x0 = config.x0 ? *config.x0 : model.means();
  require_same_dim(model.dim(), static_cast<std::size_t>(x0.size()), "starting point");
  const StreamFactory streams = [&model](std::uint64_t seed) -> DrawFn {
    return [stream = ModelStream(model, seed)](std::span<double> out) mutable {
      stream.draw(out);
    };
  };
  const SampleMatrix validation =
      sample(model, config.validation_draws, split_seed(config.seed, kValidationStream));
  return run_all(streams, sigma, level, config, x0, validation);
}

RmReport rm_estimate(const StreamFactory& streams, const ScoringMatrix& sigma, Level level,
                     const RmConfig& config) {
  config.validate();
  if (!config.x0) throw InvalidParameter("a starting point is required for a custom stream");
  require_same_dim(sigma.dim(), static_cast<std::size_t>(config.x0->size()), "starting point");
  const SampleMatrix validation =
      draw_sample(streams(split_seed(config.seed, kValidationStream)), config.validation_draws,
                  sigma.dim());
  return run_all(streams, sigma, level, config, *config.x0, validation);
}

ScheduleSweep step_schedule_sweep(const ModelSpec& model, const ScoringMatrix& sigma,
                                  Level level, const std::vector<StepSchedule>& schedules,
                                  const SweepBudget& budget) {
  if (schedules.empty()) throw InvalidParameter("schedule sweep needs at least one schedule");
  const ExpectileResult oracle = solve_analytic(model, sigma, level);
  if (!oracle.converged) throw Error("Newton reference solve did not converge");

  ScheduleSweep sweep;
  sweep.oracle = oracle.point;
  auto rel_err = [&](const Vector& x) {
    return Vector((x - oracle.point).cwiseAbs().cwiseQuotient(oracle.point.cwiseAbs()));
  };
  for (const auto& schedule : schedules) {
    RmConfig cfg;
    cfg.schedule = schedule;
    cfg.iterations = budget.iterations;
    cfg.runs = budget.runs;
    cfg.seed = budget.seed;
    cfg.trace_every = budget.trace_every;
    cfg.threads = budget.threads;

    ScheduleRow row;
    row.schedule = schedule;
    row.report = rm_estimate(model, sigma, level, cfg);
    row.relative_error = rel_err(row.report.result.point);
    row.max_relative_error = row.relative_error.maxCoeff();
    row.error_steps = row.report.mean_trace_steps;
    for (const auto& x : row.report.mean_trace) row.error_trace.push_back(rel_err(x).maxCoeff());
    sweep.rows.push_back(std::move(row));
  }
  return sweep;
}

}  // namespace mvexpectile
