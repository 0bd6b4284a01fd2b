#pragma once

// Ensemble driver for strong- and weak-convergence measurements.
//
// Strong error at step R * dt_min, against the finest-grid solution of the
// same Brownian path (coupled through increment group sums):
//
//   e_s(dt) = E[ phi(|X_coarse(T) - X_fine(T)|) ]
//
// Weak error with f = id, against the model's closed-form mean:
//
//   e_w(dt) = | E[ phi(X(T)) ] - phi_ref(T) |
//
// Rows carry Monte Carlo standard errors. Rows whose standard error exceeds
// error/3 sit at the noise floor and are excluded from the order fit, as are
// exact-zero rows. Paths are independent work items; per-path streams are
// keyed on (seed, path index) and all reductions run in path-index order, so
// every table is bit-reproducible regardless of the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsde/errors.hpp"
#include "fsde/integrator.hpp"
#include "fsde/matrix.hpp"
#include "fsde/model.hpp"
#include "fsde/parallel.hpp"

namespace fsde {

struct ErrorRow {
  double dt = 0.0;
  double error = 0.0;
  double stderr_ = 0.0;
  std::size_t paths = 0;
  bool in_fit = false;
};

struct OrderFit {
  double order = 0.0;
  double residual = 0.0;  // RMS residual in log space
};

struct ErrorTable {
  std::string kind;  // "strong" or "weak"
  std::vector<ErrorRow> rows;
  std::optional<OrderFit> fit;  // absent when fewer than 2 rows survive the policy
  std::uint64_t clamp_events = 0;
};

/// Least-squares slope of log(error) against log(dt). Requires >= 2 rows,
/// positive errors and at least two distinct step sizes.
inline OrderFit fit_order(const std::vector<std::pair<double, double>>& rows) {
  if (rows.size() < 2) throw DegenerateFit("fit_order: need at least 2 rows");
  double mean_x = 0.0, mean_y = 0.0;
  for (const auto& [dt, err] : rows) {
    if (!(dt > 0.0)) throw DegenerateFit("fit_order: step sizes must be > 0");
    if (!(err > 0.0)) throw DegenerateFit("fit_order: errors must be > 0");
    mean_x += std::log(dt);
    mean_y += std::log(err);
  }
  mean_x /= static_cast<double>(rows.size());
  mean_y /= static_cast<double>(rows.size());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [dt, err] : rows) {
    const double dx = std::log(dt) - mean_x;
    sxx += dx * dx;
    sxy += dx * (std::log(err) - mean_y);
  }
  if (!(sxx > 0.0)) throw DegenerateFit("fit_order: all step sizes equal");
  OrderFit fit;
  fit.order = sxy / sxx;
  const double intercept = mean_y - fit.order * mean_x;
  double ss = 0.0;
  for (const auto& [dt, err] : rows) {
    const double r = std::log(err) - (intercept + fit.order * std::log(dt));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(rows.size()));
  return fit;
}

namespace detail {

/// Marks noise-floor rows and fits the order over the surviving ones.
inline void apply_fit_policy(ErrorTable& table) {
  std::vector<std::pair<double, double>> usable;
  for (ErrorRow& row : table.rows) {
    row.in_fit = row.error > 0.0 && row.stderr_ <= row.error / 3.0;
    if (row.in_fit) usable.emplace_back(row.dt, row.error);
  }
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < usable.size(); ++i) {
    if (i == 0 || usable[i].first != usable[i - 1].first) ++distinct;
  }
  if (usable.size() >= 2 && distinct >= 2) {
    table.fit = fit_order(usable);
  } else {
    table.fit = std::nullopt;
  }
}

inline std::pair<double, double> mean_and_stderr(const std::vector<double>& values) {
  const auto m = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= m;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (m - 1.0) / m)};
}

}  // namespace detail

struct StrongStudyConfig {
  Index n = 0;
  double dt_min = 0.0;
  std::size_t L = 0;
  std::vector<std::size_t> factors;  // coarsening factors R, each dividing L
  std::size_t paths = 0;             // M
  std::uint64_t seed = 0;
  unsigned workers = 0;
  bool strict_psd = false;
};

/// For each path: one fine run at dt_min plus one coupled coarse run per
/// factor R; the row error is the mean of phi(|X_coarse - X_fine|) at
/// T = L * dt_min. Rows come out sorted by dt ascending.
inline ErrorTable strong_error_study(const FsdeModel& model, const StrongStudyConfig& cfg) {
  if (cfg.paths < 2) throw InvalidArgument("strong_error_study: need at least 2 paths");
  if (cfg.L < 1 || !(cfg.dt_min > 0.0)) {
    throw InvalidArgument("strong_error_study: need L >= 1 and dt_min > 0");
  }
  if (cfg.factors.empty()) throw InvalidArgument("strong_error_study: empty factor list");
  for (std::size_t r : cfg.factors) {
    if (r < 1 || cfg.L % r != 0) {
      throw InvalidArgument("strong_error_study: factor " + std::to_string(r) +
                            " does not divide L = " + std::to_string(cfg.L));
    }
  }

  // Factors sorted ascending give rows with dt strictly increasing.
  std::vector<std::size_t> factors = cfg.factors;
  std::sort(factors.begin(), factors.end());
  factors.erase(std::unique(factors.begin(), factors.end()), factors.end());

  std::vector<std::vector<double>> path_errors(cfg.paths);
  std::vector<std::uint64_t> path_clamps(cfg.paths, 0);
  IntegrationOptions options{cfg.strict_psd};

  parallel_for(cfg.paths, cfg.workers, [&](std::size_t path) {
    CoupledTerminals run = integrate_coupled(model, cfg.n, cfg.dt_min, cfg.L, factors, cfg.seed,
                                             static_cast<std::uint64_t>(path), options);
    std::vector<double> errors(factors.size());
    for (std::size_t f = 0; f < factors.size(); ++f) {
      errors[f] = abs_trace(run.coarse[f] - run.fine);
    }
    path_errors[path] = std::move(errors);
    path_clamps[path] = run.clamp_events;
  });

  ErrorTable table;
  table.kind = "strong";
  for (std::size_t f = 0; f < factors.size(); ++f) {
    std::vector<double> samples(cfg.paths);
    for (std::size_t p = 0; p < cfg.paths; ++p) samples[p] = path_errors[p][f];
    const auto [mean, se] = detail::mean_and_stderr(samples);
    ErrorRow row;
    row.dt = cfg.dt_min * static_cast<double>(factors[f]);
    row.error = mean;
    row.stderr_ = se;
    row.paths = cfg.paths;
    table.rows.push_back(row);
  }
  for (std::uint64_t c : path_clamps) table.clamp_events += c;
  detail::apply_fit_policy(table);
  return table;
}

struct WeakStudyConfig {
  Index n = 0;
  std::vector<double> dt_list;  // each must divide T into an integer step count
  double T = 0.0;
  std::size_t paths = 0;  // M, fresh paths per row
  std::uint64_t seed = 0;
  unsigned workers = 0;
  bool strict_psd = false;
};

/// Integer step count L = T / dt; rejects grids that do not divide T.
inline std::size_t steps_for(double T, double dt) {
  if (!(dt > 0.0) || !(T > 0.0)) throw InvalidArgument("step grid: need T > 0 and dt > 0");
  const double ratio = T / dt;
  const auto L = static_cast<std::size_t>(std::llround(ratio));
  if (L < 1 || std::abs(static_cast<double>(L) * dt - T) > 1e-9 * std::max(1.0, T)) {
    throw InvalidArgument("step size " + std::to_string(dt) + " does not divide horizon " +
                          std::to_string(T));
  }
  return L;
}

/// For each dt: M fresh paths (path indices offset per row), terminal mean
/// of phi against the model's closed-form mean at T.
inline ErrorTable weak_error_study(const FsdeModel& model, const WeakStudyConfig& cfg) {
  if (!model.reference.mean_at) {
    throw MissingReference("weak_error_study: model '" + model.name +
                           "' has no closed-form mean");
  }
  if (cfg.paths < 2) throw InvalidArgument("weak_error_study: need at least 2 paths");
  if (cfg.dt_list.empty()) throw InvalidArgument("weak_error_study: empty dt list");

  std::vector<double> dt_list = cfg.dt_list;
  std::sort(dt_list.begin(), dt_list.end());
  dt_list.erase(std::unique(dt_list.begin(), dt_list.end()), dt_list.end());
  std::vector<std::size_t> steps(dt_list.size());
  for (std::size_t i = 0; i < dt_list.size(); ++i) steps[i] = steps_for(cfg.T, dt_list[i]);

  const double reference_mean = model.reference.mean_at(cfg.T);
  IntegrationOptions options{cfg.strict_psd};

  ErrorTable table;
  table.kind = "weak";
  for (std::size_t row_index = 0; row_index < dt_list.size(); ++row_index) {
    std::vector<double> phi(cfg.paths, 0.0);
    std::vector<std::uint64_t> clamps(cfg.paths, 0);
    const std::uint64_t path_base = static_cast<std::uint64_t>(row_index) * cfg.paths;
    parallel_for(cfg.paths, cfg.workers, [&](std::size_t path) {
      std::uint64_t clamp_events = 0;
      const HMatrix terminal = integrate_streamed(model, cfg.n, dt_list[row_index],
                                                  steps[row_index], cfg.seed, path_base + path,
                                                  detail::no_observer, options, &clamp_events);
      phi[path] = normalized_trace(terminal);
      clamps[path] = clamp_events;
    });
    const auto [mean, se] = detail::mean_and_stderr(phi);
    ErrorRow row;
    row.dt = dt_list[row_index];
    row.error = std::abs(mean - reference_mean);
    row.stderr_ = se;
    row.paths = cfg.paths;
    table.rows.push_back(row);
    for (std::uint64_t c : clamps) table.clamp_events += c;
  }
  detail::apply_fit_policy(table);
  return table;
}

/// Terminal states of M independent paths, in path-index order.
inline std::vector<HMatrix> ensemble_terminal_states(const FsdeModel& model, Index n, double dt,
                                                     std::size_t L, std::size_t paths,
                                                     std::uint64_t seed, unsigned workers,
                                                     bool strict_psd = false,
                                                     std::uint64_t* clamp_events = nullptr) {
  if (paths < 1) throw InvalidArgument("ensemble_terminal_states: need at least 1 path");
  std::vector<HMatrix> states(paths);
  std::vector<std::uint64_t> clamps(paths, 0);
  IntegrationOptions options{strict_psd};
  parallel_for(paths, workers, [&](std::size_t path) {
    states[path] = integrate_streamed(model, n, dt, L, seed, static_cast<std::uint64_t>(path),
                                      detail::no_observer, options, &clamps[path]);
  });
  if (clamp_events) {
    *clamp_events = 0;
    for (std::uint64_t c : clamps) *clamp_events += c;
  }
  return states;
}

}  // namespace fsde
