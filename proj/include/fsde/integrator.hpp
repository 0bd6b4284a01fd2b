#pragma once

// Free Euler-Maruyama scheme:
//
//   X_{k+1} = X_k + a(X_k) dt + sum_i b^i(X_k) dW_k c^i(X_k)
//
// with constant step size. The integrator draws no randomness itself; it
// consumes stored increment sequences or a lazily sampled stream, which is
// what makes coupled multi-resolution runs and bit-reproducibility possible.
// States are re-symmetrized through (X + X^T)/2 after every step; asymmetry
// beyond 1e-8 * ||X||_F aborts the path as numerically invalid.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsde/brownian.hpp"
#include "fsde/errors.hpp"
#include "fsde/matrix.hpp"
#include "fsde/model.hpp"

namespace fsde {

/// Relative Frobenius asymmetry beyond which an integration step aborts.
inline constexpr double kStateAsymmetryAbort = 1e-8;

/// One fEMM trajectory: states at t_k = k * dt for k = 0..L plus run
/// metadata and the clamp-event total.
struct Trajectory {
  std::vector<double> times;
  std::vector<HMatrix> states;
  std::uint64_t clamp_events = 0;

  std::string model_name;
  std::vector<std::pair<std::string, double>> params;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  double dt = 0.0;
};

/// One step X -> X + a(X) dt + sum b(X) dW c(X), re-symmetrized.
inline HMatrix femm_step(const FsdeModel& model, const HMatrix& x, const HMatrix& dw, double dt,
                         EvalContext& ctx) {
  if (!(dt > 0.0)) throw InvalidArgument("femm_step: step size must be > 0");
  const HMatrix drift = model.drift(x);
  if (drift.dim() != x.dim()) {
    throw DimensionMismatch("femm_step: drift dimension does not match state");
  }
  const HMatrix diffusion = apply_diffusion(model, x, dw, ctx);
  DenseMatrix<double> next = x.dense() + drift.dense() * dt + diffusion.dense();
  // One fused sweep: accumulate ||next - next^T||_F^2 and ||next||_F^2 while
  // replacing the off-diagonal pairs by their averages.
  double asym_sq = 0.0;
  double norm_sq = 0.0;
  const Index n = next.rows();
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < j; ++i) {
      const double upper = next(i, j);
      const double lower = next(j, i);
      const double gap = upper - lower;
      asym_sq += 2.0 * gap * gap;
      norm_sq += upper * upper + lower * lower;
      const double avg = (upper + lower) * 0.5;
      next(i, j) = avg;
      next(j, i) = avg;
    }
    norm_sq += next(j, j) * next(j, j);
  }
  if (asym_sq > kStateAsymmetryAbort * kStateAsymmetryAbort * norm_sq) {
    throw SymmetryViolation("femm_step: state asymmetry " + std::to_string(std::sqrt(asym_sq)) +
                            " exceeds abort threshold");
  }
  return HMatrix::from_exact_symmetric(std::move(next));
}

namespace detail {

/// Core fEMM loop shared by every integration entry point, so that stored
/// and streamed increments take the identical arithmetic path.
/// increment(k) must return (a reference to) the k-th increment; observer is
/// called on the initial state and after every step.
template <typename IncrementFn, typename Observer>
HMatrix run_femm(const FsdeModel& model, Index n, double dt, std::size_t steps,
                 IncrementFn&& increment, Observer&& observer, EvalContext& ctx,
                 std::uint64_t path_index_for_errors) {
  HMatrix x = model.initial_state(n);
  observer(std::size_t{0}, x);
  for (std::size_t k = 0; k < steps; ++k) {
    try {
      x = femm_step(model, x, increment(k), dt, ctx);
    } catch (const PathFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw PathFailure(path_index_for_errors, static_cast<std::int64_t>(k), e.what());
    }
    observer(k + 1, x);
  }
  return x;
}

inline void no_observer(std::size_t, const HMatrix&) {}

}  // namespace detail

struct IntegrationOptions {
  bool strict_psd = false;
};

/// Applies fEMM across the whole increment sequence and records every state.
inline Trajectory integrate(const FsdeModel& model, const IncrementSequence& increments,
                            IntegrationOptions options = {}) {
  if (increments.length() < 1) throw InvalidArgument("integrate: empty increment sequence");
  EvalContext ctx;
  ctx.strict_psd = options.strict_psd;

  Trajectory traj;
  traj.model_name = model.name;
  traj.params = model.params;
  traj.seed = increments.seed;
  traj.path_index = increments.path_index;
  traj.dt = increments.dt;
  traj.times.reserve(increments.length() + 1);
  traj.states.reserve(increments.length() + 1);

  auto observer = [&](std::size_t k, const HMatrix& state) {
    traj.times.push_back(static_cast<double>(k) * increments.dt);
    traj.states.push_back(state);
  };
  detail::run_femm(
      model, increments.n, increments.dt, increments.length(),
      [&](std::size_t k) -> const HMatrix& { return increments.increments[k]; }, observer, ctx,
      increments.path_index);
  traj.clamp_events = ctx.clamp_events;
  return traj;
}

/// Memory-lean variant of integrate that keeps only the final state; the
/// result is bit-identical to integrate(...).states.back().
inline HMatrix terminal_state(const FsdeModel& model, const IncrementSequence& increments,
                              IntegrationOptions options = {},
                              std::uint64_t* clamp_events = nullptr) {
  if (increments.length() < 1) throw InvalidArgument("terminal_state: empty increment sequence");
  EvalContext ctx;
  ctx.strict_psd = options.strict_psd;
  HMatrix x = detail::run_femm(
      model, increments.n, increments.dt, increments.length(),
      [&](std::size_t k) -> const HMatrix& { return increments.increments[k]; },
      detail::no_observer, ctx, increments.path_index);
  if (clamp_events) *clamp_events = ctx.clamp_events;
  return x;
}

/// Streams freshly sampled increments through fEMM without materializing
/// the path; the increments (and hence the result) are bit-identical to
/// terminal_state over sample_path with the same key.
/// observer(k, state) is called on the initial state and after every step.
template <typename Observer>
HMatrix integrate_streamed(const FsdeModel& model, Index n, double dt, std::size_t steps,
                           std::uint64_t seed, std::uint64_t path_index, Observer&& observer,
                           IntegrationOptions options = {},
                           std::uint64_t* clamp_events = nullptr) {
  if (steps < 1) throw InvalidArgument("integrate_streamed: step count must be >= 1");
  PathStream stream(seed, path_index);
  EvalContext ctx;
  ctx.strict_psd = options.strict_psd;
  DenseMatrix<double> buffer;
  HMatrix dw;
  HMatrix x = detail::run_femm(
      model, n, dt, steps,
      [&](std::size_t) -> const HMatrix& {
        fill_increment(buffer, n, dt, stream);
        dw = HMatrix::from_exact_symmetric(std::move(buffer));
        return dw;
      },
      observer, ctx, path_index);
  if (clamp_events) *clamp_events = ctx.clamp_events;
  return x;
}

/// Terminal states of one fine-resolution path and of the coupled coarse
/// paths driven by R-fold sums of the same increments.
struct CoupledTerminals {
  HMatrix fine;
  std::vector<HMatrix> coarse;  // one per coarsening factor, in input order
  std::uint64_t clamp_events = 0;
};

/// Runs the fine path at dt_min over L steps and, in the same sweep, every
/// coarse path with step R * dt_min driven by the group sums of the fine
/// increments (accumulated in increment order). Bit-identical to coarsening
/// a stored sequence and integrating it.
inline CoupledTerminals integrate_coupled(const FsdeModel& model, Index n, double dt_min,
                                          std::size_t L, const std::vector<std::size_t>& factors,
                                          std::uint64_t seed, std::uint64_t path_index,
                                          IntegrationOptions options = {}) {
  if (L < 1) throw InvalidArgument("integrate_coupled: step count must be >= 1");
  for (std::size_t r : factors) {
    if (r < 1 || L % r != 0) {
      throw InvalidArgument("integrate_coupled: factor " + std::to_string(r) +
                            " does not divide " + std::to_string(L));
    }
  }
  PathStream stream(seed, path_index);
  EvalContext ctx;
  ctx.strict_psd = options.strict_psd;

  CoupledTerminals result;
  HMatrix fine = model.initial_state(n);
  std::vector<HMatrix> coarse(factors.size(), model.initial_state(n));
  std::vector<DenseMatrix<double>> group_sum(factors.size(),
                                             DenseMatrix<double>::Zero(n, n));
  DenseMatrix<double> buffer;

  for (std::size_t k = 0; k < L; ++k) {
    fill_increment(buffer, n, dt_min, stream);
    const HMatrix dw = HMatrix::from_exact_symmetric(std::move(buffer));
    try {
      fine = femm_step(model, fine, dw, dt_min, ctx);
      for (std::size_t f = 0; f < factors.size(); ++f) {
        group_sum[f] += dw.dense();
        if ((k + 1) % factors[f] == 0) {
          const HMatrix coarse_dw = HMatrix::from_exact_symmetric(group_sum[f]);
          coarse[f] = femm_step(model, coarse[f], coarse_dw,
                                dt_min * static_cast<double>(factors[f]), ctx);
          group_sum[f].setZero();
        }
      }
    } catch (const PathFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw PathFailure(path_index, static_cast<std::int64_t>(k), e.what());
    }
  }
  result.fine = std::move(fine);
  result.coarse = std::move(coarse);
  result.clamp_events = ctx.clamp_events;
  return result;
}

}  // namespace fsde
