#include <doctest.h>

#include <cmath>
#include <vector>

#include "fsde/integrator.hpp"
#include "fsde/parallel.hpp"

using namespace fsde;
using Dense = DenseMatrix<double>;

namespace {

// Drift-only OU variant started at the identity; used for the deterministic
// recursion checks (the built-in OU model starts at zero).
FsdeModel drift_only_ou_at_identity(double theta) {
  FsdeModel model = ou_model(theta, 0.0);
  model.initial_state = [](Index n) { return HMatrix::identity(n); };
  return model;
}

FsdeModel frozen_model() {
  FsdeModel model;
  model.name = "frozen";
  model.drift = [](const HMatrix& x) { return HMatrix::zero(x.dim()); };
  model.diffusion_terms = {};
  model.initial_state = [](Index n) { return HMatrix::identity(n); };
  return model;
}

}  // namespace

TEST_SUITE("integrator") {

TEST_CASE("zero drift and zero diffusion leave the state unchanged") {
  EvalContext ctx;
  const FsdeModel model = frozen_model();
  const HMatrix x = HMatrix::identity(4);
  PathStream stream(5, 0);
  const HMatrix dw = sample_increment(4, 0.1, stream);
  const HMatrix next = femm_step(model, x, dw, 0.1, ctx);
  CHECK(next == x);
  CHECK_THROWS_AS(femm_step(model, x, dw, 0.0, ctx), InvalidArgument);
}

TEST_CASE("deterministic OU step and recursion") {
  EvalContext ctx;
  // sigma = 0, dW = 0: X' = (1 + theta dt) X.
  const FsdeModel model = drift_only_ou_at_identity(1.0);
  const HMatrix x = HMatrix::identity(3);
  const HMatrix next = femm_step(model, x, HMatrix::zero(3), 0.5, ctx);
  CHECK((next.dense() - 1.5 * Dense::Identity(3, 3)).norm() == 0.0);

  // Two steps of 0.5 from the identity: exactly 1.5^2 = 2.25 I.
  const IncrementSequence zeros{3, 0.5, 0, 0,
                                std::vector<HMatrix>{HMatrix::zero(3), HMatrix::zero(3)}};
  const HMatrix terminal = terminal_state(model, zeros);
  CHECK((terminal.dense() - 2.25 * Dense::Identity(3, 3)).norm() == 0.0);

  // The default OU initial condition is the zero matrix and stays there.
  const Trajectory flat = integrate(ou_model(1.0, 0.0), zeros);
  for (const HMatrix& state : flat.states) CHECK(state.dense().norm() == 0.0);
}

TEST_CASE("n = 1 fEMM coincides bit-exactly with scalar Euler-Maruyama") {
  const double theta = 0.8, sigma = 1.3, dt = 1.0 / 64.0;
  const std::size_t L = 64;
  const FsdeModel model = ou_model(theta, sigma);
  const IncrementSequence seq = sample_path(1, dt, L, 909, 4);
  const Trajectory traj = integrate(model, seq);

  double x = 0.0;  // scalar oracle on the shared increments
  CHECK(traj.states[0](0, 0) == x);
  for (std::size_t k = 0; k < L; ++k) {
    const double w = seq.increments[k](0, 0);
    x = (x + (theta * x) * dt) + sigma * w;
    CHECK(traj.states[k + 1](0, 0) == x);
  }
}

TEST_CASE("trajectory bookkeeping") {
  const FsdeModel model = ou_model(0.5, 1.0);
  const IncrementSequence seq = sample_path(4, 0.25, 8, 321, 9);
  const Trajectory traj = integrate(model, seq);
  REQUIRE(traj.states.size() == 9);
  REQUIRE(traj.times.size() == 9);
  CHECK(traj.states[0] == model.initial_state(4));
  CHECK(traj.times[0] == 0.0);
  CHECK(traj.times[8] == doctest::Approx(2.0));
  CHECK(traj.model_name == "ou");
  CHECK(traj.seed == 321);
  CHECK(traj.path_index == 9);

  // L = 1 unrolls to [X0, femm_step(X0, dW1)].
  EvalContext ctx;
  const IncrementSequence one{4, 0.25, 321, 9, {seq.increments[0]}};
  const Trajectory short_traj = integrate(model, one);
  REQUIRE(short_traj.states.size() == 2);
  CHECK(short_traj.states[1] ==
        femm_step(model, model.initial_state(4), seq.increments[0], 0.25, ctx));
}

TEST_CASE("terminal_state matches integrate bit-exactly") {
  for (std::uint64_t path = 0; path < 10; ++path) {
    const FsdeModel model = ou_model(1.0, 1.0);
    const IncrementSequence seq = sample_path(5, 1.0 / 32.0, 32, 2718, path);
    CHECK(terminal_state(model, seq) == integrate(model, seq).states.back());
  }
  const FsdeModel model = ou_model(1.0, 1.0);
  IncrementSequence empty;
  empty.n = 5;
  empty.dt = 0.1;
  CHECK_THROWS_AS(terminal_state(model, empty), InvalidArgument);
  CHECK_THROWS_AS(integrate(model, empty), InvalidArgument);
}

TEST_CASE("streamed increments replay stored paths bit-exactly") {
  const FsdeModel model = gbm1_model(0.6);
  const Index n = 6;
  const double dt = 1.0 / 16.0;
  const std::size_t L = 16;
  const IncrementSequence seq = sample_path(n, dt, L, 1111, 7);
  const HMatrix stored = terminal_state(model, seq);
  const HMatrix streamed =
      integrate_streamed(model, n, dt, L, 1111, 7, detail::no_observer);
  CHECK(streamed == stored);
}

TEST_CASE("coupled runs reproduce coarsen-then-integrate bit-exactly") {
  const FsdeModel model = ou_model(0.9, 1.1);
  const Index n = 5;
  const double dt_min = 1.0 / 16.0;
  const std::size_t L = 16;
  const std::vector<std::size_t> factors = {1, 2, 4};

  const CoupledTerminals coupled = integrate_coupled(model, n, dt_min, L, factors, 77, 3);
  const IncrementSequence fine = sample_path(n, dt_min, L, 77, 3);
  CHECK(coupled.fine == terminal_state(model, fine));
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const IncrementSequence coarse = coarsen(fine, factors[f]);
    CHECK(coupled.coarse[f] == terminal_state(model, coarse));
    // Coarse grids visit exactly L/R steps and their increments sum to the
    // fine path's sum.
    CHECK(coarse.length() == L / factors[f]);
    Dense coarse_sum = Dense::Zero(n, n);
    for (const HMatrix& inc : coarse.increments) coarse_sum += inc.dense();
    Dense fine_sum = Dense::Zero(n, n);
    for (const HMatrix& inc : fine.increments) fine_sum += inc.dense();
    CHECK((coarse_sum - fine_sum).norm() <= 1e-14 * fine_sum.norm());
  }
  // R = 1 is the fine run itself.
  CHECK(coupled.coarse[0] == coupled.fine);

  CHECK_THROWS_AS(integrate_coupled(model, n, dt_min, L, {3}, 77, 3), InvalidArgument);
}

TEST_CASE("states stay symmetric across models and random paths") {
  const std::vector<FsdeModel> models = {ou_model(1.0, 1.0), gbm1_model(1.0),
                                         cir_model(2.0, 1.0, 1.0)};
  for (const FsdeModel& model : models) {
    for (std::uint64_t path = 0; path < 25; ++path) {
      const IncrementSequence seq = sample_path(6, 1.0 / 64.0, 64, 4242, path);
      const Trajectory traj = integrate(model, seq);
      for (const HMatrix& state : traj.states) {
        // Exact by construction; the guard below would have thrown otherwise.
        CHECK((state.dense() - state.dense().transpose()).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("OU ensemble mean of phi stays at zero") {
  const FsdeModel model = ou_model(1.0, 1.0);
  const Index n = 10;
  const double dt = 1.0 / 16.0;
  const std::size_t L = 16;
  const std::size_t paths = 1000;
  std::vector<double> phis(paths);
  parallel_for(paths, 2, [&](std::size_t p) {
    phis[p] = normalized_trace(
        integrate_streamed(model, n, dt, L, 8080, p, detail::no_observer));
  });
  double mean = 0.0;
  for (double v : phis) mean += v;
  mean /= static_cast<double>(paths);
  double ss = 0.0;
  for (double v : phis) ss += (v - mean) * (v - mean);
  const double se = std::sqrt(ss / (static_cast<double>(paths) - 1.0) /
                              static_cast<double>(paths));
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("identical keys give identical trajectories") {
  const FsdeModel model = cir_model(2.0, 1.0, 1.0);
  const HMatrix a = integrate_streamed(model, 5, 1.0 / 32.0, 32, 515, 2, detail::no_observer);
  const HMatrix b = integrate_streamed(model, 5, 1.0 / 32.0, 32, 515, 2, detail::no_observer);
  CHECK(a == b);
}

TEST_CASE("strict PSD mode reports the failing path and step") {
  // Infeasible CIR parameters clamp quickly; strict mode must abort with
  // path/step context.
  const FsdeModel model = cir_model(0.2, 1.0, 3.0);
  IntegrationOptions strict;
  strict.strict_psd = true;
  bool failed = false;
  try {
    for (std::uint64_t path = 0; path < 8; ++path) {
      integrate_streamed(model, 8, 0.25, 64, 99, path, detail::no_observer, strict);
    }
  } catch (const PathFailure& e) {
    failed = true;
    CHECK(e.step >= 0);
  }
  CHECK(failed);
}

}  // TEST_SUITE
