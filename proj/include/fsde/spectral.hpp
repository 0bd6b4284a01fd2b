#pragma once

// Spectral diagnostics of simulated states: pooled eigenvalue summaries,
// normalized histograms, phi-moments, Cauchy transform sampling, Stieltjes
// inversion and distances between empirical and reference transforms.
//
// Sign convention throughout: G(z) = integral d mu(x) / (x - z), an analytic
// map C+ -> C+ with |G(z)| <= 1 / Im(z). Density recovery is
// rho(x) = Im G(x + i eps) / pi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fsde/errors.hpp"
#include "fsde/matrix.hpp"

namespace fsde {

using Complex = std::complex<double>;
using TransformFn = std::function<Complex(Complex)>;

namespace detail {

/// Adaptive Simpson quadrature; Value may be double or std::complex<double>.
template <typename Value, typename Func>
Value adaptive_simpson_step(Func&& f, double a, double b, Value fa, Value fm, Value fb,
                            Value whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const Value flm = f(lm);
  const Value frm = f(rm);
  const Value left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const Value right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const Value delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adaptive_simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename Value, typename Func>
Value adaptive_simpson(Func&& f, double a, double b, double tol, int depth = 40) {
  const Value fa = f(a);
  const Value fm = f(0.5 * (a + b));
  const Value fb = f(b);
  const Value whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson_step(f, a, b, fa, fm, fb, whole, tol, depth);
}

}  // namespace detail

/// Semicircle density with radius R, normalized to unit mass:
/// rho(x) = 2 / (pi R^2) * sqrt(R^2 - x^2) on [-R, R], zero outside.
inline double semicircle_density(double radius, double x) {
  if (!(radius > 0.0)) throw InvalidArgument("semicircle_density: radius must be > 0");
  if (x <= -radius || x >= radius) return 0.0;
  return 2.0 / (M_PI * radius * radius) * std::sqrt(radius * radius - x * x);
}

/// Cauchy transform of the radius-R semicircle law, computed by quadrature
/// against the density (substituting x = R sin(theta) removes the endpoint
/// square roots). Defined for Im(z) > 0.
inline Complex semicircle_cauchy_transform(double radius, Complex z) {
  if (!(radius > 0.0)) throw InvalidArgument("semicircle_cauchy_transform: radius must be > 0");
  if (!(z.imag() > 0.0)) {
    throw InvalidArgument("semicircle_cauchy_transform: probe must satisfy Im(z) > 0");
  }
  auto integrand = [radius, z](double theta) {
    const double c = std::cos(theta);
    return 2.0 / M_PI * c * c / (Complex(radius * std::sin(theta), 0.0) - z);
  };
  return detail::adaptive_simpson<Complex>(integrand, -M_PI / 2.0, M_PI / 2.0, 1e-11);
}

/// Probe points used for transform comparisons, kept away from the real
/// axis where the resolvent bound 1/Im(z) stabilizes the estimates.
inline std::vector<Complex> default_probes() {
  return {Complex(0.0, 1.0), Complex(1.0, 1.0), Complex(0.0, 2.0), Complex(-1.0, 1.0)};
}

/// Pooled spectral summary of an ensemble of states.
struct SpectralSummary {
  std::vector<double> eigenvalues;       // pooled, ascending
  std::vector<double> bin_edges;         // bins + 1 ascending edges
  std::vector<double> densities;         // bins values, integral 1 over the range
  double moments[4] = {0, 0, 0, 0};      // phi-moments m1..m4 of the pooled spectrum
  std::pair<double, double> support_estimate = {0, 0};
  std::size_t states = 0;
};

/// Histogram + moments from an already pooled spectrum. An explicit range
/// overrides the data min/max (finite-size outliers otherwise stretch the
/// bins); values outside the range are dropped from the histogram but kept
/// in the moments.
inline SpectralSummary summarize_spectrum(std::vector<double> pooled, int bins,
                                          std::optional<std::pair<double, double>> range = {}) {
  if (pooled.empty()) throw EmptyEnsemble("summarize: empty spectrum");
  if (bins < 1) throw InvalidArgument("summarize: bins must be >= 1");
  std::sort(pooled.begin(), pooled.end());

  SpectralSummary s;
  s.support_estimate = {pooled.front(), pooled.back()};
  for (double v : pooled) {
    double p = v;
    for (int k = 0; k < 4; ++k) {
      s.moments[k] += p;
      p *= v;
    }
  }
  for (int k = 0; k < 4; ++k) s.moments[k] /= static_cast<double>(pooled.size());

  double lo = range ? range->first : pooled.front();
  double hi = range ? range->second : pooled.back();
  if (!(hi > lo)) {
    // Degenerate spectrum (single atom): give the histogram unit width.
    const double mid = 0.5 * (hi + lo);
    lo = mid - 0.5;
    hi = mid + 0.5;
  }
  const double width = (hi - lo) / bins;
  std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
  std::size_t in_range = 0;
  for (double v : pooled) {
    if (v < lo || v > hi) continue;
    auto b = static_cast<std::size_t>((v - lo) / width);
    if (b >= counts.size()) b = counts.size() - 1;  // v == hi lands in the last bin
    ++counts[b];
    ++in_range;
  }
  s.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) s.bin_edges[static_cast<std::size_t>(b)] = lo + b * width;
  s.bin_edges.back() = hi;
  s.densities.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    s.densities[static_cast<std::size_t>(b)] =
        in_range == 0 ? 0.0
                      : static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                            (static_cast<double>(in_range) * width);
  }
  s.eigenvalues = std::move(pooled);
  return s;
}

/// Pools the spectra of an ensemble and summarizes them.
inline SpectralSummary summarize(const std::vector<HMatrix>& states, int bins,
                                 std::optional<std::pair<double, double>> range = {}) {
  if (states.empty()) throw EmptyEnsemble("summarize: empty ensemble");
  const Index n = states.front().dim();
  std::vector<double> pooled;
  pooled.reserve(states.size() * static_cast<std::size_t>(n));
  for (const HMatrix& m : states) {
    if (m.dim() != n) throw DimensionMismatch("summarize: ensemble dimensions differ");
    const DenseVector<double> vals = eigenvalues_of(m);
    pooled.insert(pooled.end(), vals.data(), vals.data() + vals.size());
  }
  SpectralSummary s = summarize_spectrum(std::move(pooled), bins, range);
  s.states = states.size();
  return s;
}

/// Recovered density curve rho(x) on a grid.
struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> values;

  double trapezoid_mass() const {
    double mass = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      mass += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    return mass;
  }
};

/// Stieltjes inversion at bandwidth eps: rho(x) = Im G(x + i eps) / pi,
/// floored at zero.
inline DensityCurve stieltjes_invert(const TransformFn& transform, std::vector<double> grid,
                                     double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("stieltjes_invert: eps must be > 0");
  DensityCurve curve;
  curve.values.reserve(grid.size());
  for (double x : grid) {
    const double v = transform(Complex(x, eps)).imag() / M_PI;
    curve.values.push_back(v > 0.0 ? v : 0.0);
  }
  curve.grid = std::move(grid);
  return curve;
}

/// Ensemble-averaged Cauchy transform evaluated at the probe points.
inline std::vector<Complex> ensemble_transform(const std::vector<HMatrix>& states,
                                               const std::vector<Complex>& probes) {
  if (states.empty()) throw EmptyEnsemble("ensemble_transform: empty ensemble");
  for (Complex z : probes) {
    if (!(z.imag() > 0.0)) {
      throw InvalidArgument("ensemble_transform: probe must satisfy Im(z) > 0");
    }
  }
  std::vector<Complex> acc(probes.size(), Complex(0, 0));
  for (const HMatrix& m : states) {
    const DenseVector<double> vals = eigenvalues_of(m);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      acc[p] += cauchy_transform_of_spectrum(vals, probes[p]);
    }
  }
  for (Complex& g : acc) g /= static_cast<double>(states.size());
  return acc;
}

/// Distributional-convergence diagnostic: max over the probes of
/// |G_ensemble(z) - G_reference(z)|.
inline double transform_distance(const std::vector<HMatrix>& states,
                                 const TransformFn& reference,
                                 const std::vector<Complex>& probes) {
  const std::vector<Complex> empirical = ensemble_transform(states, probes);
  double distance = 0.0;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    distance = std::max(distance, std::abs(empirical[p] - reference(probes[p])));
  }
  return distance;
}

}  // namespace fsde
