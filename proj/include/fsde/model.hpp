#pragma once

// Model abstraction for free stochastic differential equations
//
//   dX = a(X) dt + sum_i b^i(X) dW c^i(X)
//
// together with the three built-in models and their closed-form reference
// statistics:
//
//   ou   : dX = theta X dt + sigma dW,                         X_0 = 0
//   gbm1 : dX = theta X dt + X^(1/2) dW X^(1/2),               X_0 = I
//   cir  : dX = (a - bX) dt + (s/2) sqrt(X) dW + (s/2) dW sqrt(X), X_0 = I
//
// Matrix square roots use the clamped PSD root sqrt(X+): eigenvalues below
// zero are clamped to zero before the root, each clamp is counted, and
// strict mode turns a clamp into an error. Models are immutable value
// objects; drift/diffusion evaluation is pure apart from the clamp counter
// threaded through EvalContext.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsde/errors.hpp"
#include "fsde/matrix.hpp"

namespace fsde {

/// Per-path evaluation state: the clamp policy, the clamp counter, and a
/// one-step scratch slot so that several diffusion factors sharing sqrt(X+)
/// of the same state pay for one eigendecomposition only.
struct EvalContext {
  bool strict_psd = false;
  std::uint64_t clamp_events = 0;

  const void* sqrt_key = nullptr;
  DenseMatrix<double> sqrt_scratch;

  void invalidate_scratch() { sqrt_key = nullptr; }
};

/// Clamped PSD square root sqrt(X+). Eigenvalues below zero count as clamp
/// events; in strict mode any clamp throws StrictModeViolation.
inline HMatrix psd_sqrt(const HMatrix& x, EvalContext& ctx) {
  SpectralDecomposition<double> sd = symmetric_eig(x);
  DenseVector<double> roots(sd.eigenvalues.size());
  for (Index i = 0; i < sd.eigenvalues.size(); ++i) {
    double v = sd.eigenvalues(i);
    if (v < 0.0) {
      if (ctx.strict_psd) {
        throw StrictModeViolation("psd_sqrt: eigenvalue " + std::to_string(v) +
                                  " is negative under strict PSD mode");
      }
      ++ctx.clamp_events;
      v = 0.0;
    }
    roots(i) = std::sqrt(v);
  }
  DenseMatrix<double> out = sd.basis * roots.asDiagonal() * sd.basis.transpose();
  return HMatrix(std::move(out));
}

/// psd_sqrt with a per-step memo keyed on the state's address; valid only
/// within one apply_diffusion call (which resets the scratch on entry).
inline const DenseMatrix<double>& psd_sqrt_cached(const HMatrix& x, EvalContext& ctx) {
  if (ctx.sqrt_key != static_cast<const void*>(&x)) {
    ctx.sqrt_scratch = psd_sqrt(x, ctx).dense();
    ctx.sqrt_key = static_cast<const void*>(&x);
  }
  return ctx.sqrt_scratch;
}

/// Closed-form reference statistics of a model, when known.
struct ReferenceStats {
  /// t -> phi(X_t).
  std::function<double(double)> mean_at;
  /// t -> (lower, upper) support endpoints of the spectral distribution.
  std::function<std::pair<double, double>(double)> support_at;
  /// t -> R(t) when the law is semicircle with radius R(t); absent otherwise.
  std::function<double(double)> semicircle_radius_at;
};

using DriftFn = std::function<HMatrix(const HMatrix&)>;
using FactorPairFn = std::function<std::pair<HMatrix, HMatrix>(const HMatrix&, EvalContext&)>;

/// dX = drift(X) dt + sum over diffusion_terms of b(X) dW c(X). Drift maps
/// symmetric inputs to symmetric outputs; the diffusion terms are arranged
/// so their sum applied to a symmetric increment is symmetric.
struct FsdeModel {
  std::string name;
  std::vector<std::pair<std::string, double>> params;
  DriftFn drift;
  std::vector<FactorPairFn> diffusion_terms;
  std::function<HMatrix(Index)> initial_state;
  ReferenceStats reference;
  std::vector<std::string> warnings;

  /// Optional specialized evaluation of the diffusion map, bit-identical to
  /// summing the factor pairs (tests assert the equality). Hot loops use it
  /// to skip products against identity factors.
  std::function<HMatrix(const HMatrix&, const HMatrix&, EvalContext&)> fast_diffusion;
};

namespace detail {

/// Detects an exact scalar multiple of the identity (bitwise: constant
/// diagonal, zero off-diagonal), enabling GEMM-free factor application that
/// is bit-identical to the dense product.
inline std::optional<double> as_scalar_identity(const DenseMatrix<double>& m) {
  const double s = m(0, 0);
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (i == j) {
        if (m(i, j) != s) return std::nullopt;
      } else {
        if (m(i, j) != 0.0) return std::nullopt;
      }
    }
  }
  return s;
}

/// B * dW * C with left-to-right association. Scalar-identity factors skip
/// the matrix product; the shortcut reproduces the dense GEMM bit-for-bit
/// because a GEMM row against (s * I) reduces to one nonzero product plus
/// exact zero terms.
inline DenseMatrix<double> sandwich(const DenseMatrix<double>& b, const DenseMatrix<double>& dw,
                                    const DenseMatrix<double>& c) {
  const std::optional<double> sb = as_scalar_identity(b);
  const std::optional<double> sc = as_scalar_identity(c);
  DenseMatrix<double> left;
  if (sb) {
    left = (*sb == 1.0) ? dw : (*sb * dw).eval();
  } else {
    left.noalias() = b * dw;
  }
  if (sc) {
    return (*sc == 1.0) ? left : (left * *sc).eval();
  }
  DenseMatrix<double> out;
  out.noalias() = left * c;
  return out;
}

}  // namespace detail

/// Evaluates sum_i b^i(X) dW c^i(X) from the factor-pair list. The result
/// passes the constructor's symmetrization guard, so models whose terms are
/// not transpose-compatible are rejected at run time.
inline HMatrix apply_diffusion_terms(const FsdeModel& model, const HMatrix& x, const HMatrix& dw,
                                     EvalContext& ctx) {
  if (x.dim() != dw.dim()) {
    throw DimensionMismatch("apply_diffusion: state dimension " + std::to_string(x.dim()) +
                            " vs increment dimension " + std::to_string(dw.dim()));
  }
  ctx.invalidate_scratch();
  DenseMatrix<double> acc = DenseMatrix<double>::Zero(x.dim(), x.dim());
  for (const FactorPairFn& term : model.diffusion_terms) {
    const auto [b, c] = term(x, ctx);
    if (b.dim() != x.dim() || c.dim() != x.dim()) {
      throw DimensionMismatch("apply_diffusion: factor dimension does not match state");
    }
    acc += detail::sandwich(b.dense(), dw.dense(), c.dense());
  }
  return HMatrix(std::move(acc));
}

/// Diffusion map dispatcher: takes the model's specialized routine when one
/// is installed, the generic factor-pair sum otherwise.
inline HMatrix apply_diffusion(const FsdeModel& model, const HMatrix& x, const HMatrix& dw,
                               EvalContext& ctx) {
  if (model.fast_diffusion) {
    if (x.dim() != dw.dim()) {
      throw DimensionMismatch("apply_diffusion: state dimension " + std::to_string(x.dim()) +
                              " vs increment dimension " + std::to_string(dw.dim()));
    }
    ctx.invalidate_scratch();
    return model.fast_diffusion(x, dw, ctx);
  }
  return apply_diffusion_terms(model, x, dw, ctx);
}

// ---------------------------------------------------------------------------
// Built-in models

/// Free Ornstein-Uhlenbeck: dX = theta X dt + sigma dW, X_0 = 0. The law of
/// X_t is semicircle with radius R(t) = sqrt(2 sigma^2 expm1(2 theta t) /
/// theta) (continuous through theta = 0, where R = 2 sigma sqrt(t)).
inline FsdeModel ou_model(double theta, double sigma) {
  FsdeModel model;
  model.name = "ou";
  model.params = {{"theta", theta}, {"sigma", sigma}};
  model.drift = [theta](const HMatrix& x) { return theta * x; };
  model.diffusion_terms = {[sigma](const HMatrix& x, EvalContext&) {
    return std::make_pair(sigma * HMatrix::identity(x.dim()), HMatrix::identity(x.dim()));
  }};
  model.fast_diffusion = [sigma](const HMatrix&, const HMatrix& dw, EvalContext&) {
    return sigma * dw;
  };
  model.initial_state = [](Index n) { return HMatrix::zero(n); };
  model.reference.mean_at = [](double) { return 0.0; };
  model.reference.semicircle_radius_at = [theta, sigma](double t) {
    if (t <= 0.0) return 0.0;
    const double growth = std::abs(theta) < 1e-12 ? 2.0 * t : std::expm1(2.0 * theta * t) / theta;
    return std::sqrt(2.0 * sigma * sigma * growth);
  };
  model.reference.support_at = [radius = model.reference.semicircle_radius_at](double t) {
    const double r = radius(t);
    return std::make_pair(-r, r);
  };
  return model;
}

namespace detail {

/// Support endpoint of the geometric Brownian motion I spectral law:
/// I(r, t) = r / (1 + r) * exp((theta - 1 - r) t) with
/// r = (-1 +- sqrt(1 + 4/t)) / 2. The '+' root gives the lower endpoint,
/// the '-' root the upper one.
inline double gbm1_support_endpoint(double theta, double t, double root_sign) {
  const double r = (-1.0 + root_sign * std::sqrt(1.0 + 4.0 / t)) / 2.0;
  return r / (1.0 + r) * std::exp((theta - 1.0 - r) * t);
}

}  // namespace detail

/// Geometric Brownian motion I: dX = theta X dt + X^(1/2) dW X^(1/2) with
/// X_0 = I; phi(X_t) = exp(theta t).
inline FsdeModel gbm1_model(double theta) {
  FsdeModel model;
  model.name = "gbm1";
  model.params = {{"theta", theta}};
  model.drift = [theta](const HMatrix& x) { return theta * x; };
  model.diffusion_terms = {[](const HMatrix& x, EvalContext& ctx) {
    HMatrix root = HMatrix::from_exact_symmetric(psd_sqrt_cached(x, ctx));
    return std::make_pair(root, root);
  }};
  model.initial_state = [](Index n) { return HMatrix::identity(n); };
  model.reference.mean_at = [theta](double t) { return std::exp(theta * t); };
  model.reference.support_at = [theta](double t) {
    if (t <= 0.0) return std::make_pair(1.0, 1.0);
    return std::make_pair(detail::gbm1_support_endpoint(theta, t, +1.0),
                          detail::gbm1_support_endpoint(theta, t, -1.0));
  };
  return model;
}

/// Free Cox-Ingersoll-Ross: dX = (a - bX) dt + (sigma/2) sqrt(X) dW +
/// (sigma/2) dW sqrt(X), X_0 = I; phi(X_t) = exp(-bt)/b * (b + a(exp(bt)-1)).
/// Clamping stays rare under the feasibility condition 2 a^2 >= sigma^2,
/// which is warned about (not enforced) when violated.
inline FsdeModel cir_model(double a, double b, double sigma) {
  if (!(a > 0.0) || !(b > 0.0) || !(sigma > 0.0)) {
    throw InvalidArgument("cir_model: parameters a, b, sigma must all be > 0");
  }
  FsdeModel model;
  model.name = "cir";
  model.params = {{"a", a}, {"b", b}, {"sigma", sigma}};
  if (2.0 * a * a < sigma * sigma) {
    model.warnings.push_back("cir feasibility condition 2*a^2 >= sigma^2 violated; "
                             "eigenvalue clamping may become frequent");
  }
  model.drift = [a, b](const HMatrix& x) {
    return HMatrix(a * DenseMatrix<double>::Identity(x.dim(), x.dim()) - b * x.dense());
  };
  const double half_sigma = sigma / 2.0;
  model.diffusion_terms = {
      [half_sigma](const HMatrix& x, EvalContext& ctx) {
        HMatrix root = HMatrix::from_exact_symmetric((half_sigma * psd_sqrt_cached(x, ctx)).eval());
        return std::make_pair(root, HMatrix::identity(x.dim()));
      },
      [half_sigma](const HMatrix& x, EvalContext& ctx) {
        HMatrix root = HMatrix::from_exact_symmetric((half_sigma * psd_sqrt_cached(x, ctx)).eval());
        return std::make_pair(HMatrix::identity(x.dim()), root);
      }};
  model.initial_state = [](Index n) { return HMatrix::identity(n); };
  model.reference.mean_at = [a, b](double t) {
    return std::exp(-b * t) / b * (b + a * (std::exp(b * t) - 1.0));
  };
  return model;
}

/// Builds a model by CLI name from named parameters. Throws InvalidArgument
/// for unknown names, missing parameters, or parameters the model does not
/// take.
inline FsdeModel build_model(const std::string& name,
                             const std::vector<std::pair<std::string, double>>& params) {
  auto take = [&params](std::initializer_list<const char*> wanted) {
    std::vector<double> values;
    for (const char* key : wanted) {
      bool found = false;
      for (const auto& [k, v] : params) {
        if (k == key) {
          values.push_back(v);
          found = true;
          break;
        }
      }
      if (!found) {
        throw InvalidArgument(std::string("missing model parameter '") + key + "'");
      }
    }
    for (const auto& [k, v] : params) {
      bool known = false;
      for (const char* key : wanted) known = known || (k == key);
      if (!known) throw InvalidArgument("model does not take parameter '" + k + "'");
    }
    return values;
  };

  if (name == "ou") {
    const auto v = take({"theta", "sigma"});
    return ou_model(v[0], v[1]);
  }
  if (name == "gbm1") {
    const auto v = take({"theta"});
    return gbm1_model(v[0]);
  }
  if (name == "cir") {
    const auto v = take({"a", "b", "sigma"});
    return cir_model(v[0], v[1], v[2]);
  }
  throw InvalidArgument("unknown model '" + name + "'; valid models: ou, gbm1, cir");
}

}  // namespace fsde
