#pragma once

// Dense real-symmetric matrix primitives: normalized trace, spectral
// decomposition, matrix functions through functional calculus, trace norms
// and resolvent (Cauchy transform) evaluation. Everything is backed by one
// eigendecomposition routine; matrices are immutable value types and all
// functions here are pure.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "fsde/errors.hpp"

namespace fsde {

using Index = Eigen::Index;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DenseVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Self-adjoint element of M_N^sa(R) as a dense real symmetric matrix.
///
/// The constructor accepts nearly-symmetric input and replaces it by
/// (M + M^T)/2 when ||M - M^T||_F <= 1e-12 * ||M||_F, and rejects anything
/// worse. Stored entries therefore satisfy entry(i,j) == entry(j,i)
/// bit-exactly, which downstream code relies on.
template <typename Scalar>
class HermitianMatrix {
 public:
  using Dense = DenseMatrix<Scalar>;

  static constexpr Scalar relative_symmetry_tolerance = Scalar(1e-12);

  HermitianMatrix() = default;

  explicit HermitianMatrix(Dense m) {
    if (m.rows() != m.cols()) {
      throw DimensionMismatch("HermitianMatrix: input must be square, got " +
                              std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
    if (m.rows() == 0) {
      throw InvalidArgument("HermitianMatrix: dimension must be >= 1");
    }
    const Scalar asym = (m - m.transpose()).norm();
    const Scalar scale = m.norm();
    if (asym > relative_symmetry_tolerance * scale) {
      throw InvalidArgument("HermitianMatrix: input asymmetry " + std::to_string(asym) +
                            " exceeds tolerance for scale " + std::to_string(scale));
    }
    mat_ = ((m + m.transpose()) * Scalar(0.5)).eval();
  }

  static HermitianMatrix zero(Index n) { return HermitianMatrix(Dense::Zero(n, n)); }
  static HermitianMatrix identity(Index n) { return HermitianMatrix(Dense::Identity(n, n)); }

  Index dim() const { return mat_.rows(); }
  const Dense& dense() const { return mat_; }
  Scalar operator()(Index i, Index j) const { return mat_(i, j); }

  // Entrywise operations preserve exact symmetry bit-for-bit.
  friend HermitianMatrix operator+(const HermitianMatrix& a, const HermitianMatrix& b) {
    check_same_dim(a, b);
    return HermitianMatrix((a.mat_ + b.mat_).eval(), exact_tag{});
  }
  friend HermitianMatrix operator-(const HermitianMatrix& a, const HermitianMatrix& b) {
    check_same_dim(a, b);
    return HermitianMatrix((a.mat_ - b.mat_).eval(), exact_tag{});
  }
  friend HermitianMatrix operator*(Scalar s, const HermitianMatrix& a) {
    return HermitianMatrix((s * a.mat_).eval(), exact_tag{});
  }
  HermitianMatrix operator-() const { return Scalar(-1) * (*this); }

  friend bool operator==(const HermitianMatrix& a, const HermitianMatrix& b) {
    return a.mat_.rows() == b.mat_.rows() && a.mat_ == b.mat_;
  }

  /// Wraps a matrix that is exactly symmetric by construction, skipping the
  /// tolerance check. Callers must guarantee entrywise symmetry.
  static HermitianMatrix from_exact_symmetric(Dense m) {
    return HermitianMatrix(std::move(m), exact_tag{});
  }

 private:
  struct exact_tag {};
  HermitianMatrix(Dense m, exact_tag) : mat_(std::move(m)) {}

  static void check_same_dim(const HermitianMatrix& a, const HermitianMatrix& b) {
    if (a.dim() != b.dim()) {
      throw DimensionMismatch("HermitianMatrix: dimensions " + std::to_string(a.dim()) +
                              " and " + std::to_string(b.dim()) + " do not agree");
    }
  }

  Dense mat_;
};

using HMatrix = HermitianMatrix<double>;

/// Eigendecomposition M = basis * diag(eigenvalues) * basis^T with
/// eigenvalues in ascending order and an orthogonal basis.
template <typename Scalar>
struct SpectralDecomposition {
  DenseVector<Scalar> eigenvalues;
  DenseMatrix<Scalar> basis;
};

/// phi(M) = tr(M) / N, the normalized trace playing the role of expectation
/// for spectral observables. Accepts any square Eigen expression.
template <typename Derived>
typename Derived::Scalar normalized_trace(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch("normalized_trace: need a nonempty square matrix");
  }
  return m.trace() / static_cast<typename Derived::Scalar>(m.rows());
}

template <typename Scalar>
Scalar normalized_trace(const HermitianMatrix<Scalar>& m) {
  return normalized_trace(m.dense());
}

template <typename Scalar>
SpectralDecomposition<Scalar> symmetric_eig(const HermitianMatrix<Scalar>& m) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> solver(m.dense());
  if (solver.info() != Eigen::Success) {
    throw EigFailure("symmetric_eig: eigensolver did not converge at dimension " +
                     std::to_string(m.dim()));
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Eigenvalues only (ascending); cheaper than symmetric_eig when the basis
/// is not needed.
template <typename Scalar>
DenseVector<Scalar> eigenvalues_of(const HermitianMatrix<Scalar>& m) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> solver(m.dense(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw EigFailure("eigenvalues_of: eigensolver did not converge at dimension " +
                     std::to_string(m.dim()));
  }
  return solver.eigenvalues();
}

/// f(M) through functional calculus: basis * diag(f(lambda_i)) * basis^T.
/// Throws DomainError if f produces a non-finite value on some eigenvalue;
/// clamping policies are applied by the caller before reaching this point.
template <typename Scalar, typename Func>
HermitianMatrix<Scalar> matrix_function(const HermitianMatrix<Scalar>& m, Func&& f) {
  SpectralDecomposition<Scalar> sd = symmetric_eig(m);
  DenseVector<Scalar> mapped(sd.eigenvalues.size());
  for (Index i = 0; i < sd.eigenvalues.size(); ++i) {
    const Scalar v = f(sd.eigenvalues(i));
    if (!std::isfinite(v)) {
      throw DomainError("matrix_function: f is not finite at eigenvalue " +
                        std::to_string(sd.eigenvalues(i)));
    }
    mapped(i) = v;
  }
  DenseMatrix<Scalar> result = sd.basis * mapped.asDiagonal() * sd.basis.transpose();
  return HermitianMatrix<Scalar>(std::move(result));
}

/// phi(|M|) = (sum_i |lambda_i|) / N, the normalized trace norm used as the
/// pathwise (strong) error metric.
template <typename Scalar>
Scalar abs_trace(const HermitianMatrix<Scalar>& m) {
  const DenseVector<Scalar> vals = eigenvalues_of(m);
  Scalar acc = 0;
  for (Index i = 0; i < vals.size(); ++i) acc += std::abs(vals(i));
  return acc / static_cast<Scalar>(vals.size());
}

/// Cauchy transform of a spectrum under the convention
/// G(z) = integral d mu(x) / (x - z), which maps C+ to C+.
template <typename Scalar>
std::complex<Scalar> cauchy_transform_of_spectrum(const DenseVector<Scalar>& eigenvalues,
                                                  std::complex<Scalar> z) {
  if (!(z.imag() > Scalar(0))) {
    throw InvalidArgument("cauchy_transform: probe point must satisfy Im(z) > 0");
  }
  std::complex<Scalar> acc(0, 0);
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    acc += std::complex<Scalar>(1, 0) / (std::complex<Scalar>(eigenvalues(i), 0) - z);
  }
  return acc / static_cast<Scalar>(eigenvalues.size());
}

/// G_M(z) = phi((M - z)^{-1}), evaluated spectrally.
template <typename Scalar>
std::complex<Scalar> cauchy_transform(const HermitianMatrix<Scalar>& m, std::complex<Scalar> z) {
  if (!(z.imag() > Scalar(0))) {
    throw InvalidArgument("cauchy_transform: probe point must satisfy Im(z) > 0");
  }
  return cauchy_transform_of_spectrum(eigenvalues_of(m), z);
}

}  // namespace fsde
