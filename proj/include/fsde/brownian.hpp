#pragma once

// Discretized free Brownian motion. Each increment is the random symmetric
// matrix
//
//   dW = sqrt(dt / (2N)) * (A + A^T),   A_ij iid N(0,1),
//
// so off-diagonal entries have variance dt/N and diagonal entries 2dt/N.
// The exact finite-N second moment is E phi(dW^2) = dt * (N+1)/N, which is
// what statistical tests assert; the N -> infinity law of dW is semicircle
// with variance dt.
//
// Randomness discipline: every path owns a private stream seeded from
// (master seed, path index), so ensembles reproduce bit-identically under
// any execution order. A path is never continued across calls; regenerating
// with the same key replays the same increments.

#include <bit>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fsde/errors.hpp"
#include "fsde/matrix.hpp"

namespace fsde {

/// Deterministic per-path random stream keyed on (seed, path_index).
/// The normal generator is the ziggurat sampler from Boost.Random; draws are
/// reproducible for a fixed build of this project.
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path_index)
      : seed_(seed), path_index_(path_index) {
    std::seed_seq sequence{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(path_index), static_cast<std::uint32_t>(path_index >> 32)};
    engine_.seed(sequence);
  }

  double normal() { return normal_(engine_); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t path_index() const { return path_index_; }

 private:
  std::uint64_t seed_;
  std::uint64_t path_index_;
  boost::random::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
};

/// Fills `buffer` with one increment of variance dt, drawing the n*n entries
/// of A in row-major order and then forming sqrt(dt/(2n)) * (A + A^T) in
/// place. The result is entrywise symmetric bit-exactly.
inline void fill_increment(DenseMatrix<double>& buffer, Index n, double dt, PathStream& stream) {
  if (n < 1) throw InvalidArgument("fill_increment: dimension must be >= 1");
  if (!(dt > 0.0)) throw InvalidArgument("fill_increment: step size must be > 0");
  buffer.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) buffer(i, j) = stream.normal();
  }
  const double scale = std::sqrt(dt / (2.0 * static_cast<double>(n)));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = scale * (buffer(i, j) + buffer(j, i));
      buffer(i, j) = v;
      buffer(j, i) = v;
    }
  }
}

/// One free Brownian increment of variance dt.
inline HMatrix sample_increment(Index n, double dt, PathStream& stream) {
  DenseMatrix<double> buffer;
  fill_increment(buffer, n, dt, stream);
  return HMatrix::from_exact_symmetric(std::move(buffer));
}

/// A discretized free Brownian path: L increments of variance dt each, plus
/// the stream key it was generated from.
struct IncrementSequence {
  Index n = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  std::vector<HMatrix> increments;

  std::size_t length() const { return increments.size(); }
};

/// Samples the L increments of one path. Calls are self-contained: the
/// stream is derived from (seed, path_index) afresh, never continued.
inline IncrementSequence sample_path(Index n, double dt, std::size_t L, std::uint64_t seed,
                                     std::uint64_t path_index) {
  if (L < 1) throw InvalidArgument("sample_path: step count must be >= 1");
  PathStream stream(seed, path_index);
  IncrementSequence seq;
  seq.n = n;
  seq.dt = dt;
  seq.seed = seed;
  seq.path_index = path_index;
  seq.increments.reserve(L);
  for (std::size_t k = 0; k < L; ++k) seq.increments.push_back(sample_increment(n, dt, stream));
  return seq;
}

/// Merges groups of R consecutive increments into single increments of
/// variance R*dt. Group sums accumulate in increment-index order; coupled
/// multi-resolution runs rely on that order being canonical.
inline IncrementSequence coarsen(const IncrementSequence& seq, std::size_t R) {
  if (R < 1 || seq.length() % R != 0) {
    throw InvalidArgument("coarsen: factor " + std::to_string(R) + " does not divide length " +
                          std::to_string(seq.length()));
  }
  IncrementSequence out;
  out.n = seq.n;
  out.dt = seq.dt * static_cast<double>(R);
  out.seed = seq.seed;
  out.path_index = seq.path_index;
  const std::size_t groups = seq.length() / R;
  out.increments.reserve(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    DenseMatrix<double> acc = seq.increments[g * R].dense();
    for (std::size_t r = 1; r < R; ++r) acc += seq.increments[g * R + r].dense();
    out.increments.push_back(HMatrix::from_exact_symmetric(std::move(acc)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary dump for replay debugging. Header: n, dt, L, seed, path_index as
// little-endian 64-bit fields, then increments row-major as 64-bit floats.

static_assert(std::endian::native == std::endian::little,
              "increment dump files are little-endian");

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
inline double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace detail

inline void write_increment_sequence(std::ostream& os, const IncrementSequence& seq) {
  detail::put_u64(os, static_cast<std::uint64_t>(seq.n));
  detail::put_f64(os, seq.dt);
  detail::put_u64(os, static_cast<std::uint64_t>(seq.length()));
  detail::put_u64(os, seq.seed);
  detail::put_u64(os, seq.path_index);
  for (const HMatrix& m : seq.increments) {
    for (Index i = 0; i < seq.n; ++i) {
      for (Index j = 0; j < seq.n; ++j) detail::put_f64(os, m(i, j));
    }
  }
}

inline void write_increment_sequence(const std::string& path, const IncrementSequence& seq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("write_increment_sequence: cannot open " + path);
  write_increment_sequence(os, seq);
}

inline IncrementSequence read_increment_sequence(std::istream& is) {
  IncrementSequence seq;
  seq.n = static_cast<Index>(detail::get_u64(is));
  seq.dt = detail::get_f64(is);
  const std::uint64_t L = detail::get_u64(is);
  seq.seed = detail::get_u64(is);
  seq.path_index = detail::get_u64(is);
  if (!is || seq.n < 1 || !(seq.dt > 0.0) || L < 1) {
    throw InvalidArgument("read_increment_sequence: malformed header");
  }
  seq.increments.reserve(L);
  for (std::uint64_t k = 0; k < L; ++k) {
    DenseMatrix<double> buf(seq.n, seq.n);
    for (Index i = 0; i < seq.n; ++i) {
      for (Index j = 0; j < seq.n; ++j) buf(i, j) = detail::get_f64(is);
    }
    if (!is) throw InvalidArgument("read_increment_sequence: truncated payload");
    seq.increments.push_back(HMatrix(std::move(buf)));
  }
  return seq;
}

inline IncrementSequence read_increment_sequence(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("read_increment_sequence: cannot open " + path);
  return read_increment_sequence(is);
}

}  // namespace fsde
