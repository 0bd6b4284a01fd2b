#pragma once

// CSV artifacts and the JSON-lines run log. Every CSV starts with one
// '#'-prefixed metadata line of key=value pairs describing the resolved run
// configuration. Numbers are written with shortest round-trip formatting, so
// artifacts produced from the same configuration and seed are byte-identical
// (the run log also carries wall-clock timings and is exempt from that).

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fsde/convergence.hpp"
#include "fsde/errors.hpp"
#include "fsde/spectral.hpp"

namespace fsde {

/// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// One `key=value` metadata pair of a CSV header line.
using MetaPairs = std::vector<std::pair<std::string, std::string>>;

inline std::string metadata_line(const std::string& command, const MetaPairs& pairs) {
  std::ostringstream os;
  os << "# fsde " << command;
  for (const auto& [k, v] : pairs) os << ' ' << k << '=' << v;
  return os.str();
}

inline std::ofstream open_artifact(const std::string& path) {
  std::ofstream os(path, std::ios::binary);  // binary: byte-stable newlines
  if (!os) throw InvalidArgument("cannot open output file " + path);
  return os;
}

inline void write_error_table_csv(const std::string& path, const std::string& command,
                                  const MetaPairs& meta, const ErrorTable& table) {
  std::ofstream os = open_artifact(path);
  os << metadata_line(command, meta) << '\n';
  os << "dt,error,stderr,paths\n";
  for (const ErrorRow& row : table.rows) {
    os << format_double(row.dt) << ',' << format_double(row.error) << ','
       << format_double(row.stderr_) << ',' << row.paths << '\n';
  }
  if (table.fit) {
    os << "# fitted_order=" << format_double(table.fit->order)
       << " fit_residual=" << format_double(table.fit->residual) << '\n';
  } else {
    os << "# fitted_order=nan fit_residual=nan (fewer than 2 rows above the noise floor)\n";
  }
}

inline void write_histogram_csv(const std::string& path, const std::string& command,
                                const MetaPairs& meta, const SpectralSummary& summary) {
  std::ofstream os = open_artifact(path);
  os << metadata_line(command, meta) << '\n';
  os << "# moments m1=" << format_double(summary.moments[0])
     << " m2=" << format_double(summary.moments[1]) << " m3=" << format_double(summary.moments[2])
     << " m4=" << format_double(summary.moments[3])
     << " support_min=" << format_double(summary.support_estimate.first)
     << " support_max=" << format_double(summary.support_estimate.second)
     << " states=" << summary.states << '\n';
  os << "bin_left,bin_right,density\n";
  for (std::size_t b = 0; b < summary.densities.size(); ++b) {
    os << format_double(summary.bin_edges[b]) << ',' << format_double(summary.bin_edges[b + 1])
       << ',' << format_double(summary.densities[b]) << '\n';
  }
}

inline void write_density_csv(const std::string& path, const std::string& command,
                              const MetaPairs& meta, const DensityCurve& curve) {
  std::ofstream os = open_artifact(path);
  os << metadata_line(command, meta) << '\n';
  os << "x,rho\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    os << format_double(curve.grid[i]) << ',' << format_double(curve.values[i]) << '\n';
  }
}

inline void write_probes_csv(const std::string& path, const std::string& command,
                             const MetaPairs& meta, const std::vector<Complex>& probes,
                             const std::vector<Complex>& values) {
  std::ofstream os = open_artifact(path);
  os << metadata_line(command, meta) << '\n';
  os << "re_z,im_z,re_G,im_G\n";
  for (std::size_t p = 0; p < probes.size(); ++p) {
    os << format_double(probes[p].real()) << ',' << format_double(probes[p].imag()) << ','
       << format_double(values[p].real()) << ',' << format_double(values[p].imag()) << '\n';
  }
}

/// Streaming trajectory writer: one row per step with the spectral summary
/// columns used for plotting.
class TrajectoryCsvWriter {
 public:
  TrajectoryCsvWriter(const std::string& path, const std::string& command, const MetaPairs& meta)
      : os_(open_artifact(path)) {
    os_ << metadata_line(command, meta) << '\n';
    os_ << "k,t,phi_X,min_eig,max_eig,clamp_events_so_far\n";
  }

  void row(std::size_t k, double t, double phi, double min_eig, double max_eig,
           std::uint64_t clamps) {
    os_ << k << ',' << format_double(t) << ',' << format_double(phi) << ','
        << format_double(min_eig) << ',' << format_double(max_eig) << ',' << clamps << '\n';
  }

 private:
  std::ofstream os_;
};

/// Appends JSON-lines entries (configuration echo, per-row timing, clamp
/// totals) to the run log.
class JsonlLogger {
 public:
  explicit JsonlLogger(const std::string& path) : os_(path, std::ios::binary | std::ios::app) {
    if (!os_) throw InvalidArgument("cannot open run log " + path);
  }

  void log(const nlohmann::json& entry) { os_ << entry.dump() << '\n'; }

 private:
  std::ofstream os_;
};

}  // namespace fsde
