// fsde: command-line front end for free SDE simulation.
//
// Subcommands: simulate (one trajectory), spectrum (ensemble terminal
// histogram + transform probes), density (Stieltjes inversion curve),
// strong-order and weak-order (convergence studies). Every run writes
// plot-ready CSV artifacts with a '#' metadata header into --out-dir,
// appends to run.jsonl and echoes the resolved configuration plus
// clamp-event totals to stderr as a JSON line.
//
// Exit codes: 0 success, 1 runtime numerical failure, 2 configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fsde/brownian.hpp"
#include "fsde/convergence.hpp"
#include "fsde/integrator.hpp"
#include "fsde/io.hpp"
#include "fsde/model.hpp"
#include "fsde/parallel.hpp"
#include "fsde/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raw option values before validation; absent fields may still be supplied
// by a --config file (flags always win).
struct Draft {
  std::string config_file;
  std::optional<std::string> model;
  std::optional<double> theta, sigma, a, b;
  std::optional<long long> n, L, M, bins, workers;
  std::optional<double> T, dt, eps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<bool> strict_psd;
  std::vector<long long> R_list;
  std::vector<double> dt_list;
  std::optional<std::string> dump_increments, dump_states;
};

struct RunConfig {
  std::string command;
  std::string model;
  std::vector<std::pair<std::string, double>> model_params;
  fsde::Index n = 0;
  double T = 0.0;
  std::size_t L = 0;
  double dt = 0.0;
  std::size_t M = 1;
  std::uint64_t seed = 0;
  bool seed_defaulted = false;
  std::vector<std::size_t> R_list;
  std::vector<double> dt_list;
  int bins = 20;
  double eps = 0.05;
  std::string out_dir = "out";
  bool strict_psd = false;
  unsigned workers = 0;
  std::optional<std::string> dump_increments, dump_states;
};

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T value{};
  is >> value;
  if (is.fail() || !is.eof()) {
    throw ConfigError("config key '" + key + "': bad value '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + key + "': bad boolean '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

/// Flat key=value config file mirroring the flag names (without the leading
/// dashes). '#' starts a comment; unknown keys are errors; values given on
/// the command line are never overridden.
void merge_config_file(Draft& d, const std::string& path, const std::string& command) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    auto set_num = [&](std::optional<double>& slot) {
      if (!slot) slot = parse_number<double>(key, value);
    };
    auto set_int = [&](std::optional<long long>& slot) {
      if (!slot) slot = parse_number<long long>(key, value);
    };

    if (key == "model") {
      if (!d.model) d.model = value;
    } else if (key == "theta") {
      set_num(d.theta);
    } else if (key == "sigma") {
      set_num(d.sigma);
    } else if (key == "a") {
      set_num(d.a);
    } else if (key == "b") {
      set_num(d.b);
    } else if (key == "n") {
      set_int(d.n);
    } else if (key == "T") {
      set_num(d.T);
    } else if (key == "L") {
      set_int(d.L);
    } else if (key == "dt") {
      set_num(d.dt);
    } else if (key == "M") {
      set_int(d.M);
    } else if (key == "seed") {
      if (!d.seed) d.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "bins") {
      set_int(d.bins);
    } else if (key == "eps") {
      set_num(d.eps);
    } else if (key == "out-dir") {
      if (!d.out_dir) d.out_dir = value;
    } else if (key == "strict-psd") {
      if (!d.strict_psd) d.strict_psd = parse_bool(key, value);
    } else if (key == "workers") {
      set_int(d.workers);
    } else if (key == "R-list") {
      if (command != "strong-order") {
        throw ConfigError("key 'R-list' only applies to strong-order");
      }
      if (d.R_list.empty()) d.R_list = parse_list<long long>(key, value);
    } else if (key == "dt-list") {
      if (command != "weak-order") throw ConfigError("key 'dt-list' only applies to weak-order");
      if (d.dt_list.empty()) d.dt_list = parse_list<double>(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

template <typename T>
T require(const std::optional<T>& slot, const char* key) {
  if (!slot) throw ConfigError(std::string("missing required option '--") + key + "'");
  return *slot;
}

RunConfig validate(const Draft& d, const std::string& command) {
  RunConfig cfg;
  cfg.command = command;

  if (!d.model) {
    throw ConfigError("missing required option '--model'; valid models: ou, gbm1, cir");
  }
  cfg.model = *d.model;
  using ParamSlot = std::pair<const char*, const std::optional<double>*>;
  for (const auto& [key, slot] : {ParamSlot{"theta", &d.theta}, ParamSlot{"sigma", &d.sigma},
                                  ParamSlot{"a", &d.a}, ParamSlot{"b", &d.b}}) {
    if (slot->has_value()) cfg.model_params.emplace_back(key, **slot);
  }
  // Delegates required/extraneous parameter checks to the model factory.
  fsde::build_model(cfg.model, cfg.model_params);

  const long long n = require(d.n, "n");
  if (n < 1) throw ConfigError("'--n' must be >= 1");
  cfg.n = static_cast<fsde::Index>(n);

  if (command == "weak-order") {
    if (d.L || d.dt) throw ConfigError("weak-order takes '--dt-list', not '--L' or '--dt'");
    if (d.dt_list.empty()) throw ConfigError("missing required option '--dt-list'");
    cfg.T = require(d.T, "T");
    if (!(cfg.T > 0.0)) throw ConfigError("'--T' must be > 0");
    for (double v : d.dt_list) {
      fsde::steps_for(cfg.T, v);  // throws on non-divisors
      cfg.dt_list.push_back(v);
    }
  } else {
    // The grid needs two of {T, L, dt}; T = L * dt must hold after
    // resolution, so giving all three requires consistency.
    if (d.L) {
      if (*d.L < 1) throw ConfigError("'--L' must be >= 1");
      cfg.L = static_cast<std::size_t>(*d.L);
    }
    if (d.dt && !(*d.dt > 0.0)) throw ConfigError("'--dt' must be > 0");
    if (d.T && !(*d.T > 0.0)) throw ConfigError("'--T' must be > 0");
    if (d.L && d.dt) {
      cfg.dt = *d.dt;
      cfg.T = static_cast<double>(cfg.L) * cfg.dt;
      if (d.T && std::abs(cfg.T - *d.T) > 1e-9 * std::max(1.0, *d.T)) {
        throw ConfigError("'--L' and '--dt' are inconsistent with '--T' (need T = L * dt)");
      }
    } else if (d.T && d.L) {
      cfg.T = *d.T;
      cfg.dt = cfg.T / static_cast<double>(cfg.L);
    } else if (d.T && d.dt) {
      cfg.T = *d.T;
      cfg.dt = *d.dt;
      cfg.L = fsde::steps_for(cfg.T, cfg.dt);
    } else {
      throw ConfigError("the time grid needs two of '--T', '--L', '--dt' (T = L * dt)");
    }
  }

  if (command == "strong-order") {
    if (d.R_list.empty()) throw ConfigError("missing required option '--R-list'");
    for (long long r : d.R_list) {
      if (r < 1 || cfg.L % static_cast<std::size_t>(r) != 0) {
        throw ConfigError("coarsening factor " + std::to_string(r) + " does not divide L = " +
                          std::to_string(cfg.L));
      }
      cfg.R_list.push_back(static_cast<std::size_t>(r));
    }
  }

  cfg.M = 1;
  if (command != "simulate") {
    const long long m = require(d.M, "M");
    const long long min_paths =
        (command == "strong-order" || command == "weak-order") ? 2 : 1;
    if (m < min_paths) throw ConfigError("'--M' must be >= " + std::to_string(min_paths));
    cfg.M = static_cast<std::size_t>(m);
  }

  if (d.seed) {
    cfg.seed = *d.seed;
  } else {
    std::random_device entropy;
    cfg.seed = (static_cast<std::uint64_t>(entropy()) << 32) ^ entropy();
    cfg.seed_defaulted = true;
  }

  cfg.bins = static_cast<int>(d.bins.value_or(20));
  if (cfg.bins < 1) throw ConfigError("'--bins' must be >= 1");
  cfg.eps = d.eps.value_or(0.05);
  if (!(cfg.eps > 0.0)) throw ConfigError("'--eps' must be > 0");
  cfg.out_dir = d.out_dir.value_or("out");
  cfg.strict_psd = d.strict_psd.value_or(false);
  const long long workers = d.workers.value_or(0);
  if (workers < 0) throw ConfigError("'--workers' must be >= 0");
  cfg.workers = static_cast<unsigned>(workers);
  cfg.dump_increments = d.dump_increments;
  cfg.dump_states = d.dump_states;
  return cfg;
}

std::string join_sizes(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fsde::format_double(xs[i]);
  }
  return out;
}

/// key=value pairs for the one-line CSV metadata header; parseable back into
/// the resolved configuration. Worker count is deliberately absent: it must
/// not affect artifact bytes.
fsde::MetaPairs metadata_pairs(const RunConfig& cfg) {
  fsde::MetaPairs meta;
  meta.emplace_back("model", cfg.model);
  for (const auto& [k, v] : cfg.model_params) meta.emplace_back(k, fsde::format_double(v));
  meta.emplace_back("n", std::to_string(cfg.n));
  meta.emplace_back("T", fsde::format_double(cfg.T));
  if (cfg.command == "weak-order") {
    meta.emplace_back("dt-list", join_doubles(cfg.dt_list));
  } else {
    meta.emplace_back("L", std::to_string(cfg.L));
    meta.emplace_back("dt", fsde::format_double(cfg.dt));
  }
  if (cfg.command == "strong-order") meta.emplace_back("R-list", join_sizes(cfg.R_list));
  meta.emplace_back("M", std::to_string(cfg.M));
  meta.emplace_back("seed", std::to_string(cfg.seed));
  meta.emplace_back("bins", std::to_string(cfg.bins));
  meta.emplace_back("eps", fsde::format_double(cfg.eps));
  meta.emplace_back("strict-psd", cfg.strict_psd ? "1" : "0");
  return meta;
}

json config_json(const RunConfig& cfg) {
  json params = json::object();
  for (const auto& [k, v] : cfg.model_params) params[k] = v;
  json j{{"command", cfg.command},
         {"model", cfg.model},
         {"params", params},
         {"n", cfg.n},
         {"T", cfg.T},
         {"M", cfg.M},
         {"seed", cfg.seed},
         {"seed_defaulted", cfg.seed_defaulted},
         {"bins", cfg.bins},
         {"eps", cfg.eps},
         {"out_dir", cfg.out_dir},
         {"strict_psd", cfg.strict_psd},
         {"workers", fsde::resolve_workers(cfg.workers)}};
  if (cfg.command == "weak-order") {
    j["dt_list"] = cfg.dt_list;
  } else {
    j["L"] = cfg.L;
    j["dt"] = cfg.dt;
  }
  if (cfg.command == "strong-order") j["R_list"] = cfg.R_list;
  return j;
}

double elapsed_seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

json error_table_json(const fsde::ErrorTable& table) {
  json rows = json::array();
  for (const fsde::ErrorRow& row : table.rows) {
    rows.push_back({{"dt", row.dt},
                    {"error", row.error},
                    {"stderr", row.stderr_},
                    {"paths", row.paths},
                    {"in_fit", row.in_fit}});
  }
  json j{{"rows", rows}, {"clamp_events", table.clamp_events}};
  if (table.fit) {
    j["fitted_order"] = table.fit->order;
    j["fit_residual"] = table.fit->residual;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Command implementations. Each returns the clamp-event total.

std::uint64_t run_simulate(const RunConfig& cfg, const fsde::FsdeModel& model,
                           fsde::JsonlLogger& log) {
  const auto t0 = std::chrono::steady_clock::now();
  fsde::TrajectoryCsvWriter csv((fs::path(cfg.out_dir) / "trajectory.csv").string(), cfg.command,
                                metadata_pairs(cfg));
  std::optional<std::ofstream> states_dump;
  if (cfg.dump_states) {
    states_dump.emplace(*cfg.dump_states, std::ios::binary);
    if (!*states_dump) throw ConfigError("cannot open " + *cfg.dump_states);
    fsde::detail::put_u64(*states_dump, static_cast<std::uint64_t>(cfg.n));
    fsde::detail::put_f64(*states_dump, cfg.dt);
    fsde::detail::put_u64(*states_dump, cfg.L + 1);
    fsde::detail::put_u64(*states_dump, cfg.seed);
    fsde::detail::put_u64(*states_dump, 0);
  }

  fsde::PathStream stream(cfg.seed, 0);
  fsde::EvalContext ctx;
  ctx.strict_psd = cfg.strict_psd;
  fsde::DenseMatrix<double> buffer;
  fsde::HMatrix dw;
  fsde::detail::run_femm(
      model, cfg.n, cfg.dt, cfg.L,
      [&](std::size_t) -> const fsde::HMatrix& {
        fsde::fill_increment(buffer, cfg.n, cfg.dt, stream);
        dw = fsde::HMatrix::from_exact_symmetric(buffer);
        return dw;
      },
      [&](std::size_t k, const fsde::HMatrix& state) {
        const fsde::DenseVector<double> vals = fsde::eigenvalues_of(state);
        csv.row(k, static_cast<double>(k) * cfg.dt, fsde::normalized_trace(state), vals(0),
                vals(vals.size() - 1), ctx.clamp_events);
        if (states_dump) {
          for (fsde::Index i = 0; i < cfg.n; ++i) {
            for (fsde::Index j = 0; j < cfg.n; ++j) {
              fsde::detail::put_f64(*states_dump, state(i, j));
            }
          }
        }
      },
      ctx, 0);

  if (cfg.dump_increments) {
    fsde::write_increment_sequence(*cfg.dump_increments,
                                   fsde::sample_path(cfg.n, cfg.dt, cfg.L, cfg.seed, 0));
  }
  log.log({{"command", cfg.command},
           {"config", config_json(cfg)},
           {"clamp_events", ctx.clamp_events},
           {"elapsed_s", elapsed_seconds(t0)}});
  return ctx.clamp_events;
}

std::uint64_t run_spectrum(const RunConfig& cfg, const fsde::FsdeModel& model,
                           fsde::JsonlLogger& log) {
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t clamps = 0;
  const std::vector<fsde::HMatrix> states = fsde::ensemble_terminal_states(
      model, cfg.n, cfg.dt, cfg.L, cfg.M, cfg.seed, cfg.workers, cfg.strict_psd, &clamps);
  const fsde::SpectralSummary summary = fsde::summarize(states, cfg.bins);
  const std::vector<fsde::Complex> probes = fsde::default_probes();
  const std::vector<fsde::Complex> transform = fsde::ensemble_transform(states, probes);

  fsde::write_histogram_csv((fs::path(cfg.out_dir) / "histogram.csv").string(), cfg.command,
                            metadata_pairs(cfg), summary);
  fsde::write_probes_csv((fs::path(cfg.out_dir) / "probes.csv").string(), cfg.command,
                         metadata_pairs(cfg), probes, transform);
  log.log({{"command", cfg.command},
           {"config", config_json(cfg)},
           {"moments",
            {summary.moments[0], summary.moments[1], summary.moments[2], summary.moments[3]}},
           {"support", {summary.support_estimate.first, summary.support_estimate.second}},
           {"clamp_events", clamps},
           {"elapsed_s", elapsed_seconds(t0)}});
  return clamps;
}

std::uint64_t run_density(const RunConfig& cfg, const fsde::FsdeModel& model,
                          fsde::JsonlLogger& log) {
  const auto t0 = std::chrono::steady_clock::now();
  std::uint64_t clamps = 0;
  const std::vector<fsde::HMatrix> states = fsde::ensemble_terminal_states(
      model, cfg.n, cfg.dt, cfg.L, cfg.M, cfg.seed, cfg.workers, cfg.strict_psd, &clamps);
  std::vector<double> pooled;
  for (const fsde::HMatrix& m : states) {
    const fsde::DenseVector<double> vals = fsde::eigenvalues_of(m);
    pooled.insert(pooled.end(), vals.data(), vals.data() + vals.size());
  }
  std::sort(pooled.begin(), pooled.end());
  auto transform = [&pooled](fsde::Complex z) {
    fsde::Complex acc(0, 0);
    for (double v : pooled) acc += 1.0 / (fsde::Complex(v, 0) - z);
    return acc / static_cast<double>(pooled.size());
  };
  const double lo = pooled.front() - 10.0 * cfg.eps;
  const double hi = pooled.back() + 10.0 * cfg.eps;
  const int points = 200;
  std::vector<double> grid;
  grid.reserve(points + 1);
  for (int i = 0; i <= points; ++i) grid.push_back(lo + (hi - lo) * i / points);
  const fsde::DensityCurve curve = fsde::stieltjes_invert(transform, grid, cfg.eps);
  fsde::write_density_csv((fs::path(cfg.out_dir) / "density.csv").string(), cfg.command,
                          metadata_pairs(cfg), curve);
  log.log({{"command", cfg.command},
           {"config", config_json(cfg)},
           {"mass", curve.trapezoid_mass()},
           {"clamp_events", clamps},
           {"elapsed_s", elapsed_seconds(t0)}});
  return clamps;
}

std::uint64_t run_strong_order(const RunConfig& cfg, const fsde::FsdeModel& model,
                               fsde::JsonlLogger& log) {
  const auto t0 = std::chrono::steady_clock::now();
  fsde::StrongStudyConfig study;
  study.n = cfg.n;
  study.dt_min = cfg.dt;
  study.L = cfg.L;
  study.factors = cfg.R_list;
  study.paths = cfg.M;
  study.seed = cfg.seed;
  study.workers = cfg.workers;
  study.strict_psd = cfg.strict_psd;
  const fsde::ErrorTable table = fsde::strong_error_study(model, study);
  fsde::write_error_table_csv((fs::path(cfg.out_dir) / "strong_order.csv").string(), cfg.command,
                              metadata_pairs(cfg), table);
  log.log({{"command", cfg.command},
           {"config", config_json(cfg)},
           {"table", error_table_json(table)},
           {"elapsed_s", elapsed_seconds(t0)}});
  return table.clamp_events;
}

std::uint64_t run_weak_order(const RunConfig& cfg, const fsde::FsdeModel& model,
                             fsde::JsonlLogger& log) {
  const auto t0 = std::chrono::steady_clock::now();
  fsde::WeakStudyConfig study;
  study.n = cfg.n;
  study.dt_list = cfg.dt_list;
  study.T = cfg.T;
  study.paths = cfg.M;
  study.seed = cfg.seed;
  study.workers = cfg.workers;
  study.strict_psd = cfg.strict_psd;
  const fsde::ErrorTable table = fsde::weak_error_study(model, study);
  fsde::write_error_table_csv((fs::path(cfg.out_dir) / "weak_order.csv").string(), cfg.command,
                              metadata_pairs(cfg), table);
  log.log({{"command", cfg.command},
           {"config", config_json(cfg)},
           {"table", error_table_json(table)},
           {"elapsed_s", elapsed_seconds(t0)}});
  return table.clamp_events;
}

void add_common_options(CLI::App* cmd, Draft& d) {
  cmd->add_option("--config", d.config_file, "flat key=value config file (flags win)");
  cmd->add_option("--model", d.model, "model name: ou, gbm1, cir");
  cmd->add_option("--theta", d.theta, "drift rate (ou, gbm1)");
  cmd->add_option("--sigma", d.sigma, "noise amplitude (ou, cir)");
  cmd->add_option("--a", d.a, "cir mean-reversion target rate");
  cmd->add_option("--b", d.b, "cir mean-reversion speed");
  cmd->add_option("--n", d.n, "matrix dimension N");
  cmd->add_option("--T", d.T, "time horizon");
  cmd->add_option("--L", d.L, "number of steps (T = L * dt)");
  cmd->add_option("--dt", d.dt, "step size (T = L * dt)");
  cmd->add_option("--seed", d.seed, "64-bit master seed (default: system entropy)");
  cmd->add_option("--bins", d.bins, "histogram bins (default 20)");
  cmd->add_option("--eps", d.eps, "Stieltjes inversion bandwidth (default 0.05)");
  cmd->add_option("--out-dir", d.out_dir, "output directory (default 'out')");
  cmd->add_flag_callback(
      "--strict-psd", [&d] { d.strict_psd = true; },
      "abort paths instead of clamping negative eigenvalues");
  cmd->add_option("--workers", d.workers, "worker threads (0 = available parallelism)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"free stochastic differential equation simulator"};
  app.require_subcommand(1);

  Draft draft;
  CLI::App* simulate = app.add_subcommand("simulate", "integrate one trajectory");
  CLI::App* spectrum = app.add_subcommand("spectrum", "terminal ensemble histogram and moments");
  CLI::App* density = app.add_subcommand("density", "Stieltjes-inversion density curve");
  CLI::App* strong = app.add_subcommand("strong-order", "coupled strong-convergence study");
  CLI::App* weak = app.add_subcommand("weak-order", "weak-convergence study");
  for (CLI::App* cmd : {simulate, spectrum, density, strong, weak}) {
    add_common_options(cmd, draft);
    if (cmd != simulate) cmd->add_option("--M", draft.M, "number of Monte Carlo paths");
  }
  simulate->add_option("--dump-increments", draft.dump_increments,
                       "write the Brownian increments to this binary file");
  simulate->add_option("--dump-states", draft.dump_states,
                       "write every state to this binary file");
  strong->add_option("--R-list", draft.R_list, "coarsening factors (each must divide L)")
      ->delimiter(',');
  weak->add_option("--dt-list", draft.dt_list, "step sizes (each must divide T)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  RunConfig cfg;
  try {
    if (!draft.config_file.empty()) merge_config_file(draft, draft.config_file, command);
    cfg = validate(draft, command);
  } catch (const std::exception& e) {
    std::cerr << "fsde: configuration error: " << e.what() << "\n";
    return 2;
  }

  try {
    const fsde::FsdeModel model = fsde::build_model(cfg.model, cfg.model_params);
    for (const std::string& warning : model.warnings) {
      std::cerr << "fsde: warning: " << warning << "\n";
    }
    fs::create_directories(cfg.out_dir);
    fsde::JsonlLogger log((fs::path(cfg.out_dir) / "run.jsonl").string());

    std::uint64_t clamp_events = 0;
    if (command == "simulate") {
      clamp_events = run_simulate(cfg, model, log);
    } else if (command == "spectrum") {
      clamp_events = run_spectrum(cfg, model, log);
    } else if (command == "density") {
      clamp_events = run_density(cfg, model, log);
    } else if (command == "strong-order") {
      clamp_events = run_strong_order(cfg, model, log);
    } else {
      clamp_events = run_weak_order(cfg, model, log);
    }

    std::cerr << json{{"resolved_config", config_json(cfg)}, {"clamp_events", clamp_events}}.dump()
              << "\n";
    return 0;
  } catch (const fsde::PathFailure& e) {
    std::cerr << json{{"error", e.what()},
                      {"path_index", e.path_index},
                      {"step", e.step}}
                     .dump()
              << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
