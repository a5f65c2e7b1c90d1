#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/generator.hpp"
#include "pdmp/models.hpp"
#include "pdmp/parallel.hpp"
#include "pdmp/process.hpp"
#include "pdmp/value.hpp"
#include "pdmp/verification.hpp"

namespace pdmp::cli {

struct RunConfig {
  std::string command;
  std::string model = "drift_poisson_reset";
  std::map<std::string, double> params;
  std::string function;  // named test function; model default when empty
  double x0 = 0.0;
  double horizon = 10.0;
  std::uint64_t seed = 0;
  std::size_t n_paths = 1000;
  unsigned threads = 1;
  double discount = 0.5;
  double tolerance = 1e-8;
  double t_max = 0.0;
  double bias = 0.0;  // injected generator bias for ito-check diagnostics
  std::string grid = "0:10:201";        // lo:hi:n
  std::string time_grid = "0:10:101";   // survival evaluation times
  std::string suite = "all";
  std::string format = "csv";  // csv | jsonl
  std::string output = "-";    // '-' = stdout

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["model"] = model;
    j["params"] = params;
    j["function"] = function;
    j["x0"] = x0;
    j["horizon"] = horizon;
    j["seed"] = seed;
    j["n_paths"] = n_paths;
    j["threads"] = threads;
    j["discount"] = discount;
    j["tolerance"] = tolerance;
    j["t_max"] = t_max;
    j["bias"] = bias;
    j["grid"] = grid;
    j["time_grid"] = time_grid;
    j["suite"] = suite;
    j["format"] = format;
    j["output"] = output;
    return j;
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = UINT64_C(0xcbf29ce484222325);
  for (unsigned char c : text) {
    hash ^= c;
    hash *= UINT64_C(0x100000001b3);
  }
  return hash;
}

struct GridArg {
  double lo;
  double hi;
  std::size_t n;
};

inline GridArg parse_grid(const std::string& text) {
  GridArg g{};
  char colon1 = 0;
  char colon2 = 0;
  std::istringstream iss(text);
  if (!(iss >> g.lo >> colon1 >> g.hi >> colon2 >> g.n) || colon1 != ':' ||
      colon2 != ':' || g.n < 2 || !(g.hi > g.lo)) {
    throw ConfigError("bad grid '" + text + "', expected lo:hi:n");
  }
  return g;
}

/// Record sink for the two output formats.  CSV carries the provenance in
/// '#' header lines; JSON-lines carries it in a header object and stamps
/// every record with the config hash and seed.
class Writer {
 public:
  Writer(const RunConfig& config, std::vector<std::string> columns)
      : columns_(std::move(columns)),
        jsonl_(config.format == "jsonl"),
        hash_hex_([&] {
          char buffer[24];
          std::snprintf(buffer, sizeof(buffer), "%016llx",
                        static_cast<unsigned long long>(
                            fnv1a(config.to_json().dump())));
          return std::string(buffer);
        }()),
        seed_(config.seed) {
    if (config.format != "csv" && config.format != "jsonl") {
      throw ConfigError("unknown output format '" + config.format + "'");
    }
    if (config.output == "-") {
      out_ = &std::cout;
    } else {
      file_.open(config.output);
      if (!file_) {
        throw ConfigError("cannot open output path '" + config.output + "'");
      }
      out_ = &file_;
    }
    if (jsonl_) {
      nlohmann::json header;
      header["type"] = "header";
      header["config_hash"] = hash_hex_;
      header["seed"] = seed_;
      header["config"] = config.to_json();
      (*out_) << header.dump() << '\n';
    } else {
      (*out_) << "# config_hash=" << hash_hex_ << " seed=" << seed_ << '\n';
      (*out_) << "# config=" << config.to_json().dump() << '\n';
      for (std::size_t i = 0; i < columns_.size(); ++i) {
        (*out_) << (i ? "," : "") << columns_[i];
      }
      (*out_) << '\n';
    }
  }

  void row(const std::vector<std::string>& values) {
    if (jsonl_) {
      nlohmann::json record;
      record["config_hash"] = hash_hex_;
      record["seed"] = seed_;
      for (std::size_t i = 0; i < columns_.size(); ++i) {
        record[columns_[i]] = values[i];
      }
      (*out_) << record.dump() << '\n';
    } else {
      for (std::size_t i = 0; i < values.size(); ++i) {
        (*out_) << (i ? "," : "") << values[i];
      }
      (*out_) << '\n';
    }
  }

 private:
  std::vector<std::string> columns_;
  bool jsonl_;
  std::string hash_hex_;
  std::uint64_t seed_;
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

inline const TestFunction& pick_function(const models::ModelInstance& model,
                                         const std::string& name) {
  if (name.empty()) return model.test_functions.front().f;
  return model.test_function(name);
}

inline int run_simulate(const RunConfig& config) {
  const auto model = models::build(config.model, config.params);
  std::vector<Trajectory> paths(config.n_paths);
  parallel_for(config.n_paths, config.threads, [&](std::size_t i) {
    RngStream rng(config.seed, i);
    paths[i] = sample_path(model.triple, config.x0, config.horizon, rng);
  });
  Writer writer(config, {"path_id", "n", "tau_n", "pre_state", "post_state"});
  std::size_t total_jumps = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (std::size_t n = 0; n < paths[i].jumps.size(); ++n) {
      const auto& j = paths[i].jumps[n];
      writer.row({std::to_string(i), std::to_string(n + 1),
                  format_double(j.time), format_double(j.pre_state),
                  format_double(j.post_state)});
      ++total_jumps;
    }
  }
  std::cerr << "simulate: " << config.n_paths << " paths, " << total_jumps
            << " jumps\n";
  return 0;
}

inline int run_survival(const RunConfig& config) {
  const auto model = models::build(config.model, config.params);
  const GridArg times = parse_grid(config.time_grid);
  Writer writer(config, {"t", "survival"});
  const double c = model.triple.flow.killing(config.x0);
  for (std::size_t i = 0; i < times.n; ++i) {
    const double t =
        times.lo + (times.hi - times.lo) * static_cast<double>(i) /
                       static_cast<double>(times.n - 1);
    if (t > c) break;
    writer.row({format_double(t),
                format_double(survival(model.triple, config.x0, t))});
  }
  std::cerr << "survival: evaluated on " << config.time_grid << '\n';
  return 0;
}

inline int run_generator_check(const RunConfig& config) {
  const auto model = models::build(config.model, config.params);
  const TestFunction& f = pick_function(model, config.function);
  const DomainReport domain =
      domain_check(model.triple, f, config.x0, config.horizon);
  const ConstraintReport constraint =
      constraint_check(model.triple, f, config.x0, config.horizon);
  Writer writer(config, {"check_id", "statistic", "threshold", "pass"});
  writer.row({"vloc_certification", format_double(domain.vloc_residual),
              format_double(1e-8), domain.vloc_ok ? "1" : "0"});
  writer.row({"domain_integral", format_double(domain.abs_integral),
              format_double(domain.threshold), domain.integrable ? "1" : "0"});
  writer.row({"atom_constraints", format_double(constraint.max_abs_residual),
              format_double(constraint.tolerance),
              constraint.pass ? "1" : "0"});
  const bool pass = domain.pass && constraint.pass;
  std::cerr << "generator-check: " << (pass ? "pass" : "FAIL");
  if (!domain.diagnostic.empty()) std::cerr << " (" << domain.diagnostic << ")";
  std::cerr << '\n';
  return pass ? 0 : 4;
}

inline int run_ito_check(const RunConfig& config) {
  const auto model = models::build(config.model, config.params);
  const TestFunction& f = pick_function(model, config.function);
  MartingaleTestOptions options;
  options.n_threads = config.threads;
  options.bias_rate = config.bias;
  const MartingaleStats stats =
      martingale_test(model.triple, f, config.x0, config.horizon,
                      config.n_paths, config.seed, options);
  Writer writer(config, {"check_id", "statistic", "threshold", "pass"});
  const bool pass = std::abs(stats.z_score) <= 4.0;
  writer.row({"martingale_z", format_double(stats.z_score), format_double(4.0),
              pass ? "1" : "0"});
  writer.row({"martingale_mean", format_double(stats.mean),
              format_double(4.0 * stats.standard_error), pass ? "1" : "0"});
  std::cerr << "ito-check: z = " << stats.z_score << " over "
            << config.n_paths << " paths\n";
  return pass ? 0 : 4;
}

inline int run_value_mc(const RunConfig& config) {
  const auto model = models::build(config.model, config.params);
  const ValueSpec spec = model.make_value_spec(config.discount);
  McOptions options;
  options.n_threads = config.threads;
  const McValueResult result =
      mc_value(model.triple, spec, config.x0, config.horizon, config.n_paths,
               config.seed, options);
  Writer writer(config,
                {"x0", "estimate", "standard_error", "truncation_bound"});
  writer.row({format_double(config.x0), format_double(result.estimate),
              format_double(result.standard_error),
              format_double(result.truncation_bound)});
  std::cerr << "value-mc: " << result.estimate << " +/- "
            << result.standard_error << '\n';
  return 0;
}

inline int run_value_solve(const RunConfig& config) {
  const auto model = models::build(config.model, config.params);
  const ValueSpec spec = model.make_value_spec(config.discount);
  const GridArg g = parse_grid(config.grid);
  SolveOptions options;
  options.tolerance = config.tolerance;
  options.n_threads = config.threads;
  options.t_max = config.t_max;
  const GridSolution solution = fixed_point_solve(
      model.triple, spec, GridSpec{g.lo, g.hi, g.n}, options);
  Writer writer(config, {"state", "value"});
  for (std::size_t i = 0; i < g.n; ++i) {
    writer.row({format_double(solution.grid.node(i)),
                format_double(solution.values[i])});
  }
  std::cerr << "value-solve: " << solution.iteration_count
            << " iterations, sup-change " << solution.final_sup_change
            << ", contraction " << solution.contraction_estimate
            << ", clamped " << solution.clamp_count << " lookups";
  if (solution.stalled) {
    std::cerr << " (stalled at the quadrature noise floor before reaching "
              << config.tolerance << ")";
  }
  std::cerr << '\n';
  return 0;
}

inline int run_verify(const RunConfig& config) {
  verification::VerifyScale scale;
  scale.n_threads = config.threads;
  const auto results =
      verification::run_suite(config.suite, scale, config.seed);
  Writer writer(config, {"check_id", "statistic", "threshold", "pass"});
  std::size_t failures = 0;
  for (const auto& r : results) {
    writer.row({r.check_id, format_double(r.statistic),
                format_double(r.threshold), r.pass ? "1" : "0"});
    if (!r.pass) ++failures;
  }
  std::cerr << "verify: " << results.size() - failures << "/"
            << results.size() << " checks passed\n";
  return failures == 0 ? 0 : 4;
}

}  // namespace detail

/// Entry point shared by the binary and the tests.  Returns the process
/// exit code: 0 success, 2 configuration error, 3 model-validity error,
/// 4 convergence/domain failure.
inline int run(const std::vector<std::string>& args) {
  RunConfig config;
  CLI::App app{"General piecewise-deterministic Markov process toolkit"};
  app.require_subcommand(1);

  // The config file loads before parsing so explicit flags override it.
  bool seed_from_config = false;
  try {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] != "--config") continue;
      std::ifstream in(args[i + 1]);
      if (!in) throw ConfigError("cannot read config file " + args[i + 1]);
      nlohmann::json j;
      in >> j;
      if (j.contains("model")) config.model = j["model"];
      if (j.contains("params")) {
        for (auto it = j["params"].begin(); it != j["params"].end(); ++it) {
          config.params[it.key()] = it.value().get<double>();
        }
      }
      if (j.contains("function")) config.function = j["function"];
      if (j.contains("x0")) config.x0 = j["x0"];
      if (j.contains("horizon")) config.horizon = j["horizon"];
      if (j.contains("seed")) {
        config.seed = j["seed"];
        seed_from_config = true;
      }
      if (j.contains("n_paths")) config.n_paths = j["n_paths"];
      if (j.contains("threads")) config.threads = j["threads"];
      if (j.contains("discount")) config.discount = j["discount"];
      if (j.contains("tolerance")) config.tolerance = j["tolerance"];
      if (j.contains("t_max")) config.t_max = j["t_max"];
      if (j.contains("bias")) config.bias = j["bias"];
      if (j.contains("grid")) config.grid = j["grid"];
      if (j.contains("time_grid")) config.time_grid = j["time_grid"];
      if (j.contains("suite")) config.suite = j["suite"];
      if (j.contains("format")) config.format = j["format"];
      if (j.contains("output")) config.output = j["output"];
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (flags override)")
      ->expected(1);

  std::vector<CLI::Option*> seed_options;
  auto add_common = [&](CLI::App* cmd, bool needs_seed) {
    cmd->add_option("--config", config_path,
                    "JSON config file (flags override)");
    cmd->add_option("--model", config.model, "model name");
    cmd->add_option("--x0", config.x0, "initial state");
    cmd->add_option("--horizon", config.horizon, "time horizon");
    cmd->add_option("--n-paths", config.n_paths, "number of paths");
    cmd->add_option("--threads", config.threads, "worker threads");
    cmd->add_option("--delta", config.discount, "discount rate");
    cmd->add_option("--tol", config.tolerance, "solver tolerance");
    cmd->add_option("--t-max", config.t_max, "truncation horizon (0 = auto)");
    cmd->add_option("--function", config.function, "named test function");
    cmd->add_option("--bias", config.bias, "injected generator bias");
    cmd->add_option("--grid", config.grid, "state grid lo:hi:n");
    cmd->add_option("--t-grid", config.time_grid, "time grid lo:hi:n");
    cmd->add_option("--suite", config.suite, "verification suite");
    cmd->add_option("--format", config.format, "csv or jsonl");
    cmd->add_option("--output", config.output, "output path ('-' = stdout)");
    auto* seed_option = cmd->add_option("--seed", config.seed, "stream seed");
    if (needs_seed && !seed_from_config) seed_option->required();
    seed_options.push_back(seed_option);
    for (const char* p : {"c", "lambda", "theta", "p", "omega"}) {
      cmd->add_option_function<double>(
          std::string("--") + p,
          [&config, key = std::string(p)](double v) { config.params[key] = v; },
          "model parameter");
    }
  };

  add_common(app.add_subcommand("simulate", "sample trajectories"), true);
  add_common(app.add_subcommand("survival",
                                "evaluate the conditional survival function"),
             false);
  add_common(app.add_subcommand(
                 "generator-check",
                 "domain and constraint reports for a test function"),
             false);
  add_common(app.add_subcommand("ito-check",
                                "Monte Carlo martingale verification"),
             true);
  add_common(app.add_subcommand("value-mc",
                                "Monte Carlo discounted value estimate"),
             true);
  add_common(app.add_subcommand("value-solve",
                                "fixed-point solve of the value equation"),
             false);
  add_common(app.add_subcommand("verify", "run the verification suites"),
             true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends
      std::cout << app.help();
      return 0;
    }
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  config.command = app.get_subcommands().front()->get_name();
  try {
    if (config.command == "simulate") return detail::run_simulate(config);
    if (config.command == "survival") return detail::run_survival(config);
    if (config.command == "generator-check") {
      return detail::run_generator_check(config);
    }
    if (config.command == "ito-check") return detail::run_ito_check(config);
    if (config.command == "value-mc") return detail::run_value_mc(config);
    if (config.command == "value-solve") {
      return detail::run_value_solve(config);
    }
    if (config.command == "verify") return detail::run_verify(config);
    std::cerr << "unknown command " << config.command << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 3;
  } catch (const ExplosionError& e) {
    std::cerr << "model error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace pdmp::cli
