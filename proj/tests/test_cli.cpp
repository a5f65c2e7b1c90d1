#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/cli.hpp"

namespace fs = std::filesystem;
using pdmp::cli::run;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("pdmp_cli_test_" + name);
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("simulate is byte-identical across thread counts") {
  std::vector<std::string> outputs;
  for (const char* threads : {"1", "2", "8"}) {
    const fs::path path = temp_file(std::string("sim_") + threads + ".csv");
    const int code =
        run({"simulate", "--model", "drift_poisson_reset", "--lambda", "1.0",
             "--c", "1.0", "--x0", "0.5", "--horizon", "10", "--n-paths",
             "64", "--seed", "7", "--threads", threads, "--output",
             path.string()});
    REQUIRE(code == 0);
    outputs.push_back(slurp(path));
    fs::remove(path);
  }
  // The echoed config differs only in the threads field; strip headers for
  // the byte comparison of the records and compare record payloads.
  auto records = [](const std::string& text) {
    std::istringstream iss(text);
    std::string line;
    std::string body;
    while (std::getline(iss, line)) {
      if (!line.empty() && line[0] == '#') continue;
      body += line;
      body += '\n';
    }
    return body;
  };
  CHECK(records(outputs[0]) == records(outputs[1]));
  CHECK(records(outputs[0]) == records(outputs[2]));
  CHECK(!records(outputs[0]).empty());
}

TEST_CASE("identical config and seed reproduce identical bytes") {
  const fs::path p = temp_file("rep.csv");
  std::vector<std::string> captures;
  for (int round = 0; round < 2; ++round) {
    REQUIRE(run({"simulate", "--model", "quasi_step_maintenance", "--p",
                 "0.4", "--x0", "0", "--horizon", "20", "--n-paths", "32",
                 "--seed", "99", "--output", p.string()}) == 0);
    captures.push_back(slurp(p));
    fs::remove(p);
  }
  CHECK(captures[0] == captures[1]);
  CHECK(!captures[0].empty());
}

TEST_CASE("different seeds give different trajectories") {
  const fs::path a = temp_file("seed_a.csv");
  const fs::path b = temp_file("seed_b.csv");
  REQUIRE(run({"simulate", "--model", "drift_poisson_reset", "--x0", "0",
               "--horizon", "10", "--n-paths", "8", "--seed", "1",
               "--output", a.string()}) == 0);
  REQUIRE(run({"simulate", "--model", "drift_poisson_reset", "--x0", "0",
               "--horizon", "10", "--n-paths", "8", "--seed", "2",
               "--output", b.string()}) == 0);
  CHECK(slurp(a) != slurp(b));
  fs::remove(a);
  fs::remove(b);
}

TEST_CASE("config errors exit with code 2") {
  CHECK(run({"simulate", "--model", "drift_poisson_reset", "--horizon", "5",
             "--n-paths", "4"}) == 2);  // seed missing
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"simulate", "--seed", "1", "--unknown-flag", "3"}) == 2);
  CHECK(run({"simulate", "--model", "no_such_model", "--seed", "1"}) == 2);
  CHECK(run({"value-solve", "--model", "drift_poisson_reset", "--grid",
             "10:0:50"}) == 2);
  CHECK(run({"simulate", "--model", "quasi_step_maintenance", "--p", "1.7",
             "--seed", "3"}) == 2);
}

TEST_CASE("model-validity failures exit with code 3") {
  // A path with ~2e6 expected jumps blows the jump-count cap.
  CHECK(run({"simulate", "--model", "drift_poisson_reset", "--lambda", "1e6",
             "--horizon", "2", "--n-paths", "1", "--seed", "4"}) == 3);
}

TEST_CASE("convergence failures exit with code 4") {
  CHECK(run({"value-solve", "--model", "drift_poisson_reset", "--delta",
             "1e-9", "--grid", "0:4:5"}) == 4);
}

TEST_CASE("config file keys load and flags override them") {
  const fs::path cfg = temp_file("config.json");
  {
    std::ofstream out(cfg);
    out << R"({"model":"drift_poisson_reset","x0":0.5,"horizon":10,)"
        << R"("n_paths":16,"seed":21,"params":{"lambda":1.0,"c":1.0}})";
  }
  const fs::path a = temp_file("cfg_a.csv");
  const fs::path b = temp_file("cfg_b.csv");
  REQUIRE(run({"simulate", "--config", cfg.string(), "--output",
               a.string()}) == 0);
  // Same run spelled out with flags.
  REQUIRE(run({"simulate", "--model", "drift_poisson_reset", "--lambda",
               "1.0", "--c", "1.0", "--x0", "0.5", "--horizon", "10",
               "--n-paths", "16", "--seed", "21", "--output",
               b.string()}) == 0);
  auto body = [](const std::string& text) {
    std::string out;
    std::istringstream iss(text);
    std::string line;
    while (std::getline(iss, line)) {
      if (!line.empty() && line[0] == '#') continue;
      out += line + "\n";
    }
    return out;
  };
  CHECK(body(slurp(a)) == body(slurp(b)));

  // A flag overrides the config-file seed: different draws.
  const fs::path c = temp_file("cfg_c.csv");
  REQUIRE(run({"simulate", "--config", cfg.string(), "--seed", "22",
               "--output", c.string()}) == 0);
  CHECK(body(slurp(a)) != body(slurp(c)));
  fs::remove(cfg);
  fs::remove(a);
  fs::remove(b);
  fs::remove(c);
}

TEST_CASE("survival output matches the model oracle") {
  const fs::path path = temp_file("surv.csv");
  REQUIRE(run({"survival", "--model", "drift_poisson_reset", "--lambda",
               "0.7", "--x0", "0", "--t-grid", "0:4:5", "--output",
               path.string()}) == 0);
  std::istringstream iss(slurp(path));
  std::string line;
  int rows = 0;
  while (std::getline(iss, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 't') continue;
    const auto comma = line.find(',');
    const double t = std::stod(line.substr(0, comma));
    const double s = std::stod(line.substr(comma + 1));
    CHECK(s == doctest::Approx(std::exp(-0.7 * t)).epsilon(1e-10));
    ++rows;
  }
  CHECK(rows == 5);
  fs::remove(path);
}

TEST_CASE("value-solve emits a grid matching the closed form") {
  const fs::path path = temp_file("solve.csv");
  REQUIRE(run({"value-solve", "--model", "drift_poisson_reset", "--lambda",
               "1.0", "--c", "1.0", "--delta", "0.5", "--grid", "0:10:101",
               "--tol", "1e-8", "--output", path.string()}) == 0);
  std::istringstream iss(slurp(path));
  std::string line;
  int rows = 0;
  while (std::getline(iss, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 's') continue;
    const auto comma = line.find(',');
    const double x = std::stod(line.substr(0, comma));
    const double v = std::stod(line.substr(comma + 1));
    const double expected = x / 1.5 + 1.0 / (0.5 * 1.5);
    CHECK(std::abs(v - expected) / expected <= 1e-3);
    ++rows;
  }
  CHECK(rows == 101);
  fs::remove(path);
}

TEST_CASE("value-mc employs the requested format") {
  const fs::path path = temp_file("mc.jsonl");
  REQUIRE(run({"value-mc", "--model", "drift_only", "--c", "1.0", "--delta",
               "0.5", "--x0", "0.5", "--horizon", "60", "--n-paths", "8",
               "--seed", "5", "--format", "jsonl", "--output",
               path.string()}) == 0);
  const std::string text = slurp(path);
  std::istringstream iss(text);
  std::string header;
  std::string record;
  REQUIRE(std::getline(iss, header));
  REQUIRE(std::getline(iss, record));
  const auto jh = nlohmann::json::parse(header);
  const auto jr = nlohmann::json::parse(record);
  CHECK(jh.at("type") == "header");
  CHECK(jh.at("config_hash") == jr.at("config_hash"));
  const double estimate = std::stod(jr.at("estimate").get<std::string>());
  CHECK(estimate == doctest::Approx(0.5 / 0.5 + 1.0 / 0.25).epsilon(1e-4));
  fs::remove(path);
}

TEST_CASE("generator-check reports and gates on the Davis constraint") {
  const fs::path path = temp_file("gen.csv");
  // The linear f on the Davis model violates the boundary condition:
  // kernel mean 1/4 vs path limit 1.
  CHECK(run({"generator-check", "--model", "davis_boundary", "--x0", "0",
             "--horizon", "1", "--function", "linear", "--output",
             path.string()}) == 4);
  fs::remove(path);
  CHECK(run({"generator-check", "--model", "drift_poisson_reset", "--x0",
             "0", "--horizon", "5", "--function", "sine", "--output",
             path.string()}) == 0);
  fs::remove(path);
}

TEST_CASE("ito-check passes clean and flags injected bias") {
  const fs::path path = temp_file("ito.csv");
  CHECK(run({"ito-check", "--model", "drift_poisson_reset", "--x0", "0.5",
             "--horizon", "8", "--n-paths", "2000", "--seed", "12",
             "--function", "linear", "--output", path.string()}) == 0);
  fs::remove(path);
  CHECK(run({"ito-check", "--model", "drift_poisson_reset", "--x0", "0.5",
             "--horizon", "8", "--n-paths", "2000", "--seed", "12",
             "--function", "linear", "--bias", "0.1", "--output",
             path.string()}) == 4);
  fs::remove(path);
}

TEST_CASE("verify --suite all passes end to end") {
  const fs::path path = temp_file("verify_all.csv");
  REQUIRE(run({"verify", "--suite", "all", "--seed", "7", "--threads", "2",
               "--output", path.string()}) == 0);
  const std::string text = slurp(path);
  // One row per check across every layer.
  CHECK(text.find("stieltjes.roundtrip") != std::string::npos);
  CHECK(text.find("flow.semigroup") != std::string::npos);
  CHECK(text.find("sampling.ks.mixed") != std::string::npos);
  CHECK(text.find("martingale") != std::string::npos);
  CHECK(text.find("value.mc_vs_oracle") != std::string::npos);
  CHECK(text.find("davis.constraint.violation_detected") != std::string::npos);
  fs::remove(path);
}

TEST_CASE("verify runs a named suite and reports per-check rows") {
  const fs::path path = temp_file("verify.csv");
  REQUIRE(run({"verify", "--suite", "stieltjes", "--seed", "7", "--output",
               path.string()}) == 0);
  const std::string text = slurp(path);
  CHECK(text.find("stieltjes.roundtrip.ac") != std::string::npos);
  CHECK(text.find("check_id") != std::string::npos);
  fs::remove(path);
  REQUIRE(run({"verify", "--suite", "sampling", "--seed", "7", "--output",
               path.string()}) == 0);
  fs::remove(path);
}

TEST_SUITE_END();
