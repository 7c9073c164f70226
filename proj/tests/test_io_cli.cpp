#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "fixtures.hpp"
#include "lspm/cli.hpp"
#include "lspm/errors.hpp"
#include "lspm/io.hpp"

namespace fs = std::filesystem;
using namespace lspm;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lspm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t k = 0;
  for (std::string line; std::getline(in, line);) ++k;
  return k;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("lspm_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_SUITE("io") {

TEST_CASE("config round trips") {
  PriorConfig p;
  p.p = 7;
  p.a1 = 2.5;
  CHECK(to_json(prior_from_json(to_json(p))) == to_json(p));

  FitConfig f;
  f.convergence_tol = std::numeric_limits<double>::infinity();
  f.seed = 12345678901234ULL;
  f.use_truncated_means = true;
  f.warm_start_shrinkage = false;
  json j = to_json(f);
  CHECK(j["convergence_tol"] == "inf");
  FitConfig back = fit_config_from_json(j);
  CHECK(std::isinf(back.convergence_tol));
  CHECK(back.seed == f.seed);
  CHECK(back.use_truncated_means);
  CHECK_FALSE(back.warm_start_shrinkage);

  json bad = to_json(p);
  bad["sigma_alpha"] = 3.0;
  CHECK_THROWS_AS(prior_from_json(bad), ValidationError);
}

TEST_CASE("state and truth round trips") {
  auto pr = fixture::random_problem(3);
  VariationalState s = state_from_json(to_json(pr.state));
  CHECK(s.z_t == pr.state.z_t);
  CHECK(s.a2_t == pr.state.a2_t);
  CHECK(s.omega_t == pr.state.omega_t);
  CHECK(s.mu_alpha_t == pr.state.mu_alpha_t);

  auto [net, truth] = simulate_network(6, {0.5, 1.1}, 3.0, false, 3);
  SimTruth t = truth_from_json(to_json(truth));
  CHECK(t.positions == truth.positions);
  CHECK(t.deltas == truth.deltas);
  CHECK(t.seed == truth.seed);
}

TEST_CASE("doubles are written exactly") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 6.02214076e23})
    CHECK(std::stod(format_double(x)) == x);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("simulate, fit and evaluate") {
  TempDir tmp("pipeline");
  Run sim = cli({"simulate", "--n", "30", "--deltas", "0.5,1.1", "--alpha", "3", "--replicates",
                 "2", "--seed", "4", "--out", tmp / "sim"});
  REQUIRE(sim.code == 0);
  CHECK(fs::exists(tmp / "sim/rep_001.edges"));
  CHECK(fs::exists(tmp / "sim/rep_002.truth.json"));
  json manifest = read_json_file(tmp / "sim/manifest.json");
  CHECK(manifest["replicates"].size() == 2);

  Run again = cli({"simulate", "--n", "30", "--deltas", "0.5,1.1", "--alpha", "3", "--replicates",
                   "2", "--seed", "4", "--out", tmp / "sim2"});
  REQUIRE(again.code == 0);
  for (const char* f : {"rep_001.edges", "rep_002.edges", "rep_001.truth.json", "manifest.json"})
    CHECK(slurp(tmp.path / "sim" / f) == slurp(tmp.path / "sim2" / f));

  const std::vector<std::string> fit_args{"fit", "--input", tmp / "sim/rep_001.edges", "--p", "3",
                                          "--restarts", "2", "--seed", "9"};
  auto with_out = [&](std::vector<std::string> a, const std::string& out) {
    a.push_back("--out");
    a.push_back(out);
    return a;
  };
  Run f1 = cli(with_out(fit_args, tmp / "fit1"));
  REQUIRE(f1.code == 0);
  Run f2 = cli(with_out(fit_args, tmp / "fit2"));
  REQUIRE(f2.code == 0);
  for (const char* f : {"fit_result.json", "objective_trace.csv", "shrinkage_means.csv",
                        "latent_positions.csv"})
    CHECK(slurp(tmp.path / "fit1" / f) == slurp(tmp.path / "fit2" / f));
  CHECK(fs::exists(tmp / "fit1/timing.json"));

  Run ev = cli({"eval", "--fit", tmp / "fit1/fit_result.json", "--input", tmp / "sim/rep_001.edges",
                "--truth", tmp / "sim/rep_001.truth.json", "--out", tmp / "eval"});
  REQUIRE(ev.code == 0);
  json m = read_json_file(tmp / "eval/metrics.json");
  CHECK(m["auroc"].get<double>() > 0.5);
  CHECK(m.contains("procrustes"));

  Run mf = cli({"fit", "--manifest", tmp / "sim/manifest.json", "--p", "2", "--restarts", "1",
                "--jobs", "2", "--out", tmp / "mfit"});
  REQUIRE(mf.code == 0);
  CHECK(fs::exists(tmp / "mfit/rep_002/fit_result.json"));
  Run mev = cli({"eval", "--manifest", tmp / "sim/manifest.json", "--fit-dir", tmp / "mfit",
                 "--out", tmp / "meval"});
  REQUIRE(mev.code == 0);
  CHECK(line_count(tmp / "meval/metrics.csv") == 3);
}

TEST_CASE("one outer iteration gives two trace rows") {
  TempDir tmp("trace");
  REQUIRE(cli({"simulate", "--n", "20", "--out", tmp / "sim"}).code == 0);
  Run r = cli({"fit", "--input", tmp / "sim/rep_001.edges", "--p", "2", "--restarts", "1",
               "--max-outer-iters", "1", "--out", tmp / "fit"});
  CHECK(r.code == 2);  // not converged, outputs still written
  CHECK(line_count(tmp / "fit/objective_trace.csv") == 3);  // header + 2 rows

  Run inf = cli({"fit", "--input", tmp / "sim/rep_001.edges", "--p", "2", "--restarts", "1",
                 "--convergence-tol", "inf", "--out", tmp / "fit_inf"});
  CHECK(inf.code == 0);
  CHECK(line_count(tmp / "fit_inf/objective_trace.csv") == 3);
}

TEST_CASE("empty network from a very negative intercept") {
  TempDir tmp("empty");
  REQUIRE(cli({"simulate", "--n", "10", "--alpha", "-1000", "--out", tmp / "sim"}).code == 0);
  Network net = load_edge_list_file(tmp / "sim/rep_001.edges", false);
  CHECK(net.size() == 10);
  CHECK(net.edge_count() == 0);
}

TEST_CASE("errors") {
  TempDir tmp("errors");
  CHECK(cli({"fit", "--input", tmp / "missing.edges", "--out", tmp / "x"}).code == 1);
  CHECK(cli({"simulate", "--deltas", "0.5,0.2", "--out", tmp / "x"}).code == 1);
  CHECK(cli({"bogus"}).code != 0);

  {
    std::ofstream cfg(tmp / "bad.json");
    cfg << R"({"command": "simulate", "output_dir": "x", "simulation": {"n": 10, "nodes": 4}})";
  }
  Run bad = cli({"simulate", "--config", tmp / "bad.json"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("nodes") != std::string::npos);

  // a regular file where the output directory should go
  { std::ofstream f(tmp / "file"); }
  CHECK(cli({"simulate", "--n", "5", "--out", tmp / "file/sub"}).code == 1);

  {
    std::ofstream e(tmp / "loop.edges");
    e << "1 2\n3 3\n";
  }
  Run loop = cli({"fit", "--input", tmp / "loop.edges", "--out", tmp / "y"});
  CHECK(loop.code == 1);
  CHECK(loop.err.find("line 2") != std::string::npos);
}

TEST_CASE("config file drives a run and flags override it") {
  TempDir tmp("config");
  RunConfig c;
  c.command = "simulate";
  c.output_dir = tmp / "a";
  c.simulation.n = 12;
  c.simulation.replicates = 3;
  write_json_file(tmp / "run.json", to_json(c));
  REQUIRE(cli({"simulate", "--config", tmp / "run.json"}).code == 0);
  CHECK(read_json_file(tmp / "a/manifest.json")["replicates"].size() == 3);
  REQUIRE(cli({"simulate", "--config", tmp / "run.json", "--replicates", "1", "--out", tmp / "b"})
              .code == 0);
  CHECK(read_json_file(tmp / "b/manifest.json")["replicates"].size() == 1);
  CHECK(run_config_from_json(read_json_file(tmp / "b/config.json")).simulation.n == 12);
}

}  // TEST_SUITE
