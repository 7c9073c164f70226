#include "lspm/cli.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "lspm/errors.hpp"
#include "lspm/metrics.hpp"
#include "lspm/network.hpp"
#include "lspm/random.hpp"

namespace fs = std::filesystem;

namespace lspm {

namespace {

std::string replicate_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03d", index);
  return buf;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) {
    throw ValidationError("an output directory is required (--out)");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'");
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) {
    throw ValidationError(what + " is required");
  }
  if (!fs::is_regular_file(path)) {
    throw IoError(what + " '" + path + "' does not exist");
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  return out;
}

bool resolve_directed(const RunConfig& cfg, const std::string& network_path) {
  if (cfg.directed) {
    return *cfg.directed;
  }
  std::ifstream in(network_path);
  return edge_list_directed_header(in).value_or(false);
}

struct ManifestEntry {
  int index = 0;
  std::uint64_t seed = 0;
  std::string network;
  std::string truth;
};

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  const json m = read_json_file(path);
  const fs::path base = fs::path(path).parent_path();
  if (!m.contains("replicates") || !m["replicates"].is_array()) {
    throw ValidationError("manifest '" + path + "' has no replicates array");
  }
  std::vector<ManifestEntry> out;
  for (const auto& r : m["replicates"]) {
    ManifestEntry e;
    e.index = r.at("index").get<int>();
    e.seed = r.at("seed").get<std::uint64_t>();
    e.network = (base / r.at("network").get<std::string>()).string();
    if (r.contains("truth")) {
      e.truth = (base / r.at("truth").get<std::string>()).string();
    }
    out.push_back(e);
  }
  return out;
}

// Runs task(k) for k in [0, count) on up to jobs threads. The first exception
// is rethrown after all workers finish.
template <class F>
void parallel_for(int count, int jobs, F&& task) {
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int k = 0; k < count; ++k) {
      task(k);
    }
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (int k = next++; k < count; k = next++) {
        try {
          task(k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) {
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& th : pool) {
    th.join();
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
}

struct FitOutcome {
  bool converged = false;
  int iterations = 0;
  double wall_time = 0.0;
  std::vector<ShrinkageRow> shrinkage;
};

FitOutcome fit_one(const std::string& network_path, const fs::path& dir, const RunConfig& cfg,
                   int replicate) {
  const Network net = load_edge_list_file(network_path, resolve_directed(cfg, network_path));
  const FitResult r = fit(net, cfg.prior, cfg.fit);
  ensure_dir(dir.string());
  write_json_file((dir / "fit_result.json").string(), to_json(r, cfg.prior, cfg.fit));
  {
    auto f = open_out(dir / "objective_trace.csv");
    write_trace_csv(f, r.objective_trace);
  }
  FitOutcome o{r.converged, r.iterations, r.wall_time_seconds, shrinkage_rows(r, replicate)};
  {
    auto f = open_out(dir / "shrinkage_means.csv");
    write_shrinkage_csv(f, o.shrinkage);
  }
  {
    auto f = open_out(dir / "latent_positions.csv");
    write_positions_csv(f, r.state.z_t);
  }
  write_json_file((dir / "timing.json").string(), {{"wall_time_seconds", r.wall_time_seconds}});
  return o;
}

MetricReport eval_one(const std::string& fit_path, const std::string& network_path,
                      const std::string& truth_path, const RunConfig& cfg) {
  const json fr = read_json_file(fit_path);
  if (!fr.contains("state")) {
    throw ValidationError("'" + fit_path + "' has no state");
  }
  const VariationalState state = state_from_json(fr["state"]);
  PriorConfig prior = cfg.prior;
  bool trunc = cfg.fit.use_truncated_means;
  if (fr.contains("prior")) {
    prior = prior_from_json(fr["prior"]);
  }
  if (fr.contains("fit_config")) {
    trunc = fit_config_from_json(fr["fit_config"]).use_truncated_means;
  }
  const Network net = load_edge_list_file(network_path, resolve_directed(cfg, network_path));
  std::optional<Eigen::MatrixXd> truth;
  if (!truth_path.empty()) {
    truth = truth_from_json(read_json_file(truth_path)).positions;
  }
  return evaluate_fit(state, net, truth, trunc, prior.t2);
}

}  // namespace

json to_json(const SimulationConfig& s) {
  return {{"n", s.n},
          {"deltas", s.deltas},
          {"alpha", s.alpha},
          {"replicates", s.replicates},
          {"directed", s.directed},
          {"seed", s.seed}};
}

SimulationConfig simulation_from_json(const json& j) {
  reject_unknown_keys(j, {"n", "deltas", "alpha", "replicates", "directed", "seed"},
                      "simulation");
  SimulationConfig s;
  try {
    if (j.contains("n")) s.n = j["n"].get<int>();
    if (j.contains("deltas")) s.deltas = j["deltas"].get<std::vector<double>>();
    if (j.contains("alpha")) s.alpha = j["alpha"].get<double>();
    if (j.contains("replicates")) s.replicates = j["replicates"].get<int>();
    if (j.contains("directed")) s.directed = j["directed"].get<bool>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("simulation: ") + e.what());
  }
  return s;
}

json to_json(const RunConfig& c) {
  json j = {{"command", c.command},
            {"input", c.input},
            {"manifest", c.manifest},
            {"fit_result", c.fit_result},
            {"fit_dir", c.fit_dir},
            {"truth", c.truth},
            {"output_dir", c.output_dir},
            {"jobs", c.jobs},
            {"prior", to_json(c.prior)},
            {"fit", to_json(c.fit)},
            {"simulation", to_json(c.simulation)}};
  if (c.directed) {
    j["directed"] = *c.directed;
  }
  return j;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown_keys(j,
                      {"command", "input", "manifest", "fit_result", "fit_dir", "truth",
                       "output_dir", "directed", "jobs", "prior", "fit", "simulation"},
                      "config");
  RunConfig c;
  try {
    if (j.contains("command")) c.command = j["command"].get<std::string>();
    if (j.contains("input")) c.input = j["input"].get<std::string>();
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    if (j.contains("fit_result")) c.fit_result = j["fit_result"].get<std::string>();
    if (j.contains("fit_dir")) c.fit_dir = j["fit_dir"].get<std::string>();
    if (j.contains("truth")) c.truth = j["truth"].get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("directed")) c.directed = j["directed"].get<bool>();
    if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  if (!c.command.empty() && c.command != "simulate" && c.command != "fit" &&
      c.command != "eval") {
    throw ValidationError("config: command must be simulate, fit or eval");
  }
  if (j.contains("prior")) c.prior = prior_from_json(j["prior"]);
  if (j.contains("fit")) c.fit = fit_config_from_json(j["fit"]);
  if (j.contains("simulation")) c.simulation = simulation_from_json(j["simulation"]);
  return c;
}

int cli_simulate(const RunConfig& cfg, std::ostream& out) {
  const SimulationConfig& s = cfg.simulation;
  if (s.replicates < 1) {
    throw ValidationError("replicates must be at least 1");
  }
  validate_deltas(s.deltas);
  ensure_dir(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  json reps = json::array();
  double total_density = 0.0;
  for (int r = 1; r <= s.replicates; ++r) {
    const std::uint64_t seed = derive_seed(s.seed, static_cast<std::uint64_t>(r));
    const auto [net, truth] = simulate_network(s.n, s.deltas, s.alpha, s.directed, seed);
    const std::string name = replicate_name(r);
    write_edge_list_file((dir / (name + ".edges")).string(), net);
    write_json_file((dir / (name + ".truth.json")).string(), to_json(truth));
    const double d = density(net);
    total_density += d;
    reps.push_back({{"index", r},
                    {"seed", seed},
                    {"network", name + ".edges"},
                    {"truth", name + ".truth.json"},
                    {"density", d}});
  }
  const double mean_density = total_density / s.replicates;
  write_json_file((dir / "manifest.json").string(),
                  {{"simulation", to_json(s)},
                   {"replicates", std::move(reps)},
                   {"mean_density", mean_density}});
  RunConfig resolved = cfg;
  resolved.command = "simulate";
  write_json_file((dir / "config.json").string(), to_json(resolved));
  out << "simulated " << s.replicates << " network(s), mean density " << mean_density << "\n";
  return 0;
}

int cli_fit(const RunConfig& cfg, std::ostream& out) {
  cfg.prior.validate();
  cfg.fit.validate();
  if (cfg.input.empty() == cfg.manifest.empty()) {
    throw ValidationError("fit needs exactly one of --input or --manifest");
  }
  std::vector<ManifestEntry> entries;
  if (!cfg.input.empty()) {
    require_file(cfg.input, "input network");
    entries.push_back({0, 0, cfg.input, ""});
  } else {
    require_file(cfg.manifest, "manifest");
    entries = read_manifest(cfg.manifest);
    for (const auto& e : entries) {
      require_file(e.network, "network");
    }
  }
  ensure_dir(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  const bool single = !cfg.input.empty();

  std::vector<FitOutcome> outcomes(entries.size());
  parallel_for(static_cast<int>(entries.size()), cfg.jobs, [&](int k) {
    const auto& e = entries[k];
    const fs::path sub = single ? dir : dir / replicate_name(e.index);
    outcomes[k] = fit_one(e.network, sub, cfg, e.index);
  });

  bool all_converged = true;
  json summary = json::array();
  std::vector<ShrinkageRow> rows;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    all_converged = all_converged && outcomes[k].converged;
    summary.push_back({{"index", entries[k].index},
                       {"converged", outcomes[k].converged},
                       {"iterations", outcomes[k].iterations}});
    rows.insert(rows.end(), outcomes[k].shrinkage.begin(), outcomes[k].shrinkage.end());
  }
  if (!single) {
    auto f = open_out(dir / "shrinkage_means.csv");
    write_shrinkage_csv(f, rows);
    write_json_file((dir / "fit_summary.json").string(), {{"fits", summary}});
  }
  RunConfig resolved = cfg;
  resolved.command = "fit";
  write_json_file((dir / "config.json").string(), to_json(resolved));
  for (std::size_t k = 0; k < entries.size(); ++k) {
    out << (single ? std::string("fit") : replicate_name(entries[k].index)) << ": "
        << (outcomes[k].converged ? "converged" : "not converged") << " after "
        << outcomes[k].iterations << " iterations\n";
  }
  return all_converged ? 0 : 2;
}

int cli_eval(const RunConfig& cfg, std::ostream& out) {
  ensure_dir(cfg.output_dir);
  const fs::path dir(cfg.output_dir);
  if (cfg.manifest.empty()) {
    require_file(cfg.fit_result, "fit result");
    require_file(cfg.input, "input network");
    if (!cfg.truth.empty()) {
      require_file(cfg.truth, "truth");
    }
    const MetricReport rep = eval_one(cfg.fit_result, cfg.input, cfg.truth, cfg);
    write_json_file((dir / "metrics.json").string(), to_json(rep));
    out << "auroc " << rep.auroc << ", aupr " << rep.aupr;
    if (rep.procrustes) {
      out << ", procrustes " << *rep.procrustes;
    }
    out << ", suggested p " << rep.suggested_p << "\n";
    return 0;
  }

  require_file(cfg.manifest, "manifest");
  if (cfg.fit_dir.empty()) {
    throw ValidationError("eval with --manifest also needs --fit-dir");
  }
  const auto entries = read_manifest(cfg.manifest);
  auto f = open_out(dir / "metrics.csv");
  f << "replicate,procrustes,auroc,aupr,suggested_p\n";
  double sum_auroc = 0.0;
  double sum_aupr = 0.0;
  double sum_pc = 0.0;
  int pc_count = 0;
  json reports = json::array();
  for (const auto& e : entries) {
    const std::string fit_path =
        (fs::path(cfg.fit_dir) / replicate_name(e.index) / "fit_result.json").string();
    require_file(fit_path, "fit result");
    const MetricReport rep = eval_one(fit_path, e.network, e.truth, cfg);
    json j = to_json(rep);
    j["replicate"] = e.index;
    reports.push_back(j);
    f << e.index << ',' << (rep.procrustes ? format_double(*rep.procrustes) : "") << ','
      << format_double(rep.auroc) << ',' << format_double(rep.aupr) << ',' << rep.suggested_p
      << '\n';
    sum_auroc += rep.auroc;
    sum_aupr += rep.aupr;
    if (rep.procrustes) {
      sum_pc += *rep.procrustes;
      ++pc_count;
    }
  }
  const double k = static_cast<double>(entries.size());
  json summary = {{"replicates", reports},
                  {"mean_auroc", sum_auroc / k},
                  {"mean_aupr", sum_aupr / k}};
  if (pc_count > 0) {
    summary["mean_procrustes"] = sum_pc / pc_count;
  }
  write_json_file((dir / "metrics.json").string(), summary);
  out << "mean auroc " << sum_auroc / k << ", mean aupr " << sum_aupr / k;
  if (pc_count > 0) {
    out << ", mean procrustes " << sum_pc / pc_count;
  }
  out << "\n";
  return 0;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Latent shrinkage position model: simulate, fit and evaluate networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string convergence_tol;
  std::string deltas;
  bool directed_flag = false;
  bool undirected_flag = false;
  RunConfig flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--out", out_dir, "Output directory");
  };
  auto add_direction = [&](CLI::App* sub) {
    sub->add_flag("--directed", directed_flag, "Treat networks as directed");
    sub->add_flag("--undirected", undirected_flag, "Treat networks as undirected");
  };

  CLI::App* sim = app.add_subcommand("simulate", "Simulate networks from the model");
  add_common(sim);
  sim->add_option("--n", flags.simulation.n, "Number of nodes");
  sim->add_option("--deltas", deltas, "Comma-separated shrinkage strengths");
  sim->add_option("--alpha", flags.simulation.alpha, "Intercept");
  sim->add_option("--replicates", flags.simulation.replicates, "Number of networks");
  sim->add_flag("--directed", flags.simulation.directed, "Simulate directed networks");
  sim->add_option("--seed", flags.simulation.seed, "Master seed");

  CLI::App* fitc = app.add_subcommand("fit", "Fit the model by variational inference");
  add_common(fitc);
  add_direction(fitc);
  fitc->add_option("--input", flags.input, "Edge-list file");
  fitc->add_option("--manifest", flags.manifest, "Manifest written by simulate");
  fitc->add_option("--jobs", flags.jobs, "Parallel fits for manifests");
  fitc->add_option("--p", flags.prior.p, "Truncation level");
  fitc->add_option("--mu-alpha", flags.prior.mu_alpha, "Prior mean of the intercept");
  fitc->add_option("--sigma2-alpha", flags.prior.sigma2_alpha, "Prior variance of the intercept");
  fitc->add_option("--a1", flags.prior.a1, "Shape of delta_1");
  fitc->add_option("--b1", flags.prior.b1, "Rate of delta_1");
  fitc->add_option("--a2", flags.prior.a2, "Shape of delta_h, h >= 2");
  fitc->add_option("--b2", flags.prior.b2, "Rate of delta_h, h >= 2");
  fitc->add_option("--restarts", flags.fit.restarts, "Random restarts");
  fitc->add_option("--max-outer-iters", flags.fit.max_outer_iters, "Outer iteration cap");
  fitc->add_option("--convergence-tol", convergence_tol, "Tolerance on the bound change, or inf");
  fitc->add_option("--bisection-tol", flags.fit.bisection_tol, "Bisection bracket width");
  fitc->add_option("--cg-max-iters", flags.fit.cg_max_iters, "CG iterations per block update");
  fitc->add_option("--cg-grad-tol", flags.fit.cg_grad_tol, "CG gradient-norm tolerance");
  fitc->add_option("--seed", flags.fit.seed, "Seed of the first restart");
  fitc->add_flag("--truncated-means", flags.fit.use_truncated_means,
                 "Use exact truncated-gamma means for delta_h");
  fitc->add_flag("--tie-precision", flags.fit.tie_precision,
                 "Tie the latent precision to the expected prior precision");
  fitc->add_flag("--cold-start", flags.fit.warm_start_shrinkage,
                 "Start the first outer iteration with the shrinkage blocks at the prior");

  CLI::App* ev = app.add_subcommand("eval", "Evaluate a fitted state");
  add_common(ev);
  add_direction(ev);
  ev->add_option("--fit", flags.fit_result, "fit_result.json");
  ev->add_option("--input", flags.input, "Edge-list file the model was fitted to");
  ev->add_option("--truth", flags.truth, "Simulation truth JSON");
  ev->add_option("--manifest", flags.manifest, "Manifest written by simulate");
  ev->add_option("--fit-dir", flags.fit_dir, "Output directory of a manifest fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    RunConfig cfg;
    if (!config_path.empty()) {
      require_file(config_path, "config");
      cfg = run_config_from_json(read_json_file(config_path));
    }
    cfg.command = sub->get_name();
    auto set = [&](const char* name) { return sub->count(name) > 0; };
    if (set("--out")) cfg.output_dir = out_dir;
    if (sub == sim) {
      if (set("--n")) cfg.simulation.n = flags.simulation.n;
      if (set("--alpha")) cfg.simulation.alpha = flags.simulation.alpha;
      if (set("--replicates")) cfg.simulation.replicates = flags.simulation.replicates;
      if (set("--directed")) cfg.simulation.directed = flags.simulation.directed;
      if (set("--seed")) cfg.simulation.seed = flags.simulation.seed;
      if (set("--deltas")) {
        cfg.simulation.deltas.clear();
        std::stringstream ss(deltas);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
          try {
            cfg.simulation.deltas.push_back(std::stod(tok));
          } catch (const std::exception&) {
            throw ValidationError("--deltas: '" + tok + "' is not a number");
          }
        }
      }
      return cli_simulate(cfg, out);
    }
    if (set("--directed") && set("--undirected")) {
      throw ValidationError("--directed and --undirected are mutually exclusive");
    }
    if (set("--directed")) cfg.directed = true;
    if (set("--undirected")) cfg.directed = false;
    if (set("--input")) cfg.input = flags.input;
    if (set("--manifest")) cfg.manifest = flags.manifest;
    if (sub == fitc) {
      if (set("--jobs")) cfg.jobs = flags.jobs;
      if (set("--p")) cfg.prior.p = flags.prior.p;
      if (set("--mu-alpha")) cfg.prior.mu_alpha = flags.prior.mu_alpha;
      if (set("--sigma2-alpha")) cfg.prior.sigma2_alpha = flags.prior.sigma2_alpha;
      if (set("--a1")) cfg.prior.a1 = flags.prior.a1;
      if (set("--b1")) cfg.prior.b1 = flags.prior.b1;
      if (set("--a2")) cfg.prior.a2 = flags.prior.a2;
      if (set("--b2")) cfg.prior.b2 = flags.prior.b2;
      if (set("--restarts")) cfg.fit.restarts = flags.fit.restarts;
      if (set("--max-outer-iters")) cfg.fit.max_outer_iters = flags.fit.max_outer_iters;
      if (set("--bisection-tol")) cfg.fit.bisection_tol = flags.fit.bisection_tol;
      if (set("--cg-max-iters")) cfg.fit.cg_max_iters = flags.fit.cg_max_iters;
      if (set("--cg-grad-tol")) cfg.fit.cg_grad_tol = flags.fit.cg_grad_tol;
      if (set("--seed")) cfg.fit.seed = flags.fit.seed;
      if (set("--truncated-means")) cfg.fit.use_truncated_means = true;
      if (set("--tie-precision")) cfg.fit.tie_precision = true;
      if (set("--cold-start")) cfg.fit.warm_start_shrinkage = false;
      if (set("--convergence-tol")) {
        cfg.fit = fit_config_from_json(
            [&] {
              json j = to_json(cfg.fit);
              if (convergence_tol == "inf") {
                j["convergence_tol"] = "inf";
              } else {
                try {
                  j["convergence_tol"] = std::stod(convergence_tol);
                } catch (const std::exception&) {
                  throw ValidationError("--convergence-tol: '" + convergence_tol +
                                        "' is not a number");
                }
              }
              return j;
            }());
      }
      return cli_fit(cfg, out);
    }
    if (set("--fit")) cfg.fit_result = flags.fit_result;
    if (set("--truth")) cfg.truth = flags.truth;
    if (set("--fit-dir")) cfg.fit_dir = flags.fit_dir;
    return cli_eval(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace lspm
