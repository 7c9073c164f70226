#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lspm/io.hpp"
#include "lspm/model.hpp"
#include "lspm/optimizer.hpp"

namespace lspm {

struct SimulationConfig {
  int n = 100;
  std::vector<double> deltas{0.5, 1.1};
  double alpha = 3.0;
  int replicates = 1;
  bool directed = false;
  std::uint64_t seed = 1;  // replicate r uses derive_seed(seed, r)
};

// Everything one subcommand needs. The same file can drive simulate, fit and
// eval; each reads only the fields it uses.
struct RunConfig {
  std::string command;
  std::string input;       // network edge list
  std::string manifest;    // manifest.json written by simulate
  std::string fit_result;  // fit_result.json for eval
  std::string fit_dir;     // output_dir of a manifest fit, for eval
  std::string truth;       // optional SimTruth JSON for eval
  std::string output_dir;
  std::optional<bool> directed;
  int jobs = 1;
  PriorConfig prior;
  FitConfig fit;
  SimulationConfig simulation;
};

json to_json(const SimulationConfig& s);
SimulationConfig simulation_from_json(const json& j);
json to_json(const RunConfig& c);
RunConfig run_config_from_json(const json& j);

// Exit codes: 0 success, 1 usage or validation error, 2 some fit did not
// converge (outputs are still written).
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

int cli_simulate(const RunConfig& cfg, std::ostream& out);
int cli_fit(const RunConfig& cfg, std::ostream& out);
int cli_eval(const RunConfig& cfg, std::ostream& out);

}  // namespace lspm
