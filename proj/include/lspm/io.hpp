#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lspm/elbo.hpp"
#include "lspm/metrics.hpp"
#include "lspm/model.hpp"
#include "lspm/network.hpp"
#include "lspm/optimizer.hpp"

namespace lspm {

using json = nlohmann::json;

// Throws ValidationError naming the first key of j not in allowed.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where);

json to_json(const Eigen::MatrixXd& m);
json to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const json& j);
Eigen::VectorXd vector_from_json(const json& j);

json to_json(const PriorConfig& p);
PriorConfig prior_from_json(const json& j);

// convergence_tol may be the string "inf".
json to_json(const FitConfig& c);
FitConfig fit_config_from_json(const json& j);

json to_json(const VariationalState& s);
VariationalState state_from_json(const json& j);

json to_json(const KlBreakdown& k);
KlBreakdown breakdown_from_json(const json& j);

// Everything except wall_time_seconds, so that repeated fits serialize
// identically. prior and cfg are stored alongside for later evaluation.
json to_json(const FitResult& r, const PriorConfig& prior, const FitConfig& cfg);

json to_json(const SimTruth& t);
SimTruth truth_from_json(const json& j);

json to_json(const MetricReport& m);

json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

// iteration,kl_alpha,kl_latent_sum,kl_delta1,kl_delta_h_sum,neg_expected_loglik_bound,total
void write_trace_csv(std::ostream& out, const std::vector<KlBreakdown>& trace);

struct ShrinkageRow {
  int replicate = 0;
  int restart = 0;
  int dimension = 0;  // 1-based
  double value = 0.0;
};
// replicate,restart,dimension,value
void write_shrinkage_csv(std::ostream& out, const std::vector<ShrinkageRow>& rows);
std::vector<ShrinkageRow> shrinkage_rows(const FitResult& r, int replicate);

// node,dim,value with 1-based node and dimension indices.
void write_positions_csv(std::ostream& out, const Eigen::MatrixXd& z);

// Shortest representation that reads back to the same double.
std::string format_double(double x);

}  // namespace lspm
