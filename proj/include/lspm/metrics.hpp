#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lspm/model.hpp"
#include "lspm/network.hpp"

namespace lspm {

struct MetricReport {
  std::optional<double> procrustes;
  double auroc = 0.0;
  double aupr = 0.0;
  int suggested_p = 0;
  Eigen::VectorXd shrinkage_means;
  Eigen::VectorXd dimension_variances;
  Eigen::VectorXd shrinkage_ratios;  // mean_h / mean_{h-1}, h = 2..p
};

// PROTEST statistic sqrt(1 - m^2) after centering, rotation/reflection and
// scaling. Only the leading min(cols) columns of each matrix are used.
double procrustes_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// Mann-Whitney AUROC, ties count one half.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Area under the precision-recall step curve: sum over distinct thresholds,
// from the highest score down, of (recall gain) * (precision at that threshold).
double aupr(const std::vector<double>& scores, const std::vector<int>& labels);

std::vector<double> shrinkage_ratios(const std::vector<double>& means);

// h - 1 for the h maximizing means[h] / means[h - 1] when that ratio exceeds
// threshold, else means.size().
int suggest_effective_dimensions(const std::vector<double>& means, double threshold = 2.0);

struct EdgeScores {
  std::vector<double> scores;
  std::vector<int> labels;
};

// logistic(mu_alpha_t - ||z_i - z_j||^2) for every dyad (ordered pairs if
// directed, i < j otherwise) with the observed edge indicator.
EdgeScores edge_scores(const VariationalState& state, const Network& net);

MetricReport evaluate_fit(const VariationalState& state, const Network& net,
                          const std::optional<Eigen::MatrixXd>& true_positions,
                          bool use_truncated_means = false, double t2 = 1.0);

}  // namespace lspm
