#include "lspm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lspm/errors.hpp"
#include "lspm/numeric.hpp"

namespace lspm {

namespace {

void check_inputs(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("scores and labels differ in length");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) {
      throw ValidationError("labels must be 0 or 1");
    }
  }
}

std::vector<std::size_t> order_descending(const std::vector<double>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

}  // namespace

double procrustes_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) {
    throw ValidationError("procrustes_correlation: row counts differ");
  }
  const Eigen::Index k = std::min(a.cols(), b.cols());
  if (k < 1 || a.rows() < 2) {
    throw UndefinedMetricError("procrustes_correlation: need at least two rows and one column");
  }
  Eigen::MatrixXd x = a.leftCols(k);
  Eigen::MatrixXd y = b.leftCols(k);
  x.rowwise() -= x.colwise().mean();
  y.rowwise() -= y.colwise().mean();
  const double nx = x.norm();
  const double ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0)) {
    throw UndefinedMetricError("procrustes_correlation: configuration has zero variance");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x.transpose() * y);
  const double r = svd.singularValues().sum() / (nx * ny);
  return std::clamp(r, 0.0, 1.0);
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_inputs(scores, labels);
  const auto idx = order_descending(scores);
  double pos = 0.0;
  double neg = 0.0;
  for (int y : labels) {
    (y ? pos : neg) += 1.0;
  }
  if (pos == 0.0 || neg == 0.0) {
    throw UndefinedMetricError("auroc needs both classes");
  }
  // Walk groups of tied scores from the top; each negative beats nothing above
  // it, so count positives strictly above plus half of the tied positives.
  double wins = 0.0;
  double ties = 0.0;
  double pos_above = 0.0;
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s;
    double gp = 0.0;
    double gn = 0.0;
    while (e < idx.size() && scores[idx[e]] == scores[idx[s]]) {
      (labels[idx[e]] ? gp : gn) += 1.0;
      ++e;
    }
    wins += gn * pos_above;
    ties += gn * gp;
    pos_above += gp;
    s = e;
  }
  return (wins + 0.5 * ties) / (pos * neg);
}

double aupr(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_inputs(scores, labels);
  const double pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0.0) {
    throw UndefinedMetricError("aupr needs at least one positive label");
  }
  const auto idx = order_descending(scores);
  double tp = 0.0;
  double fp = 0.0;
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t s = 0; s < idx.size();) {
    std::size_t e = s;
    while (e < idx.size() && scores[idx[e]] == scores[idx[s]]) {
      (labels[idx[e]] ? tp : fp) += 1.0;
      ++e;
    }
    const double recall = tp / pos;
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
    s = e;
  }
  return area;
}

std::vector<double> shrinkage_ratios(const std::vector<double>& means) {
  std::vector<double> r;
  for (std::size_t h = 1; h < means.size(); ++h) {
    if (!(means[h - 1] > 0.0)) {
      throw ValidationError("shrinkage means must be positive");
    }
    r.push_back(means[h] / means[h - 1]);
  }
  return r;
}

int suggest_effective_dimensions(const std::vector<double>& means, double threshold) {
  if (means.empty()) {
    throw ValidationError("suggest_effective_dimensions: empty input");
  }
  const auto r = shrinkage_ratios(means);
  if (r.empty()) {
    return 1;
  }
  const auto it = std::max_element(r.begin(), r.end());
  if (*it > threshold) {
    // r[k] compares dimension k + 2 with k + 1; the jump sits at dimension k + 2.
    return static_cast<int>(it - r.begin()) + 1;
  }
  return static_cast<int>(means.size());
}

EdgeScores edge_scores(const VariationalState& state, const Network& net) {
  if (state.n() != net.size()) {
    throw ValidationError("fitted state and network have different node counts");
  }
  const int n = net.size();
  EdgeScores out;
  for (int i = 0; i < n; ++i) {
    for (int j = net.directed() ? 0 : i + 1; j < n; ++j) {
      if (i == j) {
        continue;
      }
      const double d2 = (state.z_t.row(i) - state.z_t.row(j)).squaredNorm();
      out.scores.push_back(logistic(state.mu_alpha_t - d2));
      out.labels.push_back(net.y(i, j));
    }
  }
  return out;
}

MetricReport evaluate_fit(const VariationalState& state, const Network& net,
                          const std::optional<Eigen::MatrixXd>& true_positions,
                          bool use_truncated_means, double t2) {
  MetricReport rep;
  const EdgeScores es = edge_scores(state, net);
  rep.auroc = auroc(es.scores, es.labels);
  rep.aupr = aupr(es.scores, es.labels);
  rep.shrinkage_means = shrinkage_moments(state, t2, use_truncated_means).mean;
  const Eigen::VectorXd omega = expected_precision(state, use_truncated_means, t2);
  rep.dimension_variances = omega.cwiseInverse();
  const std::vector<double> means(rep.shrinkage_means.data(),
                                  rep.shrinkage_means.data() + rep.shrinkage_means.size());
  const auto ratios = shrinkage_ratios(means);
  rep.shrinkage_ratios = Eigen::Map<const Eigen::VectorXd>(ratios.data(), ratios.size());
  rep.suggested_p = suggest_effective_dimensions(means);
  if (true_positions) {
    if (true_positions->rows() != state.n()) {
      throw ValidationError("true positions and fitted state have different node counts");
    }
    rep.procrustes = procrustes_correlation(state.z_t, *true_positions);
  }
  return rep;
}

}  // namespace lspm
