#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "lspm/network.hpp"

namespace lspm {

// Hyperparameters of the shrinkage prior and the intercept prior.
// Defaults are the simulation-study settings (sigma_alpha = 3).
struct PriorConfig {
  double mu_alpha = 0.0;
  double sigma2_alpha = 9.0;
  double a1 = 2.0;
  double b1 = 1.0;
  double a2 = 3.0;
  double b2 = 1.0;
  double t2 = 1.0;  // left truncation of delta_h, h >= 2
  int p = 5;        // truncation level

  void validate() const;
};

// Variational parameters. Dimension h = 2..p of the shrinkage strengths is
// stored at index h - 2 of a2_t / b2_t.
//
// omega_t holds the variational precision of every Q(z_i). It is set from the
// expected shrinkage strengths by refresh_variational_precision() and is held
// fixed while the shrinkage parameters themselves are updated.
struct VariationalState {
  double mu_alpha_t = 0.0;
  double sigma2_alpha_t = 1.0;
  Eigen::MatrixXd z_t;  // n x p
  double a1_t = 1.0;
  double b1_t = 1.0;
  Eigen::VectorXd a2_t;  // p - 1
  Eigen::VectorXd b2_t;  // p - 1
  Eigen::VectorXd omega_t;  // p

  int n() const { return static_cast<int>(z_t.rows()); }
  int p() const { return static_cast<int>(z_t.cols()); }
  void validate() const;
};

// First two log-moments of each Q(delta_h).
struct ShrinkageMoments {
  Eigen::VectorXd mean;      // E[delta_h]
  Eigen::VectorXd log_mean;  // E[log delta_h]
};

// logistic(alpha - ||z_i - z_j||^2).
double edge_probability(double alpha, std::span<const double> z_i, std::span<const double> z_j);

// E[X | X >= t] for X ~ Gamma(shape a, rate b).
double truncated_gamma_mean(double a, double b, double t);

// Per-dimension expectations of the shrinkage strengths. With
// use_truncated_means = false, Q(delta_h) for h >= 2 contributes a/b and
// digamma(a) - log(b) as if untruncated; otherwise the exact moments of the
// left-truncated gamma are used.
ShrinkageMoments shrinkage_moments(const VariationalState& state, double t2,
                                   bool use_truncated_means);

// Running product of E[delta_1..delta_l], l = 1..p.
Eigen::VectorXd expected_precision(const VariationalState& state, bool use_truncated_means,
                                   double t2 = 1.0);

// Sets omega_t to expected_precision(state, ...).
void refresh_variational_precision(VariationalState& state, bool use_truncated_means,
                                   double t2 = 1.0);

// Shortest-path hop counts on the undirected skeleton; unreachable pairs get
// (largest finite distance + 1).
Eigen::MatrixXd hop_distances(const Network& net);

// Classical (Torgerson) scaling of a distance matrix into `dims` columns.
// Columns beyond the number of positive eigenvalues are zero.
Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& distances, int dims);

// Sample variance of all entries pooled together.
double pooled_variance(const Eigen::MatrixXd& x);

// Adds i.i.d. N(0, variance) noise to every entry.
Eigen::MatrixXd jitter(const Eigen::MatrixXd& x, double variance, std::uint64_t seed);

// Jittered-MDS start: z_t = MDS(hop distances) + N(0, var(MDS)/20) noise,
// intercept and shrinkage parameters at their prior values.
VariationalState initialize_state(const Network& net, const PriorConfig& prior,
                                  std::uint64_t seed, bool use_truncated_means = false);

}  // namespace lspm
