#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lspm/model.hpp"
#include "lspm/network.hpp"

namespace lspm {

// Terms of the surrogate objective. total excludes the constant log P(Y).
struct KlBreakdown {
  double kl_alpha = 0.0;
  double kl_latent_sum = 0.0;
  double kl_delta1 = 0.0;
  double kl_delta_h_sum = 0.0;
  double neg_expected_loglik_bound = 0.0;
  double total = 0.0;
};

// KL[N(mu_t, sigma2_t) || N(mu, sigma2)].
double kl_alpha(double mu_t, double sigma2_t, double mu, double sigma2);

// KL[N(z_mean, diag(omega_var)^-1) || N(0, diag(omega_prior)^-1)].
double kl_latent(std::span<const double> z_mean, std::span<const double> omega_var,
                 std::span<const double> omega_prior);

// KL[Gamma(a_t, b_t) || Gamma(a, b)], shape/rate.
double kl_delta1(double a_t, double b_t, double a, double b);

// a_t [psi(a_t) + b/b_t + 1] - a [psi(a_t) + log(b/b_t)] - log(Gamma(a_t)/Gamma(a)).
// The bracket carries +1 where the Gamma-Gamma KL has -1, so this exceeds
// kl_delta1 by exactly 2 a_t. Not used by the optimizer.
double kl_delta1_as_printed(double a_t, double b_t, double a, double b);

// KL between Gamma(a_t, b_t) and Gamma(a, b), both conditioned on X >= t.
double kl_delta_trunc(double a_t, double b_t, double a, double b, double t = 1.0);

// Jensen lower bound on E_Q[log P(Y | alpha, Z)], using state.omega_t as the
// variational precision of every latent position.
double expected_loglik_bound(const VariationalState& state, const Network& net);

// Sum over nodes of E_Q(omega)[KL[Q(z_i) || P(z_i | omega)]], where the prior
// precision is the cumulative product of the shrinkage strengths. Reduces to
// the sum of kl_latent(z_i, omega_t, E[omega]) plus a nonnegative Jensen gap
// 0.5 * n * sum(log E[omega_l] - E[log omega_l]).
double kl_latent_sum(const VariationalState& state, const ShrinkageMoments& moments);

KlBreakdown kl_total(const VariationalState& state, const PriorConfig& prior, const Network& net,
                     bool use_truncated_means = false);

double dkl_dmu_alpha(const VariationalState& state, const PriorConfig& prior, const Network& net);
double dkl_dsigma2_alpha(const VariationalState& state, const PriorConfig& prior,
                         const Network& net);

// Log-odds argument of the bounded softplus term for every unordered pair
// i < j, with the number of dyads it stands for (2 if directed) and the
// total edge count. eta is affine in mu_alpha_t and sigma2_alpha_t (slopes 1
// and 1/2), which the intercept updates exploit.
struct PairTerms {
  std::vector<double> eta;
  std::vector<double> weight;
  double edges = 0.0;
};
PairTerms pair_terms(const VariationalState& state, const Network& net);

// Gradient of kl_total with respect to row i of z_t.
Eigen::VectorXd grad_z(const VariationalState& state, const PriorConfig& prior, const Network& net,
                       int i, bool use_truncated_means = false);

// Same, with the prior precision supplied explicitly.
Eigen::VectorXd grad_z_with_precision(const VariationalState& state, const Network& net,
                                      const Eigen::VectorXd& prior_precision, int i);

// The z-dependent part of kl_total,
//   0.5 * sum_i sum_l prior_precision_l * z_il^2 - expected_loglik_bound,
// evaluated at z with the remaining parameters taken from state. Writes the
// n x p gradient to *grad when given.
double z_objective(const Eigen::MatrixXd& z, const VariationalState& state, const Network& net,
                   const Eigen::VectorXd& prior_precision, Eigen::MatrixXd* grad = nullptr);

// The omega_t-dependent part of kl_total as a function of v = log(omega_t):
//   0.5 n sum_l (v_l + prior_precision_l e^-v_l) - expected_loglik_bound.
// Writes the gradient in v to *grad when given.
double precision_objective(const Eigen::VectorXd& log_omega, const VariationalState& state,
                           const Network& net, const Eigen::VectorXd& prior_precision,
                           Eigen::VectorXd* grad = nullptr);

}  // namespace lspm
