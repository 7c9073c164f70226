#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lspm/elbo.hpp"
#include "lspm/model.hpp"
#include "lspm/network.hpp"

namespace lspm {

struct FitConfig {
  int restarts = 10;
  int max_outer_iters = 200;
  double convergence_tol = 0.01;  // on the change in expected_loglik_bound
  double bisection_tol = 1e-8;
  int cg_max_iters = 50;
  double cg_grad_tol = 1e-4;
  std::uint64_t seed = 1;
  bool use_truncated_means = false;
  // true: omega_t is reset to the expected prior precision after every
  // shrinkage update. false: omega_t is its own block, minimized by CG in
  // log space.
  bool tie_precision = false;
  // Run the intercept, shrinkage and precision updates once on the starting
  // positions before the first outer iteration.
  bool warm_start_shrinkage = true;

  void validate() const;
};

// kl_total after each block of one outer iteration.
struct SubstepRecord {
  int iteration = 0;
  double start = 0.0;
  double after_mu = 0.0;
  double after_sigma2 = 0.0;
  double after_z = 0.0;
  double after_delta = 0.0;
  double after_precision = 0.0;
};

struct RestartSummary {
  int restart = 0;
  std::uint64_t seed = 0;
  int iterations = 0;
  bool converged = false;
  double final_total = 0.0;
  Eigen::VectorXd shrinkage_means;  // E[delta_h], h = 1..p
  int cg_line_search_failures = 0;
  // Largest relative rise of kl_total across the mu, sigma2 and z blocks of
  // any outer iteration (0 or negative when they never increased it).
  double worst_block_increase = 0.0;
};

struct FitResult {
  VariationalState state;
  std::vector<KlBreakdown> objective_trace;  // initial point, then one entry per outer iteration
  int iterations = 0;
  int restart_index = 0;
  bool converged = false;
  double wall_time_seconds = 0.0;
  std::vector<SubstepRecord> substeps;  // for the selected restart
  std::vector<RestartSummary> restarts;
};

// Root of f by bisection. If f(lo) and f(hi) share a sign, the bracket is
// widened on both sides (doubling its width) up to max_expand times.
double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol,
                   int max_expand = 60);

// Returns f(x) and, when the pointer is non-null, writes the gradient.
using ObjectiveFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct CgResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool line_search_failed = false;
};

// Fletcher-Reeves nonlinear CG with Armijo backtracking. Restarts along the
// steepest descent direction every x0.size() iterations, whenever the
// direction is not a descent direction, and when successive gradients lose
// orthogonality.
CgResult conjugate_gradient_minimize(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                                     int max_iters, double grad_tol);

// Closed-form coordinate updates of (a1_t, b1_t) and of (a2_t, b2_t) at
// dimension h (2..p), holding everything else, including omega_t, fixed.
std::pair<double, double> update_delta1(const VariationalState& state, const PriorConfig& prior,
                                        bool use_truncated_means = false);
std::pair<double, double> update_delta_h(const VariationalState& state, const PriorConfig& prior,
                                         int h, bool use_truncated_means = false);

// One full coordinate pass on the intercept blocks and latent means.
void update_mu_alpha(VariationalState& state, const PriorConfig& prior, const Network& net,
                     double tol);
void update_sigma2_alpha(VariationalState& state, const PriorConfig& prior, const Network& net,
                         double tol);
CgResult update_latent_means(VariationalState& state, const PriorConfig& prior,
                             const Network& net, const FitConfig& cfg);
CgResult update_variational_precision(VariationalState& state, const PriorConfig& prior,
                                      const Network& net, const FitConfig& cfg);

// A single restart started from initialize_state(net, prior, seed).
FitResult fit_from_seed(const Network& net, const PriorConfig& prior, const FitConfig& cfg,
                        std::uint64_t seed);

// cfg.restarts restarts with seeds cfg.seed + r; keeps the one with the lowest
// final kl_total.
FitResult fit(const Network& net, const PriorConfig& prior, const FitConfig& cfg);

}  // namespace lspm
