#include "lspm/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <tuple>

#include "lspm/errors.hpp"
#include "lspm/numeric.hpp"

namespace lspm {

void FitConfig::validate() const {
  if (restarts < 1) {
    throw ValidationError("restarts must be at least 1");
  }
  if (max_outer_iters < 1) {
    throw ValidationError("max_outer_iters must be at least 1");
  }
  if (!(convergence_tol > 0.0) || !(bisection_tol > 0.0) || !(cg_grad_tol > 0.0)) {
    throw ValidationError("tolerances must be positive");
  }
  if (cg_max_iters < 1) {
    throw ValidationError("cg_max_iters must be at least 1");
  }
}

double bisect_root(const std::function<double(double)>& f, double lo, double hi, double tol,
                   int max_expand) {
  if (!(hi > lo)) {
    throw ValidationError("bisect_root: need lo < hi");
  }
  if (!(tol > 0.0)) {
    throw ValidationError("bisect_root: tolerance must be positive");
  }
  double flo = f(lo);
  double fhi = f(hi);
  for (int k = 0; k < max_expand && flo * fhi > 0.0; ++k) {
    const double width = hi - lo;
    lo -= 0.5 * width;
    hi += 0.5 * width;
    flo = f(lo);
    fhi = f(hi);
  }
  if (flo == 0.0) {
    return lo;
  }
  if (fhi == 0.0) {
    return hi;
  }
  if (!(flo * fhi < 0.0)) {
    throw BracketError("bisect_root: no sign change", lo, hi);
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    const double fm = f(mid);
    if (fm == 0.0) {
      return mid;
    }
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

CgResult conjugate_gradient_minimize(const ObjectiveFn& f, const Eigen::VectorXd& x0,
                                     int max_iters, double grad_tol) {
  constexpr double armijo = 1e-4;
  constexpr int max_halvings = 60;
  const Eigen::Index dim = x0.size();

  CgResult res;
  res.x = x0;
  Eigen::VectorXd g(dim);
  res.value = f(res.x, &g);
  res.grad_norm = g.norm();
  if (!std::isfinite(res.value)) {
    throw NumericalError("conjugate_gradient_minimize: objective is not finite at x0");
  }
  if (res.grad_norm <= grad_tol) {
    return res;
  }

  Eigen::VectorXd d = -g;
  double step = 1.0 / std::max(1.0, res.grad_norm);
  int since_restart = 0;
  Eigen::VectorXd xn(dim);
  Eigen::VectorXd gn(dim);
  for (int it = 0; it < max_iters; ++it) {
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -g.squaredNorm();
      since_restart = 0;
    }
    double fn = 0.0;
    bool accepted = false;
    for (int k = 0; k < max_halvings; ++k) {
      xn = res.x + step * d;
      fn = f(xn, &gn);
      if (std::isfinite(fn) && fn <= res.value + armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
    ++res.iterations;

    const double gg = g.squaredNorm();
    const double beta = gn.squaredNorm() / gg;
    const bool restart = ++since_restart >= dim || std::abs(gn.dot(g)) >= 0.2 * gn.squaredNorm();
    if (restart) {
      d = -gn;
      since_restart = 0;
    } else {
      d = -gn + beta * d;
    }
    // Next trial step: assume the first-order decrease matches the last one.
    const double new_slope = gn.dot(d);
    if (new_slope < 0.0) {
      step = std::min(step * slope / new_slope, 4.0 * step);
    }

    res.x.swap(xn);
    g.swap(gn);
    res.value = fn;
    res.grad_norm = g.norm();
    if (res.grad_norm <= grad_tol) {
      break;
    }
  }
  return res;
}

std::pair<double, double> update_delta1(const VariationalState& state, const PriorConfig& prior,
                                        bool use_truncated_means) {
  const int n = state.n();
  const int p = state.p();
  const ShrinkageMoments m = shrinkage_moments(state, prior.t2, use_truncated_means);
  double rate = prior.b1;
  double prod = 1.0;
  for (int l = 0; l < p; ++l) {
    if (l > 0) {
      prod *= m.mean[l];
    }
    rate += 0.5 * prod * (state.z_t.col(l).squaredNorm() + n / state.omega_t[l]);
  }
  return {0.5 * n * p + prior.a1, rate};
}

std::pair<double, double> update_delta_h(const VariationalState& state, const PriorConfig& prior,
                                         int h, bool use_truncated_means) {
  const int n = state.n();
  const int p = state.p();
  if (h < 2 || h > p) {
    throw ValidationError("update_delta_h: h must lie in 2..p");
  }
  const ShrinkageMoments m = shrinkage_moments(state, prior.t2, use_truncated_means);
  double prod = 1.0;
  for (int l = 0; l < h - 1; ++l) {
    prod *= m.mean[l];
  }
  double rate = prior.b2;
  for (int l = h - 1; l < p; ++l) {
    if (l > h - 1) {
      prod *= m.mean[l];
    }
    rate += 0.5 * prod * (state.z_t.col(l).squaredNorm() + n / state.omega_t[l]);
  }
  return {0.5 * n * (p - h + 1) + prior.a2, rate};
}

void update_mu_alpha(VariationalState& state, const PriorConfig& prior, const Network& net,
                     double tol) {
  const PairTerms t = pair_terms(state, net);
  const double mu0 = state.mu_alpha_t;
  auto deriv = [&](double mu) {
    double sig = 0.0;
    for (std::size_t k = 0; k < t.eta.size(); ++k) {
      sig += t.weight[k] * logistic(t.eta[k] + (mu - mu0));
    }
    return (mu - prior.mu_alpha) / prior.sigma2_alpha - t.edges + sig;
  };
  state.mu_alpha_t = bisect_root(deriv, mu0 - 1.0, mu0 + 1.0, tol);
}

void update_sigma2_alpha(VariationalState& state, const PriorConfig& prior, const Network& net,
                         double tol) {
  const PairTerms t = pair_terms(state, net);
  const double s0 = state.sigma2_alpha_t;
  // Same sign as d kl / d sigma2 since d sigma2 / d u = exp(u) > 0.
  auto deriv = [&](double u) {
    const double s = std::exp(u);
    double sig = 0.0;
    for (std::size_t k = 0; k < t.eta.size(); ++k) {
      sig += t.weight[k] * logistic(t.eta[k] + 0.5 * (s - s0));
    }
    return 0.5 / prior.sigma2_alpha - 0.5 / s + 0.5 * sig;
  };
  const double u0 = std::log(s0);
  state.sigma2_alpha_t = std::exp(bisect_root(deriv, u0 - 1.0, u0 + 1.0, tol));
}

CgResult update_latent_means(VariationalState& state, const PriorConfig& prior,
                             const Network& net, const FitConfig& cfg) {
  const int n = state.n();
  const int p = state.p();
  const Eigen::VectorXd prior_precision =
      expected_precision(state, cfg.use_truncated_means, prior.t2);
  Eigen::MatrixXd z(n, p);
  Eigen::MatrixXd gz(n, p);
  ObjectiveFn f = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    z = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, p);
    const double v = z_objective(z, state, net, prior_precision, grad ? &gz : nullptr);
    if (grad) {
      *grad = Eigen::Map<const Eigen::VectorXd>(gz.data(), gz.size());
    }
    return v;
  };
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(state.z_t.data(), state.z_t.size());
  CgResult r = conjugate_gradient_minimize(f, x0, cfg.cg_max_iters, cfg.cg_grad_tol);
  state.z_t = Eigen::Map<const Eigen::MatrixXd>(r.x.data(), n, p);
  return r;
}

CgResult update_variational_precision(VariationalState& state, const PriorConfig& prior,
                                      const Network& net, const FitConfig& cfg) {
  const Eigen::VectorXd prior_precision =
      expected_precision(state, cfg.use_truncated_means, prior.t2);
  ObjectiveFn f = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
    return precision_objective(v, state, net, prior_precision, grad);
  };
  const Eigen::VectorXd v0 = state.omega_t.array().log().matrix();
  CgResult r = conjugate_gradient_minimize(f, v0, cfg.cg_max_iters, cfg.cg_grad_tol);
  state.omega_t = r.x.array().exp().matrix();
  return r;
}

FitResult fit_from_seed(const Network& net, const PriorConfig& prior, const FitConfig& cfg,
                        std::uint64_t seed) {
  net.validate();
  prior.validate();
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const bool trunc = cfg.use_truncated_means;

  FitResult res;
  res.state = initialize_state(net, prior, seed, trunc);
  VariationalState& s = res.state;
  auto total = [&] { return kl_total(s, prior, net, trunc); };
  int cg_failures = 0;
  auto update_shrinkage = [&] {
    std::tie(s.a1_t, s.b1_t) = update_delta1(s, prior, trunc);
    for (int h = 2; h <= prior.p; ++h) {
      std::tie(s.a2_t[h - 2], s.b2_t[h - 2]) = update_delta_h(s, prior, h, trunc);
    }
  };
  auto update_precision = [&] {
    if (cfg.tie_precision) {
      refresh_variational_precision(s, trunc, prior.t2);
    } else if (update_variational_precision(s, prior, net, cfg).line_search_failed) {
      ++cg_failures;
    }
  };

  if (cfg.warm_start_shrinkage) {
    // Fit the intercept and shrinkage blocks to the starting positions before
    // the positions move. At the prior values the later dimensions carry
    // precisions of 6, 18, 54, ... and the first position update would
    // flatten them regardless of the data.
    update_mu_alpha(s, prior, net, cfg.bisection_tol);
    update_sigma2_alpha(s, prior, net, cfg.bisection_tol);
    update_shrinkage();
    update_precision();
  }

  KlBreakdown kb = total();
  res.objective_trace.push_back(kb);
  double prev_bound = -kb.neg_expected_loglik_bound;
  for (int it = 1; it <= cfg.max_outer_iters; ++it) {
    SubstepRecord rec;
    rec.iteration = it;
    rec.start = kb.total;

    update_mu_alpha(s, prior, net, cfg.bisection_tol);
    rec.after_mu = total().total;
    update_sigma2_alpha(s, prior, net, cfg.bisection_tol);
    rec.after_sigma2 = total().total;
    if (update_latent_means(s, prior, net, cfg).line_search_failed) {
      ++cg_failures;
    }
    rec.after_z = total().total;

    update_shrinkage();
    rec.after_delta = total().total;
    update_precision();

    kb = total();
    rec.after_precision = kb.total;
    res.objective_trace.push_back(kb);
    res.substeps.push_back(rec);
    res.iterations = it;

    const double bound = -kb.neg_expected_loglik_bound;
    if (std::abs(bound - prev_bound) < cfg.convergence_tol) {
      res.converged = true;
      break;
    }
    prev_bound = bound;
  }

  RestartSummary summary;
  summary.seed = seed;
  summary.iterations = res.iterations;
  summary.converged = res.converged;
  summary.final_total = kb.total;
  summary.shrinkage_means = shrinkage_moments(s, prior.t2, trunc).mean;
  summary.cg_line_search_failures = cg_failures;
  summary.worst_block_increase = -std::numeric_limits<double>::infinity();
  for (const auto& r : res.substeps) {
    const auto rise = [](double before, double after) {
      return (after - before) / std::max(std::abs(before), 1e-300);
    };
    summary.worst_block_increase =
        std::max({summary.worst_block_increase, rise(r.start, r.after_mu),
                  rise(r.after_mu, r.after_sigma2), rise(r.after_sigma2, r.after_z)});
  }
  res.restarts.push_back(summary);
  res.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

FitResult fit(const Network& net, const PriorConfig& prior, const FitConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  FitResult best;
  std::vector<RestartSummary> summaries;
  double best_total = std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    FitResult cur = fit_from_seed(net, prior, cfg, cfg.seed + static_cast<std::uint64_t>(r));
    cur.restart_index = r;
    cur.restarts.front().restart = r;
    summaries.push_back(cur.restarts.front());
    const double t = cur.objective_trace.back().total;
    if (r == 0 || t < best_total) {
      best_total = t;
      best = std::move(cur);
    }
  }
  best.restarts = std::move(summaries);
  best.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return best;
}

}  // namespace lspm
