#include "lspm/elbo.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

#include "lspm/errors.hpp"
#include "lspm/numeric.hpp"
#include "lspm/special.hpp"

namespace lspm {

namespace {

// Per-dimension quantities shared by every dyad.
struct DyadConstants {
  Eigen::VectorXd c;     // 1 / (1 + 4 / omega_l)
  double eta_offset;     // mu + sigma2/2 - 0.5 sum log(1 + 4/omega_l)
  double y_offset;       // mu - 2 sum 1/omega_l
};

DyadConstants dyad_constants(const VariationalState& s) {
  const int p = s.p();
  DyadConstants k{Eigen::VectorXd(p), s.mu_alpha_t + 0.5 * s.sigma2_alpha_t, s.mu_alpha_t};
  for (int l = 0; l < p; ++l) {
    const double inv = 1.0 / s.omega_t[l];
    k.c[l] = 1.0 / (1.0 + 4.0 * inv);
    k.eta_offset -= 0.5 * std::log1p(4.0 * inv);
    k.y_offset -= 2.0 * inv;
  }
  return k;
}

// Visits each unordered pair once with the number of dyads it stands for
// (2 if directed) and the number of observed edges among them.
template <class F>
void for_each_pair(const Network& net, F&& f) {
  const int n = net.size();
  const bool dir = net.directed();
  const double w = dir ? 2.0 : 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double ysum = dir ? net.y(i, j) + net.y(j, i) : net.y(i, j);
      f(i, j, w, ysum);
    }
  }
}

void check_shapes(const VariationalState& s, const Network& net) {
  if (s.n() != net.size()) {
    throw ValidationError("state has " + std::to_string(s.n()) + " nodes, network has " +
                          std::to_string(net.size()));
  }
  if (s.omega_t.size() != s.p()) {
    throw ValidationError("state precision vector has the wrong length");
  }
}

// Sum over pairs of w * logistic(eta_ij) and the observed edge count.
std::pair<double, double> sigmoid_and_edge_sums(const VariationalState& s, const Network& net) {
  const PairTerms t = pair_terms(s, net);
  double sig = 0.0;
  for (std::size_t k = 0; k < t.eta.size(); ++k) {
    sig += t.weight[k] * logistic(t.eta[k]);
  }
  return {sig, t.edges};
}

}  // namespace

PairTerms pair_terms(const VariationalState& state, const Network& net) {
  check_shapes(state, net);
  const DyadConstants k = dyad_constants(state);
  const int p = state.p();
  PairTerms t;
  const std::size_t pairs = static_cast<std::size_t>(net.size()) * (net.size() - 1) / 2;
  t.eta.reserve(pairs);
  t.weight.reserve(pairs);
  for_each_pair(net, [&](int i, int j, double w, double ysum) {
    double q = 0.0;
    for (int l = 0; l < p; ++l) {
      const double d = state.z_t(i, l) - state.z_t(j, l);
      q += k.c[l] * d * d;
    }
    t.eta.push_back(k.eta_offset - q);
    t.weight.push_back(w);
    t.edges += ysum;
  });
  return t;
}

double kl_alpha(double mu_t, double sigma2_t, double mu, double sigma2) {
  if (!(sigma2_t > 0.0) || !(sigma2 > 0.0)) {
    throw ValidationError("kl_alpha: variances must be positive");
  }
  const double r = sigma2_t / sigma2;
  const double dm = mu_t - mu;
  return -0.5 * std::log(r) - 0.5 + 0.5 * r + dm * dm / (2.0 * sigma2);
}

double kl_latent(std::span<const double> z_mean, std::span<const double> omega_var,
                 std::span<const double> omega_prior) {
  if (z_mean.size() != omega_var.size() || z_mean.size() != omega_prior.size()) {
    throw ValidationError("kl_latent: lengths differ");
  }
  double kl = 0.0;
  for (std::size_t l = 0; l < z_mean.size(); ++l) {
    const double wt = omega_var[l];
    const double w = omega_prior[l];
    if (!(wt > 0.0) || !(w > 0.0)) {
      throw ValidationError("kl_latent: precisions must be positive");
    }
    kl += -0.5 + 0.5 * std::log(wt / w) + 0.5 * w * z_mean[l] * z_mean[l] + 0.5 * w / wt;
  }
  return kl;
}

double kl_delta1(double a_t, double b_t, double a, double b) {
  if (!(a_t > 0.0) || !(b_t > 0.0) || !(a > 0.0) || !(b > 0.0)) {
    throw ValidationError("kl_delta1: shapes and rates must be positive");
  }
  return (a_t - a) * boost::math::digamma(a_t) - std::lgamma(a_t) + std::lgamma(a) +
         a * std::log(b_t / b) + a_t * (b - b_t) / b_t;
}

double kl_delta1_as_printed(double a_t, double b_t, double a, double b) {
  if (!(a_t > 0.0) || !(b_t > 0.0) || !(a > 0.0) || !(b > 0.0)) {
    throw ValidationError("kl_delta1: shapes and rates must be positive");
  }
  const double psi = boost::math::digamma(a_t);
  return a_t * (psi + b / b_t + 1.0) - a * (psi + std::log(b / b_t)) -
         (std::lgamma(a_t) - std::lgamma(a));
}

double kl_delta_trunc(double a_t, double b_t, double a, double b, double t) {
  if (!(a_t > 0.0) || !(b_t > 0.0) || !(a > 0.0) || !(b > 0.0)) {
    throw ValidationError("kl_delta_trunc: shapes and rates must be positive");
  }
  if (!(t >= 0.0)) {
    throw ValidationError("kl_delta_trunc: truncation point must be nonnegative");
  }
  if (a_t == a && b_t == b) {
    return 0.0;
  }
  // E_q[log q - log p] splits into normalizers and the two sufficient
  // statistics; only E_q[log x] needs quadrature.
  const double norm_q = a_t * std::log(b_t) - log_upper_gamma(a_t, b_t * t);
  const double norm_p = a * std::log(b) - log_upper_gamma(a, b * t);
  double err = 0.0;
  const double log_mean = truncated_gamma_log_mean(a_t, b_t, t, &err);
  const double kl = norm_q - norm_p + (a_t - a) * log_mean -
                    (b_t - b) * truncated_gamma_mean(a_t, b_t, t);
  if (!(std::abs(a_t - a) * err <= 1e-8 * std::max(1.0, std::abs(kl))) || !std::isfinite(kl)) {
    std::ostringstream msg;
    msg << "kl_delta_trunc quadrature did not converge: estimate " << kl << ", error "
        << std::abs(a_t - a) * err << " for (" << a_t << ", " << b_t << ") vs (" << a << ", " << b
        << "), t = " << t;
    throw NumericalError(msg.str());
  }
  return std::max(kl, 0.0);
}

double expected_loglik_bound(const VariationalState& state, const Network& net) {
  check_shapes(state, net);
  const DyadConstants k = dyad_constants(state);
  const int p = state.p();
  double bound = 0.0;
  for_each_pair(net, [&](int i, int j, double w, double ysum) {
    double d2 = 0.0;
    double q = 0.0;
    for (int l = 0; l < p; ++l) {
      const double d = state.z_t(i, l) - state.z_t(j, l);
      d2 += d * d;
      q += k.c[l] * d * d;
    }
    bound += ysum * (k.y_offset - d2) - w * softplus(k.eta_offset - q);
  });
  return bound;
}

double kl_latent_sum(const VariationalState& state, const ShrinkageMoments& moments) {
  const int p = state.p();
  const int n = state.n();
  double per_node = -0.5 * p;
  Eigen::VectorXd e_omega(p);
  double running = 1.0;
  double log_running = 0.0;
  for (int l = 0; l < p; ++l) {
    running *= moments.mean[l];
    log_running += moments.log_mean[l];
    e_omega[l] = running;
    per_node += 0.5 * (std::log(state.omega_t[l]) - log_running) +
                0.5 * running / state.omega_t[l];
  }
  double quad = 0.0;
  for (int l = 0; l < p; ++l) {
    quad += e_omega[l] * state.z_t.col(l).squaredNorm();
  }
  return n * per_node + 0.5 * quad;
}

KlBreakdown kl_total(const VariationalState& state, const PriorConfig& prior, const Network& net,
                     bool use_truncated_means) {
  check_shapes(state, net);
  if (state.p() != prior.p) {
    throw ValidationError("state and prior disagree on the truncation level");
  }
  const ShrinkageMoments m = shrinkage_moments(state, prior.t2, use_truncated_means);
  KlBreakdown kb;
  kb.kl_alpha = kl_alpha(state.mu_alpha_t, state.sigma2_alpha_t, prior.mu_alpha,
                         prior.sigma2_alpha);
  kb.kl_latent_sum = kl_latent_sum(state, m);
  kb.kl_delta1 = kl_delta1(state.a1_t, state.b1_t, prior.a1, prior.b1);
  for (int h = 0; h + 1 < prior.p; ++h) {
    kb.kl_delta_h_sum += kl_delta_trunc(state.a2_t[h], state.b2_t[h], prior.a2, prior.b2, prior.t2);
  }
  kb.neg_expected_loglik_bound = -expected_loglik_bound(state, net);
  kb.total = kb.kl_alpha + kb.kl_latent_sum + kb.kl_delta1 + kb.kl_delta_h_sum +
             kb.neg_expected_loglik_bound;
  return kb;
}

double dkl_dmu_alpha(const VariationalState& state, const PriorConfig& prior, const Network& net) {
  const auto [sig, edges] = sigmoid_and_edge_sums(state, net);
  return (state.mu_alpha_t - prior.mu_alpha) / prior.sigma2_alpha - edges + sig;
}

double dkl_dsigma2_alpha(const VariationalState& state, const PriorConfig& prior,
                         const Network& net) {
  const auto [sig, edges] = sigmoid_and_edge_sums(state, net);
  (void)edges;
  return 0.5 / prior.sigma2_alpha - 0.5 / state.sigma2_alpha_t + 0.5 * sig;
}

Eigen::VectorXd grad_z_with_precision(const VariationalState& state, const Network& net,
                                      const Eigen::VectorXd& prior_precision, int i) {
  check_shapes(state, net);
  const int n = state.n();
  const int p = state.p();
  if (i < 0 || i >= n) {
    throw ValidationError("grad_z: node index out of range");
  }
  if (prior_precision.size() != p) {
    throw ValidationError("grad_z: prior precision has the wrong length");
  }
  const DyadConstants k = dyad_constants(state);
  const bool dir = net.directed();
  const double w = dir ? 2.0 : 1.0;
  Eigen::VectorXd g = prior_precision.cwiseProduct(state.z_t.row(i).transpose());
  Eigen::VectorXd d(p);
  for (int j = 0; j < n; ++j) {
    if (j == i) {
      continue;
    }
    const double ysum = dir ? net.y(i, j) + net.y(j, i) : net.y(i, j);
    double q = 0.0;
    for (int l = 0; l < p; ++l) {
      d[l] = state.z_t(i, l) - state.z_t(j, l);
      q += k.c[l] * d[l] * d[l];
    }
    const double s = w * logistic(k.eta_offset - q);
    for (int l = 0; l < p; ++l) {
      g[l] += 2.0 * (ysum - s * k.c[l]) * d[l];
    }
  }
  return g;
}

Eigen::VectorXd grad_z(const VariationalState& state, const PriorConfig& prior, const Network& net,
                       int i, bool use_truncated_means) {
  const ShrinkageMoments m = shrinkage_moments(state, prior.t2, use_truncated_means);
  Eigen::VectorXd e_omega(state.p());
  double running = 1.0;
  for (int l = 0; l < state.p(); ++l) {
    running *= m.mean[l];
    e_omega[l] = running;
  }
  return grad_z_with_precision(state, net, e_omega, i);
}

double z_objective(const Eigen::MatrixXd& z, const VariationalState& state, const Network& net,
                   const Eigen::VectorXd& prior_precision, Eigen::MatrixXd* grad) {
  check_shapes(state, net);
  const int n = state.n();
  const int p = state.p();
  if (z.rows() != n || z.cols() != p) {
    throw ValidationError("z_objective: z has the wrong shape");
  }
  const DyadConstants k = dyad_constants(state);
  double value = 0.0;
  for (int l = 0; l < p; ++l) {
    value += 0.5 * prior_precision[l] * z.col(l).squaredNorm();
  }
  if (grad) {
    *grad = z * prior_precision.asDiagonal();
  }
  std::vector<double> d(p);
  for_each_pair(net, [&](int i, int j, double w, double ysum) {
    double d2 = 0.0;
    double q = 0.0;
    for (int l = 0; l < p; ++l) {
      d[l] = z(i, l) - z(j, l);
      d2 += d[l] * d[l];
      q += k.c[l] * d[l] * d[l];
    }
    double sp = 0.0;
    double lg = 0.0;
    softplus_and_logistic(k.eta_offset - q, sp, lg);
    value -= ysum * (k.y_offset - d2) - w * sp;
    if (grad) {
      const double s = w * lg;
      for (int l = 0; l < p; ++l) {
        const double gl = 2.0 * (ysum - s * k.c[l]) * d[l];
        (*grad)(i, l) += gl;
        (*grad)(j, l) -= gl;
      }
    }
  });
  return value;
}

double precision_objective(const Eigen::VectorXd& log_omega, const VariationalState& state,
                           const Network& net, const Eigen::VectorXd& prior_precision,
                           Eigen::VectorXd* grad) {
  check_shapes(state, net);
  const int p = state.p();
  const double n = state.n();
  if (log_omega.size() != p || prior_precision.size() != p) {
    throw ValidationError("precision_objective: vectors have the wrong length");
  }
  // u = 1 / omega_t.
  Eigen::VectorXd u(p);
  Eigen::VectorXd c(p);
  double eta_offset = state.mu_alpha_t + 0.5 * state.sigma2_alpha_t;
  double value = 0.0;
  for (int l = 0; l < p; ++l) {
    u[l] = std::exp(-log_omega[l]);
    c[l] = 1.0 / (1.0 + 4.0 * u[l]);
    eta_offset -= 0.5 * std::log1p(4.0 * u[l]);
    value += 0.5 * n * (log_omega[l] + prior_precision[l] * u[l]);
  }
  // d/du_l of the pair terms, accumulated as sum w sigma(eta) * (...).
  Eigen::VectorXd sig_sum = Eigen::VectorXd::Zero(p);
  double sig_total = 0.0;
  double edges = 0.0;
  std::vector<double> d2(p);
  for_each_pair(net, [&](int i, int j, double w, double ysum) {
    double q = 0.0;
    for (int l = 0; l < p; ++l) {
      const double d = state.z_t(i, l) - state.z_t(j, l);
      d2[l] = d * d;
      q += c[l] * d2[l];
    }
    double sp = 0.0;
    double lg = 0.0;
    softplus_and_logistic(eta_offset - q, sp, lg);
    value += w * sp;
    edges += ysum;
    if (grad) {
      const double s = w * lg;
      sig_total += s;
      for (int l = 0; l < p; ++l) {
        sig_sum[l] += s * d2[l];
      }
    }
  });
  value += 2.0 * edges * u.sum();
  if (grad) {
    grad->resize(p);
    for (int l = 0; l < p; ++l) {
      const double k = 1.0 + 4.0 * u[l];
      const double du = 0.5 * n * (prior_precision[l] - 1.0 / u[l]) + 2.0 * edges -
                        2.0 * sig_total / k + 4.0 * sig_sum[l] / (k * k);
      (*grad)[l] = -u[l] * du;
    }
  }
  return value;
}

}  // namespace lspm
