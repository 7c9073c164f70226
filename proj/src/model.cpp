#include "lspm/model.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <boost/math/special_functions/digamma.hpp>

#include "lspm/errors.hpp"
#include "lspm/numeric.hpp"
#include "lspm/random.hpp"
#include "lspm/special.hpp"

namespace lspm {

void PriorConfig::validate() const {
  if (!(sigma2_alpha > 0.0)) {
    throw ValidationError("sigma2_alpha must be positive");
  }
  if (!(a1 > 0.0) || !(b1 > 0.0) || !(a2 > 0.0) || !(b2 > 0.0)) {
    throw ValidationError("gamma shapes and rates must be positive");
  }
  if (t2 != 1.0) {
    throw ValidationError("truncation point t2 is fixed at 1");
  }
  if (p < 1) {
    throw ValidationError("truncation level p must be at least 1");
  }
  if (!std::isfinite(mu_alpha)) {
    throw ValidationError("mu_alpha must be finite");
  }
}

void VariationalState::validate() const {
  const int dims = p();
  if (dims < 1 || n() < 2) {
    throw ValidationError("state needs n >= 2 and p >= 1");
  }
  if (!(sigma2_alpha_t > 0.0) || !std::isfinite(mu_alpha_t)) {
    throw ValidationError("intercept variational parameters are invalid");
  }
  if (!z_t.allFinite()) {
    throw ValidationError("latent means must be finite");
  }
  if (!(a1_t > 0.0) || !(b1_t > 0.0)) {
    throw ValidationError("delta_1 shape and rate must be positive");
  }
  if (a2_t.size() != dims - 1 || b2_t.size() != dims - 1 || omega_t.size() != dims) {
    throw ValidationError("shrinkage parameter vectors have the wrong length");
  }
  if ((a2_t.array() <= 0.0).any() || (b2_t.array() <= 0.0).any() ||
      (omega_t.array() <= 0.0).any() || !omega_t.allFinite()) {
    throw ValidationError("shrinkage shapes, rates and precisions must be positive");
  }
}

double edge_probability(double alpha, std::span<const double> z_i, std::span<const double> z_j) {
  if (z_i.size() != z_j.size()) {
    throw ValidationError("latent positions have different lengths");
  }
  double d2 = 0.0;
  for (std::size_t l = 0; l < z_i.size(); ++l) {
    const double d = z_i[l] - z_j[l];
    d2 += d * d;
  }
  return logistic(alpha - d2);
}

double truncated_gamma_mean(double a, double b, double t) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ValidationError("truncated gamma mean needs positive shape and rate");
  }
  if (!(t >= 0.0)) {
    throw ValidationError("truncation point must be nonnegative");
  }
  if (t == 0.0) {
    return a / b;
  }
  // Gamma(a+1, x) = a Gamma(a, x) + x^a e^-x.
  const double x = b * t;
  const double boundary = std::exp(a * std::log(x) - x - log_upper_gamma(a, x));
  return (a + boundary) / b;
}

ShrinkageMoments shrinkage_moments(const VariationalState& state, double t2,
                                   bool use_truncated_means) {
  const int p = state.p();
  ShrinkageMoments m{Eigen::VectorXd(p), Eigen::VectorXd(p)};
  m.mean[0] = state.a1_t / state.b1_t;
  m.log_mean[0] = boost::math::digamma(state.a1_t) - std::log(state.b1_t);
  for (int h = 1; h < p; ++h) {
    const double a = state.a2_t[h - 1];
    const double b = state.b2_t[h - 1];
    if (use_truncated_means) {
      m.mean[h] = truncated_gamma_mean(a, b, t2);
      m.log_mean[h] = truncated_gamma_log_mean(a, b, t2);
    } else {
      m.mean[h] = a / b;
      m.log_mean[h] = boost::math::digamma(a) - std::log(b);
    }
  }
  return m;
}

Eigen::VectorXd expected_precision(const VariationalState& state, bool use_truncated_means,
                                   double t2) {
  const int p = state.p();
  Eigen::VectorXd omega(p);
  double running = 1.0;
  for (int h = 0; h < p; ++h) {
    double mean = 0.0;
    if (h == 0) {
      mean = state.a1_t / state.b1_t;
    } else if (use_truncated_means) {
      mean = truncated_gamma_mean(state.a2_t[h - 1], state.b2_t[h - 1], t2);
    } else {
      mean = state.a2_t[h - 1] / state.b2_t[h - 1];
    }
    running *= mean;
    omega[h] = running;
  }
  return omega;
}

void refresh_variational_precision(VariationalState& state, bool use_truncated_means,
                                   double t2) {
  state.omega_t = expected_precision(state, use_truncated_means, t2);
}

Eigen::MatrixXd hop_distances(const Network& net) {
  const int n = net.size();
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && (net.has_edge(i, j) || net.has_edge(j, i))) {
        adj[i].push_back(j);
      }
    }
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Constant(n, n, -1.0);
  double max_finite = 0.0;
  std::vector<int> dist(n);
  for (int s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<int> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          q.push(v);
        }
      }
    }
    for (int t = 0; t < n; ++t) {
      d(s, t) = dist[t];
      max_finite = std::max(max_finite, static_cast<double>(dist[t]));
    }
  }
  return d.unaryExpr([&](double v) { return v < 0.0 ? max_finite + 1.0 : v; });
}

Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& distances, int dims) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) {
    throw ValidationError("distance matrix must be square");
  }
  if (dims < 1) {
    throw ValidationError("MDS needs at least one dimension");
  }
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
  const Eigen::MatrixXd b = -0.5 * centering * distances.array().square().matrix() * centering;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("eigendecomposition failed in classical MDS");
  }
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, dims);
  const auto& values = eig.eigenvalues();
  for (int k = 0; k < dims && k < n; ++k) {
    const Eigen::Index idx = n - 1 - k;  // eigenvalues ascend
    const double lambda = values[idx];
    if (!(lambda > 1e-10 * std::max(1.0, values[n - 1]))) {
      break;
    }
    Eigen::VectorXd v = eig.eigenvectors().col(idx);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) {
      v = -v;
    }
    coords.col(k) = v * std::sqrt(lambda);
  }
  return coords;
}

double pooled_variance(const Eigen::MatrixXd& x) {
  const double count = static_cast<double>(x.size());
  if (count < 2) {
    return 0.0;
  }
  const double mean = x.mean();
  return (x.array() - mean).square().sum() / (count - 1.0);
}

Eigen::MatrixXd jitter(const Eigen::MatrixXd& x, double variance, std::uint64_t seed) {
  Rng rng(seed);
  const double sd = std::sqrt(std::max(variance, 0.0));
  Eigen::MatrixXd out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index l = 0; l < out.cols(); ++l) {
      out(i, l) += sd * rng.normal();
    }
  }
  return out;
}

VariationalState initialize_state(const Network& net, const PriorConfig& prior,
                                  std::uint64_t seed, bool use_truncated_means) {
  net.validate();
  prior.validate();
  const Eigen::MatrixXd mds = classical_mds(hop_distances(net), prior.p);
  const double r2 = pooled_variance(mds) / 20.0;

  VariationalState s;
  s.mu_alpha_t = prior.mu_alpha;
  s.sigma2_alpha_t = prior.sigma2_alpha;
  s.z_t = jitter(mds, r2, seed);
  s.a1_t = prior.a1;
  s.b1_t = prior.b1;
  s.a2_t = Eigen::VectorXd::Constant(prior.p - 1, prior.a2);
  s.b2_t = Eigen::VectorXd::Constant(prior.p - 1, prior.b2);
  refresh_variational_precision(s, use_truncated_means, prior.t2);
  return s;
}

}  // namespace lspm
