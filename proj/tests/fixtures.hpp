#pragma once

#include <cmath>
#include <cstdint>
#include <functional>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "lspm/elbo.hpp"
#include "lspm/model.hpp"
#include "lspm/network.hpp"

namespace fixture {

struct Problem {
  lspm::Network net;
  lspm::PriorConfig prior;
  lspm::VariationalState state;
};

class Draw {
 public:
  explicit Draw(std::uint32_t seed) : eng_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * u_(eng_); }
  double normal() { return nd_(eng_); }
  int integer(int lo, int hi) { return boost::random::uniform_int_distribution<int>(lo, hi)(eng_); }
  boost::random::mt19937& engine() { return eng_; }

 private:
  boost::random::mt19937 eng_;
  boost::random::uniform_01<double> u_;
  boost::random::normal_distribution<double> nd_{0.0, 1.0};
};

// A small random network and a random valid variational state on it.
inline Problem random_problem(std::uint32_t seed, int n_lo = 3, int n_hi = 8, int p_lo = 1,
                              int p_hi = 4) {
  Draw d(seed);
  const int n = d.integer(n_lo, n_hi);
  const int p = d.integer(p_lo, p_hi);
  const bool directed = d.uniform(0, 1) < 0.5;
  Problem pr{lspm::Network(n, directed), lspm::PriorConfig{}, lspm::VariationalState{}};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && (directed || j > i) && d.uniform(0, 1) < 0.35) pr.net.add_edge(i, j);

  pr.prior.p = p;
  pr.prior.mu_alpha = d.uniform(-1, 1);
  pr.prior.sigma2_alpha = d.uniform(1, 10);
  pr.prior.a1 = d.uniform(1, 4);
  pr.prior.b1 = d.uniform(0.5, 2);
  pr.prior.a2 = d.uniform(2, 5);
  pr.prior.b2 = d.uniform(0.5, 2);

  auto& s = pr.state;
  s.mu_alpha_t = d.uniform(-1, 2);
  s.sigma2_alpha_t = d.uniform(0.1, 2);
  s.z_t.resize(n, p);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < p; ++l) s.z_t(i, l) = 0.7 * d.normal();
  s.a1_t = d.uniform(1, 10);
  s.b1_t = d.uniform(0.5, 5);
  s.a2_t.resize(p - 1);
  s.b2_t.resize(p - 1);
  for (int h = 0; h + 1 < p; ++h) {
    s.a2_t(h) = d.uniform(2, 20);
    s.b2_t(h) = d.uniform(0.5, 5);
  }
  s.omega_t.resize(p);
  for (int l = 0; l < p; ++l) s.omega_t(l) = d.uniform(0.5, 5);
  return pr;
}

inline double total(const Problem& pr, const lspm::VariationalState& s, bool trunc = false) {
  return lspm::kl_total(s, pr.prior, pr.net, trunc).total;
}

// Central difference of kl_total along one scalar parameter of the state.
inline double central_difference(const Problem& pr,
                                 const std::function<double&(lspm::VariationalState&)>& coord,
                                 double step = 1e-5) {
  lspm::VariationalState up = pr.state, down = pr.state;
  coord(up) += step;
  coord(down) -= step;
  return (total(pr, up) - total(pr, down)) / (2.0 * step);
}

inline double relative_error(double fd, double an) {
  return std::abs(fd - an) / std::max(std::abs(an), 1.0);
}

}  // namespace fixture
