#include "lspm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "lspm/errors.hpp"

namespace lspm {

namespace {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) {
    throw ValidationError(where + ": missing key '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <class T>
void get_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) {
    out = get<T>(j, key, where);
  }
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) {
    throw ValidationError(where + ": expected a JSON object");
  }
}

}  // namespace

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      ok = ok || key == a;
    }
    if (!ok) {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    a.push_back(v[i]);
  }
  return a;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) {
    throw ValidationError("matrix must be an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError("matrix rows must be arrays of equal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw ValidationError("matrix entries must be numbers");
      }
      m(i, c) = row[c].get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) {
    throw ValidationError("vector must be an array");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ValidationError("vector entries must be numbers");
    }
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json to_json(const PriorConfig& p) {
  return {{"mu_alpha", p.mu_alpha}, {"sigma2_alpha", p.sigma2_alpha}, {"a1", p.a1},
          {"b1", p.b1},             {"a2", p.a2},                     {"b2", p.b2},
          {"t2", p.t2},             {"p", p.p}};
}

PriorConfig prior_from_json(const json& j) {
  const std::string where = "prior";
  reject_unknown_keys(j, {"mu_alpha", "sigma2_alpha", "a1", "b1", "a2", "b2", "t2", "p"}, where);
  PriorConfig p;
  get_opt(j, "mu_alpha", p.mu_alpha, where);
  get_opt(j, "sigma2_alpha", p.sigma2_alpha, where);
  get_opt(j, "a1", p.a1, where);
  get_opt(j, "b1", p.b1, where);
  get_opt(j, "a2", p.a2, where);
  get_opt(j, "b2", p.b2, where);
  get_opt(j, "t2", p.t2, where);
  get_opt(j, "p", p.p, where);
  p.validate();
  return p;
}

json to_json(const FitConfig& c) {
  json tol = std::isinf(c.convergence_tol) ? json("inf") : json(c.convergence_tol);
  return {{"restarts", c.restarts},
          {"max_outer_iters", c.max_outer_iters},
          {"convergence_tol", tol},
          {"bisection_tol", c.bisection_tol},
          {"cg_max_iters", c.cg_max_iters},
          {"cg_grad_tol", c.cg_grad_tol},
          {"seed", c.seed},
          {"use_truncated_means", c.use_truncated_means},
          {"tie_precision", c.tie_precision},
          {"warm_start_shrinkage", c.warm_start_shrinkage}};
}

FitConfig fit_config_from_json(const json& j) {
  const std::string where = "fit";
  reject_unknown_keys(j,
                      {"restarts", "max_outer_iters", "convergence_tol", "bisection_tol",
                       "cg_max_iters", "cg_grad_tol", "seed", "use_truncated_means",
                       "tie_precision", "warm_start_shrinkage"},
                      where);
  FitConfig c;
  get_opt(j, "restarts", c.restarts, where);
  get_opt(j, "max_outer_iters", c.max_outer_iters, where);
  if (j.contains("convergence_tol")) {
    const json& t = j.at("convergence_tol");
    if (t.is_string() && (t == "inf" || t == "Infinity")) {
      c.convergence_tol = std::numeric_limits<double>::infinity();
    } else {
      c.convergence_tol = get<double>(j, "convergence_tol", where);
    }
  }
  get_opt(j, "bisection_tol", c.bisection_tol, where);
  get_opt(j, "cg_max_iters", c.cg_max_iters, where);
  get_opt(j, "cg_grad_tol", c.cg_grad_tol, where);
  get_opt(j, "seed", c.seed, where);
  get_opt(j, "use_truncated_means", c.use_truncated_means, where);
  get_opt(j, "tie_precision", c.tie_precision, where);
  get_opt(j, "warm_start_shrinkage", c.warm_start_shrinkage, where);
  c.validate();
  return c;
}

json to_json(const VariationalState& s) {
  return {{"mu_alpha_t", s.mu_alpha_t}, {"sigma2_alpha_t", s.sigma2_alpha_t},
          {"z_t", to_json(s.z_t)},      {"a1_t", s.a1_t},
          {"b1_t", s.b1_t},             {"a2_t", to_json(s.a2_t)},
          {"b2_t", to_json(s.b2_t)},    {"omega_t", to_json(s.omega_t)}};
}

VariationalState state_from_json(const json& j) {
  const std::string where = "state";
  reject_unknown_keys(
      j, {"mu_alpha_t", "sigma2_alpha_t", "z_t", "a1_t", "b1_t", "a2_t", "b2_t", "omega_t"},
      where);
  VariationalState s;
  s.mu_alpha_t = get<double>(j, "mu_alpha_t", where);
  s.sigma2_alpha_t = get<double>(j, "sigma2_alpha_t", where);
  s.z_t = matrix_from_json(get<json>(j, "z_t", where));
  s.a1_t = get<double>(j, "a1_t", where);
  s.b1_t = get<double>(j, "b1_t", where);
  s.a2_t = vector_from_json(get<json>(j, "a2_t", where));
  s.b2_t = vector_from_json(get<json>(j, "b2_t", where));
  s.omega_t = vector_from_json(get<json>(j, "omega_t", where));
  s.validate();
  return s;
}

json to_json(const KlBreakdown& k) {
  return {{"kl_alpha", k.kl_alpha},
          {"kl_latent_sum", k.kl_latent_sum},
          {"kl_delta1", k.kl_delta1},
          {"kl_delta_h_sum", k.kl_delta_h_sum},
          {"neg_expected_loglik_bound", k.neg_expected_loglik_bound},
          {"total", k.total}};
}

KlBreakdown breakdown_from_json(const json& j) {
  const std::string where = "objective";
  reject_unknown_keys(j,
                      {"kl_alpha", "kl_latent_sum", "kl_delta1", "kl_delta_h_sum",
                       "neg_expected_loglik_bound", "total"},
                      where);
  KlBreakdown k;
  k.kl_alpha = get<double>(j, "kl_alpha", where);
  k.kl_latent_sum = get<double>(j, "kl_latent_sum", where);
  k.kl_delta1 = get<double>(j, "kl_delta1", where);
  k.kl_delta_h_sum = get<double>(j, "kl_delta_h_sum", where);
  k.neg_expected_loglik_bound = get<double>(j, "neg_expected_loglik_bound", where);
  k.total = get<double>(j, "total", where);
  return k;
}

json to_json(const FitResult& r, const PriorConfig& prior, const FitConfig& cfg) {
  json trace = json::array();
  for (const auto& k : r.objective_trace) {
    trace.push_back(to_json(k));
  }
  json sub = json::array();
  for (const auto& s : r.substeps) {
    sub.push_back({{"iteration", s.iteration},
                   {"start", s.start},
                   {"after_mu", s.after_mu},
                   {"after_sigma2", s.after_sigma2},
                   {"after_z", s.after_z},
                   {"after_delta", s.after_delta},
                   {"after_precision", s.after_precision}});
  }
  json restarts = json::array();
  for (const auto& s : r.restarts) {
    restarts.push_back({{"restart", s.restart},
                        {"seed", s.seed},
                        {"iterations", s.iterations},
                        {"converged", s.converged},
                        {"final_total", s.final_total},
                        {"shrinkage_means", to_json(s.shrinkage_means)},
                        {"cg_line_search_failures", s.cg_line_search_failures}});
  }
  return {{"state", to_json(r.state)},
          {"objective_trace", std::move(trace)},
          {"iterations", r.iterations},
          {"restart_index", r.restart_index},
          {"converged", r.converged},
          {"substeps", std::move(sub)},
          {"restarts", std::move(restarts)},
          {"prior", to_json(prior)},
          {"fit_config", to_json(cfg)}};
}

json to_json(const SimTruth& t) {
  return {{"alpha", t.alpha},
          {"deltas", t.deltas},
          {"positions", to_json(t.positions)},
          {"seed", t.seed}};
}

SimTruth truth_from_json(const json& j) {
  const std::string where = "truth";
  reject_unknown_keys(j, {"alpha", "deltas", "positions", "seed"}, where);
  SimTruth t;
  t.alpha = get<double>(j, "alpha", where);
  t.deltas = get<std::vector<double>>(j, "deltas", where);
  t.positions = matrix_from_json(get<json>(j, "positions", where));
  t.seed = get<std::uint64_t>(j, "seed", where);
  validate_deltas(t.deltas);
  if (!t.positions.allFinite()) {
    throw ValidationError("truth: positions must be finite");
  }
  return t;
}

json to_json(const MetricReport& m) {
  json j = {{"auroc", m.auroc},
            {"aupr", m.aupr},
            {"suggested_p", m.suggested_p},
            {"shrinkage_means", to_json(m.shrinkage_means)},
            {"shrinkage_ratios", to_json(m.shrinkage_ratios)},
            {"dimension_variances", to_json(m.dimension_variances)}};
  if (m.procrustes) {
    j["procrustes"] = *m.procrustes;
  }
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write '" + path + "'");
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw IoError("write failed for '" + path + "'");
  }
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const std::vector<KlBreakdown>& trace) {
  out << "iteration,kl_alpha,kl_latent_sum,kl_delta1,kl_delta_h_sum,neg_expected_loglik_bound,"
         "total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& k = trace[i];
    out << i << ',' << format_double(k.kl_alpha) << ',' << format_double(k.kl_latent_sum) << ','
        << format_double(k.kl_delta1) << ',' << format_double(k.kl_delta_h_sum) << ','
        << format_double(k.neg_expected_loglik_bound) << ',' << format_double(k.total) << '\n';
  }
}

void write_shrinkage_csv(std::ostream& out, const std::vector<ShrinkageRow>& rows) {
  out << "replicate,restart,dimension,value\n";
  for (const auto& r : rows) {
    out << r.replicate << ',' << r.restart << ',' << r.dimension << ',' << format_double(r.value)
        << '\n';
  }
}

std::vector<ShrinkageRow> shrinkage_rows(const FitResult& r, int replicate) {
  std::vector<ShrinkageRow> rows;
  for (const auto& s : r.restarts) {
    for (Eigen::Index h = 0; h < s.shrinkage_means.size(); ++h) {
      rows.push_back({replicate, s.restart, static_cast<int>(h) + 1, s.shrinkage_means[h]});
    }
  }
  return rows;
}

void write_positions_csv(std::ostream& out, const Eigen::MatrixXd& z) {
  out << "node,dim,value\n";
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index l = 0; l < z.cols(); ++l) {
      out << i + 1 << ',' << l + 1 << ',' << format_double(z(i, l)) << '\n';
    }
  }
}

}  // namespace lspm
