#include "lspm/network.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "lspm/errors.hpp"
#include "lspm/numeric.hpp"
#include "lspm/random.hpp"

namespace lspm {

Network::Network(int n, bool directed) : n_(n), directed_(directed) {
  if (n < 2) {
    throw ValidationError("network needs at least 2 nodes, got " + std::to_string(n));
  }
  adjacency_.assign(static_cast<std::size_t>(n) * n, 0);
}

std::size_t Network::index(int i, int j) const {
  if (i < 0 || j < 0 || i >= n_ || j >= n_) {
    throw ValidationError("node index out of range");
  }
  return static_cast<std::size_t>(i) * n_ + j;
}

void Network::add_edge(int i, int j) {
  if (i == j) {
    throw ValidationError("self-edges are not allowed (node " + std::to_string(i) + ")");
  }
  adjacency_[index(i, j)] = 1;
  if (!directed_) {
    adjacency_[index(j, i)] = 1;
  }
}

void Network::remove_edge(int i, int j) {
  adjacency_[index(i, j)] = 0;
  if (!directed_) {
    adjacency_[index(j, i)] = 0;
  }
}

std::int64_t Network::edge_count() const {
  const auto total = std::accumulate(adjacency_.begin(), adjacency_.end(), std::int64_t{0});
  return directed_ ? total : total / 2;
}

std::int64_t Network::dyad_count() const {
  const std::int64_t n = n_;
  return directed_ ? n * (n - 1) : n * (n - 1) / 2;
}

void Network::set_node_labels(std::vector<std::string> labels) {
  if (!labels.empty() && static_cast<int>(labels.size()) != n_) {
    throw ValidationError("node label count does not match node count");
  }
  labels_ = std::move(labels);
}

void Network::validate() const {
  if (n_ < 2) {
    throw ValidationError("network needs at least 2 nodes");
  }
  if (adjacency_.size() != static_cast<std::size_t>(n_) * n_) {
    throw ValidationError("adjacency size does not match node count");
  }
  for (int i = 0; i < n_; ++i) {
    if (y(i, i) != 0) {
      throw ValidationError("self-edge on node " + std::to_string(i));
    }
    for (int j = 0; j < n_; ++j) {
      const int v = y(i, j);
      if (v != 0 && v != 1) {
        throw ValidationError("adjacency entries must be 0 or 1");
      }
      if (!directed_ && v != y(j, i)) {
        throw ValidationError("undirected adjacency must be symmetric");
      }
    }
  }
  if (!labels_.empty() && static_cast<int>(labels_.size()) != n_) {
    throw ValidationError("node label count does not match node count");
  }
}

namespace {

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::optional<long long> parse_integer(const std::string& s) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    return std::nullopt;
  }
  return v;
}

struct EdgeLine {
  std::string u;
  std::string v;
  bool present;
  std::size_t line;
};

}  // namespace

Network load_edge_list(std::istream& in, bool directed, std::optional<int> n_hint) {
  std::vector<EdgeLine> lines;
  std::vector<std::string> header_labels;
  std::optional<int> header_nodes;

  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') {
      raw.pop_back();
    }
    const auto first = raw.find_first_not_of(" \t");
    if (first != std::string::npos && raw[first] == '#') {
      std::istringstream hs(raw.substr(first + 1));
      std::string key;
      hs >> key;
      if (key == "nodes:") {
        int count = 0;
        if (!(hs >> count) || count < 0) {
          throw ParseError("malformed nodes header", line_no);
        }
        header_nodes = count;
      } else if (key == "labels:") {
        std::string label;
        while (hs >> label) {
          header_labels.push_back(label);
        }
      }
      continue;
    }
    std::istringstream ls(strip_comment(raw));
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) {
      tokens.push_back(tok);
    }
    if (tokens.empty()) {
      continue;
    }
    if (tokens.size() != 2 && tokens.size() != 3) {
      throw ParseError("expected 'source target [weight]', got " +
                           std::to_string(tokens.size()) + " fields",
                       line_no);
    }
    bool present = true;
    if (tokens.size() == 3) {
      if (tokens[2] == "1") {
        present = true;
      } else if (tokens[2] == "0") {
        present = false;
      } else {
        throw ValidationError("line " + std::to_string(line_no) + ": edge weight must be 0 or 1, got '" +
                              tokens[2] + "'");
      }
    }
    if (tokens[0] == tokens[1]) {
      throw ValidationError("line " + std::to_string(line_no) + ": self-loop on node '" +
                            tokens[0] + "'");
    }
    lines.push_back({tokens[0], tokens[1], present, line_no});
  }

  bool integer_ids = header_labels.empty();
  long long min_id = std::numeric_limits<long long>::max();
  long long max_id = -1;
  if (integer_ids) {
    for (const auto& e : lines) {
      const auto a = parse_integer(e.u);
      const auto b = parse_integer(e.v);
      if (!a || !b || *a < 0 || *b < 0) {
        integer_ids = false;
        break;
      }
      min_id = std::min({min_id, *a, *b});
      max_id = std::max({max_id, *a, *b});
    }
  }

  std::unordered_map<std::string, int> ids;
  std::vector<std::string> labels;
  long long base = 1;
  int n = 0;
  if (integer_ids) {
    base = (max_id >= 0 && min_id == 0) ? 0 : 1;
    n = max_id >= 0 ? static_cast<int>(max_id - base + 1) : 0;
  } else {
    for (const auto& l : header_labels) {
      if (ids.emplace(l, static_cast<int>(labels.size())).second) {
        labels.push_back(l);
      }
    }
    for (const auto& e : lines) {
      for (const auto* s : {&e.u, &e.v}) {
        if (ids.emplace(*s, static_cast<int>(labels.size())).second) {
          labels.push_back(*s);
        }
      }
    }
    n = static_cast<int>(labels.size());
  }
  if (header_nodes) {
    n = std::max(n, *header_nodes);
  }
  if (n_hint) {
    n = std::max(n, *n_hint);
  }
  if (n < 2) {
    throw ValidationError("edge list describes fewer than 2 nodes");
  }
  if (!integer_ids && static_cast<int>(labels.size()) < n) {
    // Pad unnamed trailing nodes so the label vector stays aligned.
    for (int k = static_cast<int>(labels.size()); k < n; ++k) {
      labels.push_back("node" + std::to_string(k + 1));
    }
  }

  Network net(n, directed);
  for (const auto& e : lines) {
    int i = 0;
    int j = 0;
    if (integer_ids) {
      i = static_cast<int>(*parse_integer(e.u) - base);
      j = static_cast<int>(*parse_integer(e.v) - base);
    } else {
      i = ids.at(e.u);
      j = ids.at(e.v);
    }
    if (i == j) {
      throw ValidationError("line " + std::to_string(e.line) + ": self-loop on node '" + e.u +
                            "'");
    }
    if (e.present) {
      net.add_edge(i, j);
    }
  }
  if (!integer_ids) {
    net.set_node_labels(std::move(labels));
  }
  return net;
}

std::optional<bool> edge_list_directed_header(std::istream& in) {
  std::string raw;
  while (std::getline(in, raw)) {
    const auto first = raw.find_first_not_of(" \t");
    if (first == std::string::npos) {
      continue;
    }
    if (raw[first] != '#') {
      break;
    }
    std::istringstream hs(raw.substr(first + 1));
    std::string key;
    std::string value;
    hs >> key >> value;
    if (key == "directed:") {
      if (value == "true" || value == "1") {
        return true;
      }
      if (value == "false" || value == "0") {
        return false;
      }
    }
  }
  return std::nullopt;
}

Network load_edge_list_file(const std::string& path, bool directed, std::optional<int> n_hint) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open network file '" + path + "'");
  }
  return load_edge_list(in, directed, n_hint);
}

void write_edge_list(std::ostream& out, const Network& net) {
  const int n = net.size();
  const auto& labels = net.node_labels();
  out << "# nodes: " << n << "\n";
  out << "# directed: " << (net.directed() ? "true" : "false") << "\n";
  if (!labels.empty()) {
    out << "# labels:";
    for (const auto& l : labels) {
      out << ' ' << l;
    }
    out << "\n";
  }
  auto name = [&](int i) { return labels.empty() ? std::to_string(i + 1) : labels[i]; };
  for (int i = 0; i < n; ++i) {
    for (int j = net.directed() ? 0 : i + 1; j < n; ++j) {
      if (i != j && net.has_edge(i, j)) {
        out << name(i) << ' ' << name(j) << "\n";
      }
    }
  }
}

void write_edge_list_file(const std::string& path, const Network& net) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot write network file '" + path + "'");
  }
  write_edge_list(out, net);
  if (!out) {
    throw IoError("write failed for '" + path + "'");
  }
}

void write_adjacency_csv(std::ostream& out, const Network& net) {
  const int n = net.size();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      out << (j ? "," : "") << net.y(i, j);
    }
    out << "\n";
  }
}

double density(const Network& net) {
  return static_cast<double>(net.edge_count()) / static_cast<double>(net.dyad_count());
}

void validate_deltas(const std::vector<double>& deltas) {
  if (deltas.empty()) {
    throw ValidationError("at least one shrinkage strength is required");
  }
  if (!(deltas[0] > 0.0) || !std::isfinite(deltas[0])) {
    throw ValidationError("first shrinkage strength must be positive");
  }
  for (std::size_t h = 1; h < deltas.size(); ++h) {
    if (!(deltas[h] >= 1.0) || !std::isfinite(deltas[h])) {
      throw ValidationError("shrinkage strengths beyond the first must be >= 1");
    }
  }
}

std::pair<Network, SimTruth> simulate_network(int n, const std::vector<double>& deltas,
                                              double alpha, bool directed, std::uint64_t seed) {
  validate_deltas(deltas);
  if (n < 2) {
    throw ValidationError("network needs at least 2 nodes");
  }
  const int p = static_cast<int>(deltas.size());
  Eigen::VectorXd sd(p);
  double precision = 1.0;
  for (int l = 0; l < p; ++l) {
    precision *= deltas[l];
    sd[l] = 1.0 / std::sqrt(precision);
  }

  Rng rng(seed);
  SimTruth truth;
  truth.alpha = alpha;
  truth.deltas = deltas;
  truth.seed = seed;
  truth.positions.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < p; ++l) {
      truth.positions(i, l) = sd[l] * rng.normal();
    }
  }

  Network net(n, directed);
  for (int i = 0; i < n; ++i) {
    for (int j = directed ? 0 : i + 1; j < n; ++j) {
      if (i == j) {
        continue;
      }
      const double d2 = (truth.positions.row(i) - truth.positions.row(j)).squaredNorm();
      if (rng.uniform() < logistic(alpha - d2)) {
        net.add_edge(i, j);
      }
    }
  }
  return {std::move(net), std::move(truth)};
}

}  // namespace lspm
