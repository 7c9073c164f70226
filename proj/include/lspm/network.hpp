#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lspm {

// Binary network without self-edges. Undirected networks keep a symmetric
// adjacency matrix.
class Network {
 public:
  Network() = default;
  Network(int n, bool directed);

  int size() const noexcept { return n_; }
  bool directed() const noexcept { return directed_; }

  bool has_edge(int i, int j) const { return adjacency_[index(i, j)] != 0; }
  int y(int i, int j) const { return adjacency_[index(i, j)]; }

  // For undirected networks also sets (j, i).
  void add_edge(int i, int j);
  void remove_edge(int i, int j);

  // Number of edges: ordered pairs if directed, unordered otherwise.
  std::int64_t edge_count() const;
  // Number of dyads the likelihood runs over.
  std::int64_t dyad_count() const;

  const std::vector<std::string>& node_labels() const noexcept { return labels_; }
  void set_node_labels(std::vector<std::string> labels);

  // Throws ValidationError if any invariant fails.
  void validate() const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::size_t index(int i, int j) const;

  int n_ = 0;
  bool directed_ = false;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::string> labels_;
};

struct SimTruth {
  double alpha = 0.0;
  std::vector<double> deltas;
  Eigen::MatrixXd positions;  // n x p*
  std::uint64_t seed = 0;
};

// Whitespace-separated "u v [w]" lines, '#' comments. Identifiers that are all
// integers are read as 1-based (0-based if any id is 0); otherwise each
// distinct string gets the next index in first-seen order. A
// "# labels: a b c" header pre-registers string labels and a "# nodes: N"
// header acts like n_hint.
Network load_edge_list(std::istream& in, bool directed, std::optional<int> n_hint = std::nullopt);
Network load_edge_list_file(const std::string& path, bool directed,
                            std::optional<int> n_hint = std::nullopt);

// Value of a "# directed: true|false" line in the leading comment block, if any.
std::optional<bool> edge_list_directed_header(std::istream& in);

// Inverse of load_edge_list: reloading the output reproduces the network.
void write_edge_list(std::ostream& out, const Network& net);
void write_edge_list_file(const std::string& path, const Network& net);

// Dense 0/1 matrix, comma separated, no header.
void write_adjacency_csv(std::ostream& out, const Network& net);

double density(const Network& net);

// Draws latent positions with per-dimension variance 1/prod(deltas[0..l]) and
// then one Bernoulli trial per dyad.
std::pair<Network, SimTruth> simulate_network(int n, const std::vector<double>& deltas,
                                              double alpha, bool directed, std::uint64_t seed);

void validate_deltas(const std::vector<double>& deltas);

}  // namespace lspm
