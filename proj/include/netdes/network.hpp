#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace netdes {

/// Directed road graph with BPR link parameters.
///
/// Node ids are dense 0-based indices; the 1-based labels used by the text
/// format are kept in `node_labels`. Edges are stored in file order.
class Network {
public:
    struct Edge {
        int source = 0;
        int target = 0;
        double capacity = 0.0;        // pi0, vehicles/hour
        double free_flow_time = 0.0;  // t0, minutes
        double bpr_alpha = 0.0;
        double bpr_beta = 1.0;
        // Parsed and retained for round-trip fidelity; unused by the solver.
        double length = 0.0;
        double speed = 0.0;
        double toll = 0.0;
        int link_type = 1;
    };

    Network() = default;
    // Validates the edge list: no self-loops, no duplicate directed edges,
    // positive capacities and free-flow times, endpoints within range.
    Network(int node_count, std::vector<Edge> edges);

    int node_count() const { return node_count_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }
    const std::vector<Edge>& edges() const { return edges_; }
    const Edge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

    /// Position of directed edge (source, target), if present.
    std::optional<int> edge_index(int source, int target) const;
    /// Index of edge (target, source) for edge e, if the network has it.
    std::optional<int> opposite(int e) const;

    /// Out-edges of a node as indices into edges().
    const std::vector<int>& out_edges(int node) const { return out_edges_[static_cast<std::size_t>(node)]; }
    const std::vector<int>& in_edges(int node) const { return in_edges_[static_cast<std::size_t>(node)]; }

    /// 1-based file label of each node, index-aligned.
    const std::vector<int>& node_labels() const { return node_labels_; }

    /// Returns a copy with edge capacities replaced (same topology).
    Network with_capacities(const std::vector<double>& capacities) const;

    /// Hex digest of the topology (node count + directed edge list). Stable
    /// under capacity changes; used to bind surrogate models to a network.
    std::string topology_fingerprint() const;

    // Retained TNTP metadata (not semantically meaningful to the solver).
    int zones = 0;
    int first_thru_node = 1;
    std::string name;

    bool operator==(const Network& other) const;

private:
    void build_index();

    int node_count_ = 0;
    std::vector<Edge> edges_;
    std::vector<int> node_labels_;
    std::vector<std::vector<int>> out_edges_;
    std::vector<std::vector<int>> in_edges_;
    std::map<std::pair<int, int>, int> edge_lookup_;
    std::vector<int> opposite_;  // -1 when the reverse edge does not exist
};

/// Origin-destination demand. Declared zero entries are preserved: they count
/// toward the declared-pair total and participate in perturbation.
class DemandMatrix {
public:
    DemandMatrix() = default;
    explicit DemandMatrix(int node_count) : node_count_(node_count) {}

    void set(int origin, int destination, double demand);
    double at(int origin, int destination) const;

    /// Declared (origin, destination) -> demand, ordered by (origin, destination).
    const std::map<std::pair<int, int>, double>& entries() const { return entries_; }
    int declared_pair_count() const { return static_cast<int>(entries_.size()); }
    int positive_pair_count() const;
    double total_demand() const;
    int node_count() const { return node_count_; }

    /// D = { s : sum_i d_is > 0 }.
    std::vector<int> destinations() const;
    /// Origins with positive outgoing demand, ascending.
    std::vector<int> origins() const;

    bool operator==(const DemandMatrix& other) const { return entries_ == other.entries_; }

private:
    int node_count_ = 0;
    std::map<std::pair<int, int>, double> entries_;
};

/// Parses a TNTP-style network file. `~` starts a comment; metadata lines are
/// `<TAG> value` up to `<END OF METADATA>`; each link row ends with `;`.
Network parse_network(std::istream& in, const std::string& name = "");
Network parse_network_file(const std::string& path);

/// Parses a TNTP-style trips file against an already parsed network.
DemandMatrix parse_demand(std::istream& in, const Network& network);
DemandMatrix parse_demand_file(const std::string& path, const Network& network);

/// Writes the network back out in the same text format (see round-trip tests).
void serialize_network(const Network& network, std::ostream& out);
void serialize_demand(const DemandMatrix& demand, std::ostream& out);

/// Every positive-demand OD pair with no directed path, empty when all
/// demand is routable.
std::vector<std::pair<int, int>> validate_connectivity(const Network& network,
                                                       const DemandMatrix& demand);

}  // namespace netdes
