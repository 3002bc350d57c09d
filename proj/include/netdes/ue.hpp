#pragma once

#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "netdes/network.hpp"

namespace netdes {

/// BPR volume-delay: t0 * (1 + alpha * (x / capacity)^beta).
double bpr_time(double t0, double alpha, double beta, double capacity, double flow);
double bpr_time(const Network::Edge& e, double flow);

/// Integral of bpr_time from 0 to `flow` (one Beckmann objective term).
double bpr_integral(double t0, double alpha, double beta, double capacity, double flow);
double bpr_integral(const Network::Edge& e, double flow);

/// Per-edge travel times at the given flows.
std::vector<double> edge_times(const Network& network, const std::vector<double>& flows);

/// Beckmann objective: sum of bpr_integral over edges.
double beckmann_objective(const Network& network, const std::vector<double>& flows);

/// Total travel time: sum of flow * bpr_time(flow) over edges (vehicle-minutes).
double total_travel_time(const Network& network, const std::vector<double>& flows);

/// Shortest-path tree from one origin under fixed positive edge times.
/// Unreachable nodes keep dist = +inf and pred_edge = -1. Label-setting with
/// a binary heap; equal-distance ties resolve toward the lower node index.
struct ShortestPathTree {
    std::vector<double> dist;
    std::vector<int> pred_edge;
};
ShortestPathTree shortest_paths(const Network& network, const std::vector<double>& travel_times,
                                int origin);

/// All-or-nothing loading of every OD demand onto its current shortest path.
/// `shortest_path_time` is the demand-weighted sum of OD distances (SPTT).
struct AonResult {
    std::vector<double> flows;
    double shortest_path_time = 0.0;
};
AonResult all_or_nothing(const Network& network, const DemandMatrix& demand,
                         const std::vector<double>& travel_times);

/// Destination-disaggregated loading, for conservation diagnostics only; the
/// solver never stores per-destination flows.
std::map<int, std::vector<double>> all_or_nothing_by_destination(
    const Network& network, const DemandMatrix& demand, const std::vector<double>& travel_times);

enum class DirectionRule { FrankWolfe, Conjugate, BiConjugate };

DirectionRule direction_rule_from_string(const std::string& name);
std::string to_string(DirectionRule rule);

struct UESolveConfig {
    double gap_target = 1e-6;
    int max_iterations = 10000;
    DirectionRule direction_rule = DirectionRule::BiConjugate;
    // Optional CSV trace: "iter,objective,relative_gap,step_size" per line.
    std::ostream* trace = nullptr;
};

struct UESolution {
    std::vector<double> flows;
    double total_travel_time = 0.0;
    double relative_gap = std::numeric_limits<double>::infinity();
    int iterations = 0;
    double objective_value = 0.0;  // Beckmann objective at the final flows
    bool converged = false;
};

/// Solves user equilibrium to the target relative gap,
/// gap = (TSTT - SPTT) / TSTT at the current flows. Line search is exact
/// (golden section on the Beckmann objective). Deterministic for fixed inputs.
UESolution solve_ue(const Network& network, const DemandMatrix& demand,
                    const UESolveConfig& config = {});

}  // namespace netdes
