#include "netdes/ue.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>

#include "netdes/errors.hpp"

namespace netdes {

namespace {

// pow() dominates the solver profile; BPR exponents are almost always small
// integers (beta = 4 in the classic datasets).
inline double pow_by_exponent(double base, double exponent) {
    if (exponent == std::floor(exponent) && exponent >= 0.0 && exponent <= 16.0) {
        double r = 1.0;
        int n = static_cast<int>(exponent);
        for (int i = 0; i < n; ++i) r *= base;
        return r;
    }
    return std::pow(base, exponent);
}

}  // namespace

double bpr_time(double t0, double alpha, double beta, double capacity, double flow) {
    return t0 * (1.0 + alpha * pow_by_exponent(flow / capacity, beta));
}

double bpr_time(const Network::Edge& e, double flow) {
    return bpr_time(e.free_flow_time, e.bpr_alpha, e.bpr_beta, e.capacity, flow);
}

double bpr_integral(double t0, double alpha, double beta, double capacity, double flow) {
    return t0 * flow +
           t0 * alpha * flow * pow_by_exponent(flow / capacity, beta) / (beta + 1.0);
}

double bpr_integral(const Network::Edge& e, double flow) {
    return bpr_integral(e.free_flow_time, e.bpr_alpha, e.bpr_beta, e.capacity, flow);
}

std::vector<double> edge_times(const Network& network, const std::vector<double>& flows) {
    std::vector<double> t(flows.size());
    for (int e = 0; e < network.edge_count(); ++e)
        t[static_cast<std::size_t>(e)] = bpr_time(network.edge(e), flows[static_cast<std::size_t>(e)]);
    return t;
}

double beckmann_objective(const Network& network, const std::vector<double>& flows) {
    double f = 0.0;
    for (int e = 0; e < network.edge_count(); ++e)
        f += bpr_integral(network.edge(e), flows[static_cast<std::size_t>(e)]);
    return f;
}

double total_travel_time(const Network& network, const std::vector<double>& flows) {
    if (static_cast<int>(flows.size()) != network.edge_count())
        throw ValidationError("flow vector length does not match edge count");
    double ttt = 0.0;
    for (int e = 0; e < network.edge_count(); ++e) {
        double x = flows[static_cast<std::size_t>(e)];
        if (x < 0.0) throw ValidationError("negative flow");
        ttt += x * bpr_time(network.edge(e), x);
    }
    return ttt;
}

ShortestPathTree shortest_paths(const Network& network, const std::vector<double>& travel_times,
                                int origin) {
    const auto n = static_cast<std::size_t>(network.node_count());
    ShortestPathTree tree;
    tree.dist.assign(n, std::numeric_limits<double>::infinity());
    tree.pred_edge.assign(n, -1);
    tree.dist[static_cast<std::size_t>(origin)] = 0.0;

    // (dist, node): pair ordering breaks distance ties toward lower indices.
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
    heap.emplace(0.0, origin);
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > tree.dist[static_cast<std::size_t>(u)]) continue;  // stale entry
        for (int e : network.out_edges(u)) {
            int v = network.edge(e).target;
            double nd = d + travel_times[static_cast<std::size_t>(e)];
            if (nd < tree.dist[static_cast<std::size_t>(v)]) {
                tree.dist[static_cast<std::size_t>(v)] = nd;
                tree.pred_edge[static_cast<std::size_t>(v)] = e;
                heap.emplace(nd, v);
            }
        }
    }
    return tree;
}

AonResult all_or_nothing(const Network& network, const DemandMatrix& demand,
                         const std::vector<double>& travel_times) {
    AonResult result;
    result.flows.assign(static_cast<std::size_t>(network.edge_count()), 0.0);

    // entries() is ordered by (origin, destination); reuse one tree per origin.
    ShortestPathTree tree;
    int current_origin = -1;
    for (const auto& [od, d] : demand.entries()) {
        if (d <= 0.0) continue;
        if (od.first != current_origin) {
            current_origin = od.first;
            tree = shortest_paths(network, travel_times, current_origin);
        }
        if (!std::isfinite(tree.dist[static_cast<std::size_t>(od.second)]))
            throw InfeasibleError("no path for OD pair (" + std::to_string(od.first) + ", " +
                                  std::to_string(od.second) + ") with positive demand");
        result.shortest_path_time += d * tree.dist[static_cast<std::size_t>(od.second)];
        for (int v = od.second; v != current_origin;) {
            int e = tree.pred_edge[static_cast<std::size_t>(v)];
            result.flows[static_cast<std::size_t>(e)] += d;
            v = network.edge(e).source;
        }
    }
    return result;
}

std::map<int, std::vector<double>> all_or_nothing_by_destination(
    const Network& network, const DemandMatrix& demand, const std::vector<double>& travel_times) {
    std::map<int, std::vector<double>> by_dest;
    ShortestPathTree tree;
    int current_origin = -1;
    for (const auto& [od, d] : demand.entries()) {
        if (d <= 0.0) continue;
        if (od.first != current_origin) {
            current_origin = od.first;
            tree = shortest_paths(network, travel_times, current_origin);
        }
        if (!std::isfinite(tree.dist[static_cast<std::size_t>(od.second)]))
            throw InfeasibleError("no path for OD pair (" + std::to_string(od.first) + ", " +
                                  std::to_string(od.second) + ") with positive demand");
        auto [it, inserted] = by_dest.try_emplace(od.second);
        if (inserted) it->second.assign(static_cast<std::size_t>(network.edge_count()), 0.0);
        for (int v = od.second; v != current_origin;) {
            int e = tree.pred_edge[static_cast<std::size_t>(v)];
            it->second[static_cast<std::size_t>(e)] += d;
            v = network.edge(e).source;
        }
    }
    return by_dest;
}

DirectionRule direction_rule_from_string(const std::string& name) {
    if (name == "fw" || name == "frank-wolfe") return DirectionRule::FrankWolfe;
    if (name == "cfw" || name == "conjugate") return DirectionRule::Conjugate;
    if (name == "bfw" || name == "bi-conjugate") return DirectionRule::BiConjugate;
    throw ConfigError("unknown direction rule: " + name);
}

std::string to_string(DirectionRule rule) {
    switch (rule) {
        case DirectionRule::FrankWolfe: return "fw";
        case DirectionRule::Conjugate: return "cfw";
        case DirectionRule::BiConjugate: return "bfw";
    }
    return "?";
}

namespace {

// Diagonal of the Beckmann Hessian: d/dx bpr_time(x).
std::vector<double> time_derivatives(const Network& network, const std::vector<double>& flows) {
    std::vector<double> h(flows.size(), 0.0);
    for (int e = 0; e < network.edge_count(); ++e) {
        const auto& ed = network.edge(e);
        double x = flows[static_cast<std::size_t>(e)];
        if (ed.bpr_beta == 1.0) {
            h[static_cast<std::size_t>(e)] = ed.free_flow_time * ed.bpr_alpha / ed.capacity;
        } else {
            h[static_cast<std::size_t>(e)] =
                ed.free_flow_time * ed.bpr_alpha * ed.bpr_beta *
                pow_by_exponent(x / ed.capacity, ed.bpr_beta - 1.0) / ed.capacity;
        }
    }
    return h;
}

// Exact minimization of the Beckmann objective along x + lam * (s - x),
// golden section on [0, 1] to interval width 1e-10.
double line_search(const Network& network, const std::vector<double>& x,
                   const std::vector<double>& s) {
    auto objective = [&](double lam) {
        double f = 0.0;
        for (int e = 0; e < network.edge_count(); ++e) {
            auto i = static_cast<std::size_t>(e);
            double z = x[i] + lam * (s[i] - x[i]);
            f += bpr_integral(network.edge(e), z);
        }
        return f;
    };
    constexpr double kGolden = 0.6180339887498949;
    double lo = 0.0, hi = 1.0;
    double c = hi - kGolden * (hi - lo);
    double d = lo + kGolden * (hi - lo);
    double fc = objective(c), fd = objective(d);
    while (hi - lo > 1e-10) {
        if (fc < fd) {
            hi = d; d = c; fd = fc;
            c = hi - kGolden * (hi - lo);
            fc = objective(c);
        } else {
            lo = c; c = d; fc = fd;
            d = lo + kGolden * (hi - lo);
            fd = objective(d);
        }
    }
    return 0.5 * (lo + hi);
}

// Conjugate-direction coefficient (Mitradjieva-Lindberg CFW): the combined
// point s = alpha * s_prev + (1 - alpha) * y keeps (s - x) H-conjugate to
// (s_prev - x). Clamped to keep s a convex combination.
double conjugate_alpha(const std::vector<double>& hessian, const std::vector<double>& x,
                       const std::vector<double>& s_prev, const std::vector<double>& y) {
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) {
        double a = s_prev[e] - x[e];
        double b = y[e] - x[e];
        num += hessian[e] * a * b;
        den += hessian[e] * a * (b - a);
    }
    if (!(std::abs(den) > 0.0)) return 0.0;
    double alpha = num / den;
    if (!std::isfinite(alpha) || alpha < 0.0) return 0.0;
    return std::min(alpha, 0.999);
}

}  // namespace

UESolution solve_ue(const Network& network, const DemandMatrix& demand,
                    const UESolveConfig& config) {
    if (!(config.gap_target > 0.0)) throw ConfigError("gap_target must be positive");
    const auto m = static_cast<std::size_t>(network.edge_count());

    UESolution sol;
    sol.flows.assign(m, 0.0);
    if (demand.total_demand() <= 0.0) {
        sol.relative_gap = 0.0;
        sol.converged = true;
        return sol;
    }

    std::vector<double> free_flow(m);
    for (int e = 0; e < network.edge_count(); ++e)
        free_flow[static_cast<std::size_t>(e)] = network.edge(e).free_flow_time;
    std::vector<double>& x = sol.flows;
    x = all_or_nothing(network, demand, free_flow).flows;

    std::vector<double> s_prev, s_prev2;
    double last_step = 1.0;
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        sol.iterations = iter;
        std::vector<double> t = edge_times(network, x);
        AonResult aon = all_or_nothing(network, demand, t);
        const std::vector<double>& y = aon.flows;

        double tstt = 0.0;
        for (std::size_t e = 0; e < m; ++e) tstt += x[e] * t[e];
        double gap = tstt > 0.0 ? (tstt - aon.shortest_path_time) / tstt : 0.0;
        sol.relative_gap = gap;
        if (!std::isfinite(tstt) || !std::isfinite(gap))
            throw NumericError("non-finite objective in UE solve; inputs look corrupted");
        if (config.trace)
            (*config.trace) << iter << ',' << beckmann_objective(network, x) << ',' << gap << ','
                            << last_step << '\n';
        if (gap <= config.gap_target) {
            sol.converged = true;
            break;
        }

        // Direction point: AON vertex, optionally mixed with previous
        // direction points for (bi-)conjugate rules.
        std::vector<double> s = y;
        bool mixed = false;
        if (config.direction_rule != DirectionRule::FrankWolfe && !s_prev.empty()) {
            std::vector<double> hessian = time_derivatives(network, x);
            bool used_biconjugate = false;
            if (config.direction_rule == DirectionRule::BiConjugate && !s_prev2.empty()) {
                // Solve for (beta1, beta2) making the new direction H-conjugate
                // to both previous direction points; beta0 = 1 - beta1 - beta2.
                double Buu = 0, Buv = 0, Bvv = 0, Bub = 0, Bvb = 0;
                for (std::size_t e = 0; e < m; ++e) {
                    double u = s_prev[e] - x[e];
                    double v = s_prev2[e] - x[e];
                    double b = y[e] - x[e];
                    Buu += hessian[e] * u * u;
                    Buv += hessian[e] * u * v;
                    Bvv += hessian[e] * v * v;
                    Bub += hessian[e] * u * b;
                    Bvb += hessian[e] * v * b;
                }
                double a11 = Buu - Bub, a12 = Buv - Bub;
                double a21 = Buv - Bvb, a22 = Bvv - Bvb;
                double det = a11 * a22 - a12 * a21;
                if (std::isfinite(det) && std::abs(det) > 1e-30) {
                    double beta1 = (-Bub * a22 + Bvb * a12) / det;
                    double beta2 = (-Bvb * a11 + Bub * a21) / det;
                    double beta0 = 1.0 - beta1 - beta2;
                    // Keep s inside the feasible polytope: all coefficients
                    // must form a convex combination.
                    if (std::isfinite(beta1) && std::isfinite(beta2) && beta0 >= 1e-3 &&
                        beta1 >= 0.0 && beta2 >= 0.0) {
                        for (std::size_t e = 0; e < m; ++e)
                            s[e] = beta0 * y[e] + beta1 * s_prev[e] + beta2 * s_prev2[e];
                        used_biconjugate = true;
                        mixed = true;
                    }
                }
            }
            if (!used_biconjugate) {
                double alpha = conjugate_alpha(hessian, x, s_prev, y);
                if (alpha > 0.0) {
                    for (std::size_t e = 0; e < m; ++e)
                        s[e] = alpha * s_prev[e] + (1.0 - alpha) * y[e];
                    mixed = true;
                }
            }
        }
        if (mixed) {
            // The mixed point must keep a healthy share of the FW descent
            // slope, or conjugate history has gone stale near the optimum;
            // restart from the plain direction in that case.
            double slope_fw = 0.0, slope_mixed = 0.0;
            for (std::size_t e = 0; e < m; ++e) {
                slope_fw += t[e] * (y[e] - x[e]);
                slope_mixed += t[e] * (s[e] - x[e]);
            }
            if (!(slope_mixed <= 0.01 * slope_fw)) {  // both are <= 0
                s = y;
                s_prev.clear();
                s_prev2.clear();
            }
        }

        double lam = line_search(network, x, s);
        last_step = lam;
        for (std::size_t e = 0; e < m; ++e) x[e] = std::max(0.0, x[e] + lam * (s[e] - x[e]));

        s_prev2 = std::move(s_prev);
        s_prev = std::move(s);
    }

    if (!sol.converged) {
        // Report the gap of the flows actually returned, not of the last
        // iterate that was still improved afterwards.
        std::vector<double> t = edge_times(network, x);
        AonResult aon = all_or_nothing(network, demand, t);
        double tstt = 0.0;
        for (std::size_t e = 0; e < m; ++e) tstt += x[e] * t[e];
        sol.relative_gap = tstt > 0.0 ? (tstt - aon.shortest_path_time) / tstt : 0.0;
        sol.converged = sol.relative_gap <= config.gap_target;
    }
    sol.total_travel_time = total_travel_time(network, x);
    sol.objective_value = beckmann_objective(network, x);
    return sol;
}

}  // namespace netdes
