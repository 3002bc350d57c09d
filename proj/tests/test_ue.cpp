#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "netdes/errors.hpp"
#include "netdes/ue.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace netdes;

TEST_CASE("bpr_time closed form") {
    CHECK(bpr_time(10, 0.15, 4, 100, 0) == doctest::Approx(10.0));
    CHECK(bpr_time(10, 0.15, 4, 100, 100) == doctest::Approx(11.5));
    CHECK(bpr_time(10, 0.15, 4, 100, 200) == doctest::Approx(34.0));
    // strictly increasing for alpha > 0, beta >= 1
    CHECK(bpr_time(10, 0.15, 4, 100, 50) < bpr_time(10, 0.15, 4, 100, 51));
}

TEST_CASE("bpr_integral agrees with quadrature and differentiates to bpr_time") {
    CHECK(bpr_integral(10, 0.15, 4, 100, 0) == doctest::Approx(0.0));
    CHECK(bpr_integral(1, 0.0, 2, 50, 7) == doctest::Approx(7.0));
    // hand: 10*100 + 10*0.15*100^5/(100^4*5) = 1000 + 30
    CHECK(bpr_integral(10, 0.15, 4, 100, 100) == doctest::Approx(1030.0));

    auto f = [](double x) { return bpr_time(10, 0.15, 4, 100, x); };
    CHECK(bpr_integral(10, 0.15, 4, 100, 137.0) ==
          doctest::Approx(oracles::simpson(f, 0.0, 137.0)).epsilon(1e-9));

    // central difference of the integral reproduces the time
    for (double x : {0.5, 13.0, 100.0, 421.0}) {
        double h = 1e-4 * std::max(1.0, x);
        double fd = (bpr_integral(10, 0.15, 4, 100, x + h) -
                     bpr_integral(10, 0.15, 4, 100, x - h)) /
                    (2 * h);
        CHECK(fd == doctest::Approx(bpr_time(10, 0.15, 4, 100, x)).epsilon(1e-6));
    }
}

TEST_CASE("shortest paths on toy graphs") {
    SUBCASE("single edge") {
        Network net(2, {testutil::edge(0, 1, 10, 10)});
        auto tree = shortest_paths(net, {10.0}, 0);
        CHECK(tree.dist[1] == doctest::Approx(10.0));
        CHECK(tree.pred_edge[1] == 0);
    }
    SUBCASE("triangle picks the two-hop path") {
        Network net(3, {testutil::edge(0, 1, 10, 5), testutil::edge(1, 2, 10, 5),
                        testutil::edge(0, 2, 10, 11)});
        auto tree = shortest_paths(net, {5.0, 5.0, 11.0}, 0);
        CHECK(tree.dist[2] == doctest::Approx(10.0));
        CHECK(tree.pred_edge[2] == 1);
    }
    SUBCASE("unreachable flagged") {
        Network net(3, {testutil::edge(0, 1, 10, 5)});
        auto tree = shortest_paths(net, {5.0}, 0);
        CHECK(!std::isfinite(tree.dist[2]));
        CHECK(tree.pred_edge[2] == -1);
    }
}

TEST_CASE("Sioux Falls shortest paths match Bellman-Ford from every origin") {
    if (!std::filesystem::exists(testutil::data_path("SiouxFalls_net.tntp"))) return;
    Network net = parse_network_file(testutil::data_path("SiouxFalls_net.tntp"));
    std::vector<double> t(static_cast<std::size_t>(net.edge_count()));
    for (int e = 0; e < net.edge_count(); ++e) t[static_cast<std::size_t>(e)] = net.edge(e).free_flow_time;
    for (int origin = 0; origin < net.node_count(); ++origin) {
        auto tree = shortest_paths(net, t, origin);
        auto ref = oracles::bellman_ford(net, t, origin);
        for (int v = 0; v < net.node_count(); ++v)
            CHECK(tree.dist[static_cast<std::size_t>(v)] ==
                  doctest::Approx(ref[static_cast<std::size_t>(v)]).epsilon(1e-12));
    }
}

TEST_CASE("all-or-nothing loading") {
    SUBCASE("single edge takes the whole demand") {
        Network net(2, {testutil::edge(0, 1, 10, 1)});
        DemandMatrix dm(2);
        dm.set(0, 1, 5.0);
        auto aon = all_or_nothing(net, dm, {1.0});
        CHECK(aon.flows[0] == doctest::Approx(5.0));
        CHECK(aon.shortest_path_time == doctest::Approx(5.0));
    }
    SUBCASE("strictly shorter of two disjoint routes takes all") {
        auto tr = testutil::two_route_instance();
        auto aon = all_or_nothing(tr.net, tr.demand, {1.0, 1.0, 1.0});
        CHECK(aon.flows[static_cast<std::size_t>(tr.direct_edge)] == doctest::Approx(3.0));
        CHECK(aon.flows[static_cast<std::size_t>(tr.feeder_edge)] == doctest::Approx(0.0));
    }
    SUBCASE("unreachable demand raises") {
        Network net(3, {testutil::edge(0, 1, 10, 1)});
        DemandMatrix dm(3);
        dm.set(0, 2, 1.0);
        CHECK_THROWS_AS(all_or_nothing(net, dm, {1.0}), InfeasibleError);
    }
    SUBCASE("Sioux Falls: total loaded flow conserves total demand") {
        if (!std::filesystem::exists(testutil::data_path("SiouxFalls_net.tntp"))) return;
        Network net = parse_network_file(testutil::data_path("SiouxFalls_net.tntp"));
        DemandMatrix dm = parse_demand_file(testutil::data_path("SiouxFalls_trips.tntp"), net);
        std::vector<double> t(static_cast<std::size_t>(net.edge_count()));
        for (int e = 0; e < net.edge_count(); ++e)
            t[static_cast<std::size_t>(e)] = net.edge(e).free_flow_time;
        auto aon = all_or_nothing(net, dm, t);
        // Every unit of demand leaves its origin exactly once.
        double out_minus_in = 0.0;
        for (int v = 0; v < net.node_count(); ++v) {
            double net_out = 0.0;
            for (int e : net.out_edges(v)) net_out += aon.flows[static_cast<std::size_t>(e)];
            for (int e : net.in_edges(v)) net_out -= aon.flows[static_cast<std::size_t>(e)];
            out_minus_in += std::abs(net_out);
        }
        double expected = 0.0;
        for (int v = 0; v < net.node_count(); ++v) {
            double supply = 0.0;
            for (const auto& [od, d] : dm.entries()) {
                if (od.first == v) supply += d;
                if (od.second == v) supply -= d;
            }
            expected += std::abs(supply);
        }
        CHECK(out_minus_in == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("destination-disaggregated loading satisfies per-destination conservation") {
    auto d = testutil::diamond_instance();
    std::vector<double> t(static_cast<std::size_t>(d.net.edge_count()));
    for (int e = 0; e < d.net.edge_count(); ++e)
        t[static_cast<std::size_t>(e)] = d.net.edge(e).free_flow_time;
    auto by_dest = all_or_nothing_by_destination(d.net, d.demand, t);
    std::vector<double> total(static_cast<std::size_t>(d.net.edge_count()), 0.0);
    for (const auto& [dest, flows] : by_dest) {
        for (int i = 0; i < d.net.node_count(); ++i) {
            double balance = 0.0;
            for (int e : d.net.out_edges(i)) balance += flows[static_cast<std::size_t>(e)];
            for (int e : d.net.in_edges(i)) balance -= flows[static_cast<std::size_t>(e)];
            double expected = i == dest ? -([&] {
                double s = 0.0;
                for (const auto& [od, dem] : d.demand.entries())
                    if (od.second == dest) s += dem;
                return s;
            }()) : d.demand.at(i, dest);
            CHECK(balance == doctest::Approx(expected).epsilon(1e-9));
        }
        for (std::size_t e = 0; e < flows.size(); ++e) {
            CHECK(flows[e] >= 0.0);
            total[e] += flows[e];
        }
    }
    // Aggregation over destinations reproduces the plain loading.
    auto aggregate = all_or_nothing(d.net, d.demand, t);
    for (std::size_t e = 0; e < total.size(); ++e)
        CHECK(total[e] == doctest::Approx(aggregate.flows[e]).epsilon(1e-12));
}

TEST_CASE("two-route analytic equilibrium") {
    auto tr = testutil::two_route_instance();
    for (auto rule : {DirectionRule::FrankWolfe, DirectionRule::Conjugate,
                      DirectionRule::BiConjugate}) {
        UESolveConfig cfg;
        cfg.gap_target = 1e-10;
        cfg.max_iterations = 2000;
        cfg.direction_rule = rule;
        UESolution sol = solve_ue(tr.net, tr.demand, cfg);
        CAPTURE(to_string(rule));
        CHECK(sol.converged);
        CHECK(sol.flows[static_cast<std::size_t>(tr.direct_edge)] == doctest::Approx(2.0).epsilon(1e-6));
        CHECK(sol.flows[static_cast<std::size_t>(tr.second_edge)] == doctest::Approx(1.0).epsilon(1e-6));
        // Both used routes at common time 3.
        double t_direct = bpr_time(tr.net.edge(tr.direct_edge), sol.flows[0]);
        double t_second = bpr_time(tr.net.edge(tr.feeder_edge), sol.flows[1]) +
                          bpr_time(tr.net.edge(tr.second_edge), sol.flows[2]);
        CHECK(t_direct == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(t_second == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(sol.total_travel_time == doctest::Approx(9.0).epsilon(1e-6));
        // Exact equilibrium flows give zero gap.
        CHECK(sol.relative_gap < 1e-10);
    }
}

TEST_CASE("zero total demand short-circuits") {
    auto d = testutil::diamond_instance();
    DemandMatrix empty(d.net.node_count());
    UESolution sol = solve_ue(d.net, empty);
    CHECK(sol.converged);
    CHECK(sol.relative_gap == 0.0);
    CHECK(sol.objective_value == 0.0);
    CHECK(sol.total_travel_time == 0.0);
    for (double f : sol.flows) CHECK(f == 0.0);
}

TEST_CASE("objective decreases monotonically under exact line search") {
    auto d = testutil::diamond_instance();
    std::ostringstream trace;
    UESolveConfig cfg;
    cfg.gap_target = 1e-9;
    cfg.trace = &trace;
    UESolution sol = solve_ue(d.net, d.demand, cfg);
    CHECK(sol.converged);

    // Parse objective column of the CSV trace.
    std::istringstream lines(trace.str());
    std::string line;
    double prev = std::numeric_limits<double>::infinity();
    int rows = 0;
    while (std::getline(lines, line)) {
        auto first_comma = line.find(',');
        auto second_comma = line.find(',', first_comma + 1);
        double objective = std::stod(line.substr(first_comma + 1, second_comma - first_comma - 1));
        CHECK(objective <= prev * (1 + 1e-12));
        prev = objective;
        ++rows;
    }
    CHECK(rows == sol.iterations);
}

TEST_CASE("iterates conserve aggregate flow balance") {
    // Aggregate node balance (sum of Eq. 2 over destinations) holds at the
    // returned iterate of every rule.
    auto d = testutil::diamond_instance();
    for (auto rule : {DirectionRule::FrankWolfe, DirectionRule::Conjugate,
                      DirectionRule::BiConjugate}) {
        UESolveConfig cfg;
        cfg.direction_rule = rule;
        cfg.gap_target = 1e-8;
        UESolution sol = solve_ue(d.net, d.demand, cfg);
        for (int v = 0; v < d.net.node_count(); ++v) {
            double balance = 0.0;
            for (int e : d.net.out_edges(v)) balance += sol.flows[static_cast<std::size_t>(e)];
            for (int e : d.net.in_edges(v)) balance -= sol.flows[static_cast<std::size_t>(e)];
            double supply = 0.0;
            for (const auto& [od, dem] : d.demand.entries()) {
                if (od.first == v) supply += dem;
                if (od.second == v) supply -= dem;
            }
            CHECK(balance == doctest::Approx(supply).epsilon(1e-6));
        }
        for (double f : sol.flows) CHECK(f >= 0.0);
    }
}

TEST_CASE("solver is deterministic") {
    auto d = testutil::diamond_instance();
    UESolveConfig cfg;
    cfg.gap_target = 1e-7;
    UESolution a = solve_ue(d.net, d.demand, cfg);
    UESolution b = solve_ue(d.net, d.demand, cfg);
    CHECK(a.iterations == b.iterations);
    REQUIRE(a.flows.size() == b.flows.size());
    for (std::size_t e = 0; e < a.flows.size(); ++e) CHECK(a.flows[e] == b.flows[e]);
}

TEST_CASE("total travel time formula") {
    Network net(2, {testutil::edge(0, 1, 100, 10, 0.15, 4)});
    CHECK(total_travel_time(net, {0.0}) == 0.0);
    CHECK(total_travel_time(net, {100.0}) == doctest::Approx(1150.0));
    CHECK_THROWS_AS(total_travel_time(net, {-1.0}), ValidationError);
    CHECK_THROWS_AS(total_travel_time(net, {1.0, 2.0}), ValidationError);
}

TEST_CASE("Sioux Falls UE: FW family converges and MSA agrees" * doctest::timeout(300)) {
    if (!std::filesystem::exists(testutil::data_path("SiouxFalls_net.tntp"))) return;
    Network net = parse_network_file(testutil::data_path("SiouxFalls_net.tntp"));
    DemandMatrix dm = parse_demand_file(testutil::data_path("SiouxFalls_trips.tntp"), net);

    UESolveConfig cfg;
    cfg.gap_target = 1e-6;
    cfg.direction_rule = DirectionRule::BiConjugate;
    UESolution bfw = solve_ue(net, dm, cfg);
    CHECK(bfw.converged);
    CHECK(bfw.relative_gap <= 1e-6);

    // Independent method-of-successive-averages cross-check (test oracle).
    auto msa = oracles::msa_equilibrium(net, dm, 1e-6, 400000);
    CAPTURE(msa.iterations);
    CAPTURE(msa.relative_gap);
    CHECK(std::abs(msa.tstt - bfw.total_travel_time) / bfw.total_travel_time < 5e-4);

    // Reference magnitude for the canonical instance.
    CHECK(bfw.total_travel_time > 7.3e6);
    CHECK(bfw.total_travel_time < 7.6e6);

    // stored TTT is consistent with its own flows
    CHECK(total_travel_time(net, bfw.flows) ==
          doctest::Approx(bfw.total_travel_time).epsilon(1e-9));
}
