#include "netdes/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "netdes/errors.hpp"
#include "netdes/sha256.hpp"

namespace netdes {

Network::Network(int node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
    if (node_count_ < 0) throw ValidationError("negative node count");
    node_labels_.resize(static_cast<std::size_t>(node_count_));
    for (int i = 0; i < node_count_; ++i) node_labels_[static_cast<std::size_t>(i)] = i + 1;
    build_index();
}

void Network::build_index() {
    out_edges_.assign(static_cast<std::size_t>(node_count_), {});
    in_edges_.assign(static_cast<std::size_t>(node_count_), {});
    edge_lookup_.clear();
    for (int e = 0; e < edge_count(); ++e) {
        const Edge& ed = edges_[static_cast<std::size_t>(e)];
        if (ed.source < 0 || ed.source >= node_count_ || ed.target < 0 || ed.target >= node_count_)
            throw StructureError("edge endpoint out of node range");
        if (ed.source == ed.target) throw ValidationError("self-loop edge");
        if (!(ed.capacity > 0.0)) throw ValidationError("nonpositive edge capacity");
        if (!(ed.free_flow_time > 0.0)) throw ValidationError("nonpositive free-flow time");
        if (ed.bpr_alpha < 0.0) throw ValidationError("negative BPR alpha");
        if (ed.bpr_beta < 1.0) throw ValidationError("BPR beta below 1");
        auto key = std::make_pair(ed.source, ed.target);
        if (!edge_lookup_.emplace(key, e).second)
            throw ValidationError("duplicate directed edge " + std::to_string(ed.source) + "->" +
                                  std::to_string(ed.target));
        out_edges_[static_cast<std::size_t>(ed.source)].push_back(e);
        in_edges_[static_cast<std::size_t>(ed.target)].push_back(e);
    }
    opposite_.assign(edges_.size(), -1);
    for (int e = 0; e < edge_count(); ++e) {
        const Edge& ed = edges_[static_cast<std::size_t>(e)];
        auto it = edge_lookup_.find({ed.target, ed.source});
        if (it != edge_lookup_.end()) opposite_[static_cast<std::size_t>(e)] = it->second;
    }
}

std::optional<int> Network::edge_index(int source, int target) const {
    auto it = edge_lookup_.find({source, target});
    if (it == edge_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> Network::opposite(int e) const {
    int o = opposite_[static_cast<std::size_t>(e)];
    if (o < 0) return std::nullopt;
    return o;
}

Network Network::with_capacities(const std::vector<double>& capacities) const {
    if (capacities.size() != edges_.size())
        throw ValidationError("capacity vector length does not match edge count");
    Network copy = *this;
    for (std::size_t e = 0; e < capacities.size(); ++e) {
        if (!(capacities[e] > 0.0)) throw ValidationError("nonpositive capacity in replacement");
        copy.edges_[e].capacity = capacities[e];
    }
    return copy;
}

std::string Network::topology_fingerprint() const {
    std::ostringstream os;
    os << node_count_ << ':';
    for (const Edge& e : edges_) os << e.source << '>' << e.target << ';';
    return Sha256::of_string(os.str());
}

bool Network::operator==(const Network& other) const {
    if (node_count_ != other.node_count_ || edges_.size() != other.edges_.size()) return false;
    if (zones != other.zones || first_thru_node != other.first_thru_node) return false;
    if (node_labels_ != other.node_labels_) return false;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& a = edges_[i];
        const Edge& b = other.edges_[i];
        if (a.source != b.source || a.target != b.target || a.capacity != b.capacity ||
            a.free_flow_time != b.free_flow_time || a.bpr_alpha != b.bpr_alpha ||
            a.bpr_beta != b.bpr_beta || a.length != b.length || a.speed != b.speed ||
            a.toll != b.toll || a.link_type != b.link_type)
            return false;
    }
    return true;
}

void DemandMatrix::set(int origin, int destination, double demand) {
    if (origin < 0 || origin >= node_count_ || destination < 0 || destination >= node_count_)
        throw StructureError("OD pair outside node range");
    if (demand < 0.0) throw ValidationError("negative demand");
    if (origin == destination && demand > 0.0)
        throw ValidationError("positive demand on a diagonal OD pair");
    entries_[{origin, destination}] = demand;
}

double DemandMatrix::at(int origin, int destination) const {
    auto it = entries_.find({origin, destination});
    return it == entries_.end() ? 0.0 : it->second;
}

int DemandMatrix::positive_pair_count() const {
    int n = 0;
    for (const auto& [od, d] : entries_)
        if (d > 0.0) ++n;
    return n;
}

double DemandMatrix::total_demand() const {
    double t = 0.0;
    for (const auto& [od, d] : entries_) t += d;
    return t;
}

std::vector<int> DemandMatrix::destinations() const {
    std::vector<double> incoming(static_cast<std::size_t>(node_count_), 0.0);
    for (const auto& [od, d] : entries_) incoming[static_cast<std::size_t>(od.second)] += d;
    std::vector<int> out;
    for (int s = 0; s < node_count_; ++s)
        if (incoming[static_cast<std::size_t>(s)] > 0.0) out.push_back(s);
    return out;
}

std::vector<int> DemandMatrix::origins() const {
    std::vector<double> outgoing(static_cast<std::size_t>(node_count_), 0.0);
    for (const auto& [od, d] : entries_) outgoing[static_cast<std::size_t>(od.first)] += d;
    std::vector<int> out;
    for (int o = 0; o < node_count_; ++o)
        if (outgoing[static_cast<std::size_t>(o)] > 0.0) out.push_back(o);
    return out;
}

namespace {

// Strips a trailing comment and surrounding whitespace.
std::string clean_line(const std::string& raw) {
    std::string s = raw;
    auto tilde = s.find('~');
    if (tilde != std::string::npos) s.erase(tilde);
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    return s.substr(i);
}

struct Metadata {
    std::map<std::string, std::string> tags;
    long lines_consumed = 0;
};

Metadata read_metadata(std::istream& in) {
    Metadata meta;
    std::string raw;
    while (std::getline(in, raw)) {
        ++meta.lines_consumed;
        std::string line = clean_line(raw);
        if (line.empty()) continue;
        if (line.front() != '<')
            throw ParseError("expected metadata tag before <END OF METADATA>", meta.lines_consumed);
        auto close = line.find('>');
        if (close == std::string::npos)
            throw ParseError("unterminated metadata tag", meta.lines_consumed);
        std::string tag = line.substr(1, close - 1);
        if (tag == "END OF METADATA") return meta;
        std::string value = clean_line(line.substr(close + 1));
        meta.tags[tag] = value;
    }
    throw ParseError("missing <END OF METADATA>", meta.lines_consumed);
}

long require_int_tag(const Metadata& meta, const std::string& tag) {
    auto it = meta.tags.find(tag);
    if (it == meta.tags.end()) throw ParseError("missing metadata tag <" + tag + ">");
    try {
        return std::stol(it->second);
    } catch (const std::exception&) {
        throw ParseError("metadata tag <" + tag + "> is not an integer: " + it->second);
    }
}

}  // namespace

Network parse_network(std::istream& in, const std::string& name) {
    Metadata meta = read_metadata(in);
    long declared_nodes = require_int_tag(meta, "NUMBER OF NODES");
    long declared_links = require_int_tag(meta, "NUMBER OF LINKS");

    std::vector<Network::Edge> edges;
    edges.reserve(static_cast<std::size_t>(declared_links));
    long line_no = meta.lines_consumed;
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = clean_line(raw);
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ';', ' ');
        std::istringstream row(line);
        long init = 0, term = 0;
        Network::Edge e;
        if (!(row >> init >> term >> e.capacity >> e.length >> e.free_flow_time >> e.bpr_alpha >>
              e.bpr_beta >> e.speed >> e.toll >> e.link_type))
            throw ParseError("malformed link row", line_no);
        if (init < 1 || init > declared_nodes || term < 1 || term > declared_nodes)
            throw StructureError("link row references node beyond declared count (line " +
                                 std::to_string(line_no) + ")");
        e.source = static_cast<int>(init - 1);
        e.target = static_cast<int>(term - 1);
        edges.push_back(e);
    }
    if (static_cast<long>(edges.size()) != declared_links)
        throw StructureError("link count " + std::to_string(edges.size()) +
                             " does not match declared <NUMBER OF LINKS> " +
                             std::to_string(declared_links));

    Network net(static_cast<int>(declared_nodes), std::move(edges));
    auto zones = meta.tags.find("NUMBER OF ZONES");
    net.zones = zones == meta.tags.end() ? static_cast<int>(declared_nodes)
                                         : static_cast<int>(std::stol(zones->second));
    auto first_thru = meta.tags.find("FIRST THRU NODE");
    net.first_thru_node =
        first_thru == meta.tags.end() ? 1 : static_cast<int>(std::stol(first_thru->second));
    net.name = name;
    return net;
}

Network parse_network_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file: " + path);
    std::string name = path;
    auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    auto dot = name.find('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    return parse_network(in, name);
}

DemandMatrix parse_demand(std::istream& in, const Network& network) {
    Metadata meta = read_metadata(in);
    DemandMatrix demand(network.node_count());

    long line_no = meta.lines_consumed;
    long current_origin = -1;
    std::string raw;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = clean_line(raw);
        if (line.empty()) continue;
        if (line.rfind("Origin", 0) == 0) {
            std::istringstream os(line.substr(6));
            if (!(os >> current_origin)) throw ParseError("malformed Origin header", line_no);
            if (current_origin < 1 || current_origin > network.node_count())
                throw StructureError("origin outside node range (line " + std::to_string(line_no) +
                                     ")");
            continue;
        }
        if (current_origin < 0) throw ParseError("trip entry before any Origin header", line_no);
        // One or more `dest : flow;` entries per line.
        std::istringstream entries(line);
        std::string entry;
        while (std::getline(entries, entry, ';')) {
            entry = clean_line(entry);
            if (entry.empty()) continue;
            auto colon = entry.find(':');
            if (colon == std::string::npos) throw ParseError("trip entry missing ':'", line_no);
            long dest = 0;
            double flow = 0.0;
            try {
                dest = std::stol(entry.substr(0, colon));
                flow = std::stod(entry.substr(colon + 1));
            } catch (const std::exception&) {
                throw ParseError("malformed trip entry '" + entry + "'", line_no);
            }
            if (dest < 1 || dest > network.node_count())
                throw StructureError("destination outside node range (line " +
                                     std::to_string(line_no) + ")");
            if (flow < 0.0)
                throw ValidationError("negative flow at line " + std::to_string(line_no));
            demand.set(static_cast<int>(current_origin - 1), static_cast<int>(dest - 1), flow);
        }
    }
    return demand;
}

DemandMatrix parse_demand_file(const std::string& path, const Network& network) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open trips file: " + path);
    return parse_demand(in, network);
}

void serialize_network(const Network& network, std::ostream& out) {
    out << "<NUMBER OF ZONES> " << network.zones << "\n";
    out << "<NUMBER OF NODES> " << network.node_count() << "\n";
    out << "<FIRST THRU NODE> " << network.first_thru_node << "\n";
    out << "<NUMBER OF LINKS> " << network.edge_count() << "\n";
    out << "<END OF METADATA>\n\n";
    out << "~ \tInit node \tTerm node \tCapacity \tLength \tFree Flow Time \tB\tPower\tSpeed limit "
           "\tToll \tType\t;\n";
    out.precision(17);
    for (const auto& e : network.edges()) {
        out << '\t' << network.node_labels()[static_cast<std::size_t>(e.source)] << '\t'
            << network.node_labels()[static_cast<std::size_t>(e.target)] << '\t' << e.capacity
            << '\t' << e.length << '\t' << e.free_flow_time << '\t' << e.bpr_alpha << '\t'
            << e.bpr_beta << '\t' << e.speed << '\t' << e.toll << '\t' << e.link_type << "\t;\n";
    }
}

void serialize_demand(const DemandMatrix& demand, std::ostream& out) {
    double total = demand.total_demand();
    out << "<NUMBER OF ZONES> " << demand.node_count() << "\n";
    out.precision(17);
    out << "<TOTAL OD FLOW> " << total << "\n";
    out << "<END OF METADATA>\n\n";
    int last_origin = -1;
    for (const auto& [od, d] : demand.entries()) {
        if (od.first != last_origin) {
            if (last_origin >= 0) out << "\n";
            out << "Origin " << (od.first + 1) << "\n";
            last_origin = od.first;
        }
        out << "    " << (od.second + 1) << " : " << d << ";\n";
    }
}

std::vector<std::pair<int, int>> validate_connectivity(const Network& network,
                                                       const DemandMatrix& demand) {
    std::vector<std::pair<int, int>> unreachable;
    // BFS once per distinct origin.
    std::vector<char> reach;
    int last_origin = -1;
    for (const auto& [od, d] : demand.entries()) {
        if (d <= 0.0) continue;
        if (od.first != last_origin) {
            last_origin = od.first;
            reach.assign(static_cast<std::size_t>(network.node_count()), 0);
            std::deque<int> queue{od.first};
            reach[static_cast<std::size_t>(od.first)] = 1;
            while (!queue.empty()) {
                int u = queue.front();
                queue.pop_front();
                for (int e : network.out_edges(u)) {
                    int v = network.edge(e).target;
                    if (!reach[static_cast<std::size_t>(v)]) {
                        reach[static_cast<std::size_t>(v)] = 1;
                        queue.push_back(v);
                    }
                }
            }
        }
        if (!reach[static_cast<std::size_t>(od.second)]) unreachable.push_back(od);
    }
    return unreachable;
}

}  // namespace netdes
