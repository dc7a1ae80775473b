#include "pcnn/topology.hpp"

#include <algorithm>
#include <queue>
#include <sstream>

#include "pcnn/errors.hpp"

namespace pcnn {

std::vector<std::vector<std::size_t>> connected_components(
    std::size_t zone_count, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    std::vector<std::vector<std::size_t>> adj(zone_count);
    for (auto [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<std::vector<std::size_t>> comps;
    std::vector<bool> seen(zone_count, false);
    for (std::size_t s = 0; s < zone_count; ++s) {
        if (seen[s]) continue;
        std::vector<std::size_t> comp;
        std::queue<std::size_t> q;
        q.push(s);
        seen[s] = true;
        while (!q.empty()) {
            std::size_t v = q.front();
            q.pop();
            comp.push_back(v);
            for (std::size_t w : adj[v])
                if (!seen[w]) {
                    seen[w] = true;
                    q.push(w);
                }
        }
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
    }
    return comps;
}

BuildingTopology::BuildingTopology(std::size_t zone_count,
                                   std::vector<std::pair<std::size_t, std::size_t>> edges,
                                   std::vector<bool> external_wall)
    : zone_count_(zone_count), external_wall_(std::move(external_wall)) {
    if (zone_count_ == 0) throw ConfigError("topology: zone count must be positive");
    if (external_wall_.size() != zone_count_)
        throw ConfigError("topology: external-wall flags must cover every zone");
    for (auto& [a, b] : edges) {
        if (a >= zone_count_ || b >= zone_count_)
            throw ConfigError("topology: adjacency references zone out of range");
        if (a == b) throw ConfigError("topology: self-adjacency is implicit, not stored");
        if (a > b) std::swap(a, b);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);

    auto comps = connected_components(zone_count_, edges_);
    if (comps.size() != 1) {
        std::ostringstream msg;
        msg << "topology: zone graph is disconnected; components (1-indexed):";
        for (const auto& comp : comps) {
            msg << " {";
            for (std::size_t i = 0; i < comp.size(); ++i)
                msg << (i ? "," : "") << comp[i] + 1;
            msg << "}";
        }
        throw ConfigError(msg.str());
    }

    adj_.assign(zone_count_, {});
    for (auto [a, b] : edges_) {
        adj_[a].push_back(b);
        adj_[b].push_back(a);
    }
    for (auto& lst : adj_) std::sort(lst.begin(), lst.end());
}

BuildingTopology BuildingTopology::complete(std::size_t zone_count) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t a = 0; a < zone_count; ++a)
        for (std::size_t b = a + 1; b < zone_count; ++b) edges.emplace_back(a, b);
    return BuildingTopology(zone_count, std::move(edges), std::vector<bool>(zone_count, true));
}

BuildingTopology BuildingTopology::chain(std::size_t zone_count) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t a = 0; a + 1 < zone_count; ++a) edges.emplace_back(a, a + 1);
    return BuildingTopology(zone_count, std::move(edges), std::vector<bool>(zone_count, true));
}

void BuildingTopology::check_zone(std::size_t z) const {
    if (z >= zone_count_) throw ConfigError("topology: zone index out of range");
}

bool BuildingTopology::has_external_wall(std::size_t z) const {
    check_zone(z);
    return external_wall_[z];
}

bool BuildingTopology::adjacent(std::size_t z, std::size_t y) const {
    check_zone(z);
    check_zone(y);
    return std::binary_search(adj_[z].begin(), adj_[z].end(), y);
}

std::vector<std::size_t> BuildingTopology::neighborhood(std::size_t z) const {
    check_zone(z);
    std::vector<std::size_t> out = adj_[z];
    out.push_back(z);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> BuildingTopology::n_hop_neighborhood(std::size_t z, std::size_t n) const {
    check_zone(z);
    std::vector<std::size_t> dist(zone_count_, SIZE_MAX);
    std::queue<std::size_t> q;
    dist[z] = 0;
    q.push(z);
    while (!q.empty()) {
        std::size_t v = q.front();
        q.pop();
        if (dist[v] == n) continue;
        for (std::size_t w : adj_[v])
            if (dist[w] == SIZE_MAX) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
    }
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < zone_count_; ++v)
        if (dist[v] <= n) out.push_back(v);
    return out;
}

bool BuildingTopology::in_n_hop(std::size_t z, std::size_t y, std::size_t n) const {
    return distance(z, y) <= n;
}

std::size_t BuildingTopology::distance(std::size_t z, std::size_t y) const {
    check_zone(z);
    check_zone(y);
    std::vector<std::size_t> dist(zone_count_, SIZE_MAX);
    std::queue<std::size_t> q;
    dist[z] = 0;
    q.push(z);
    while (!q.empty()) {
        std::size_t v = q.front();
        q.pop();
        if (v == y) return dist[v];
        for (std::size_t w : adj_[v])
            if (dist[w] == SIZE_MAX) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
    }
    return SIZE_MAX;  // unreachable; cannot happen on a connected topology
}

}  // namespace pcnn
