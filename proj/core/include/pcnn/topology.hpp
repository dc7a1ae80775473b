#pragma once

#include <cstddef>
#include <set>
#include <utility>
#include <vector>

namespace pcnn {

/// Zone graph of a building: which zones share a wall and which touch the
/// outside. Zones are 0-indexed internally; user-facing I/O is 1-indexed
/// (the config loader shifts on the way in, reports shift on the way out).
/// Immutable after construction, safe for concurrent reads.
class BuildingTopology {
  public:
    /// `edges` are unordered zone pairs (0-indexed). Throws ConfigError on
    /// out-of-range indices, self-edges, or a disconnected graph.
    BuildingTopology(std::size_t zone_count,
                     std::vector<std::pair<std::size_t, std::size_t>> edges,
                     std::vector<bool> external_wall);

    /// Fully connected fallback for unknown layouts: every pair adjacent,
    /// every zone with an external wall.
    static BuildingTopology complete(std::size_t zone_count);

    /// Chain 0-1-2-...-m-1, all external walls.
    static BuildingTopology chain(std::size_t zone_count);

    std::size_t zone_count() const { return zone_count_; }
    bool has_external_wall(std::size_t z) const;
    bool adjacent(std::size_t z, std::size_t y) const;

    /// Adjacent zones of z plus z itself.
    std::vector<std::size_t> neighborhood(std::size_t z) const;

    /// Zones reachable from z in at most n adjacency moves (BFS ball).
    /// n_hop_neighborhood(z, 1) == neighborhood(z); n = 0 gives {z}.
    std::vector<std::size_t> n_hop_neighborhood(std::size_t z, std::size_t n) const;

    bool in_n_hop(std::size_t z, std::size_t y, std::size_t n) const;

    /// Graph distance between z and y in adjacency hops (0 for z == y).
    std::size_t distance(std::size_t z, std::size_t y) const;

    const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }

  private:
    void check_zone(std::size_t z) const;

    std::size_t zone_count_ = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges_;  // sorted, first < second
    std::vector<bool> external_wall_;
    std::vector<std::vector<std::size_t>> adj_;  // sorted neighbor lists, without self
};

/// Connected components of the zone graph (used for the disconnection
/// diagnostic; a valid BuildingTopology always has exactly one).
std::vector<std::vector<std::size_t>> connected_components(
    std::size_t zone_count, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

}  // namespace pcnn
