#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/topology.hpp"

namespace pcnn::testing {

// Monday 2021-01-04 00:00 UTC, the simulator's epoch start.
inline constexpr std::int64_t kEpochStart = 1609718400;

/// Hand-built dataset with controllable columns. Every column defaults to a
/// mild constant profile; pass lambdas to shape individual columns.
struct SyntheticSpec {
    std::size_t zones = 3;
    std::size_t steps = 64;
    std::function<double(std::size_t k, std::size_t z)> T =
        [](std::size_t, std::size_t) { return 21.0; };
    std::function<double(std::size_t k, std::size_t z)> u =
        [](std::size_t, std::size_t) { return 0.0; };
    std::function<double(std::size_t k)> T_out = [](std::size_t) { return 8.0; };
    std::function<double(std::size_t k)> Q_sun = [](std::size_t) { return 0.0; };
    bool with_q_win = false;
    std::function<double(std::size_t k, std::size_t z)> Q_win =
        [](std::size_t, std::size_t) { return 0.0; };
};

inline Dataset make_dataset(const SyntheticSpec& s) {
    Dataset d;
    d.zone_count = s.zones;
    for (std::size_t k = 0; k < s.steps; ++k) {
        d.timestamps.push_back(kEpochStart + static_cast<std::int64_t>(k) * kStepSeconds);
        std::vector<double> T(s.zones), u(s.zones);
        for (std::size_t z = 0; z < s.zones; ++z) {
            T[z] = s.T(k, z);
            u[z] = s.u(k, z);
        }
        d.T.push_back(std::move(T));
        d.u.push_back(std::move(u));
        d.T_out.push_back(s.T_out(k));
        d.Q_sun.push_back(s.Q_sun(k));
        if (s.with_q_win) {
            std::vector<double> qw(s.zones);
            for (std::size_t z = 0; z < s.zones; ++z) qw[z] = s.Q_win(k, z);
            d.Q_win.push_back(std::move(qw));
        }
        d.missing.push_back(false);
    }
    return d;
}

inline SeriesView whole_series(const Dataset& d) {
    return SeriesView{&d, Window{0, d.size()}};
}

/// Random connected topology on m zones: a random spanning tree plus a few
/// extra edges, every zone flagged external.
inline BuildingTopology random_topology(std::size_t m, std::mt19937_64& rng) {
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t z = 1; z < m; ++z) {
        std::uniform_int_distribution<std::size_t> pick(0, z - 1);
        std::size_t y = pick(rng);
        edges.emplace_back(std::min(y, z), std::max(y, z));
    }
    if (m >= 3) {
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        for (int extra = 0; extra < 2; ++extra) {
            std::size_t a = pick(rng), b = pick(rng);
            if (a == b) continue;
            auto e = std::make_pair(std::min(a, b), std::max(a, b));
            bool dup = false;
            for (const auto& x : edges) dup = dup || x == e;
            if (!dup) edges.push_back(e);
        }
    }
    return BuildingTopology(m, std::move(edges), std::vector<bool>(m, true));
}

/// Relative error with an absolute floor for near-zero references.
inline double rel_err(double got, double want, double floor = 1e-8) {
    double denom = std::max(std::abs(want), floor);
    return std::abs(got - want) / denom;
}

/// Central finite difference of a scalar function of one coordinate.
inline double central_diff(const std::function<double(double)>& f, double x0, double h) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

}  // namespace pcnn::testing
