#pragma once

#include <string>
#include <vector>

#include "pcnn/tape.hpp"
#include "pcnn/topology.hpp"

namespace pcnn {

/// Base scales for the log-parametrized heat-transfer coefficients.
/// The effective value is s0 * exp(log_scale), strictly positive for any
/// finite log value. Defaults give an init margin of roughly 0.985 for
/// condition b + sum(c) < 1 with up to two neighbors.
struct PhysicsScales {
    double a_h0 = 1e-4;  // degC per W per step, heating
    double a_c0 = 1e-4;  // degC per W per step, cooling
    double b0 = 5e-3;    // ambient-loss fraction per step
    double c0 = 5e-3;    // inter-zone transfer fraction per step
};

/// Log-parametrized physics coefficients of the energy accumulator.
/// c is stored once per unordered adjacency pair, in topology edge order.
struct PhysicsParams {
    std::size_t zone_count = 0;
    PhysicsScales s0;
    std::vector<double> log_a_h;  // per zone
    std::vector<double> log_a_c;  // per zone
    std::vector<double> log_b;    // per zone
    std::vector<double> log_c;    // per topology edge

    static PhysicsParams init(const BuildingTopology& topo, PhysicsScales s0 = {});

    std::size_t scalar_count() const {
        return log_a_h.size() + log_a_c.size() + log_b.size() + log_c.size();
    }
};

/// Effective (positive) coefficient values.
struct EffectivePhysics {
    std::vector<double> a_h, a_c, b;  // per zone
    std::vector<double> c;            // per edge
};

EffectivePhysics effective_params(const PhysicsParams& p);

/// Physics coefficients bound onto a tape: effective values as recorded
/// exp-transformed functions of the log-parameter leaves.
struct BoundPhysics {
    ad::Var a_h, a_c, b;  // m-vectors
    ad::Var c;            // edge vector
    ad::Var log_a_h, log_a_c, log_b, log_c;  // the trainable leaves
};

BoundPhysics bind_physics(ad::Tape& tape, const PhysicsParams& p);

/// Bind fixed effective coefficients as constants (no gradient flow);
/// used by the pure-physics verifier fixtures and the simulator cross-checks.
BoundPhysics bind_physics_const(ad::Tape& tape, const EffectivePhysics& eff);

/// Inter-zone heat transfer: delta_T[z] = sum over neighbors y of
/// c^{zy} (T[z] - T[y]). Pairwise contributions cancel in the building sum
/// when c is symmetric, which the shared storage guarantees.
ad::Var delta_T(ad::Var T, ad::Var c_edges, const BuildingTopology& topo);

/// One energy-accumulator step:
///   E' = E + a_h.max{u,0} + a_c.min{u,0} - b.(T - T_out).extmask - delta_T(T).
/// Zones without an external wall have the ambient-loss term masked off.
ad::Var energy_step(ad::Var E, ad::Var T, ad::Var T_out_scalar, ad::Var u,
                    const BoundPhysics& phys, const BuildingTopology& topo);

/// Consistency-condition report: per-zone value of b^z + sum c^{zy}
/// against 1, and positivity of every coefficient (true by construction,
/// asserted anyway). A failing margin is reported, not raised.
struct ConsistencyReport {
    struct ZoneEntry {
        std::size_t zone;
        double margin_value;  // b^z + sum of adjacent c
        bool pass;            // margin_value < 1
    };
    std::vector<ZoneEntry> zones;
    bool all_positive = true;
    bool all_margins_pass = true;
};

ConsistencyReport check_consistency_conditions(const PhysicsParams& p,
                                               const BuildingTopology& topo);
ConsistencyReport check_consistency_conditions(const EffectivePhysics& eff,
                                               const BuildingTopology& topo);

}  // namespace pcnn
