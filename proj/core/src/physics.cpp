#include "pcnn/physics.hpp"

#include <cmath>

#include "pcnn/errors.hpp"

namespace pcnn {

PhysicsParams PhysicsParams::init(const BuildingTopology& topo, PhysicsScales s0) {
    PhysicsParams p;
    p.zone_count = topo.zone_count();
    p.s0 = s0;
    p.log_a_h.assign(p.zone_count, 0.0);
    p.log_a_c.assign(p.zone_count, 0.0);
    p.log_b.assign(p.zone_count, 0.0);
    p.log_c.assign(topo.edges().size(), 0.0);
    return p;
}

EffectivePhysics effective_params(const PhysicsParams& p) {
    EffectivePhysics eff;
    auto apply = [](const std::vector<double>& logs, double s0) {
        std::vector<double> out(logs.size());
        for (std::size_t i = 0; i < logs.size(); ++i) out[i] = s0 * std::exp(logs[i]);
        return out;
    };
    eff.a_h = apply(p.log_a_h, p.s0.a_h0);
    eff.a_c = apply(p.log_a_c, p.s0.a_c0);
    eff.b = apply(p.log_b, p.s0.b0);
    eff.c = apply(p.log_c, p.s0.c0);
    return eff;
}

BoundPhysics bind_physics(ad::Tape& tape, const PhysicsParams& p) {
    BoundPhysics bp;
    bp.log_a_h = tape.leaf(p.log_a_h);
    bp.log_a_c = tape.leaf(p.log_a_c);
    bp.log_b = tape.leaf(p.log_b);
    bp.log_c = tape.leaf(p.log_c.empty() ? std::vector<double>{0.0} : p.log_c);
    bp.a_h = ad::smul(ad::exp(bp.log_a_h), p.s0.a_h0);
    bp.a_c = ad::smul(ad::exp(bp.log_a_c), p.s0.a_c0);
    bp.b = ad::smul(ad::exp(bp.log_b), p.s0.b0);
    bp.c = ad::smul(ad::exp(bp.log_c), p.s0.c0);
    return bp;
}

BoundPhysics bind_physics_const(ad::Tape& tape, const EffectivePhysics& eff) {
    BoundPhysics bp;
    bp.a_h = tape.constant(eff.a_h);
    bp.a_c = tape.constant(eff.a_c);
    bp.b = tape.constant(eff.b);
    bp.c = tape.constant(eff.c.empty() ? std::vector<double>{0.0} : eff.c);
    return bp;
}

ad::Var delta_T(ad::Var T, ad::Var c_edges, const BuildingTopology& topo) {
    ad::Tape& tape = *T.tape;
    const std::size_t m = topo.zone_count();
    if (T.size() != m) throw NumericError("physics: temperature vector length mismatch");
    ad::Var acc = tape.constant(std::vector<double>(m, 0.0));
    const auto& edges = topo.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [a, b] = edges[e];
        ad::Var diff = ad::sub(ad::slice(T, a, 1), ad::slice(T, b, 1));
        ad::Var flow = ad::mul(ad::slice(c_edges, e, 1), diff);
        acc = ad::add(acc, ad::pad(flow, a, m));
        acc = ad::sub(acc, ad::pad(flow, b, m));
    }
    return acc;
}

ad::Var energy_step(ad::Var E, ad::Var T, ad::Var T_out_scalar, ad::Var u,
                    const BoundPhysics& phys, const BuildingTopology& topo) {
    const std::size_t m = topo.zone_count();
    if (E.size() != m || T.size() != m || u.size() != m)
        throw NumericError("physics: energy_step length mismatch");
    ad::Tape& tape = *E.tape;

    ad::Var heat = ad::mul(phys.a_h, ad::relu(u));
    ad::Var cool = ad::mul(phys.a_c, ad::neg_relu(u));

    std::vector<double> mask(m, 0.0);
    for (std::size_t z = 0; z < m; ++z) mask[z] = topo.has_external_wall(z) ? 1.0 : 0.0;
    ad::Var ambient_loss =
        ad::mul(tape.constant(std::move(mask)),
                ad::mul(phys.b, ad::sub(T, ad::broadcast(T_out_scalar, m))));

    ad::Var out = ad::add(E, ad::add(heat, cool));
    out = ad::sub(out, ambient_loss);
    out = ad::sub(out, delta_T(T, phys.c, topo));
    return out;
}

ConsistencyReport check_consistency_conditions(const EffectivePhysics& eff,
                                               const BuildingTopology& topo) {
    ConsistencyReport rep;
    const std::size_t m = topo.zone_count();
    std::vector<double> c_sum(m, 0.0);
    const auto& edges = topo.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        c_sum[edges[e].first] += eff.c[e];
        c_sum[edges[e].second] += eff.c[e];
    }
    for (std::size_t z = 0; z < m; ++z) {
        double margin = eff.b[z] + c_sum[z];
        bool pass = margin < 1.0;
        rep.zones.push_back({z, margin, pass});
        if (!pass) rep.all_margins_pass = false;
        if (eff.a_h[z] <= 0.0 || eff.a_c[z] <= 0.0 || eff.b[z] <= 0.0) rep.all_positive = false;
    }
    for (double c : eff.c)
        if (c <= 0.0) rep.all_positive = false;
    return rep;
}

ConsistencyReport check_consistency_conditions(const PhysicsParams& p,
                                               const BuildingTopology& topo) {
    return check_consistency_conditions(effective_params(p), topo);
}

}  // namespace pcnn
