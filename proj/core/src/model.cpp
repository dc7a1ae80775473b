#include "pcnn/model.hpp"

#include <cmath>

#include "pcnn/errors.hpp"

namespace pcnn {

std::string to_string(PcnnVariant v) {
    switch (v) {
        case PcnnVariant::X: return "x";
        case PcnnVariant::M: return "m";
        case PcnnVariant::S: return "s";
    }
    return "?";
}

PcnnVariant pcnn_variant_from_string(const std::string& s) {
    if (s == "x") return PcnnVariant::X;
    if (s == "m") return PcnnVariant::M;
    if (s == "s") return PcnnVariant::S;
    throw ConfigError("unknown PCNN variant: " + s);
}

Trace to_trace(const TapeRollout& ro, const SeriesView& series) {
    Trace tr;
    tr.warm_len = ro.warm_len;
    const std::size_t L = series.len();
    const std::size_t m = series.data->zone_count;
    tr.D.assign(L, std::vector<double>(m, 0.0));
    tr.E.assign(L, std::vector<double>(m, 0.0));
    tr.T.assign(L, std::vector<double>(m, 0.0));
    for (std::size_t k = 0; k < ro.warm_len && k < L; ++k) {
        tr.T[k] = series.T(k);
        tr.D[k] = series.T(k);
    }
    for (std::size_t i = 0; i < ro.T_pred.size(); ++i) {
        std::size_t k = ro.warm_len + i;
        auto tv = ro.T_pred[i].value();
        tr.T[k].assign(tv.begin(), tv.end());
        if (i < ro.D_vals.size() && ro.D_vals[i].valid()) {
            auto dv = ro.D_vals[i].value();
            auto ev = ro.E_vals[i].value();
            tr.D[k].assign(dv.begin(), dv.end());
            tr.E[k].assign(ev.begin(), ev.end());
        } else {
            tr.D[k] = tr.T[k];
        }
    }
    return tr;
}

Trace DynamicsModel::rollout(const SeriesView& series, const RolloutOptions& opt) const {
    ad::Tape tape;
    return to_trace(roll(tape, series, opt), series);
}

namespace {

void check_series(const SeriesView& series, std::size_t warm_len) {
    if (series.len() < warm_len + 1)
        throw DataError("rollout: series shorter than warm start + 1 step");
}

ad::Var bind_u(ad::Tape& tape, const SeriesView& series, std::size_t k, bool leaf,
               TapeRollout& ro) {
    ad::Var v = leaf ? tape.leaf(series.u(k)) : tape.constant(series.u(k));
    if (leaf) ro.u_leaves.push_back(v);
    return v;
}

ad::Var bind_tout(ad::Tape& tape, const SeriesView& series, std::size_t k, bool leaf,
                  TapeRollout& ro) {
    ad::Var v = leaf ? tape.leaf_scalar(series.T_out(k)) : tape.constant_scalar(series.T_out(k));
    if (leaf) ro.t_out_leaves.push_back(v);
    return v;
}

}  // namespace

PcnnModel::PcnnModel(PcnnVariant variant, BuildingTopology topo, const BlackBoxConfig& net_cfg,
                     PhysicsScales s0, std::uint64_t seed)
    : variant_(variant), topo_(std::move(topo)) {
    const std::size_t m = topo_.zone_count();
    shared_phys_ = PhysicsParams::init(topo_, s0);
    if (variant_ == PcnnVariant::X) {
        x_phys_.resize(m);
        for (std::size_t z = 0; z < m; ++z) {
            std::size_t deg = topo_.neighborhood(z).size() - 1;
            x_phys_[z].log_c.assign(deg, 0.0);
        }
    }
    std::size_t net_count = variant_ == PcnnVariant::S ? 1 : m;
    for (std::size_t i = 0; i < net_count; ++i) {
        BlackBoxConfig cfg = net_cfg;
        cfg.output_dim = variant_ == PcnnVariant::S ? m : 1;
        cfg.seed = seed * 1000003 + i;
        nets_.emplace_back(cfg);
    }
}

void PcnnModel::merge_x() {
    if (variant_ != PcnnVariant::X) throw ConfigError("merge_x: model is not an X-PCNN");
    if (x_merged_) return;
    const auto& edges = topo_.edges();
    auto dir_index = [&](std::size_t z, std::size_t y) {
        auto nb = topo_.neighborhood(z);
        std::size_t idx = 0;
        for (std::size_t v : nb) {
            if (v == z) continue;
            if (v == y) return idx;
            ++idx;
        }
        throw ConfigError("merge_x: zones not adjacent");
    };
    const double c0 = shared_phys_.s0.c0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        auto [a, b] = edges[e];
        double cab = c0 * std::exp(x_phys_[a].log_c[dir_index(a, b)]);
        double cba = c0 * std::exp(x_phys_[b].log_c[dir_index(b, a)]);
        shared_phys_.log_c[e] = std::log(0.5 * (cab + cba) / c0);
    }
    for (std::size_t z = 0; z < topo_.zone_count(); ++z) {
        shared_phys_.log_a_h[z] = x_phys_[z].log_a_h[0];
        shared_phys_.log_a_c[z] = x_phys_[z].log_a_c[0];
        shared_phys_.log_b[z] = x_phys_[z].log_b[0];
    }
    x_merged_ = true;
}

EffectivePhysics PcnnModel::effective_physics() const {
    if (variant_ == PcnnVariant::X && !x_merged_)
        throw ConfigError("effective_physics: X-PCNN has no symmetric c before merge");
    return effective_params(shared_phys_);
}

TapeRollout PcnnModel::roll(ad::Tape& tape, const SeriesView& series,
                            const RolloutOptions& opt) const {
    if (variant_ == PcnnVariant::X && !x_merged_) return roll_x_premerge(tape, series, opt);
    return roll_vectorized(tape, series, opt);
}

TapeRollout PcnnModel::roll_vectorized(ad::Tape& tape, const SeriesView& series,
                                       const RolloutOptions& opt) const {
    TapeRollout ro;
    check_series(series, ro.warm_len);
    const std::size_t m = topo_.zone_count();
    const std::size_t L = series.len();
    const std::size_t b = ro.warm_len - 1;

    BoundPhysics phys = bind_physics(tape, shared_phys_);
    ro.param_leaves.emplace_back("phys.log_a_h", phys.log_a_h);
    ro.param_leaves.emplace_back("phys.log_a_c", phys.log_a_c);
    ro.param_leaves.emplace_back("phys.log_b", phys.log_b);
    if (!shared_phys_.log_c.empty()) ro.param_leaves.emplace_back("phys.log_c", phys.log_c);

    const bool use_nets = !opt.physics_only && opt.inject_f == nullptr;
    std::vector<RecurrentState> states;
    if (use_nets) {
        for (std::size_t i = 0; i < nets_.size(); ++i) {
            std::string prefix = variant_ == PcnnVariant::S && nets_.size() == 1
                                     ? std::string("net.")
                                     : "zone" + std::to_string(i) + ".net.";
            ro.bound_nets.push_back(nets_[i].bind(tape, prefix));
            ro.bound_net_owner.push_back(i);
            for (const auto& [name, leaf] : ro.bound_nets.back().leaves())
                ro.param_leaves.emplace_back(name, leaf);
            states.push_back(ro.bound_nets.back().initial_state(tape));
        }
        // warm start: spin up the recurrent state on measured-period features
        for (std::size_t k = 0; k < b; ++k) {
            ad::Var x = tape.constant(series.features(k));
            for (std::size_t i = 0; i < ro.bound_nets.size(); ++i)
                ro.bound_nets[i].step(x, states[i]);
        }
    }

    auto f_out = [&](std::size_t k) -> ad::Var {
        if (opt.inject_f) {
            const auto& inj = (*opt.inject_f)[k - b];
            return tape.constant(inj);
        }
        ad::Var x = tape.constant(series.features(k));
        if (nets_.size() == 1) return ro.bound_nets[0].step(x, states[0]);
        std::vector<ad::Var> outs;
        outs.reserve(m);
        for (std::size_t i = 0; i < nets_.size(); ++i)
            outs.push_back(ro.bound_nets[i].step(x, states[i]));
        return ad::concat(outs);
    };

    ad::Var D = opt.record_inputs ? tape.leaf(series.T(b)) : tape.constant(series.T(b));
    if (opt.record_inputs) ro.t_start = D;
    ad::Var E = tape.constant(std::vector<double>(m, 0.0));
    ad::Var T = D;

    for (std::size_t k = b; k + 1 < L; ++k) {
        ad::Var u_k = bind_u(tape, series, k, opt.record_inputs, ro);
        ad::Var tout_k = bind_tout(tape, series, k, opt.record_inputs, ro);
        E = energy_step(E, T, tout_k, u_k, phys, topo_);
        if (!opt.physics_only) D = ad::add(D, f_out(k));
        T = ad::add(D, E);
        ro.T_pred.push_back(T);
        ro.D_vals.push_back(D);
        ro.E_vals.push_back(E);
    }
    return ro;
}

TapeRollout PcnnModel::roll_x_premerge(ad::Tape& tape, const SeriesView& series,
                                       const RolloutOptions& opt) const {
    TapeRollout ro;
    check_series(series, ro.warm_len);
    const std::size_t m = topo_.zone_count();
    const std::size_t L = series.len();
    const std::size_t b = ro.warm_len - 1;
    const bool train = opt.x_train_zone != static_cast<std::size_t>(-1);
    if (train && opt.x_train_zone >= m) throw ConfigError("x_train_zone out of range");

    struct ZoneBind {
        ad::Var a_h, a_c, bb, c;  // effective, 1-vectors / neighbor vector
        ad::Var log_a_h, log_a_c, log_b, log_c;
        std::vector<std::size_t> neighbors;  // sorted, without self
    };
    std::vector<std::size_t> zones;
    if (train)
        zones.push_back(opt.x_train_zone);
    else
        for (std::size_t z = 0; z < m; ++z) zones.push_back(z);

    const auto& s0 = shared_phys_.s0;
    std::vector<ZoneBind> binds(m);
    std::vector<RecurrentState> states(m);
    for (std::size_t z : zones) {
        ZoneBind zb;
        std::string p = "zone" + std::to_string(z) + ".phys.";
        zb.log_a_h = tape.leaf(x_phys_[z].log_a_h);
        zb.log_a_c = tape.leaf(x_phys_[z].log_a_c);
        zb.log_b = tape.leaf(x_phys_[z].log_b);
        zb.a_h = ad::smul(ad::exp(zb.log_a_h), s0.a_h0);
        zb.a_c = ad::smul(ad::exp(zb.log_a_c), s0.a_c0);
        zb.bb = ad::smul(ad::exp(zb.log_b), s0.b0);
        ro.param_leaves.emplace_back(p + "log_a_h", zb.log_a_h);
        ro.param_leaves.emplace_back(p + "log_a_c", zb.log_a_c);
        ro.param_leaves.emplace_back(p + "log_b", zb.log_b);
        for (std::size_t y : topo_.neighborhood(z))
            if (y != z) zb.neighbors.push_back(y);
        if (!zb.neighbors.empty()) {
            zb.log_c = tape.leaf(x_phys_[z].log_c);
            zb.c = ad::smul(ad::exp(zb.log_c), s0.c0);
            ro.param_leaves.emplace_back(p + "log_c", zb.log_c);
        }
        binds[z] = zb;

        std::string np = "zone" + std::to_string(z) + ".net.";
        ro.bound_nets.push_back(nets_[z].bind(tape, np));
        ro.bound_net_owner.push_back(z);
        if (!opt.physics_only)
            for (const auto& [name, leaf] : ro.bound_nets.back().leaves())
                ro.param_leaves.emplace_back(name, leaf);
        states[z] = ro.bound_nets.back().initial_state(tape);
    }
    // bound_nets is indexed by position in `zones`
    auto net_of = [&](std::size_t z) -> BoundNet& {
        for (std::size_t i = 0; i < zones.size(); ++i)
            if (zones[i] == z) return ro.bound_nets[i];
        throw ConfigError("x rollout: zone not bound");
    };

    if (!opt.physics_only) {
        for (std::size_t k = 0; k < b; ++k) {
            ad::Var x = tape.constant(series.features(k));
            for (std::size_t z : zones) net_of(z).step(x, states[z]);
        }
    }

    std::vector<ad::Var> D(m), E(m), T(m);
    ad::Var t_start;
    if (opt.record_inputs) {
        t_start = tape.leaf(series.T(b));
        ro.t_start = t_start;
    }
    for (std::size_t z : zones) {
        D[z] = opt.record_inputs ? ad::slice(t_start, z, 1)
                                 : tape.constant({series.T(b)[z]});
        E[z] = tape.constant({0.0});
        T[z] = D[z];
    }

    for (std::size_t k = b; k + 1 < L; ++k) {
        ad::Var u_k = bind_u(tape, series, k, opt.record_inputs, ro);
        ad::Var tout_k = bind_tout(tape, series, k, opt.record_inputs, ro);
        ad::Var x = tape.constant(series.features(k));
        std::vector<ad::Var> T_next(m), E_next(m), D_next(m);
        for (std::size_t z : zones) {
            const ZoneBind& zb = binds[z];
            ad::Var uz = ad::slice(u_k, z, 1);
            ad::Var e = ad::add(E[z], ad::add(ad::mul(zb.a_h, ad::relu(uz)),
                                              ad::mul(zb.a_c, ad::neg_relu(uz))));
            if (topo_.has_external_wall(z))
                e = ad::sub(e, ad::mul(zb.bb, ad::sub(T[z], tout_k)));
            for (std::size_t i = 0; i < zb.neighbors.size(); ++i) {
                std::size_t y = zb.neighbors[i];
                // training runs neighbors on measured data; joint evaluation
                // exchanges the predicted temperatures each step
                ad::Var Ty = train ? tape.constant({series.T(k)[y]}) : T[y];
                e = ad::sub(e, ad::mul(ad::slice(zb.c, i, 1), ad::sub(T[z], Ty)));
            }
            E_next[z] = e;
            D_next[z] = opt.physics_only ? D[z] : ad::add(D[z], net_of(z).step(x, states[z]));
            T_next[z] = ad::add(D_next[z], E_next[z]);
        }
        for (std::size_t z : zones) {
            D[z] = D_next[z];
            E[z] = E_next[z];
            T[z] = T_next[z];
        }
        if (train) {
            std::size_t z = opt.x_train_zone;
            ro.T_pred.push_back(T[z]);
            ro.D_vals.push_back(D[z]);
            ro.E_vals.push_back(E[z]);
        } else {
            std::vector<ad::Var> ts(T.begin(), T.end());
            std::vector<ad::Var> ds(D.begin(), D.end());
            std::vector<ad::Var> es(E.begin(), E.end());
            ro.T_pred.push_back(ad::concat(ts));
            ro.D_vals.push_back(ad::concat(ds));
            ro.E_vals.push_back(ad::concat(es));
        }
    }
    return ro;
}

void PcnnModel::for_each_param(const ParamVisitor& fn) {
    if (variant_ == PcnnVariant::X && !x_merged_) {
        for (std::size_t z = 0; z < topo_.zone_count(); ++z) {
            std::string p = "zone" + std::to_string(z) + ".phys.";
            fn(p + "log_a_h", 1, 1, x_phys_[z].log_a_h);
            fn(p + "log_a_c", 1, 1, x_phys_[z].log_a_c);
            fn(p + "log_b", 1, 1, x_phys_[z].log_b);
            if (!x_phys_[z].log_c.empty())
                fn(p + "log_c", x_phys_[z].log_c.size(), 1, x_phys_[z].log_c);
        }
    } else {
        fn("phys.log_a_h", shared_phys_.log_a_h.size(), 1, shared_phys_.log_a_h);
        fn("phys.log_a_c", shared_phys_.log_a_c.size(), 1, shared_phys_.log_a_c);
        fn("phys.log_b", shared_phys_.log_b.size(), 1, shared_phys_.log_b);
        if (!shared_phys_.log_c.empty())
            fn("phys.log_c", shared_phys_.log_c.size(), 1, shared_phys_.log_c);
    }
    for (std::size_t i = 0; i < nets_.size(); ++i) {
        std::string prefix = variant_ == PcnnVariant::S && nets_.size() == 1
                                 ? std::string("net.")
                                 : "zone" + std::to_string(i) + ".net.";
        nets_[i].for_each_tensor([&](const std::string& name, TensorData& t) {
            fn(prefix + name, t.rows, t.cols, t.v);
        });
    }
}

void PcnnModel::absorb_rollout_stats(const TapeRollout& ro) {
    for (std::size_t i = 0; i < ro.bound_nets.size(); ++i) {
        const auto& acts = ro.bound_nets[i].pre_norm_activations();
        if (acts.empty()) continue;
        std::vector<std::vector<double>> vals;
        vals.reserve(acts.size());
        for (ad::Var v : acts) {
            auto s = v.value();
            vals.emplace_back(s.begin(), s.end());
        }
        nets_[ro.bound_net_owner[i]].update_norm_stats(vals);
    }
}

std::size_t PcnnModel::count_parameters() {
    std::size_t n = 0;
    for_each_param([&](const std::string&, std::size_t r, std::size_t c, std::vector<double>&) {
        n += r * c;
    });
    return n;
}

PurePhysicsModel::PurePhysicsModel(BuildingTopology topo, EffectivePhysics eff)
    : topo_(std::move(topo)), eff_(std::move(eff)) {}

TapeRollout PurePhysicsModel::roll(ad::Tape& tape, const SeriesView& series,
                                   const RolloutOptions& opt) const {
    TapeRollout ro;
    check_series(series, ro.warm_len);
    const std::size_t m = topo_.zone_count();
    const std::size_t L = series.len();
    const std::size_t b = ro.warm_len - 1;

    BoundPhysics phys = bind_physics_const(tape, eff_);
    ad::Var D = opt.record_inputs ? tape.leaf(series.T(b)) : tape.constant(series.T(b));
    if (opt.record_inputs) ro.t_start = D;
    ad::Var E = tape.constant(std::vector<double>(m, 0.0));
    ad::Var T = D;
    for (std::size_t k = b; k + 1 < L; ++k) {
        ad::Var u_k = bind_u(tape, series, k, opt.record_inputs, ro);
        ad::Var tout_k = bind_tout(tape, series, k, opt.record_inputs, ro);
        E = energy_step(E, T, tout_k, u_k, phys, topo_);
        T = ad::add(D, E);
        ro.T_pred.push_back(T);
        ro.D_vals.push_back(D);
        ro.E_vals.push_back(E);
    }
    return ro;
}

}  // namespace pcnn
