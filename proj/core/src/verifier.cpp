#include "pcnn/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "pcnn/errors.hpp"

namespace pcnn {

std::string to_string(InputKind k) {
    switch (k) {
        case InputKind::Temperature: return "temperature";
        case InputKind::Power: return "power";
        case InputKind::Ambient: return "ambient";
    }
    return "?";
}

void GradientReport::tally() {
    negative = zero = positive = 0;
    for (const GradientEntry& e : entries) {
        if (e.value < -kZeroTol) ++negative;
        else if (e.value <= kZeroTol) ++zero;
        else ++positive;
    }
}

GradientReport final_step_gradients(const DynamicsModel& model, const SeriesView& series) {
    ad::Tape tape;
    RolloutOptions opt;
    opt.record_inputs = true;
    TapeRollout ro = model.roll(tape, series, opt);
    const std::size_t m = model.zone_count();
    const std::size_t horizon = ro.T_pred.size();

    GradientReport rep;
    for (std::size_t z = 0; z < m; ++z) {
        ad::Var out = ad::sum(ad::slice(ro.T_pred.back(), z, 1));
        auto adj = tape.backward(out);
        for (std::size_t j = 0; j < ro.u_leaves.size(); ++j) {
            ad::Var leaf = ro.u_leaves[j];
            std::vector<double> g(leaf.size(), 0.0);
            auto it = adj.find(leaf.id);
            if (it != adj.end()) {
                auto s = it->second.value();
                g.assign(s.begin(), s.end());
            }
            for (std::size_t y = 0; y < g.size(); ++y)
                rep.entries.push_back({z, horizon, InputKind::Power, y, j, g[y]});
        }
        for (std::size_t j = 0; j < ro.t_out_leaves.size(); ++j) {
            ad::Var leaf = ro.t_out_leaves[j];
            double g = 0.0;
            auto it = adj.find(leaf.id);
            if (it != adj.end()) g = it->second.scalar();
            rep.entries.push_back({z, horizon, InputKind::Ambient, 0, j, g});
        }
    }
    std::sort(rep.entries.begin(), rep.entries.end(),
              [](const GradientEntry& a, const GradientEntry& b) {
                  return std::tie(a.out_zone, a.kind, a.in_step, a.in_zone) <
                         std::tie(b.out_zone, b.kind, b.in_step, b.in_zone);
              });
    rep.tally();
    return rep;
}

FdResult finite_difference_gradient(const DynamicsModel& model, const SeriesView& series,
                                    const FdRequest& req) {
    if (req.h <= 0.0) throw ConfigError("finite difference: h must be positive");
    Dataset local = *series.data;  // desk-scale copy; perturbations stay local
    SeriesView sv{&local, series.window};

    FdResult res;
    res.used_h = req.h;
    std::size_t abs_k = series.window.start + req.in_step;
    if (req.kind == InputKind::Power) {
        double u0 = local.u[abs_k][req.in_zone];
        if (u0 != 0.0 && std::abs(u0) <= req.h) {
            res.used_h = std::abs(u0) / 2.0;  // keep both evaluations on one sign branch
            res.shrunk = true;
        }
    }

    auto eval = [&](double delta) {
        switch (req.kind) {
            case InputKind::Power: local.u[abs_k][req.in_zone] += delta; break;
            case InputKind::Ambient: local.T_out[abs_k] += delta; break;
            case InputKind::Temperature: local.T[abs_k][req.in_zone] += delta; break;
        }
        Trace tr = model.rollout(sv);
        switch (req.kind) {
            case InputKind::Power: local.u[abs_k][req.in_zone] -= delta; break;
            case InputKind::Ambient: local.T_out[abs_k] -= delta; break;
            case InputKind::Temperature: local.T[abs_k][req.in_zone] -= delta; break;
        }
        return tr.T.back()[req.out_zone];
    };
    double fp = eval(res.used_h);
    double fm = eval(-res.used_h);
    res.value = (fp - fm) / (2.0 * res.used_h);
    return res;
}

CheckResult check_heat_propagation(const DynamicsModel& model, const BuildingTopology& topo,
                                   const SeriesView& series, std::size_t max_lag) {
    const std::size_t m = model.zone_count();
    CheckResult res;
    for (std::size_t lag = 1; lag <= max_lag; ++lag) {
        std::size_t len = kWarmStartSteps + lag;
        if (len > series.len()) break;
        SeriesView sv{series.data, {series.window.start, len}};
        ad::Tape tape;
        RolloutOptions opt;
        opt.record_inputs = true;
        TapeRollout ro = model.roll(tape, sv, opt);
        if (!ro.t_start.valid())
            throw ConfigError("heat propagation check: model exposes no start-temperature leaf");
        for (std::size_t z = 0; z < m; ++z) {
            ad::Var out = ad::sum(ad::slice(ro.T_pred.back(), z, 1));
            auto adj = tape.backward(out);
            std::vector<double> g(m, 0.0);
            auto it = adj.find(ro.t_start.id);
            if (it != adj.end()) {
                auto s = it->second.value();
                g.assign(s.begin(), s.end());
            }
            for (std::size_t y = 0; y < m; ++y) {
                ++res.checked;
                bool reachable = topo.in_n_hop(z, y, lag);
                if (reachable && g[y] <= kStrictPos) {
                    res.pass = false;
                    res.failures.push_back({z, y, lag, InputKind::Temperature, g[y],
                                            "expected strictly positive (reachable in " +
                                                std::to_string(lag) + " hops)"});
                } else if (!reachable && std::abs(g[y]) > kZeroTol) {
                    res.pass = false;
                    res.failures.push_back({z, y, lag, InputKind::Temperature, g[y],
                                            "expected structural zero (unreachable)"});
                }
            }
        }
    }
    if (res.checked == 0) throw DataError("heat propagation check: series too short");
    return res;
}

CheckResult check_input_consistency(const DynamicsModel& model, const BuildingTopology& topo,
                                    const SeriesView& series) {
    const std::size_t m = model.zone_count();
    GradientReport rep = final_step_gradients(model, series);
    std::size_t horizon = 0;
    for (const GradientEntry& e : rep.entries) horizon = std::max(horizon, e.out_step);

    // a zone feels the ambient through any external-wall zone it can reach
    auto ambient_reachable = [&](std::size_t z, std::size_t hops) {
        for (std::size_t y : topo.n_hop_neighborhood(z, hops))
            if (topo.has_external_wall(y)) return true;
        return false;
    };

    CheckResult res;
    for (const GradientEntry& e : rep.entries) {
        ++res.checked;
        // input at free step j influences the horizon-step output through
        // horizon - j - 1 propagation hops after entering its own zone
        std::size_t hops = horizon - e.in_step - 1;
        if (e.kind == InputKind::Power) {
            bool reachable = topo.in_n_hop(e.out_zone, e.in_zone, hops);
            if (reachable && e.value <= kStrictPos) {
                res.pass = false;
                res.failures.push_back({e.out_zone, e.in_zone, hops, e.kind, e.value,
                                        "expected strictly positive power gradient"});
            } else if (!reachable && std::abs(e.value) > kZeroTol) {
                res.pass = false;
                res.failures.push_back({e.out_zone, e.in_zone, hops, e.kind, e.value,
                                        "expected structural zero power gradient"});
            }
        } else {
            bool reachable = ambient_reachable(e.out_zone, hops);
            if (reachable && e.value <= kStrictPos) {
                res.pass = false;
                res.failures.push_back({e.out_zone, 0, hops, e.kind, e.value,
                                        "expected strictly positive ambient gradient"});
            } else if (!reachable && std::abs(e.value) > kZeroTol) {
                res.pass = false;
                res.failures.push_back({e.out_zone, 0, hops, e.kind, e.value,
                                        "expected structural zero ambient gradient"});
            }
        }
    }
    return res;
}

HistogramTable gradient_histogram(const GradientReport& report, double bound, std::size_t bins) {
    HistogramTable t;
    t.bound = bound;
    t.bins = bins;
    t.counts.assign(bins + 2, 0);
    std::size_t neg = 0;
    for (const GradientEntry& e : report.entries) {
        ++t.total;
        if (e.value < 0.0) ++neg;
        if (e.value < -bound) {
            ++t.counts.front();
        } else if (e.value >= bound) {
            ++t.counts.back();
        } else {
            auto idx = static_cast<std::size_t>((e.value + bound) / (2.0 * bound) *
                                                static_cast<double>(bins));
            if (idx >= bins) idx = bins - 1;
            ++t.counts[idx + 1];
        }
    }
    t.negative_fraction = t.total ? static_cast<double>(neg) / static_cast<double>(t.total) : 0.0;
    return t;
}

std::string histogram_to_tsv(const HistogramTable& t) {
    std::ostringstream os;
    os << "bin_lo\tbin_hi\tcount\n";
    os.precision(12);
    os << "-inf\t" << -t.bound << "\t" << t.counts.front() << "\n";
    double w = 2.0 * t.bound / static_cast<double>(t.bins);
    for (std::size_t i = 0; i < t.bins; ++i)
        os << (-t.bound + w * static_cast<double>(i)) << "\t"
           << (-t.bound + w * static_cast<double>(i + 1)) << "\t" << t.counts[i + 1] << "\n";
    os << t.bound << "\tinf\t" << t.counts.back() << "\n";
    os << "# total\t" << t.total << "\n";
    os << "# negative_fraction\t" << t.negative_fraction << "\n";
    return os.str();
}

}  // namespace pcnn
