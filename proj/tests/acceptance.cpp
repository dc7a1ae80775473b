// Acceptance gate: one pass/fail line per criterion, tolerances pinned in
// code. Exits nonzero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pcnn/baselines.hpp"
#include "pcnn/checkpoint.hpp"
#include "pcnn/model.hpp"
#include "pcnn/simulator.hpp"
#include "pcnn/tape.hpp"
#include "pcnn/training.hpp"
#include "pcnn/verifier.hpp"

#include "helpers.hpp"

namespace fs = std::filesystem;
using namespace pcnn;
using pcnn::testing::SyntheticSpec;
using pcnn::testing::central_diff;
using pcnn::testing::make_dataset;
using pcnn::testing::random_topology;
using pcnn::testing::rel_err;
using pcnn::testing::whole_series;

namespace {

// ---------------------------------------------------------------- utilities

std::string g_detail;

void notef(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    if (!g_detail.empty()) g_detail += "; ";
    g_detail += buf;
}

BlackBoxConfig desk_net(std::size_t width = 8) {
    BlackBoxConfig cfg;
    cfg.input_dim = kFeatureDim;
    cfg.encoder_width = width;
    cfg.recurrent_width = width;
    cfg.decoder_width = width;
    return cfg;
}

// Normalization buffers drift when series_gradient absorbs rollout stats;
// pin them so finite differences see a pure function of the parameters.
class StatPin {
  public:
    explicit StatPin(DynamicsModel& model) {
        if (auto* p = dynamic_cast<PcnnModel*>(&model))
            for (auto& n : p->nets()) nets_.push_back(&n);
        else if (auto* b = dynamic_cast<BlackboxModel*>(&model))
            nets_.push_back(&b->net());
        for (auto* n : nets_) saved_.emplace_back(n->norm_mean(), n->norm_var());
    }
    void restore() const {
        for (std::size_t i = 0; i < nets_.size(); ++i)
            nets_[i]->set_norm_stats(saved_[i].first, saved_[i].second);
    }

  private:
    std::vector<BlackBoxNet*> nets_;
    std::vector<std::pair<std::vector<double>, std::vector<double>>> saved_;
};

std::vector<double>* find_param(DynamicsModel& model, const std::string& name) {
    std::vector<double>* out = nullptr;
    model.for_each_param([&](const std::string& n, std::size_t, std::size_t,
                             std::vector<double>& v) {
        if (n == name) out = &v;
    });
    return out;
}

// ------------------------------------------------- criterion 1: autodiff oracle

constexpr double kPrimTol = 1e-5;
constexpr double kCompTol = 1e-4;
constexpr double kModelGradTol = 1e-4;

using ScalarFn = std::function<ad::Var(ad::Tape&, ad::Var)>;

std::size_t fd_mismatches(const ScalarFn& build, const std::vector<double>& x0, double tol,
                          double h, std::size_t& total) {
    ad::Tape tape;
    ad::Var x = tape.leaf(x0);
    std::vector<double> g = tape.gradient(build(tape, x), x);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        auto eval = [&](double v) {
            ad::Tape t2;
            std::vector<double> xp = x0;
            xp[i] = v;
            return build(t2, t2.leaf(xp)).scalar();
        };
        // Richardson-extrapolated central difference: truncation error h^4
        double d1 = central_diff(eval, x0[i], h);
        double d2 = central_diff(eval, x0[i], h / 2.0);
        double fd = (4.0 * d2 - d1) / 3.0;
        ++total;
        if (rel_err(g[i], fd, 1e-7) > tol) ++bad;
    }
    return bad;
}

bool criterion1() {
    std::size_t bad = 0, total = 0;
    std::vector<double> x0{0.7, -0.4, 1.3};

    // primitive level, 1e-5
    std::vector<ScalarFn> prims = {
        [](ad::Tape&, ad::Var x) { return ad::sum(ad::tanh(x)); },
        [](ad::Tape&, ad::Var x) { return ad::sum(ad::sigmoid(x)); },
        [](ad::Tape&, ad::Var x) { return ad::sum(ad::exp(ad::smul(x, 0.5))); },
        [](ad::Tape&, ad::Var x) { return ad::mean(ad::square(x)); },
        [](ad::Tape& t, ad::Var x) { return ad::sum(ad::mul(x, t.constant({0.3, -1.0, 2.0}))); },
        [](ad::Tape& t, ad::Var x) {
            ad::Var W = t.constant({0.5, -0.2, 0.1, 0.8, 0.0, -1.1}, 2, 3);
            return ad::sum(ad::tanh(ad::matvec(W, x)));
        },
        [](ad::Tape&, ad::Var x) {
            std::vector<ad::Var> parts{ad::slice(x, 0, 2), ad::slice(x, 1, 2)};
            return ad::sum(ad::square(ad::concat(parts)));
        },
    };
    for (const auto& f : prims) bad += fd_mismatches(f, x0, kPrimTol, 1e-4, total);

    // 1000 random compositions, 1e-4
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> pick_op(0, 6);
    std::uniform_real_distribution<double> val(-1.2, 1.2);
    std::uniform_int_distribution<int> depth_dist(3, 12);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> xr(4), cvals(4);
        for (double& v : xr) v = val(rng);
        for (double& v : xr)
            if (std::abs(v) < 0.05) v = 0.05;
        for (double& v : cvals) v = val(rng);
        std::vector<int> ops;
        int depth = depth_dist(rng);
        for (int i = 0; i < depth; ++i) ops.push_back(pick_op(rng));
        auto build = [&](ad::Tape& t, ad::Var x) {
            ad::Var cur = x;
            ad::Var c = t.constant(cvals);
            for (int op : ops) switch (op) {
                    case 0: cur = ad::tanh(cur); break;
                    case 1: cur = ad::sigmoid(cur); break;
                    case 2: cur = ad::add(cur, c); break;
                    case 3: cur = ad::mul(cur, c); break;
                    case 4: cur = ad::smul(cur, 0.7); break;
                    case 5: cur = ad::sub(cur, ad::tanh(c)); break;
                    case 6: cur = ad::add(cur, ad::tanh(ad::smul(cur, 0.3))); break;
                }
            return ad::mean(ad::square(cur));
        };
        bad += fd_mismatches(build, xr, kCompTol, 1e-4, total);
    }

    // model rollouts over a 96-record series: parameter gradients vs FD
    SyntheticSpec spec;
    spec.steps = 96;
    spec.T = [](std::size_t k, std::size_t z) { return 20.0 + 0.2 * z + 0.01 * k; };
    spec.u = [](std::size_t k, std::size_t z) { return (k + z) % 2 ? 420.0 : -310.0; };
    spec.T_out = [](std::size_t k) { return 6.0 + 0.02 * k; };
    spec.Q_sun = [](std::size_t k) { return 30.0 + static_cast<double>(k % 40); };
    Dataset d = make_dataset(spec);
    SeriesView sv = whole_series(d);

    auto check_model = [&](DynamicsModel& model) {
        StatPin pin(model);
        std::vector<std::string> names;
        model.for_each_param([&](const std::string& n, std::size_t, std::size_t,
                                 std::vector<double>&) { names.push_back(n); });
        std::vector<std::string> picks;
        for (std::size_t f : {std::size_t{0}, names.size() / 3, 2 * names.size() / 3,
                              names.size() - 1})
            picks.push_back(names[f]);
        pin.restore();
        GradMap grads = series_gradient(model, sv);
        for (const std::string& name : picks) {
            auto it = grads.find(name);
            if (it == grads.end()) continue;  // parameter without a gradient path
            std::vector<double>* p = find_param(model, name);
            double x = (*p)[0];
            auto eval = [&](double v) {
                (*p)[0] = v;
                pin.restore();
                double loss = 0.0;
                series_gradient(model, sv, static_cast<std::size_t>(-1), &loss);
                (*p)[0] = x;
                return loss;
            };
            double fd = central_diff(eval, x, 1e-5);
            pin.restore();
            ++total;
            if (rel_err(it->second[0], fd, 1e-8) > kModelGradTol) ++bad;
        }
    };
    PcnnModel s_pcnn(PcnnVariant::S, BuildingTopology::chain(3), desk_net(), {}, 3);
    BlackboxModel bbx(BuildingTopology::chain(3), desk_net(6), 2);
    check_model(s_pcnn);
    check_model(bbx);

    // input gradients of the pure-physics rollout vs the verifier's FD oracle
    EffectivePhysics eff;
    eff.a_h.assign(3, 1.2e-4);
    eff.a_c.assign(3, 1.5e-4);
    eff.b.assign(3, 6e-3);
    eff.c.assign(2, 8e-3);
    PurePhysicsModel phys(BuildingTopology::chain(3), eff);
    SeriesView short_sv{&d, {0, kWarmStartSteps + 6}};
    GradientReport rep = final_step_gradients(phys, short_sv);
    std::size_t step = 0;
    for (const GradientEntry& e : rep.entries) {
        if (++step % 5 != 0) continue;
        FdRequest req;
        req.kind = e.kind;
        req.in_step = kWarmStartSteps - 1 + e.in_step;
        req.in_zone = e.in_zone;
        req.out_zone = e.out_zone;
        FdResult fd = finite_difference_gradient(phys, short_sv, req);
        ++total;
        if (rel_err(fd.value, e.value, 1e-7) > kModelGradTol) ++bad;
    }

    notef("%zu/%zu gradient checks within tolerance", total - bad, total);
    return bad == 0;
}

// ------------------------------------ criteria 2 and 3: sign-structure checks

struct SignFixture {
    BuildingTopology topo;
    EffectivePhysics eff;
    Dataset data;
};

std::vector<SignFixture> make_sign_fixtures() {
    std::vector<SignFixture> out;
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick_m(2, 6);
    std::uniform_real_distribution<double> log_a(std::log(1e-5), std::log(1e-3));
    std::uniform_real_distribution<double> bc(1e-3, 0.05);
    for (int draw = 0; draw < 100; ++draw) {
        std::size_t m = pick_m(rng);
        BuildingTopology topo = random_topology(m, rng);
        EffectivePhysics eff;
        for (std::size_t z = 0; z < m; ++z) {
            eff.a_h.push_back(std::exp(log_a(rng)));
            eff.a_c.push_back(std::exp(log_a(rng)));
            eff.b.push_back(bc(rng));
        }
        for (std::size_t e = 0; e < topo.edges().size(); ++e) eff.c.push_back(bc(rng));
        // b + sum c < 1 holds by construction (max degree 5, all values <= 0.05)

        SyntheticSpec s;
        s.zones = m;
        s.steps = kWarmStartSteps + 10;
        s.T = [](std::size_t k, std::size_t z) { return 18.0 + 0.7 * z + 0.05 * k; };
        s.u = [](std::size_t k, std::size_t z) { return (k + z) % 2 ? 260.0 : -340.0; };
        s.T_out = [](std::size_t) { return 4.0; };
        out.push_back({std::move(topo), std::move(eff), make_dataset(s)});
    }
    return out;
}

bool criterion2(const std::vector<SignFixture>& fixtures) {
    std::size_t checked = 0, bad = 0;
    for (const SignFixture& f : fixtures) {
        PurePhysicsModel model(f.topo, f.eff);
        ad::Tape tape;
        RolloutOptions opt;
        opt.record_inputs = true;
        TapeRollout ro = model.roll(tape, whole_series(f.data), opt);
        std::size_t m = f.topo.zone_count();
        for (std::size_t lag = 1; lag <= 10; ++lag)
            for (std::size_t z = 0; z < m; ++z) {
                auto g = tape.gradient(ad::sum(ad::slice(ro.T_pred[lag - 1], z, 1)), ro.t_start);
                for (std::size_t y = 0; y < m; ++y) {
                    ++checked;
                    if (f.topo.in_n_hop(z, y, lag)) {
                        if (!(g[y] > kStrictPos)) ++bad;
                    } else if (std::abs(g[y]) > kZeroTol) {
                        ++bad;
                    }
                }
            }
    }
    notef("%zu/%zu start-temperature sign entries match n-hop structure", checked - bad, checked);
    return bad == 0;
}

bool criterion3(const std::vector<SignFixture>& fixtures) {
    std::size_t checked = 0, bad = 0;
    for (const SignFixture& f : fixtures) {
        PurePhysicsModel model(f.topo, f.eff);
        ad::Tape tape;
        RolloutOptions opt;
        opt.record_inputs = true;
        TapeRollout ro = model.roll(tape, whole_series(f.data), opt);
        std::size_t m = f.topo.zone_count();
        for (std::size_t n = 1; n <= 4; ++n)
            for (std::size_t z = 0; z < m; ++z) {
                ad::Var out = ad::sum(ad::slice(ro.T_pred[n - 1], z, 1));
                auto gu = tape.gradient(out, ro.u_leaves[0]);
                for (std::size_t y = 0; y < m; ++y) {
                    ++checked;
                    if (f.topo.in_n_hop(z, y, n - 1)) {
                        if (!(gu[y] > kStrictPos)) ++bad;  // includes own-zone strictness
                    } else if (std::abs(gu[y]) > kZeroTol) {
                        ++bad;
                    }
                }
                // every zone has an external wall in these fixtures, so every
                // ambient gradient must be strictly positive
                auto ga = tape.gradient(out, ro.t_out_leaves[0]);
                ++checked;
                if (!(ga[0] > kStrictPos)) ++bad;
            }
    }
    notef("%zu/%zu power/ambient sign entries match the iff-conditions", checked - bad, checked);
    return bad == 0;
}

// ------------------------------------------- criterion 4: variant equivalence

bool criterion4() {
    SyntheticSpec s;
    s.steps = kWarmStartSteps + 288;
    s.T = [](std::size_t k, std::size_t z) { return 20.5 + 0.4 * z + 0.005 * k; };
    s.u = [](std::size_t k, std::size_t z) { return (k % 3) ? 380.0 : -240.0; };
    s.T_out = [](std::size_t k) { return 7.0 + 0.01 * k; };
    Dataset d = make_dataset(s);
    BuildingTopology topo = BuildingTopology::chain(3);

    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> fval(-0.02, 0.02);
    std::vector<std::vector<double>> inj;
    for (std::size_t k = 0; k + kWarmStartSteps < d.size() + 1; ++k)
        inj.push_back({fval(rng), fval(rng), fval(rng)});

    RolloutOptions opt;
    opt.inject_f = &inj;

    PcnnModel x(PcnnVariant::X, topo, desk_net(), {}, 1);
    x.merge_x();  // log-c is zero in both directions: identical physics after merge
    PcnnModel m(PcnnVariant::M, topo, desk_net(), {}, 2);
    PcnnModel sm(PcnnVariant::S, topo, desk_net(), {}, 3);

    Trace tx = x.rollout(whole_series(d), opt);
    Trace tm = m.rollout(whole_series(d), opt);
    Trace ts = sm.rollout(whole_series(d), opt);

    double worst = 0.0;
    for (std::size_t k = tx.warm_len; k < d.size(); ++k)
        for (std::size_t z = 0; z < 3; ++z) {
            worst = std::max(worst, std::abs(tx.T[k][z] - tm.T[k][z]));
            worst = std::max(worst, std::abs(tm.T[k][z] - ts.T[k][z]));
            worst = std::max(worst, std::abs(tx.E[k][z] - tm.E[k][z]));
            worst = std::max(worst, std::abs(tm.E[k][z] - ts.E[k][z]));
        }
    notef("max |trace difference| over 288 steps = %.3g (tol 1e-12)", worst);
    return worst <= 1e-12;
}

// ---------------------------------------------- criterion 5: linear recovery

bool within_rel(const std::vector<double>& got, const std::vector<double>& want, double tol,
                double& worst) {
    bool ok = true;
    for (std::size_t i = 0; i < want.size(); ++i) {
        double r = std::abs(got[i] - want[i]) / std::abs(want[i]);
        worst = std::max(worst, r);
        ok = ok && r <= tol;
    }
    return ok;
}

bool criterion5() {
    constexpr double kCoefTol = 0.20;
    PlantConfig plant;
    plant.noise_std = 0.0;
    SimulationResult sim = simulate(plant, Controller::RandomExcitation, 14, 33);
    SequenceSplit split = build_sequences(sim.data, 33);

    LinearModel lin = fit_linear(sim.data, split.train, plant.topology, {});
    double worst = 0.0;
    bool coef_ok = within_rel(lin.physics().a_h, sim.truth.a_h, kCoefTol, worst) &&
                   within_rel(lin.physics().a_c, sim.truth.a_c, kCoefTol, worst) &&
                   within_rel(lin.physics().b, sim.truth.b, kCoefTol, worst) &&
                   within_rel(lin.physics().c, sim.truth.c, kCoefTol, worst) &&
                   within_rel(lin.solar_gain(), sim.truth.e, kCoefTol, worst);
    notef("fit_linear worst coefficient error %.1f%% (tol 20%%)", 100.0 * worst);

    // ARX one-step prediction; Q_win is not an ARX regressor, so the ARX leg
    // runs on a solar-free variant of the same plant
    PlantConfig plant2 = plant;
    plant2.weather.q_sun_peak = 0.0;
    SimulationResult sim2 = simulate(plant2, Controller::RandomExcitation, 14, 33);
    SequenceSplit split2 = build_sequences(sim2.data, 33);
    ArxModel arx = arx_fit(sim2.data, split2.train, 1);

    const Dataset& d2 = sim2.data;
    double se = 0.0;
    std::size_t n = 0;
    std::vector<std::vector<double>> T_hist, exo_hist;
    for (std::size_t k = 0; k < d2.size(); ++k) {
        std::vector<double> exo = d2.u[k];
        exo.push_back(d2.T_out[k]);
        exo.push_back(d2.Q_sun[k]);
        T_hist.push_back(d2.T[k]);
        exo_hist.push_back(std::move(exo));
        if (k + 1 < d2.size() && T_hist.size() >= 2) {
            std::vector<double> pred = arx.predict(T_hist, exo_hist);
            for (std::size_t z = 0; z < d2.zone_count; ++z) {
                double err = pred[z] - d2.T[k + 1][z];
                se += err * err;
                ++n;
            }
        }
    }
    double rmse = std::sqrt(se / static_cast<double>(n));
    notef("ARX(1) one-step RMSE %.3g degC (tol 1e-3)", rmse);
    return coef_ok && rmse <= 1e-3;
}

// ------------------------- criteria 6-8 fixture: saturating-solar training

struct TrainedFleet {
    Dataset data;
    BuildingTopology topo = BuildingTopology::chain(3);
    SequenceSplit split;
    double linear_mae = 0.0;
    std::vector<std::unique_ptr<PcnnModel>> pcnns;
    std::vector<double> pcnn_mae;
    std::vector<std::unique_ptr<BlackboxModel>> blackboxes;
    std::size_t best = 0;
};

TrainedFleet train_fleet() {
    TrainedFleet fleet;
    PlantConfig plant;
    plant.nonlinearity = Nonlinearity::SaturatingSolar;
    SimulationResult sim = simulate(plant, Controller::RandomExcitation, 28, 101);
    fleet.data = std::move(sim.data);
    fleet.topo = plant.topology;
    fleet.split = build_sequences(fleet.data, 101);

    LinearModel lin = fit_linear(fleet.data, fleet.split.train, fleet.topo, {});
    fleet.linear_mae = evaluate_metrics(lin, fleet.data, fleet.split.val).mae;

    for (std::uint64_t seed : {1, 2, 3}) {
        TrainingConfig tc;
        tc.learning_rate = 2e-3;
        tc.batch_sequences = 16;
        tc.max_epochs = 12;
        tc.patience = 4;
        tc.train_window_cap = 96;
        tc.seed = seed;

        auto model = std::make_unique<PcnnModel>(PcnnVariant::S, fleet.topo, desk_net(), PhysicsScales{}, seed);
        train(*model, fleet.data, fleet.split, tc);
        fleet.pcnn_mae.push_back(evaluate_metrics(*model, fleet.data, fleet.split.val).mae);
        fleet.pcnns.push_back(std::move(model));

        auto bbx = std::make_unique<BlackboxModel>(fleet.topo, desk_net(), seed);
        tc.max_epochs = 8;
        train(*bbx, fleet.data, fleet.split, tc);
        fleet.blackboxes.push_back(std::move(bbx));
    }
    fleet.best = static_cast<std::size_t>(
        std::min_element(fleet.pcnn_mae.begin(), fleet.pcnn_mae.end()) - fleet.pcnn_mae.begin());
    return fleet;
}

bool criterion6(const TrainedFleet& fleet) {
    double best = fleet.pcnn_mae[fleet.best];
    notef("PCNN val MAE {%.4f, %.4f, %.4f} vs linear %.4f (need best <= 0.8x linear)",
          fleet.pcnn_mae[0], fleet.pcnn_mae[1], fleet.pcnn_mae[2], fleet.linear_mae);
    return best <= 0.8 * fleet.linear_mae;
}

std::size_t negative_gradients(const DynamicsModel& model, const Dataset& data,
                               const SequenceSet& windows) {
    GradientReport merged;
    std::size_t budget = std::min<std::size_t>(windows.windows.size(), 8);
    for (std::size_t i = 0; i < budget; ++i) {
        Window w = windows.windows[i];
        if (w.len > 48) w.len = 48;
        SeriesView sv{&data, w};
        GradientReport r = final_step_gradients(model, sv);
        merged.entries.insert(merged.entries.end(), r.entries.begin(), r.entries.end());
    }
    merged.tally();
    return merged.negative;
}

bool criterion7(const TrainedFleet& fleet) {
    std::size_t bbx_bad_seeds = 0, pcnn_neg_total = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        std::size_t p = negative_gradients(*fleet.pcnns[i], fleet.data, fleet.split.val);
        std::size_t b = negative_gradients(*fleet.blackboxes[i], fleet.data, fleet.split.val);
        pcnn_neg_total += p;
        if (b > 0) ++bbx_bad_seeds;
    }
    notef("PCNN negative gradients %zu (need 0); blackbox seeds with negatives %zu/3 (need >= 2)",
          pcnn_neg_total, bbx_bad_seeds);
    return pcnn_neg_total == 0 && bbx_bad_seeds >= 2;
}

bool criterion8(const TrainedFleet& fleet) {
    const PcnnModel& model = *fleet.pcnns[fleet.best];
    Window w = fleet.split.val.windows.front();
    if (w.len > 96) w.len = 96;

    auto run_pattern = [&](double level) {
        Dataset d = fleet.data;
        for (std::size_t k = w.start + kWarmStartSteps - 1; k < w.start + w.len; ++k)
            for (std::size_t z = 0; z < d.zone_count; ++z)
                d.u[k][z] = z == 0 ? level : 0.0;
        SeriesView sv{&d, w};
        return model.rollout(sv);
    };
    Trace heat = run_pattern(500.0);
    Trace off = run_pattern(0.0);

    bool heated_all_up = true;
    std::vector<std::size_t> onset(fleet.data.zone_count, w.len);
    for (std::size_t k = kWarmStartSteps; k < w.len; ++k)
        for (std::size_t z = 0; z < fleet.data.zone_count; ++z) {
            double diff = heat.T[k][z] - off.T[k][z];
            if (z == 0 && !(diff > 0.0)) heated_all_up = false;
            if (diff > 1e-12 && onset[z] == w.len) onset[z] = k;
        }
    bool order_ok = true;
    for (std::size_t z = 0; z < fleet.data.zone_count; ++z)
        for (std::size_t y = 0; y < fleet.data.zone_count; ++y)
            if (fleet.topo.distance(0, z) < fleet.topo.distance(0, y) && !(onset[z] < onset[y]))
                order_ok = false;
    notef("onsets {%zu, %zu, %zu} after warm start %zu", onset[0], onset[1], onset[2],
          static_cast<std::size_t>(kWarmStartSteps));
    return heated_all_up && order_ok;
}

// --------------------------------------------- criterion 9: PiNN penalty

bool criterion9() {
    SyntheticSpec s;
    s.steps = kWarmStartSteps + 8;
    s.T = [](std::size_t k, std::size_t z) { return 21.0 + 0.2 * z + 0.03 * k; };
    s.u = [](std::size_t k, std::size_t z) { return (k + z) % 2 ? 310.0 : -270.0; };
    Dataset d = make_dataset(s);
    PcnnModel model(PcnnVariant::S, BuildingTopology::chain(3), desk_net(), {}, 5);

    ad::Tape tape;
    RolloutOptions opt;
    opt.record_inputs = true;
    std::vector<SeriesView> series{whole_series(d), {&d, {0, kWarmStartSteps + 5}}};
    std::vector<TapeRollout> rollouts;
    for (const SeriesView& sv : series) rollouts.push_back(model.roll(tape, sv, opt));

    double data_term = mse_loss(rollouts, series).scalar();
    double zero_lambda = pinn_loss(tape, rollouts, series, 0.0).scalar();
    bool exact = data_term == zero_lambda;

    // hand-built negative-gradient rollout: d(T)/du = -0.3, so
    // L_phys = relu(0.3) = 0.3
    ad::Tape t2;
    TapeRollout ro;
    ad::Var u = t2.leaf({100.0});
    ro.u_leaves.push_back(u);
    ro.T_pred.push_back(ad::smul(u, -0.3));
    double phys = pinn_penalty(t2, ro).scalar();
    bool hand_ok = std::abs(phys - 0.3) <= 1e-12;
    notef("lambda=0 loss %s data term; hand-built L_phys = %.15f", exact ? "equals" : "differs from",
          phys);
    return exact && hand_ok;
}

// ----------------------------------------- criterion 10: CLI determinism

std::string strip_created(std::string s) {
    auto pos = s.find("created ");
    if (pos == std::string::npos) return s;
    auto eol = s.find('\n', pos);
    s.erase(pos, eol - pos + 1);
    return s;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool criterion10() {
    const char* cli = std::getenv("PCNN_CLI_PATH");
#ifdef PCNN_CLI_PATH
    if (!cli) cli = PCNN_CLI_PATH;
#endif
    if (!cli) {
        notef("PCNN_CLI_PATH not set");
        return false;
    }
    fs::path root = fs::temp_directory_path() / "pcnn-acceptance";
    fs::remove_all(root);

    auto pipeline = [&](const fs::path& dir) -> bool {
        fs::create_directories(dir);
        fs::path cfg = dir / "cfg.json";
        std::ofstream(cfg) << "{\"days\": 2, \"arx_delta\": 2, \"seeds\": [5],\n"
                              " \"net\": {\"encoder_width\": 4, \"recurrent_width\": 4, "
                              "\"decoder_width\": 4},\n"
                              " \"training\": {\"max_epochs\": 2, \"patience\": 1, "
                              "\"batch_sequences\": 8, \"train_window_cap\": 48}}\n";
        auto run = [&](const std::string& args) {
            std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
            int status = std::system(cmd.c_str());
            return WIFEXITED(status) && WEXITSTATUS(status) == 0;
        };
        std::string c = cfg.string(), data = (dir / "data.csv").string();
        bool ok = run("simulate --config " + c + " --out " + data);
        ok = ok && run("train --config " + c + " --data " + data + " --model arx --out " +
                       (dir / "arx.ckpt").string());
        ok = ok && run("train --config " + c + " --data " + data + " --model s-pcnn --out " +
                       (dir / "pcnn.ckpt").string());
        ok = ok && run("evaluate --ckpt " + (dir / "arx.ckpt").string() + " --data " + data +
                       " --out " + (dir / "arx.report").string());
        ok = ok && run("evaluate --ckpt " + (dir / "pcnn.ckpt").string() + " --data " + data +
                       " --out " + (dir / "pcnn.report").string());
        ok = ok && run("verify --ckpt " + (dir / "arx.ckpt").string() + " --data " + data +
                       " --out " + (dir / "arx.verify").string());
        ok = ok && run("whatif --ckpt " + (dir / "pcnn.ckpt").string() + " --data " + data +
                       " --zone 1 --pattern heat --out " + (dir / "what.tsv").string());
        ok = ok && run("compare --reports " + (dir / "arx.report").string() + " " +
                       (dir / "pcnn.report").string() + " --out " + (dir / "cmp.tsv").string());
        return ok;
    };

    if (!pipeline(root / "a") || !pipeline(root / "b")) {
        notef("pipeline run failed");
        return false;
    }
    std::vector<std::string> files{"data.csv",     "data.csv.truth", "arx.ckpt",
                                   "pcnn.ckpt",    "pcnn.ckpt.history.tsv",
                                   "arx.report",   "pcnn.report",    "arx.verify",
                                   "what.tsv",     "cmp.tsv"};
    std::size_t mismatched = 0;
    for (const std::string& f : files) {
        std::string a = strip_created(read_file(root / "a" / f));
        std::string b = strip_created(read_file(root / "b" / f));
        if (a.empty() || a != b) ++mismatched;
    }
    notef("%zu/%zu pipeline artifacts byte-identical (excluding timestamps)",
          files.size() - mismatched, files.size());
    return mismatched == 0;
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    int failures = 0;
    auto report = [&](int idx, const char* name, bool (*fn)()) {
        g_detail.clear();
        auto t0 = clock::now();
        bool ok = fn();
        double secs = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("criterion %2d: %s  %s [%s] (%.1fs)\n", idx, ok ? "PASS" : "FAIL", name,
                    g_detail.c_str(), secs);
        std::fflush(stdout);
        if (!ok) ++failures;
    };

    report(1, "autodiff matches finite differences", &criterion1);

    {
        g_detail.clear();
        auto fixtures = make_sign_fixtures();
        auto timed = [&](int idx, const char* name, bool ok, double secs) {
            std::printf("criterion %2d: %s  %s [%s] (%.1fs)\n", idx, ok ? "PASS" : "FAIL", name,
                        g_detail.c_str(), secs);
            std::fflush(stdout);
            if (!ok) ++failures;
            g_detail.clear();
        };
        auto t0 = clock::now();
        bool ok2 = criterion2(fixtures);
        timed(2, "heat-propagation sign structure (100 random plants)", ok2,
              std::chrono::duration<double>(clock::now() - t0).count());
        t0 = clock::now();
        bool ok3 = criterion3(fixtures);
        timed(3, "power/ambient sign structure (100 random plants)", ok3,
              std::chrono::duration<double>(clock::now() - t0).count());
    }

    report(4, "X/M/S variants share the physics exactly", &criterion4);
    report(5, "linear-plant coefficient recovery", &criterion5);

    {
        auto t0 = clock::now();
        TrainedFleet fleet = train_fleet();
        double prep = std::chrono::duration<double>(clock::now() - t0).count();
        std::printf("-- trained fixture for criteria 6-8 in %.1fs\n", prep);
        std::fflush(stdout);

        auto timed = [&](int idx, const char* name, bool (*fn)(const TrainedFleet&)) {
            g_detail.clear();
            auto s0 = clock::now();
            bool ok = fn(fleet);
            std::printf("criterion %2d: %s  %s [%s] (%.1fs)\n", idx, ok ? "PASS" : "FAIL", name,
                        g_detail.c_str(),
                        std::chrono::duration<double>(clock::now() - s0).count());
            std::fflush(stdout);
            if (!ok) ++failures;
        };
        timed(6, "PCNN beats the linear model by >= 20% val MAE", &criterion6);
        timed(7, "consistency separation vs the black box", &criterion7);
        timed(8, "what-if heating propagates by graph distance", &criterion8);
    }

    report(9, "PiNN penalty mechanics", &criterion9);
    report(10, "CLI pipelines are deterministic", &criterion10);

    if (failures) std::printf("ACCEPTANCE: %d criterion(s) FAILED\n", failures);
    else std::printf("ACCEPTANCE: all criteria passed\n");
    return failures == 0 ? 0 : 1;
}
