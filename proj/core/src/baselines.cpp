#include "pcnn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include <Eigen/Dense>

#include "pcnn/errors.hpp"

namespace pcnn {

namespace {

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

const std::vector<double>& q_win_at(const SeriesView& series, std::size_t k) {
    if (!series.data->has_q_win())
        throw DataError("gray-box model: dataset has no engineered Q_win column");
    return series.data->Q_win[series.abs(k)];
}

void check_len(const SeriesView& series, std::size_t warm_len) {
    if (series.len() < warm_len + 1)
        throw DataError("rollout: series shorter than warm start + 1 step");
}

}  // namespace

// ---------------------------------------------------------------- LinearModel

LinearModel::LinearModel(BuildingTopology topo, EffectivePhysics eff, std::vector<double> e)
    : topo_(std::move(topo)), eff_(std::move(eff)), e_(std::move(e)) {
    const std::size_t m = topo_.zone_count();
    if (eff_.a_h.size() != m || eff_.a_c.size() != m || eff_.b.size() != m || e_.size() != m ||
        eff_.c.size() != topo_.edges().size())
        throw ConfigError("linear model: coefficient length mismatch");
    for (double v : eff_.a_h)
        if (v <= 0) throw ConfigError("linear model: nonpositive coefficient");
    for (double v : eff_.a_c)
        if (v <= 0) throw ConfigError("linear model: nonpositive coefficient");
    for (double v : eff_.b)
        if (v <= 0) throw ConfigError("linear model: nonpositive coefficient");
    for (double v : eff_.c)
        if (v <= 0) throw ConfigError("linear model: nonpositive coefficient");
    for (double v : e_)
        if (v <= 0) throw ConfigError("linear model: nonpositive coefficient");
}

std::vector<double> LinearModel::step_values(const std::vector<double>& T, double T_out,
                                             const std::vector<double>& u,
                                             const std::vector<double>& q_win) const {
    return plant_linear_step(T, T_out, u, q_win, eff_, e_, topo_);
}

TapeRollout LinearModel::roll(ad::Tape& tape, const SeriesView& series,
                              const RolloutOptions& opt) const {
    TapeRollout ro;
    check_len(series, ro.warm_len);
    const std::size_t L = series.len();
    const std::size_t b = ro.warm_len - 1;
    BoundPhysics phys = bind_physics_const(tape, eff_);

    ad::Var T = opt.record_inputs ? tape.leaf(series.T(b)) : tape.constant(series.T(b));
    if (opt.record_inputs) ro.t_start = T;
    for (std::size_t k = b; k + 1 < L; ++k) {
        ad::Var u_k = bind_u(tape, series, k, opt.record_inputs, ro);
        ad::Var tout_k = bind_tout(tape, series, k, opt.record_inputs, ro);
        const auto& qw = q_win_at(series, k);
        std::vector<double> gain(qw.size());
        for (std::size_t z = 0; z < qw.size(); ++z) gain[z] = e_[z] * qw[z];
        // energy_step with E := T applies the physics increments to T itself
        T = ad::add(energy_step(T, T, tout_k, u_k, phys, topo_), tape.constant(std::move(gain)));
        ro.T_pred.push_back(T);
    }
    return ro;
}

void LinearModel::for_each_param(const ParamVisitor& fn) {
    fn("lin.a_h", eff_.a_h.size(), 1, eff_.a_h);
    fn("lin.a_c", eff_.a_c.size(), 1, eff_.a_c);
    fn("lin.b", eff_.b.size(), 1, eff_.b);
    if (!eff_.c.empty()) fn("lin.c", eff_.c.size(), 1, eff_.c);
    fn("lin.e", e_.size(), 1, e_);
}

std::size_t LinearModel::count_parameters() {
    return eff_.a_h.size() + eff_.a_c.size() + eff_.b.size() + eff_.c.size() + e_.size();
}

// ----------------------------------------------------------------- fit_linear

namespace {

struct LinearObjective {
    const Dataset* data;
    const BuildingTopology* topo;
    std::vector<std::pair<std::size_t, std::size_t>> starts;  // (abs index, horizon)
    std::size_t m, n_edges;

    double operator()(const std::vector<double>& logp) const {
        EffectivePhysics eff;
        std::vector<double> e(m);
        std::size_t i = 0;
        auto take = [&](std::size_t n) {
            std::vector<double> out(n);
            for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(logp[i++]);
            return out;
        };
        eff.a_h = take(m);
        eff.a_c = take(m);
        eff.b = take(m);
        eff.c = take(n_edges);
        e = take(m);

        double acc = 0.0;
        std::size_t terms = 0;
        for (auto [k0, horizon] : starts) {
            std::vector<double> T = data->T[k0];
            for (std::size_t s = 0; s < horizon; ++s) {
                std::size_t k = k0 + s;
                T = plant_linear_step(T, data->T_out[k], data->u[k], data->Q_win[k], eff, e,
                                      *topo);
                const auto& meas = data->T[k + 1];
                for (std::size_t z = 0; z < m; ++z) {
                    double d = T[z] - meas[z];
                    acc += d * d;
                    ++terms;
                }
            }
        }
        return terms ? acc / static_cast<double>(terms) : 0.0;
    }
};

}  // namespace

LinearModel fit_linear(const Dataset& data, const SequenceSet& windows,
                       const BuildingTopology& topo, const LinearFitConfig& cfg) {
    if (windows.windows.empty() || data.size() == 0)
        throw DataError("fit_linear: empty dataset or window set");
    if (!data.has_q_win()) throw DataError("fit_linear: dataset has no Q_win column");
    const std::size_t m = topo.zone_count();
    const std::size_t n_edges = topo.edges().size();
    const std::size_t dims = 4 * m + n_edges;

    LinearObjective obj;
    obj.data = &data;
    obj.topo = &topo;
    obj.m = m;
    obj.n_edges = n_edges;
    for (const Window& w : windows.windows)
        for (std::size_t o = 0; o + cfg.horizon + 1 <= w.len; o += 4)
            obj.starts.emplace_back(w.start + o, cfg.horizon);
    if (obj.starts.size() > 2000) obj.starts.resize(2000);

    // log-uniform search boxes per coefficient family
    auto box_of = [&](std::size_t i) -> std::pair<double, double> {
        if (i < 2 * m) return {std::log(1e-5), std::log(1e-3)};        // a_h, a_c
        if (i < 3 * m) return {std::log(2e-4), std::log(5e-2)};        // b
        if (i < 3 * m + n_edges) return {std::log(2e-4), std::log(5e-2)};  // c
        return {std::log(1e-4), std::log(2e-2)};                       // e
    };

    std::vector<double> best(dims);
    for (std::size_t i = 0; i < dims; ++i) {
        auto [lo, hi] = box_of(i);
        best[i] = 0.5 * (lo + hi);  // seeded initial guess: box center
    }
    std::size_t evals = 0;
    double best_f = cfg.budget > 0 ? obj(best) : 0.0;
    if (cfg.budget > 0) ++evals;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst_f = best_f;
    for (std::size_t r = 0; r + 1 < cfg.random_phase && evals < cfg.budget; ++r) {
        std::vector<double> cand(dims);
        for (std::size_t i = 0; i < dims; ++i) {
            auto [lo, hi] = box_of(i);
            cand[i] = lo + (hi - lo) * unit(rng);
        }
        double f = obj(cand);
        ++evals;
        worst_f = std::max(worst_f, f);
        if (f < best_f) {
            best_f = f;
            best = cand;
        }
    }

    // Coordinate-wise golden-section refinement in log space. Plain coordinate
    // descent zig-zags badly here (the heat-transfer coefficients are strongly
    // coupled through the shared trajectories), so each sweep is followed by a
    // Hooke-Jeeves pattern move along the sweep displacement, which restores
    // fast convergence within the fixed evaluation budget.
    const double gr = 0.6180339887498949;
    const double half = 0.4;       // bracket half-width in log space
    const std::size_t line_iters = 8;
    while (evals + 2 <= cfg.budget) {
        std::vector<double> sweep_start = best;
        for (std::size_t i = 0; i < dims && evals + 2 <= cfg.budget; ++i) {
            double lo = best[i] - half;
            double hi = best[i] + half;
            double x1 = hi - gr * (hi - lo);
            double x2 = lo + gr * (hi - lo);
            std::vector<double> p = best;
            p[i] = x1;
            double f1 = obj(p);
            p[i] = x2;
            double f2 = obj(p);
            evals += 2;
            for (std::size_t it = 0; it < line_iters && evals < cfg.budget; ++it) {
                if (f1 < f2) {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - gr * (hi - lo);
                    p[i] = x1;
                    f1 = obj(p);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + gr * (hi - lo);
                    p[i] = x2;
                    f2 = obj(p);
                }
                ++evals;
            }
            double cand = f1 < f2 ? x1 : x2;
            p[i] = cand;
            double fc = std::min(f1, f2);
            if (fc < best_f) {
                best_f = fc;
                best[i] = cand;
            }
        }
        for (double t : {1.0, 2.0, 4.0}) {
            if (evals >= cfg.budget) break;
            std::vector<double> cand(dims);
            for (std::size_t i = 0; i < dims; ++i)
                cand[i] = best[i] + t * (best[i] - sweep_start[i]);
            double f = obj(cand);
            ++evals;
            if (f < best_f) {
                best_f = f;
                best = cand;
            }
        }
    }

    EffectivePhysics eff;
    std::vector<double> e(m);
    std::size_t i = 0;
    auto take = [&](std::size_t n) {
        std::vector<double> out(n);
        for (std::size_t j = 0; j < n; ++j) out[j] = std::exp(best[i++]);
        return out;
    };
    eff.a_h = take(m);
    eff.a_c = take(m);
    eff.b = take(m);
    eff.c = take(n_edges);
    e = take(m);
    LinearModel model(topo, std::move(eff), std::move(e));
    if (cfg.budget > 0 && worst_f - best_f <= 1e-18) model.mark_degenerate();
    return model;
}

// --------------------------------------------------------------------- MlpNet

MlpNet::MlpNet(const MlpConfig& cfg) : cfg_(cfg) {
    std::mt19937_64 rng(cfg_.seed);
    auto add = [&](const std::string& name, std::size_t rows, std::size_t cols, bool random) {
        TensorData t;
        t.rows = rows;
        t.cols = cols;
        t.v.assign(rows * cols, 0.0);
        if (random) {
            double bound = 1.0 / std::sqrt(static_cast<double>(cols));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (double& w : t.v) w = dist(rng);
        }
        tensors_.emplace_back(name, std::move(t));
    };
    add("W1", cfg_.hidden, cfg_.input_dim, true);
    add("b1", cfg_.hidden, 1, false);
    add("W2", cfg_.output_dim, cfg_.hidden, true);
    add("b2", cfg_.output_dim, 1, false);
}

void MlpNet::for_each_tensor(const std::function<void(const std::string&, TensorData&)>& fn) {
    for (auto& [name, t] : tensors_) fn(name, t);
}

TensorData& MlpNet::tensor(const std::string& name) {
    for (auto& [n, t] : tensors_)
        if (n == name) return t;
    throw ConfigError("mlp: unknown tensor " + name);
}

ad::Var MlpNet::Bound::operator()(ad::Var x) const {
    return ad::add(ad::matvec(W2, ad::tanh(ad::add(ad::matvec(W1, x), b1))), b2);
}

MlpNet::Bound MlpNet::bind(ad::Tape& tape) const {
    Bound b;
    for (const auto& [name, t] : tensors_) {
        ad::Var v = tape.leaf(t.v, t.rows, t.cols);
        if (name == "W1") b.W1 = v;
        else if (name == "b1") b.b1 = v;
        else if (name == "W2") b.W2 = v;
        else b.b2 = v;
    }
    return b;
}

// -------------------------------------------------------------- ResidualModel

ResidualModel::ResidualModel(LinearModel base, bool consistent, std::size_t hidden,
                             std::uint64_t seed)
    : base_(std::move(base)), consistent_(consistent) {
    MlpConfig mc;
    mc.input_dim = consistent ? kFeatureDim : 2 * base_.zone_count() + kFeatureDim + 1;
    mc.hidden = hidden;
    mc.output_dim = base_.zone_count();
    mc.seed = seed;
    net_ = MlpNet(mc);
}

std::size_t ResidualModel::net_input_dim() const { return net_.config().input_dim; }

TapeRollout ResidualModel::roll(ad::Tape& tape, const SeriesView& series,
                                const RolloutOptions& opt) const {
    TapeRollout ro;
    check_len(series, ro.warm_len);
    const std::size_t L = series.len();
    const std::size_t b = ro.warm_len - 1;
    const std::size_t m = base_.zone_count();
    const BuildingTopology& topo = base_.topology();
    BoundPhysics phys = bind_physics_const(tape, base_.physics());
    MlpNet::Bound f = net_.bind(tape);
    ro.param_leaves.emplace_back("res.W1", f.W1);
    ro.param_leaves.emplace_back("res.b1", f.b1);
    ro.param_leaves.emplace_back("res.W2", f.W2);
    ro.param_leaves.emplace_back("res.b2", f.b2);

    ad::Var T_base = opt.record_inputs ? tape.leaf(series.T(b)) : tape.constant(series.T(b));
    if (opt.record_inputs) ro.t_start = T_base;
    ad::Var T_corr = T_base;  // deployment feedback path for the full-schema net
    const auto& e = base_.solar_gain();

    for (std::size_t k = b; k + 1 < L; ++k) {
        ad::Var u_k = bind_u(tape, series, k, opt.record_inputs, ro);
        ad::Var tout_k = bind_tout(tape, series, k, opt.record_inputs, ro);
        const auto& qw = q_win_at(series, k);
        std::vector<double> gain(m);
        for (std::size_t z = 0; z < m; ++z) gain[z] = e[z] * qw[z];
        T_base = ad::add(energy_step(T_base, T_base, tout_k, u_k, phys, topo),
                         tape.constant(std::move(gain)));

        ad::Var fin;
        if (consistent_) {
            fin = tape.constant(series.features(k));
        } else {
            std::vector<ad::Var> parts{
                ad::smul(T_corr, 1.0 / 30.0), tape.constant(series.features(k)),
                ad::smul(u_k, 1e-3), ad::smul(ad::broadcast(tout_k, 1), 1.0 / 30.0)};
            fin = ad::concat(parts);
        }
        T_corr = ad::add(T_base, f(fin));
        ro.T_pred.push_back(T_corr);
    }
    return ro;
}

void ResidualModel::for_each_param(const ParamVisitor& fn) {
    net_.for_each_tensor([&](const std::string& name, TensorData& t) {
        fn("res." + name, t.rows, t.cols, t.v);
    });
}

std::size_t ResidualModel::count_parameters() {
    std::size_t n = 0;
    net_.for_each_tensor([&](const std::string&, TensorData& t) { n += t.v.size(); });
    return n;
}

std::vector<double> ResidualModel::net_input(const SeriesView& series, std::size_t k,
                                             const std::vector<double>& T_prev) const {
    std::vector<double> x = series.features(k);
    if (consistent_) return x;
    std::vector<double> full;
    full.reserve(net_input_dim());
    for (double t : T_prev) full.push_back(t / 30.0);
    for (double v : x) full.push_back(v);
    for (double u : series.u(k)) full.push_back(u * 1e-3);
    full.push_back(series.T_out(k) / 30.0);
    return full;
}

void fit_residual(ResidualModel& model, const Dataset& data, const SequenceSet& windows,
                  const ResidualFitConfig& cfg) {
    cfg.training.validate();
    if (windows.windows.empty()) throw DataError("fit_residual: empty window set");
    const std::size_t m = model.zone_count();

    struct Pair {
        std::vector<double> input, target;
    };
    std::vector<Pair> pairs;
    for (const Window& w : windows.windows) {
        SeriesView sv{&data, w};
        if (cfg.targets == ResidualTargets::FreeRollout) {
            Trace tr = model.base().rollout(sv);
            for (std::size_t k = tr.warm_len; k < sv.len(); ++k) {
                Pair p;
                p.input = model.net_input(sv, k - 1, sv.T(k - 1));
                p.target.resize(m);
                for (std::size_t z = 0; z < m; ++z) p.target[z] = sv.T(k)[z] - tr.T[k][z];
                pairs.push_back(std::move(p));
            }
        } else {
            for (std::size_t k = kWarmStartSteps; k < sv.len(); ++k) {
                std::vector<double> pred = model.base().step_values(
                    sv.T(k - 1), sv.T_out(k - 1), sv.u(k - 1),
                    data.Q_win[sv.abs(k - 1)]);
                Pair p;
                p.input = model.net_input(sv, k - 1, sv.T(k - 1));
                p.target.resize(m);
                for (std::size_t z = 0; z < m; ++z) p.target[z] = sv.T(k)[z] - pred[z];
                pairs.push_back(std::move(p));
            }
        }
    }
    if (pairs.empty()) throw DataError("fit_residual: no training pairs");

    AdamState adam;
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t batch = std::max<std::size_t>(cfg.training.batch_sequences, 32);

    for (std::size_t epoch = 0; epoch < cfg.training.max_epochs; ++epoch) {
        std::mt19937_64 rng(cfg.training.seed * 0x1000193u + epoch);
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t base = 0; base < order.size(); base += batch) {
            ad::Tape tape;
            MlpNet::Bound f = model.net().bind(tape);
            ad::Var acc = tape.constant_scalar(0.0);
            std::size_t count = 0;
            for (std::size_t i = base; i < std::min(base + batch, order.size()); ++i) {
                const Pair& p = pairs[order[i]];
                ad::Var pred = f(tape.constant(p.input));
                acc = ad::add(acc, ad::sum(ad::square(ad::sub(pred, tape.constant(p.target)))));
                ++count;
            }
            ad::Var loss = ad::smul(acc, 1.0 / static_cast<double>(count * m));
            auto adj = tape.backward(loss);
            GradMap grads;
            auto grab = [&](const char* name, ad::Var leaf) {
                std::vector<double> g(leaf.size(), 0.0);
                auto it = adj.find(leaf.id);
                if (it != adj.end()) {
                    auto s = it->second.value();
                    g.assign(s.begin(), s.end());
                }
                grads.emplace(std::string("res.") + name, std::move(g));
            };
            grab("W1", f.W1);
            grab("b1", f.b1);
            grab("W2", f.W2);
            grab("b2", f.b2);
            optimizer_step(model, grads, adam, cfg.training);
        }
    }
}

// ------------------------------------------------------------------- ArxModel

ArxModel::ArxModel(std::size_t zone_count, std::size_t delta) : m_(zone_count), delta_(delta) {
    alpha_.assign(delta_ + 1, std::vector<double>(m_ * m_, 0.0));
    beta_.assign(delta_ + 1, std::vector<double>(m_ * exo_dim(), 0.0));
}

std::vector<double> ArxModel::predict(const std::vector<std::vector<double>>& T_hist,
                                      const std::vector<std::vector<double>>& exo_hist) const {
    if (T_hist.size() < delta_ + 1 || exo_hist.size() < delta_ + 1)
        throw DataError("arx: history shorter than lag order + 1");
    std::vector<double> out(m_, 0.0);
    for (std::size_t lag = 0; lag <= delta_; ++lag) {
        const auto& T = T_hist[T_hist.size() - 1 - lag];
        const auto& w = exo_hist[exo_hist.size() - 1 - lag];
        for (std::size_t r = 0; r < m_; ++r) {
            for (std::size_t c = 0; c < m_; ++c) out[r] += alpha_[lag][r * m_ + c] * T[c];
            for (std::size_t c = 0; c < exo_dim(); ++c)
                out[r] += beta_[lag][r * exo_dim() + c] * w[c];
        }
    }
    return out;
}

TapeRollout ArxModel::roll(ad::Tape& tape, const SeriesView& series,
                           const RolloutOptions& opt) const {
    TapeRollout ro;
    check_len(series, ro.warm_len);
    if (delta_ + 1 > ro.warm_len)
        throw ConfigError("arx: lag order exceeds the warm-start history");
    const std::size_t L = series.len();
    const std::size_t b = ro.warm_len - 1;

    std::vector<ad::Var> alpha_c(delta_ + 1), beta_c(delta_ + 1);
    for (std::size_t lag = 0; lag <= delta_; ++lag) {
        alpha_c[lag] = tape.constant(alpha_[lag], m_, m_);
        beta_c[lag] = tape.constant(beta_[lag], m_, exo_dim());
    }

    // rolling histories; index L-1 is the most recent step
    std::deque<ad::Var> T_hist, exo_hist;
    auto exo_of = [&](std::size_t k, ad::Var u_k, ad::Var tout_k) {
        std::vector<ad::Var> parts{u_k, ad::broadcast(tout_k, 1),
                                   tape.constant_scalar(series.Q_sun(k))};
        return ad::concat(parts);
    };
    for (std::size_t k = b + 1 - (delta_ + 1); k < b; ++k) {
        T_hist.push_back(tape.constant(series.T(k)));
        ad::Var u_c = tape.constant(series.u(k));
        ad::Var tout_c = tape.constant_scalar(series.T_out(k));
        exo_hist.push_back(exo_of(k, u_c, tout_c));
    }
    T_hist.push_back(opt.record_inputs ? tape.leaf(series.T(b)) : tape.constant(series.T(b)));
    if (opt.record_inputs) ro.t_start = T_hist.back();

    for (std::size_t k = b; k + 1 < L; ++k) {
        ad::Var u_k = bind_u(tape, series, k, opt.record_inputs, ro);
        ad::Var tout_k = bind_tout(tape, series, k, opt.record_inputs, ro);
        exo_hist.push_back(exo_of(k, u_k, tout_k));

        ad::Var next = tape.constant(std::vector<double>(m_, 0.0));
        for (std::size_t lag = 0; lag <= delta_; ++lag) {
            next = ad::add(next, ad::matvec(alpha_c[lag], T_hist[T_hist.size() - 1 - lag]));
            next = ad::add(next, ad::matvec(beta_c[lag], exo_hist[exo_hist.size() - 1 - lag]));
        }
        ro.T_pred.push_back(next);
        T_hist.push_back(next);
        if (T_hist.size() > delta_ + 1) T_hist.pop_front();
        if (exo_hist.size() > delta_ + 1) exo_hist.pop_front();
    }
    return ro;
}

void ArxModel::for_each_param(const ParamVisitor& fn) {
    for (std::size_t lag = 0; lag <= delta_; ++lag) {
        fn("arx.alpha" + std::to_string(lag), m_, m_, alpha_[lag]);
        fn("arx.beta" + std::to_string(lag), m_, exo_dim(), beta_[lag]);
    }
}

std::size_t ArxModel::count_parameters() {
    return (delta_ + 1) * (m_ * m_ + m_ * exo_dim());
}

ArxModel arx_fit(const Dataset& data, const SequenceSet& windows, std::size_t delta) {
    if (windows.windows.empty()) throw DataError("arx_fit: empty window set");
    const std::size_t m = data.zone_count;
    ArxModel model(m, delta);
    const std::size_t exo = model.exo_dim();
    const std::size_t cols = (delta + 1) * (m + exo);

    // deduplicate overlapping windows at the record level
    std::vector<char> usable(data.size(), 0);
    for (const Window& w : windows.windows)
        for (std::size_t k = w.start + delta; k + 1 < w.start + w.len; ++k) usable[k] = 1;
    std::vector<std::size_t> rows_k;
    for (std::size_t k = 0; k < usable.size(); ++k)
        if (usable[k]) rows_k.push_back(k);
    if (rows_k.size() < cols) throw DataError("arx_fit: fewer regression rows than coefficients");

    Eigen::MatrixXd X(rows_k.size(), cols);
    Eigen::MatrixXd Y(rows_k.size(), m);
    for (std::size_t r = 0; r < rows_k.size(); ++r) {
        std::size_t k = rows_k[r];
        std::size_t col = 0;
        for (std::size_t lag = 0; lag <= delta; ++lag)
            for (std::size_t z = 0; z < m; ++z) X(r, col++) = data.T[k - lag][z];
        for (std::size_t lag = 0; lag <= delta; ++lag) {
            for (std::size_t z = 0; z < m; ++z) X(r, col++) = data.u[k - lag][z];
            X(r, col++) = data.T_out[k - lag];
            X(r, col++) = data.Q_sun[k - lag];
        }
        for (std::size_t z = 0; z < m; ++z) Y(r, z) = data.T[k + 1][z];
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    double smax = svd.singularValues()(0);
    double smin = svd.singularValues()(svd.singularValues().size() - 1);
    model.condition_ = smin > 0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(smax > 0.0) || !std::isfinite(smax))
        throw NumericError("arx_fit: rank-deficient design matrix, condition number " +
                           std::to_string(model.condition_));
    // Noiseless data generated by a linear plant makes the lag-0 temperature
    // columns exact combinations of the lag-1 columns (the plant recursion holds
    // row by row), so collinearity here is expected rather than pathological.
    // Solve minimum-norm least squares over the numerically independent
    // directions; the dropped null directions vanish along any trajectory of
    // the same plant, so predictions are unaffected.
    svd.setThreshold(kArxRankTol);
    if (svd.rank() == 0)
        throw NumericError("arx_fit: rank-deficient design matrix, condition number " +
                           std::to_string(model.condition_));
    Eigen::MatrixXd B = svd.solve(Y);  // cols x m

    for (std::size_t lag = 0; lag <= delta; ++lag)
        for (std::size_t z = 0; z < m; ++z)
            for (std::size_t c = 0; c < m; ++c)
                model.alpha(lag)[z * m + c] = B(lag * m + c, z);
    const std::size_t exo_base = (delta + 1) * m;
    for (std::size_t lag = 0; lag <= delta; ++lag)
        for (std::size_t z = 0; z < m; ++z)
            for (std::size_t c = 0; c < exo; ++c)
                model.beta(lag)[z * exo + c] = B(exo_base + lag * exo + c, z);
    return model;
}

// -------------------------------------------------------------- BlackboxModel

BlackboxModel::BlackboxModel(BuildingTopology topo, const BlackBoxConfig& cfg,
                             std::uint64_t seed)
    : topo_(std::move(topo)) {
    BlackBoxConfig full = cfg;
    full.input_dim = 2 * topo_.zone_count() + kFeatureDim + 1;
    full.output_dim = topo_.zone_count();
    full.cell = CellKind::Lstm;
    full.seed = seed;
    net_ = BlackBoxNet(full);
}

std::vector<double> BlackboxModel::full_input(const SeriesView& series, std::size_t k) const {
    std::vector<double> full;
    full.reserve(net_.config().input_dim);
    for (double t : series.T(k)) full.push_back(t / 30.0);
    for (double v : series.features(k)) full.push_back(v);
    for (double u : series.u(k)) full.push_back(u * 1e-3);
    full.push_back(series.T_out(k) / 30.0);
    return full;
}

TapeRollout BlackboxModel::roll(ad::Tape& tape, const SeriesView& series,
                                const RolloutOptions& opt) const {
    TapeRollout ro;
    check_len(series, ro.warm_len);
    const std::size_t L = series.len();
    const std::size_t b = ro.warm_len - 1;

    ro.bound_nets.push_back(net_.bind(tape, "net."));
    ro.bound_net_owner.push_back(0);
    BoundNet& bn = ro.bound_nets.back();
    for (const auto& [name, leaf] : bn.leaves()) ro.param_leaves.emplace_back(name, leaf);
    RecurrentState state = bn.initial_state(tape);

    for (std::size_t k = 0; k < b; ++k) {
        ad::Var x = tape.constant(full_input(series, k));
        bn.step(x, state);
    }

    ad::Var T = opt.record_inputs ? tape.leaf(series.T(b)) : tape.constant(series.T(b));
    if (opt.record_inputs) ro.t_start = T;

    for (std::size_t k = b; k + 1 < L; ++k) {
        ad::Var u_k = bind_u(tape, series, k, opt.record_inputs, ro);
        ad::Var tout_k = bind_tout(tape, series, k, opt.record_inputs, ro);
        std::vector<ad::Var> parts{ad::smul(T, 1.0 / 30.0), tape.constant(series.features(k)),
                                   ad::smul(u_k, 1e-3),
                                   ad::smul(ad::broadcast(tout_k, 1), 1.0 / 30.0)};
        ad::Var x = ad::concat(parts);
        T = ad::add(T, bn.step(x, state));
        ro.T_pred.push_back(T);
    }
    return ro;
}

void BlackboxModel::for_each_param(const ParamVisitor& fn) {
    net_.for_each_tensor([&](const std::string& name, TensorData& t) {
        fn("net." + name, t.rows, t.cols, t.v);
    });
}

std::size_t BlackboxModel::count_parameters() { return net_.scalar_count(); }

void BlackboxModel::absorb_rollout_stats(const TapeRollout& ro) {
    for (const BoundNet& bn : ro.bound_nets) {
        const auto& acts = bn.pre_norm_activations();
        if (acts.empty()) continue;
        std::vector<std::vector<double>> vals;
        vals.reserve(acts.size());
        for (ad::Var v : acts) {
            auto s = v.value();
            vals.emplace_back(s.begin(), s.end());
        }
        net_.update_norm_stats(vals);
    }
}

// ------------------------------------------------------------------ PiNN loss

ad::Var pinn_penalty(ad::Tape& tape, const TapeRollout& ro) {
    if (ro.u_leaves.empty() && ro.t_out_leaves.empty())
        throw ConfigError("pinn: rollout was recorded without input leaves");
    ad::Var acc = tape.constant_scalar(0.0);
    ad::Var last = ro.T_pred.back();
    for (std::size_t z = 0; z < last.size(); ++z) {
        ad::Var out_z = ad::sum(ad::slice(last, z, 1));
        auto adj = tape.backward(out_z);
        auto add_terms = [&](const std::vector<ad::Var>& leaves) {
            for (ad::Var leaf : leaves) {
                auto it = adj.find(leaf.id);
                if (it == adj.end()) continue;  // structurally zero gradient
                acc = ad::add(acc, ad::sum(ad::relu(ad::smul(it->second, -1.0))));
            }
        };
        add_terms(ro.u_leaves);
        add_terms(ro.t_out_leaves);
    }
    return acc;
}

ad::Var pinn_loss(ad::Tape& tape, const std::vector<TapeRollout>& rollouts,
                  const std::vector<SeriesView>& series, double lambda) {
    if (lambda < 0.0) throw ConfigError("pinn: lambda must be nonnegative");
    ad::Var data_term = mse_loss(rollouts, series);
    if (lambda == 0.0) return data_term;
    ad::Var phys = tape.constant_scalar(0.0);
    for (const TapeRollout& ro : rollouts) phys = ad::add(phys, pinn_penalty(tape, ro));
    phys = ad::smul(phys, lambda / static_cast<double>(rollouts.size()));
    return ad::add(data_term, phys);
}

}  // namespace pcnn
