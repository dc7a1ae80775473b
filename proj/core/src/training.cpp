#include "pcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pcnn/baselines.hpp"
#include "pcnn/errors.hpp"

namespace pcnn {

void TrainingConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("training: learning rate must be positive");
    if (batch_sequences < 1) throw ConfigError("training: batch size must be >= 1");
    if (max_epochs < 1) throw ConfigError("training: max epochs must be >= 1");
    if (train_window_cap != 0 && train_window_cap < kWarmStartSteps + 1)
        throw ConfigError("training: window cap shorter than warm start + 1");
}

std::vector<Window> enumerate_windows(const Dataset& data) {
    std::vector<Window> out;
    const std::size_t n = data.size();
    std::size_t run_start = 0;
    auto flush_run = [&](std::size_t run_end) {  // [run_start, run_end)
        std::size_t R = run_end - run_start;
        for (std::size_t o = 0; o + kMinWindowSteps <= R; o += kWindowStride)
            out.push_back({run_start + o, std::min(kMaxWindowSteps, R - o)});
    };
    for (std::size_t k = 0; k <= n; ++k) {
        bool gap = k == n || (k < data.missing.size() && data.missing[k]);
        if (gap) {
            flush_run(k);
            run_start = k + 1;
        }
    }
    return out;
}

SequenceSplit build_sequences(const Dataset& data, std::uint64_t seed) {
    std::vector<Window> all = enumerate_windows(data);
    if (all.empty()) throw DataError("build_sequences: no gap-free window of at least 12 h");
    std::vector<std::size_t> idx(all.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t n_val = all.size() / 5;
    if (n_val == 0 && all.size() >= 2) n_val = 1;
    SequenceSplit split;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        (i < all.size() - n_val ? split.train : split.val).windows.push_back(all[idx[i]]);
    }
    auto by_start = [](const Window& a, const Window& b) { return a.start < b.start; };
    std::sort(split.train.windows.begin(), split.train.windows.end(), by_start);
    std::sort(split.val.windows.begin(), split.val.windows.end(), by_start);
    return split;
}

ad::Var mse_loss(const std::vector<TapeRollout>& rollouts,
                 const std::vector<SeriesView>& series) {
    if (rollouts.empty() || rollouts.size() != series.size())
        throw DataError("mse_loss: batch size mismatch");
    ad::Tape& tape = *rollouts.front().T_pred.front().tape;
    ad::Var acc = tape.constant_scalar(0.0);
    for (std::size_t s = 0; s < rollouts.size(); ++s) {
        const TapeRollout& ro = rollouts[s];
        ad::Var series_acc = tape.constant_scalar(0.0);
        std::size_t terms = 0;
        for (std::size_t i = 0; i < ro.T_pred.size(); ++i) {
            ad::Var target = tape.constant(series[s].T(ro.warm_len + i));
            series_acc = ad::add(series_acc, ad::sum(ad::square(ad::sub(ro.T_pred[i], target))));
            terms += ro.T_pred[i].size();
        }
        acc = ad::add(acc, ad::smul(series_acc, 1.0 / static_cast<double>(terms)));
    }
    return ad::smul(acc, 1.0 / static_cast<double>(rollouts.size()));
}

namespace {

template <typename F>
double metric_over_free_steps(const Trace& tr, const SeriesView& series, F&& f) {
    double acc = 0.0;
    std::size_t terms = 0;
    for (std::size_t k = tr.warm_len; k < series.len(); ++k) {
        const auto& meas = series.T(k);
        for (std::size_t z = 0; z < meas.size(); ++z) {
            acc += f(tr.T[k][z], meas[z]);
            ++terms;
        }
    }
    if (terms == 0) throw DataError("metrics: no free-running steps");
    return acc / static_cast<double>(terms);
}

}  // namespace

double mse_value(const Trace& tr, const SeriesView& series) {
    return metric_over_free_steps(tr, series, [](double p, double m) {
        double d = p - m;
        return d * d;
    });
}

double mae_value(const Trace& tr, const SeriesView& series) {
    return metric_over_free_steps(tr, series,
                                  [](double p, double m) { return std::abs(p - m); });
}

double mape_value(const Trace& tr, const SeriesView& series) {
    return metric_over_free_steps(tr, series, [](double p, double m) {
        if (std::abs(m) < 1e-6)
            throw DataError("mape: measured temperature too close to zero degC");
        return std::abs((p - m) / m) * 100.0;
    });
}

MetricSummary evaluate_metrics(const DynamicsModel& model, const Dataset& data,
                               const SequenceSet& windows) {
    if (windows.windows.empty()) throw DataError("evaluate: empty window set");
    MetricSummary s;
    for (const Window& w : windows.windows) {
        SeriesView sv{&data, w};
        Trace tr = model.rollout(sv);
        s.mse += mse_value(tr, sv);
        s.mae += mae_value(tr, sv);
        s.mape += mape_value(tr, sv);
    }
    double n = static_cast<double>(windows.windows.size());
    s.mse /= n;
    s.mae /= n;
    s.mape /= n;
    return s;
}

void optimizer_step(DynamicsModel& model, const GradMap& grads, AdamState& state,
                    const TrainingConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    model.for_each_param([&](const std::string& name, std::size_t, std::size_t,
                             std::vector<double>& p) {
        auto it = grads.find(name);
        if (it == grads.end()) return;
        const std::vector<double>& g = it->second;
        if (g.size() != p.size()) throw NumericError("optimizer: gradient shape mismatch for " + name);
        auto& m = state.m[name];
        auto& v = state.v[name];
        if (m.empty()) m.assign(p.size(), 0.0);
        if (v.empty()) v.assign(p.size(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("optimizer: non-finite gradient in " + name);
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    });
}

GradMap series_gradient(DynamicsModel& model, const SeriesView& series,
                        std::size_t x_train_zone, double* loss_out, double pinn_lambda) {
    ad::Tape tape;
    RolloutOptions opt;
    opt.x_train_zone = x_train_zone;
    opt.record_inputs = pinn_lambda >= 0.0;  // penalty needs input leaves
    TapeRollout ro = model.roll(tape, series, opt);

    ad::Var acc = tape.constant_scalar(0.0);
    std::size_t terms = 0;
    const bool zone_loss = x_train_zone != static_cast<std::size_t>(-1) &&
                           ro.T_pred.front().size() == 1;
    for (std::size_t i = 0; i < ro.T_pred.size(); ++i) {
        const auto& meas = series.T(ro.warm_len + i);
        ad::Var target = zone_loss ? tape.constant({meas[x_train_zone]}) : tape.constant(meas);
        acc = ad::add(acc, ad::sum(ad::square(ad::sub(ro.T_pred[i], target))));
        terms += ro.T_pred[i].size();
    }
    ad::Var loss = ad::smul(acc, 1.0 / static_cast<double>(terms));
    if (pinn_lambda > 0.0)
        loss = ad::add(loss, ad::smul(pinn_penalty(tape, ro), pinn_lambda));
    if (loss_out) *loss_out = loss.scalar();

    auto adj = tape.backward(loss);
    GradMap grads;
    for (const auto& [name, leaf] : ro.param_leaves) {
        auto it = adj.find(leaf.id);
        std::vector<double> g(leaf.size(), 0.0);
        if (it != adj.end()) {
            auto s = it->second.value();
            g.assign(s.begin(), s.end());
        }
        auto [gi, inserted] = grads.emplace(name, std::move(g));
        if (!inserted) throw NumericError("gradient: duplicate parameter leaf " + name);
    }
    model.absorb_rollout_stats(ro);
    return grads;
}

namespace {

using ParamSnapshot = std::map<std::string, std::vector<double>>;

ParamSnapshot snapshot(DynamicsModel& model) {
    ParamSnapshot s;
    model.for_each_param([&](const std::string& name, std::size_t, std::size_t,
                             std::vector<double>& p) { s[name] = p; });
    return s;
}

void restore(DynamicsModel& model, const ParamSnapshot& s) {
    model.for_each_param([&](const std::string& name, std::size_t, std::size_t,
                             std::vector<double>& p) {
        auto it = s.find(name);
        if (it != s.end()) p = it->second;
    });
}

void accumulate(GradMap& into, const GradMap& g) {
    for (const auto& [name, vec] : g) {
        auto& dst = into[name];
        if (dst.empty()) dst.assign(vec.size(), 0.0);
        for (std::size_t i = 0; i < vec.size(); ++i) dst[i] += vec[i];
    }
}

Window capped(Window w, std::size_t cap) {
    if (cap != 0 && w.len > cap) w.len = cap;
    return w;
}

}  // namespace

TrainResult train(DynamicsModel& model, const Dataset& data, const SequenceSplit& split,
                  const TrainingConfig& cfg) {
    cfg.validate();
    if (split.train.windows.empty()) throw DataError("train: empty training split");
    const bool per_zone = model.kind() == "x-pcnn";
    const std::size_t m = model.zone_count();

    TrainResult res;
    ParamSnapshot best = snapshot(model);
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0, since_best = 0;
    AdamState adam;

    // validation inside the loop shares the training window cap so epoch cost
    // stays bounded; final metrics are the caller's business
    SequenceSet val_capped;
    for (const Window& w : split.val.windows)
        val_capped.windows.push_back(capped(w, cfg.train_window_cap));

    std::vector<std::size_t> order(split.train.windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::mt19937_64 rng(cfg.seed * 0x1000193u + epoch);
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_loss = 0.0;
        std::size_t loss_terms = 0;
        for (std::size_t base = 0; base < order.size(); base += cfg.batch_sequences) {
            GradMap batch_grads;
            std::size_t count = 0;
            for (std::size_t i = base; i < std::min(base + cfg.batch_sequences, order.size());
                 ++i) {
                SeriesView sv{&data, capped(split.train.windows[order[i]], cfg.train_window_cap)};
                double loss = 0.0;
                if (per_zone) {
                    for (std::size_t z = 0; z < m; ++z) {
                        accumulate(batch_grads,
                                   series_gradient(model, sv, z, &loss, cfg.pinn_lambda));
                        epoch_loss += loss;
                        ++loss_terms;
                    }
                } else {
                    accumulate(batch_grads,
                               series_gradient(model, sv, static_cast<std::size_t>(-1), &loss,
                                               cfg.pinn_lambda));
                    epoch_loss += loss;
                    ++loss_terms;
                }
                ++count;
            }
            double scale = 1.0 / static_cast<double>(count);
            for (auto& [name, g] : batch_grads)
                for (double& x : g) x *= scale;
            optimizer_step(model, batch_grads, adam, cfg);
        }

        double val_mse, val_mae;
        if (!val_capped.windows.empty()) {
            MetricSummary vm = evaluate_metrics(model, data, val_capped);
            val_mse = vm.mse;
            val_mae = vm.mae;
        } else {
            val_mse = epoch_loss / static_cast<double>(loss_terms);
            val_mae = std::sqrt(val_mse);
        }
        res.history.push_back({epoch, epoch_loss / static_cast<double>(loss_terms), val_mse,
                               val_mae});

        if (!std::isfinite(val_mse)) {
            res.diverged = true;
            break;
        }
        if (val_mse < best_val) {
            best_val = val_mse;
            best_epoch = epoch;
            best = snapshot(model);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            res.early_stopped = true;
            break;
        }
    }

    restore(model, best);
    res.best_val_mse = best_val;
    res.best_epoch = best_epoch;
    return res;
}

std::vector<double> error_by_horizon(const DynamicsModel& model, const Dataset& data,
                                     const SequenceSet& windows) {
    if (windows.windows.empty()) throw DataError("error_by_horizon: empty window set");
    std::vector<double> sums;
    std::vector<std::size_t> counts;
    for (const Window& w : windows.windows) {
        SeriesView sv{&data, w};
        Trace tr = model.rollout(sv);
        for (std::size_t k = tr.warm_len; k < sv.len(); ++k) {
            std::size_t h = k - tr.warm_len;  // horizon step h+1
            if (h >= sums.size()) {
                sums.resize(h + 1, 0.0);
                counts.resize(h + 1, 0);
            }
            const auto& meas = sv.T(k);
            double e = 0.0;
            for (std::size_t z = 0; z < meas.size(); ++z) e += std::abs(tr.T[k][z] - meas[z]);
            sums[h] += e / static_cast<double>(meas.size());
            counts[h] += 1;
        }
    }
    for (std::size_t h = 0; h < sums.size(); ++h) sums[h] /= static_cast<double>(counts[h]);
    return sums;
}

}  // namespace pcnn
