#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/model.hpp"

namespace pcnn {

inline constexpr std::size_t kMinWindowSteps = 48;   // 12 h
inline constexpr std::size_t kMaxWindowSteps = 288;  // 3 days
inline constexpr std::size_t kWindowStride = 4;      // hourly

struct SequenceSet {
    std::vector<Window> windows;
};

/// Gap-free windows at hourly stride, longest-first within each run
/// (maximum 3 days, tail windows shorter, minimum 12 h), split 80/20 by
/// whole windows with a seeded shuffle.
struct SequenceSplit {
    SequenceSet train, val;
};
SequenceSplit build_sequences(const Dataset& data, std::uint64_t seed);

/// All valid windows before splitting (the enumeration under test).
std::vector<Window> enumerate_windows(const Dataset& data);

struct TrainingConfig {
    double learning_rate = 5e-4;
    std::size_t batch_sequences = 64;
    std::size_t max_epochs = 150;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    /// Cap applied to window length during training rollouts (0 = no cap);
    /// keeps desk-scale epochs affordable while evaluation still uses the
    /// full windows.
    std::size_t train_window_cap = 96;
    /// Physics-penalty weight; negative disables the penalty entirely
    /// (plain data loss), >= 0 adds lambda * L_phys to every series loss.
    double pinn_lambda = -1.0;

    void validate() const;
};

/// Triple average (batch, steps, zones) of the squared error over the
/// free-running steps of each rollout; warm-start steps never enter.
ad::Var mse_loss(const std::vector<TapeRollout>& rollouts,
                 const std::vector<SeriesView>& series);

/// Value-side metrics over free-running steps. mape is in percent with
/// degC denominators and refuses near-zero measured temperatures.
double mse_value(const Trace& tr, const SeriesView& series);
double mae_value(const Trace& tr, const SeriesView& series);
double mape_value(const Trace& tr, const SeriesView& series);

struct MetricSummary {
    double mse = 0.0, mae = 0.0, mape = 0.0;
};
MetricSummary evaluate_metrics(const DynamicsModel& model, const Dataset& data,
                               const SequenceSet& windows);

/// Adam with bias correction. State is keyed by parameter name; a NaN or
/// non-finite gradient raises a numerical error naming the parameter.
struct AdamState {
    std::size_t t = 0;
    std::map<std::string, std::vector<double>> m, v;
};
using GradMap = std::map<std::string, std::vector<double>>;
void optimizer_step(DynamicsModel& model, const GradMap& grads, AdamState& state,
                    const TrainingConfig& cfg);

/// Per-series parameter gradient of the mean-squared rollout error.
/// X-PCNN pre-merge: pass the zone being trained; the loss covers that
/// zone only and neighbors run on measured data.
GradMap series_gradient(DynamicsModel& model, const SeriesView& series,
                        std::size_t x_train_zone = static_cast<std::size_t>(-1),
                        double* loss_out = nullptr, double pinn_lambda = -1.0);

struct EpochRow {
    std::size_t epoch = 0;
    double train_mse = 0.0, val_mse = 0.0, val_mae = 0.0;
};

struct TrainResult {
    std::vector<EpochRow> history;
    double best_val_mse = 0.0;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
    bool diverged = false;  // aborted on non-finite validation loss
};

/// Shared gradient-descent loop: seeded batch order, joint update of every
/// parameter the model exposes, best-validation snapshot restored on exit.
/// X-PCNN models are trained per zone within each batch (disjoint parameter
/// sets, one independent problem per zone).
TrainResult train(DynamicsModel& model, const Dataset& data, const SequenceSplit& split,
                  const TrainingConfig& cfg);

/// MAE per free-running prediction step (1-based horizon), averaged over
/// windows and zones; rows shorter than the longest window are averaged
/// over the windows that reach them.
std::vector<double> error_by_horizon(const DynamicsModel& model, const Dataset& data,
                                     const SequenceSet& windows);

}  // namespace pcnn
