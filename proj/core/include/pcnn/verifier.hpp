#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/model.hpp"

namespace pcnn {

/// Thresholds for the sign-structure checks: structural zeros are exact in
/// reverse mode, so the zero band only absorbs float noise; anything that
/// must be positive has to clear the strict threshold.
inline constexpr double kZeroTol = 1e-12;
inline constexpr double kStrictPos = 1e-15;

enum class InputKind { Temperature, Power, Ambient };
std::string to_string(InputKind k);

struct GradientEntry {
    std::size_t out_zone = 0;
    std::size_t out_step = 0;   // free-running prediction index (1-based horizon)
    InputKind kind = InputKind::Power;
    std::size_t in_zone = 0;    // unused for ambient
    std::size_t in_step = 0;    // free-running input index (0-based, < out_step)
    double value = 0.0;
};

struct GradientReport {
    std::vector<GradientEntry> entries;
    std::size_t negative = 0, zero = 0, positive = 0;  // vs kZeroTol band

    void tally();
};

/// Gradients of every zone's final-step temperature w.r.t. each power input
/// component and each ambient temperature along the free-running horizon.
GradientReport final_step_gradients(const DynamicsModel& model, const SeriesView& series);

/// Central finite difference of a final-step temperature w.r.t. one input
/// coordinate; the oracle for the reverse-mode values.
struct FdRequest {
    InputKind kind = InputKind::Power;
    std::size_t in_step = 0;   // absolute index within the series window
    std::size_t in_zone = 0;   // power: zone; ambient: ignored; temperature: start-temp zone
    std::size_t out_zone = 0;
    double h = 1e-3;
};
struct FdResult {
    double value = 0.0;
    double used_h = 0.0;
    bool shrunk = false;  // h reduced to avoid crossing the u = 0 branch point
};
FdResult finite_difference_gradient(const DynamicsModel& model, const SeriesView& series,
                                    const FdRequest& req);

struct ConsistencyFailure {
    std::size_t out_zone = 0, in_zone = 0;
    std::size_t lag = 0;
    InputKind kind = InputKind::Temperature;
    double value = 0.0;
    std::string reason;
};

struct CheckResult {
    bool pass = true;
    std::size_t checked = 0;
    std::vector<ConsistencyFailure> failures;
};

/// Heat-propagation sign structure: the gradient of zone z's lag-step-ahead
/// prediction w.r.t. the start temperature of zone y must be positive
/// exactly when y lies within lag hops of z, and structurally zero
/// otherwise. The model's topology must be supplied for the hop test.
CheckResult check_heat_propagation(const DynamicsModel& model, const BuildingTopology& topo,
                                   const SeriesView& series, std::size_t max_lag);

/// Power/ambient sign structure of the final-step gradients: power gradients
/// positive exactly when the input zone is within (horizon - in_step - 1)
/// hops, ambient gradients positive whenever an external-wall zone is within
/// that range.
CheckResult check_input_consistency(const DynamicsModel& model, const BuildingTopology& topo,
                                    const SeriesView& series);

/// Fixed-bin density of gradient values (60 bins across +-bound plus
/// under/overflow rows), emitted as TSV.
struct HistogramTable {
    double bound = 3e-3;
    std::size_t bins = 60;
    std::vector<std::size_t> counts;  // bins + 2 (underflow first, overflow last)
    std::size_t total = 0;
    double negative_fraction = 0.0;
};
HistogramTable gradient_histogram(const GradientReport& report, double bound = 3e-3,
                                  std::size_t bins = 60);
std::string histogram_to_tsv(const HistogramTable& t);

}  // namespace pcnn
