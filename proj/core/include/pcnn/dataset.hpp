#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pcnn {

inline constexpr int kStepSeconds = 900;        // 15-minute sampling
inline constexpr std::size_t kWarmStartSteps = 12;  // 3 h
inline constexpr std::size_t kFeatureDim = 6;

/// Uniformly sampled multi-zone time series. Row k holds the state at
/// timestamp[k]; all per-zone columns are indexed [k][zone].
struct Dataset {
    std::size_t zone_count = 0;
    std::vector<std::int64_t> timestamps;  // unix seconds, strictly increasing, 900 s apart
    std::vector<std::vector<double>> T;    // zone temperatures, degC
    std::vector<std::vector<double>> u;    // power, W; cooling negative
    std::vector<double> T_out;             // ambient, degC
    std::vector<double> Q_sun;             // horizontal irradiation, W/m^2
    std::vector<std::vector<double>> Q_win;  // engineered per-zone window irradiation (may be empty)
    std::vector<bool> missing;             // per-record missing-value mask

    std::size_t size() const { return timestamps.size(); }
    bool has_q_win() const { return !Q_win.empty(); }

    /// Exogenous features fed to black-box modules: scaled horizontal solar
    /// irradiation, sin/cos time-of-day, sin/cos month, weekday in [0,1].
    /// Never includes T, u, or T_out.
    std::vector<double> features(std::size_t k) const;

    void validate() const;  // throws DataError on structural problems
};

/// Contiguous gap-free window of a dataset. The first kWarmStartSteps
/// records are the warm-start period.
struct Window {
    std::size_t start = 0;
    std::size_t len = 0;
};

/// A window bound to its dataset.
struct SeriesView {
    const Dataset* data = nullptr;
    Window window;

    std::size_t len() const { return window.len; }
    std::size_t abs(std::size_t k) const { return window.start + k; }
    const std::vector<double>& T(std::size_t k) const { return data->T[abs(k)]; }
    const std::vector<double>& u(std::size_t k) const { return data->u[abs(k)]; }
    double T_out(std::size_t k) const { return data->T_out[abs(k)]; }
    double Q_sun(std::size_t k) const { return data->Q_sun[abs(k)]; }
    std::vector<double> features(std::size_t k) const { return data->features(abs(k)); }
};

}  // namespace pcnn
