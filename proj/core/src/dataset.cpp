#include "pcnn/dataset.hpp"

#include <cmath>
#include <ctime>

#include "pcnn/errors.hpp"

namespace pcnn {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

std::vector<double> Dataset::features(std::size_t k) const {
    std::time_t t = static_cast<std::time_t>(timestamps[k]);
    std::tm tm{};
    gmtime_r(&t, &tm);
    double tod = (tm.tm_hour * 3600.0 + tm.tm_min * 60.0 + tm.tm_sec) / 86400.0;
    double month = (tm.tm_mon + tm.tm_mday / 31.0) / 12.0;
    return {
        Q_sun[k] / 1000.0,
        std::sin(kTwoPi * tod),
        std::cos(kTwoPi * tod),
        std::sin(kTwoPi * month),
        std::cos(kTwoPi * month),
        tm.tm_wday / 6.0,
    };
}

void Dataset::validate() const {
    const std::size_t n = size();
    if (zone_count == 0) throw DataError("dataset: zone count must be positive");
    if (n == 0) throw DataError("dataset: empty");
    for (std::size_t k = 1; k < n; ++k) {
        if (timestamps[k] <= timestamps[k - 1])
            throw DataError("dataset: timestamps must be strictly increasing");
        if (timestamps[k] - timestamps[k - 1] != kStepSeconds)
            throw DataError("dataset: non-uniform timestamps (expected 900 s spacing)");
    }
    auto check_cols = [&](const std::vector<std::vector<double>>& cols, const char* name) {
        if (cols.size() != n) throw DataError(std::string("dataset: bad row count in ") + name);
        for (const auto& row : cols)
            if (row.size() != zone_count)
                throw DataError(std::string("dataset: bad zone count in ") + name);
    };
    check_cols(T, "T");
    check_cols(u, "u");
    if (!Q_win.empty()) check_cols(Q_win, "Q_win");
    if (T_out.size() != n || Q_sun.size() != n || missing.size() != n)
        throw DataError("dataset: column length mismatch");
}

}  // namespace pcnn
