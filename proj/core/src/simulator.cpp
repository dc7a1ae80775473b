#include "pcnn/simulator.hpp"

#include <cmath>
#include <ctime>
#include <random>

#include "pcnn/errors.hpp"

namespace pcnn {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr std::size_t kStepsPerDay = 96;
// Monday 2021-01-04 00:00:00 UTC; a weekday start keeps the occupancy
// pulse active from day one.
constexpr std::int64_t kEpochStart = 1609718400;
}  // namespace

std::string to_string(Nonlinearity n) {
    switch (n) {
        case Nonlinearity::Linear: return "linear";
        case Nonlinearity::SaturatingSolar: return "saturating-solar";
        case Nonlinearity::OccupancyPulse: return "occupancy-pulse";
    }
    return "?";
}

std::string to_string(Controller c) {
    switch (c) {
        case Controller::Off: return "off";
        case Controller::Thermostat: return "thermostat";
        case Controller::RandomExcitation: return "random-excitation";
    }
    return "?";
}

Nonlinearity nonlinearity_from_string(const std::string& s) {
    if (s == "linear") return Nonlinearity::Linear;
    if (s == "saturating-solar") return Nonlinearity::SaturatingSolar;
    if (s == "occupancy-pulse") return Nonlinearity::OccupancyPulse;
    throw ConfigError("unknown nonlinearity mode: " + s);
}

Controller controller_from_string(const std::string& s) {
    if (s == "off") return Controller::Off;
    if (s == "thermostat") return Controller::Thermostat;
    if (s == "random-excitation") return Controller::RandomExcitation;
    throw ConfigError("unknown controller: " + s);
}

double solar_on_window(double q_sun, double phi, double theta, double theta0) {
    if (q_sun <= 0.0) return 0.0;
    if (phi <= 0.0) throw DataError("solar_on_window: positive irradiation with sun below horizon");
    double q = q_sun * (std::cos(phi) / std::sin(phi)) * std::sin(theta - theta0);
    return q > 0.0 ? q : 0.0;
}

Weather synthesize_weather(std::size_t days, std::uint64_t seed, const WeatherConfig& wc) {
    if (days < 1) throw ConfigError("synthesize_weather: days must be >= 1");
    const std::size_t n = days * kStepsPerDay;
    Weather w;
    w.T_out.resize(n);
    w.Q_sun.resize(n);
    w.phi.resize(n);
    w.theta.resize(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double walk = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        double frac = static_cast<double>(k % kStepsPerDay) / kStepsPerDay;
        walk = 0.95 * walk + wc.t_out_noise * gauss(rng);
        w.T_out[k] = wc.t_out_mean - wc.t_out_amplitude * std::cos(2.0 * kPi * (frac - 0.15)) + walk;
        if (frac > wc.day_start && frac < wc.day_end) {
            double s = (frac - wc.day_start) / (wc.day_end - wc.day_start);
            w.phi[k] = wc.phi_max * std::sin(kPi * s);
            w.Q_sun[k] = wc.q_sun_peak * std::sin(kPi * s);
            w.theta[k] = kPi * s;  // east -> west sweep
        } else {
            w.phi[k] = -0.1;
            w.Q_sun[k] = 0.0;
            w.theta[k] = 0.0;
        }
    }
    return w;
}

EffectivePhysics PlantConfig::effective() const {
    EffectivePhysics eff;
    eff.a_h = a_h;
    eff.a_c = a_c;
    eff.b = b;
    eff.c = c.empty() ? std::vector<double>(topology.edges().size(), 8e-3) : c;
    return eff;
}

void PlantConfig::validate() const {
    const std::size_t m = topology.zone_count();
    if (a_h.size() != m || a_c.size() != m || b.size() != m || e.size() != m ||
        theta0_deg.size() != m)
        throw ConfigError("plant: per-zone coefficient length mismatch");
    if (!c.empty() && c.size() != topology.edges().size())
        throw ConfigError("plant: per-edge coefficient length mismatch");
    for (double t0 : theta0_deg)
        if (t0 < -180.0 || t0 >= 180.0)
            throw ConfigError("plant: facade azimuth outside [-180, 180)");
    for (double v : e)
        if (v <= 0.0) throw ConfigError("plant: solar-gain scale must be positive");
    if (noise_std < 0.0) throw ConfigError("plant: negative noise std");
    ConsistencyReport rep = check_consistency_conditions(effective(), topology);
    if (!rep.all_positive) throw ConfigError("plant: coefficients must be strictly positive");
    if (!rep.all_margins_pass)
        throw ConfigError("plant: b + sum(c) must stay below 1 in every zone");
}

std::vector<double> plant_linear_step(const std::vector<double>& T, double T_out,
                                      const std::vector<double>& u,
                                      const std::vector<double>& q_win,
                                      const EffectivePhysics& eff,
                                      const std::vector<double>& e,
                                      const BuildingTopology& topo) {
    const std::size_t m = topo.zone_count();
    if (T.size() != m || u.size() != m || q_win.size() != m || e.size() != m)
        throw DataError("plant step: vector length mismatch");
    std::vector<double> next = T;
    for (std::size_t z = 0; z < m; ++z) {
        next[z] += eff.a_h[z] * std::max(u[z], 0.0) + eff.a_c[z] * std::min(u[z], 0.0);
        if (topo.has_external_wall(z)) next[z] -= eff.b[z] * (T[z] - T_out);
        next[z] += e[z] * q_win[z];
    }
    const auto& edges = topo.edges();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        auto [a, bz] = edges[i];
        double flow = eff.c[i] * (T[a] - T[bz]);
        next[a] -= flow;
        next[bz] += flow;
    }
    return next;
}

SimulationResult simulate(const PlantConfig& cfg, Controller controller, std::size_t days,
                          std::uint64_t seed) {
    cfg.validate();
    if (days < 1) throw ConfigError("simulate: days must be >= 1");
    const std::size_t m = cfg.topology.zone_count();
    const std::size_t n = days * kStepsPerDay;
    const EffectivePhysics eff = cfg.effective();

    Weather w = synthesize_weather(days, seed ^ 0x9e3779b97f4a7c15ULL, cfg.weather);

    Dataset d;
    d.zone_count = m;
    d.timestamps.resize(n);
    d.T.assign(n, std::vector<double>(m, 0.0));
    d.u.assign(n, std::vector<double>(m, 0.0));
    d.T_out = w.T_out;
    d.Q_sun = w.Q_sun;
    d.Q_win.assign(n, std::vector<double>(m, 0.0));
    d.missing.assign(n, false);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> mag(50.0, 800.0);
    std::uniform_int_distribution<int> coin(0, 1);

    std::vector<double> T(m, cfg.t_init);
    std::vector<double> u_hold(m, 0.0);      // random-excitation piecewise level
    std::vector<int> thermo_mode(m, 0);      // -1 cooling, 0 idle, +1 heating

    for (std::size_t k = 0; k < n; ++k) {
        d.timestamps[k] = kEpochStart + static_cast<std::int64_t>(k) * kStepSeconds;
        d.T[k] = T;
        for (std::size_t z = 0; z < m; ++z) {
            double t0 = cfg.theta0_deg[z] * kPi / 180.0;
            d.Q_win[k][z] = solar_on_window(w.Q_sun[k], w.phi[k], w.theta[k], t0);
        }

        std::vector<double> u(m, 0.0);
        switch (controller) {
            case Controller::Off:
                break;
            case Controller::Thermostat:
                for (std::size_t z = 0; z < m; ++z) {
                    if (T[z] < 20.0) thermo_mode[z] = 1;
                    else if (T[z] > 22.0) thermo_mode[z] = -1;
                    else if ((thermo_mode[z] == 1 && T[z] > 21.0) ||
                             (thermo_mode[z] == -1 && T[z] < 21.0))
                        thermo_mode[z] = 0;
                    u[z] = 600.0 * thermo_mode[z];
                }
                break;
            case Controller::RandomExcitation:
                if (k % 8 == 0)
                    for (std::size_t z = 0; z < m; ++z)
                        u_hold[z] = (coin(rng) ? 1.0 : -1.0) * mag(rng);
                u = u_hold;
                break;
        }
        d.u[k] = u;
        if (k + 1 == n) break;

        // linear mode goes through plant_linear_step verbatim so the recorded
        // dataset is bit-reproducible from the truth coefficients
        const bool linear_gain = cfg.nonlinearity != Nonlinearity::SaturatingSolar;
        std::vector<double> zero_gain(m, 0.0);
        std::vector<double> next = plant_linear_step(
            T, w.T_out[k], u, linear_gain ? d.Q_win[k] : zero_gain, eff, cfg.e, cfg.topology);
        std::tm tm{};
        time_t ts = static_cast<time_t>(d.timestamps[k]);
        gmtime_r(&ts, &tm);
        for (std::size_t z = 0; z < m; ++z) {
            switch (cfg.nonlinearity) {
                case Nonlinearity::Linear:
                    break;
                case Nonlinearity::SaturatingSolar: {
                    double lin = cfg.e[z] * d.Q_win[k][z];
                    next[z] += cfg.sat_scale * std::tanh(lin / cfg.sat_scale);
                    break;
                }
                case Nonlinearity::OccupancyPulse: {
                    bool weekday = tm.tm_wday >= 1 && tm.tm_wday <= 5;
                    if (weekday && tm.tm_hour >= 8 && tm.tm_hour < 18)
                        next[z] += cfg.occupancy_gain;
                    break;
                }
            }
            if (cfg.noise_std > 0.0) next[z] += cfg.noise_std * gauss(rng);
        }
        T = std::move(next);
    }

    SimulationResult res;
    res.data = std::move(d);
    res.truth.zone_count = m;
    res.truth.edges = cfg.topology.edges();
    res.truth.a_h = eff.a_h;
    res.truth.a_c = eff.a_c;
    res.truth.b = eff.b;
    res.truth.c = eff.c;
    res.truth.e = cfg.e;
    res.truth.nonlinearity = cfg.nonlinearity;
    res.truth.noise_std = cfg.noise_std;
    return res;
}

}  // namespace pcnn
