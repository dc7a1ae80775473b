#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcnn/dataset.hpp"
#include "pcnn/physics.hpp"
#include "pcnn/topology.hpp"

namespace pcnn {

enum class Nonlinearity { Linear, SaturatingSolar, OccupancyPulse };
enum class Controller { Off, Thermostat, RandomExcitation };

std::string to_string(Nonlinearity n);
std::string to_string(Controller c);
Nonlinearity nonlinearity_from_string(const std::string& s);
Controller controller_from_string(const std::string& s);

/// Synthetic weather columns at 15-minute steps.
struct Weather {
    std::vector<double> T_out;   // degC
    std::vector<double> Q_sun;   // W/m^2 horizontal
    std::vector<double> phi;     // solar altitude, rad; <= 0 at night
    std::vector<double> theta;   // solar azimuth, rad, sweeping east->west
};

struct WeatherConfig {
    double t_out_mean = 8.0;      // degC daily mean
    double t_out_amplitude = 5.0; // diurnal swing
    double t_out_noise = 0.3;     // degC random-walk scale
    double q_sun_peak = 600.0;    // W/m^2 at solar noon
    double day_start = 0.25;      // sunrise, fraction of day
    double day_end = 0.75;        // sunset
    double phi_max = 1.0;         // peak solar altitude, rad
};

/// Irradiation transferred onto a vertical window facing azimuth theta0:
///   Q_win = max(0, Q_sun * (cos phi / sin phi) * sin(theta - theta0)).
/// Night (Q_sun <= 0) gives 0; a positive Q_sun with the sun at or below
/// the horizon is an inconsistent measurement.
double solar_on_window(double q_sun, double phi, double theta, double theta0);

Weather synthesize_weather(std::size_t days, std::uint64_t seed, const WeatherConfig& wc = {});

/// Ground-truth RC plant. True coefficients must satisfy the consistency
/// conditions (positivity, b + sum c < 1 per zone); simulate() refuses
/// anything else.
struct PlantConfig {
    BuildingTopology topology = BuildingTopology::chain(3);
    std::vector<double> a_h{1.2e-4, 1.2e-4, 1.2e-4};
    std::vector<double> a_c{1.2e-4, 1.2e-4, 1.2e-4};
    std::vector<double> b{6e-3, 6e-3, 6e-3};
    std::vector<double> c;                 // per edge; defaults to 8e-3 each
    std::vector<double> e{2e-3, 2e-3, 2e-3};  // solar-gain scale, degC per (W/m^2) per step
    std::vector<double> theta0_deg{-30.0, 0.0, 30.0};  // facade azimuth, deg clockwise from east
    Nonlinearity nonlinearity = Nonlinearity::Linear;
    double sat_scale = 0.06;    // degC/step knee of the tanh solar saturation
    double occupancy_gain = 0.04;  // degC/step during weekday occupancy pulses
    double noise_std = 0.02;    // degC per step process noise
    double t_init = 21.0;       // degC initial zone temperature
    WeatherConfig weather;

    void validate() const;  // throws ConfigError
    EffectivePhysics effective() const;
};

/// Coefficients echoed for recovery tests (the truth sidecar content).
struct PlantTruth {
    std::size_t zone_count = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::vector<double> a_h, a_c, b, c, e;
    Nonlinearity nonlinearity = Nonlinearity::Linear;
    double noise_std = 0.0;
};

struct SimulationResult {
    Dataset data;
    PlantTruth truth;
};

SimulationResult simulate(const PlantConfig& cfg, Controller controller, std::size_t days,
                          std::uint64_t seed);

/// One step of the linear plant core (no noise, no nonlinearity): shared by
/// the simulator's linear mode and the gray-box models' self-consistency
/// checks.
std::vector<double> plant_linear_step(const std::vector<double>& T, double T_out,
                                      const std::vector<double>& u,
                                      const std::vector<double>& q_win,
                                      const EffectivePhysics& eff,
                                      const std::vector<double>& e,
                                      const BuildingTopology& topo);

}  // namespace pcnn
