#include <doctest.h>

#include <cmath>
#include <vector>

#include "pcnn/errors.hpp"
#include "pcnn/simulator.hpp"

#include "helpers.hpp"

using namespace pcnn;

namespace {

constexpr double kPi = 3.14159265358979323846;

PlantConfig calm_plant() {
    PlantConfig cfg;
    cfg.noise_std = 0.0;
    cfg.weather.t_out_amplitude = 0.0;
    cfg.weather.t_out_noise = 0.0;
    cfg.weather.q_sun_peak = 0.0;
    cfg.t_init = cfg.weather.t_out_mean;
    return cfg;
}

}  // namespace

TEST_CASE("solar_on_window hand values") {
    // cot(pi/4) = 1 and a perpendicular sun angle: full transfer
    CHECK(solar_on_window(500.0, kPi / 4, kPi / 2, 0.0) == doctest::Approx(500.0).epsilon(1e-12));
    // sun aligned with the facade: nothing lands on the window
    CHECK(solar_on_window(500.0, kPi / 4, 0.7, 0.7) == 0.0);
    // backlit facade clamps to zero
    CHECK(solar_on_window(500.0, kPi / 4, 0.0, kPi / 2) == 0.0);
    // night is zero regardless of the angles
    CHECK(solar_on_window(0.0, -0.1, 0.0, 0.0) == 0.0);
    // positive irradiation with the sun below the horizon is inconsistent
    CHECK_THROWS_AS(solar_on_window(100.0, -0.1, 0.0, 0.0), DataError);
    CHECK_THROWS_AS(solar_on_window(100.0, 0.0, 0.0, 0.0), DataError);
}

TEST_CASE("synthetic weather is shaped and seeded as documented") {
    WeatherConfig wc;
    Weather w = synthesize_weather(3, 42, wc);
    REQUIRE(w.T_out.size() == 3 * 96);

    SUBCASE("night and day are consistent") {
        for (std::size_t k = 0; k < w.Q_sun.size(); ++k) {
            CHECK(w.Q_sun[k] >= 0.0);
            CHECK(w.Q_sun[k] <= wc.q_sun_peak);
            if (w.Q_sun[k] > 0.0) CHECK(w.phi[k] > 0.0);
            if (w.phi[k] <= 0.0) CHECK(w.Q_sun[k] == 0.0);
        }
    }
    SUBCASE("noise-free daily mean equals the configured mean") {
        WeatherConfig flat = wc;
        flat.t_out_noise = 0.0;
        Weather wf = synthesize_weather(1, 0, flat);
        double mean = 0;
        for (double t : wf.T_out) mean += t;
        mean /= static_cast<double>(wf.T_out.size());
        CHECK(mean == doctest::Approx(wc.t_out_mean).epsilon(1e-9));
    }
    SUBCASE("same seed reproduces, different seed does not") {
        Weather w2 = synthesize_weather(3, 42, wc);
        CHECK(w.T_out == w2.T_out);
        CHECK(w.Q_sun == w2.Q_sun);
        Weather w3 = synthesize_weather(3, 43, wc);
        CHECK(w.T_out != w3.T_out);
    }
    SUBCASE("zero days is a config error") {
        CHECK_THROWS_AS(synthesize_weather(0, 1, wc), ConfigError);
    }
}

TEST_CASE("plant validation enforces the consistency conditions") {
    PlantConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.b = {0.6, 0.6, 0.6};
    cfg.c = {0.5, 0.5};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.e[1] = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.a_h.pop_back();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(simulate(PlantConfig{}, Controller::Off, 0, 1), ConfigError);
}

TEST_CASE("off controller at flat weather holds the equilibrium exactly") {
    SimulationResult res = simulate(calm_plant(), Controller::Off, 2, 7);
    for (const auto& row : res.data.T)
        for (double v : row) CHECK(v == 8.0);
    for (const auto& row : res.data.u)
        for (double v : row) CHECK(v == 0.0);
}

TEST_CASE("heat injected in zone 0 reaches zone 1 before zone 2") {
    PlantConfig cfg;
    BuildingTopology topo = cfg.topology;
    EffectivePhysics eff = cfg.effective();
    std::vector<double> T{20.0, 20.0, 20.0};
    std::vector<double> zero(3, 0.0);

    T = plant_linear_step(T, 20.0, {800.0, 0.0, 0.0}, zero, eff, cfg.e, topo);
    CHECK(T[0] > 20.0);
    CHECK(T[1] == 20.0);
    CHECK(T[2] == 20.0);
    T = plant_linear_step(T, 20.0, zero, zero, eff, cfg.e, topo);
    CHECK(T[1] > 20.0);
    CHECK(T[2] == 20.0);
    T = plant_linear_step(T, 20.0, zero, zero, eff, cfg.e, topo);
    CHECK(T[2] > 20.0);
    CHECK(T[0] > T[1]);
    CHECK(T[1] > T[2]);
}

TEST_CASE("linear noiseless records satisfy the one-step recursion exactly") {
    PlantConfig cfg;
    cfg.noise_std = 0.0;
    SimulationResult res = simulate(cfg, Controller::RandomExcitation, 2, 3);
    const Dataset& d = res.data;
    EffectivePhysics eff;
    eff.a_h = res.truth.a_h;
    eff.a_c = res.truth.a_c;
    eff.b = res.truth.b;
    eff.c = res.truth.c;
    for (std::size_t k = 0; k + 1 < d.size(); ++k) {
        auto next = plant_linear_step(d.T[k], d.T_out[k], d.u[k], d.Q_win[k], eff,
                                      res.truth.e, cfg.topology);
        for (std::size_t z = 0; z < 3; ++z)
            CHECK(std::abs(next[z] - d.T[k + 1][z]) <= 1e-12);
    }
}

TEST_CASE("saturating-solar mode replaces the linear gain by a tanh knee") {
    PlantConfig cfg;
    cfg.noise_std = 0.0;
    cfg.nonlinearity = Nonlinearity::SaturatingSolar;
    SimulationResult res = simulate(cfg, Controller::Off, 2, 3);
    const Dataset& d = res.data;
    EffectivePhysics eff = cfg.effective();
    std::vector<double> zero(3, 0.0);
    bool saw_sun = false;
    for (std::size_t k = 0; k + 1 < d.size(); ++k) {
        auto base = plant_linear_step(d.T[k], d.T_out[k], d.u[k], zero, eff, cfg.e,
                                      cfg.topology);
        for (std::size_t z = 0; z < 3; ++z) {
            double lin = cfg.e[z] * d.Q_win[k][z];
            double want = base[z] + cfg.sat_scale * std::tanh(lin / cfg.sat_scale);
            CHECK(std::abs(want - d.T[k + 1][z]) <= 1e-12);
            if (d.Q_win[k][z] > 0) saw_sun = true;
        }
    }
    CHECK(saw_sun);
}

TEST_CASE("occupancy pulses fire on weekday working hours only") {
    PlantConfig lin = calm_plant();
    PlantConfig occ = calm_plant();
    occ.nonlinearity = Nonlinearity::OccupancyPulse;
    Dataset d_lin = simulate(lin, Controller::Off, 2, 1).data;
    Dataset d_occ = simulate(occ, Controller::Off, 2, 1).data;

    // simulation starts Monday 00:00 UTC; the first pulse is applied at the
    // 08:00 step and lands in the next record
    std::size_t first_pulse = 8 * 4;
    for (std::size_t k = 0; k <= first_pulse; ++k)
        CHECK(d_occ.T[k] == d_lin.T[k]);
    for (std::size_t z = 0; z < 3; ++z)
        CHECK(d_occ.T[first_pulse + 1][z] - d_lin.T[first_pulse + 1][z] ==
              doctest::Approx(occ.occupancy_gain).epsilon(1e-12));
}

TEST_CASE("thermostat drives the band and emits only the three power levels") {
    PlantConfig cfg;
    cfg.noise_std = 0.0;
    cfg.weather.q_sun_peak = 0.0;  // midday sun would overpower the band
    cfg.t_init = 15.0;             // start cold: the controller must heat
    SimulationResult res = simulate(cfg, Controller::Thermostat, 3, 9);
    const Dataset& d = res.data;
    bool heated = false;
    for (std::size_t k = 0; k < d.size(); ++k)
        for (double u : d.u[k]) {
            CHECK((u == 0.0 || u == 600.0 || u == -600.0));
            if (u > 0) heated = true;
        }
    CHECK(heated);
    // by the last day the band should have been reached
    double last = d.T[d.size() - 1][0];
    CHECK(last > 18.0);
    CHECK(last < 24.0);
}

TEST_CASE("simulation is deterministic in the seed") {
    PlantConfig cfg;
    Dataset a = simulate(cfg, Controller::RandomExcitation, 2, 11).data;
    Dataset b = simulate(cfg, Controller::RandomExcitation, 2, 11).data;
    CHECK(a.T == b.T);
    CHECK(a.u == b.u);
    CHECK(a.T_out == b.T_out);
    Dataset c = simulate(cfg, Controller::RandomExcitation, 2, 12).data;
    CHECK(a.T != c.T);
}

TEST_CASE("truth sidecar echoes the effective plant coefficients") {
    PlantConfig cfg;
    SimulationResult res = simulate(cfg, Controller::Off, 1, 4);
    CHECK(res.truth.zone_count == 3);
    CHECK(res.truth.edges == cfg.topology.edges());
    CHECK(res.truth.a_h == cfg.a_h);
    CHECK(res.truth.c == std::vector<double>{8e-3, 8e-3});
    CHECK(res.truth.noise_std == cfg.noise_std);
}
