#include "pcnn/config.hpp"

#include <fstream>

#include <json.hpp>

#include "pcnn/errors.hpp"

namespace pcnn {

using nlohmann::json;

namespace {

BuildingTopology topology_from_json(const json& j) {
    std::size_t m = j.at("zones").get<std::size_t>();
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : j.at("edges")) {
        if (!e.is_array() || e.size() != 2)
            throw ConfigError("config: each edge must be a [zone, zone] pair");
        std::size_t a = e[0].get<std::size_t>(), b = e[1].get<std::size_t>();
        if (a < 1 || b < 1) throw ConfigError("config: zones are 1-indexed");
        edges.emplace_back(a - 1, b - 1);
    }
    std::vector<bool> ext(m, false);
    if (j.contains("external")) {
        for (const auto& z : j.at("external")) {
            std::size_t v = z.get<std::size_t>();
            if (v < 1 || v > m) throw ConfigError("config: external zone out of range");
            ext[v - 1] = true;
        }
    } else {
        ext.assign(m, true);
    }
    return BuildingTopology(m, std::move(edges), std::move(ext));
}

template <typename T>
void maybe(const json& j, const char* key, T& dst) {
    if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
    }

    RunConfig cfg;
    try {
        if (j.contains("topology")) cfg.topology = topology_from_json(j.at("topology"));
        maybe(j, "model", cfg.model_kind);
        if (j.contains("net")) {
            const json& n = j.at("net");
            maybe(n, "encoder_width", cfg.net.encoder_width);
            maybe(n, "recurrent_width", cfg.net.recurrent_width);
            maybe(n, "recurrent_layers", cfg.net.recurrent_layers);
            maybe(n, "decoder_width", cfg.net.decoder_width);
            if (n.contains("cell")) {
                std::string c = n.at("cell").get<std::string>();
                if (c == "gru") cfg.net.cell = CellKind::Gru;
                else if (c == "lstm") cfg.net.cell = CellKind::Lstm;
                else throw ConfigError("config: unknown cell kind " + c);
            }
        }
        if (j.contains("training")) {
            const json& t = j.at("training");
            maybe(t, "learning_rate", cfg.training.learning_rate);
            maybe(t, "batch_sequences", cfg.training.batch_sequences);
            maybe(t, "max_epochs", cfg.training.max_epochs);
            maybe(t, "patience", cfg.training.patience);
            maybe(t, "train_window_cap", cfg.training.train_window_cap);
            maybe(t, "pinn_lambda", cfg.training.pinn_lambda);
        }
        if (j.contains("physics_s0")) {
            const json& s = j.at("physics_s0");
            maybe(s, "a_h0", cfg.s0.a_h0);
            maybe(s, "a_c0", cfg.s0.a_c0);
            maybe(s, "b0", cfg.s0.b0);
            maybe(s, "c0", cfg.s0.c0);
        }
        maybe(j, "residual_hidden", cfg.residual_hidden);
        maybe(j, "arx_delta", cfg.arx_delta);
        if (j.contains("residual_targets")) {
            std::string t = j.at("residual_targets").get<std::string>();
            if (t == "free-rollout") cfg.residual_targets = ResidualTargets::FreeRollout;
            else if (t == "teacher-forced") cfg.residual_targets = ResidualTargets::TeacherForced;
            else throw ConfigError("config: unknown residual_targets " + t);
        }
        if (j.contains("linear_fit")) {
            const json& f = j.at("linear_fit");
            maybe(f, "budget", cfg.linear_fit.budget);
            maybe(f, "random_phase", cfg.linear_fit.random_phase);
            maybe(f, "horizon", cfg.linear_fit.horizon);
        }
        if (j.contains("simulator")) {
            const json& s = j.at("simulator");
            PlantConfig plant;
            if (s.contains("topology")) plant.topology = topology_from_json(s.at("topology"));
            else if (cfg.topology) plant.topology = *cfg.topology;
            std::size_t m = plant.topology.zone_count();
            auto resize_defaults = [&](std::vector<double>& v, double def) {
                if (v.size() != m) v.assign(m, def);
            };
            resize_defaults(plant.a_h, 1.2e-4);
            resize_defaults(plant.a_c, 1.2e-4);
            resize_defaults(plant.b, 6e-3);
            resize_defaults(plant.e, 2e-3);
            if (plant.theta0_deg.size() != m) {
                plant.theta0_deg.resize(m);
                for (std::size_t z = 0; z < m; ++z)
                    plant.theta0_deg[z] = -30.0 + 60.0 * static_cast<double>(z) /
                                                      static_cast<double>(std::max<std::size_t>(m - 1, 1));
            }
            maybe(s, "a_h", plant.a_h);
            maybe(s, "a_c", plant.a_c);
            maybe(s, "b", plant.b);
            maybe(s, "c", plant.c);
            maybe(s, "e", plant.e);
            maybe(s, "theta0_deg", plant.theta0_deg);
            maybe(s, "sat_scale", plant.sat_scale);
            maybe(s, "occupancy_gain", plant.occupancy_gain);
            maybe(s, "noise_std", plant.noise_std);
            maybe(s, "t_init", plant.t_init);
            if (s.contains("nonlinearity"))
                plant.nonlinearity = nonlinearity_from_string(s.at("nonlinearity").get<std::string>());
            if (s.contains("weather")) {
                const json& w = s.at("weather");
                maybe(w, "t_out_mean", plant.weather.t_out_mean);
                maybe(w, "t_out_amplitude", plant.weather.t_out_amplitude);
                maybe(w, "t_out_noise", plant.weather.t_out_noise);
                maybe(w, "q_sun_peak", plant.weather.q_sun_peak);
            }
            cfg.simulator = std::move(plant);
        }
        if (j.contains("controller"))
            cfg.controller = controller_from_string(j.at("controller").get<std::string>());
        maybe(j, "days", cfg.days);
        if (j.contains("seeds")) {
            cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
            if (cfg.seeds.empty()) throw ConfigError("config: seeds list must be non-empty");
        }
        maybe(j, "out_dir", cfg.out_dir);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

std::unique_ptr<DynamicsModel> make_model(const RunConfig& cfg, const BuildingTopology& topo,
                                          std::uint64_t seed) {
    const std::string& k = cfg.model_kind;
    if (k == "x-pcnn" || k == "m-pcnn" || k == "s-pcnn") {
        PcnnVariant v = pcnn_variant_from_string(k.substr(0, 1));
        return std::make_unique<PcnnModel>(v, topo, cfg.net, cfg.s0, seed);
    }
    if (k == "blackbox" || k == "pinn")
        return std::make_unique<BlackboxModel>(topo, cfg.net, seed);
    throw ConfigError("config: model kind " + k + " is fitted, not constructed");
}

}  // namespace pcnn
