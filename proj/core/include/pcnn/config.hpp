#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcnn/baselines.hpp"
#include "pcnn/blackbox.hpp"
#include "pcnn/model.hpp"
#include "pcnn/physics.hpp"
#include "pcnn/simulator.hpp"
#include "pcnn/training.hpp"
#include "pcnn/topology.hpp"

namespace pcnn {

/// JSON run configuration. Zone indices are 1-based in the file and shifted
/// on load; every block is optional except where a command needs it.
struct RunConfig {
    std::optional<BuildingTopology> topology;
    std::string model_kind = "m-pcnn";
    BlackBoxConfig net;  // desk-scale defaults
    TrainingConfig training;
    PhysicsScales s0;
    std::size_t residual_hidden = 32;
    std::size_t arx_delta = 11;
    ResidualTargets residual_targets = ResidualTargets::FreeRollout;
    LinearFitConfig linear_fit;
    std::optional<PlantConfig> simulator;
    Controller controller = Controller::RandomExcitation;
    std::size_t days = 14;
    std::vector<std::uint64_t> seeds{0};
    std::string out_dir = ".";
};

RunConfig load_run_config(const std::string& path);

/// Fresh untrained model of the configured kind (not for arx/linear/res,
/// which are fitted rather than gradient-trained from scratch).
std::unique_ptr<DynamicsModel> make_model(const RunConfig& cfg, const BuildingTopology& topo,
                                          std::uint64_t seed);

}  // namespace pcnn
