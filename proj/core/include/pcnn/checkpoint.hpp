#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pcnn/baselines.hpp"
#include "pcnn/dataset.hpp"
#include "pcnn/model.hpp"
#include "pcnn/simulator.hpp"

namespace pcnn {

/// Checkpoint container: a diff-friendly text header (kind, metadata, tensor
/// manifest) followed by length-prefixed little-endian float64 payloads, one
/// per manifest row. The `created` line is the only non-deterministic byte
/// in the file.
struct Checkpoint {
    std::string kind;
    std::vector<std::pair<std::string, std::string>> meta;  // ordered key/value
    std::vector<std::pair<std::string, TensorData>> tensors;

    const std::string* find_meta(const std::string& key) const;
    const TensorData* find_tensor(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Model <-> checkpoint. Every model kind the trainer produces round-trips
/// bit-exactly (weights, physics, normalization statistics, structure).
Checkpoint to_checkpoint(const DynamicsModel& model);
std::unique_ptr<DynamicsModel> from_checkpoint(const Checkpoint& ck);

/// Dataset CSV: header `timestamp,T_1..T_m,u_1..u_m,T_out,Q_sun[,Q_win_*]`,
/// ISO-8601 UTC timestamps, shortest round-trip float formatting. Blank
/// cells mark the whole record missing.
void save_dataset_csv(const Dataset& data, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

/// Plant-truth sidecar (plain key/value text).
void save_truth(const PlantTruth& truth, const std::string& path);
PlantTruth load_truth(const std::string& path);

/// Helpers shared by the report writers: deterministic float formatting.
std::string format_double(double v);

}  // namespace pcnn
