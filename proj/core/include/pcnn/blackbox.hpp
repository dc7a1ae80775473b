#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcnn/tape.hpp"

namespace pcnn {

enum class CellKind { Gru, Lstm };

struct BlackBoxConfig {
    std::size_t input_dim = 6;
    std::size_t encoder_width = 16;
    std::size_t recurrent_width = 32;
    std::size_t recurrent_layers = 1;
    std::size_t decoder_width = 16;
    std::size_t output_dim = 1;
    CellKind cell = CellKind::Gru;  // 4-gate LSTM-style cell behind the config
    std::uint64_t seed = 0;

    void validate() const;
};

struct TensorData {
    std::size_t rows = 0, cols = 0;
    std::vector<double> v;
};

class BoundNet;

/// Encoder -> recurrent cell stack -> running-stat normalization -> decoder.
/// The feature vector it consumes is exogenous by construction (solar and
/// time features only); the schema builder rejects anything else.
class BlackBoxNet {
  public:
    BlackBoxNet() = default;
    explicit BlackBoxNet(const BlackBoxConfig& cfg);  // seeded +-1/sqrt(fan_in) init

    const BlackBoxConfig& config() const { return cfg_; }

    /// Trainable tensors, in fixed declaration order.
    void for_each_tensor(const std::function<void(const std::string&, TensorData&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const TensorData&)>& fn) const;
    TensorData& tensor(const std::string& name);
    std::size_t scalar_count() const;

    /// Normalization running statistics (buffers, not trained by gradient).
    const std::vector<double>& norm_mean() const { return norm_mean_; }
    const std::vector<double>& norm_var() const { return norm_var_; }
    void set_norm_stats(std::vector<double> mean, std::vector<double> var);
    /// Exponential update from a batch of pre-normalization activations.
    void update_norm_stats(const std::vector<std::vector<double>>& pre_norm, double momentum = 0.99);

    BoundNet bind(ad::Tape& tape, const std::string& prefix) const;

  private:
    friend class BoundNet;
    BlackBoxConfig cfg_;
    std::vector<std::pair<std::string, TensorData>> tensors_;
    std::vector<double> norm_mean_, norm_var_;
};

/// Per-layer recurrent memory. Zeroed at series start, carried across
/// warm-start and prediction steps.
struct RecurrentState {
    std::vector<ad::Var> h;
    std::vector<ad::Var> cell;  // LSTM only
};

/// Net weights bound as leaves on one tape. step() is pure given the state.
class BoundNet {
  public:
    ad::Var leaf(const std::string& name) const;
    const std::vector<std::pair<std::string, ad::Var>>& leaves() const { return leaves_; }

    RecurrentState initial_state(ad::Tape& tape) const;

    /// One step: returns the output vector (length output_dim) and advances
    /// the state in place. Records every pre-normalization activation so the
    /// training loop can refresh the running stats afterwards.
    ad::Var step(ad::Var x, RecurrentState& state) const;

    const std::vector<ad::Var>& pre_norm_activations() const { return pre_norm_; }

  private:
    friend class BlackBoxNet;
    const BlackBoxNet* net_ = nullptr;
    ad::Tape* tape_ = nullptr;
    std::string prefix_;
    std::vector<std::pair<std::string, ad::Var>> leaves_;
    ad::Var norm_inv_std_, norm_mean_c_;
    mutable std::vector<ad::Var> pre_norm_;
};

}  // namespace pcnn
