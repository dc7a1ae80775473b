#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcnn/blackbox.hpp"
#include "pcnn/dataset.hpp"
#include "pcnn/model.hpp"
#include "pcnn/simulator.hpp"
#include "pcnn/training.hpp"
#include "pcnn/topology.hpp"

namespace pcnn {

/// Physically consistent linear gray-box: the energy-accumulator terms
/// applied directly to T plus a per-zone solar gain e * Q_win. Needs a
/// dataset carrying the engineered Q_win column.
class LinearModel : public DynamicsModel {
  public:
    LinearModel() = default;
    LinearModel(BuildingTopology topo, EffectivePhysics eff, std::vector<double> e);

    std::string kind() const override { return "linear"; }
    std::size_t zone_count() const override { return topo_.zone_count(); }
    TapeRollout roll(ad::Tape& tape, const SeriesView& series,
                     const RolloutOptions& opt) const override;
    void for_each_param(const ParamVisitor& fn) override;
    std::size_t count_parameters() override;

    const BuildingTopology& topology() const { return topo_; }
    const EffectivePhysics& physics() const { return eff_; }
    const std::vector<double>& solar_gain() const { return e_; }
    bool degenerate_fit() const { return degenerate_; }
    void mark_degenerate() { degenerate_ = true; }

    /// Plain-value one-step prediction (identical arithmetic to the
    /// simulator's linear plant core).
    std::vector<double> step_values(const std::vector<double>& T, double T_out,
                                    const std::vector<double>& u,
                                    const std::vector<double>& q_win) const;

  private:
    BuildingTopology topo_;
    EffectivePhysics eff_;
    std::vector<double> e_;
    bool degenerate_ = false;
};

struct LinearFitConfig {
    std::size_t budget = 2300;       // total objective evaluations
    std::size_t random_phase = 200;  // of which seeded random search
    std::size_t horizon = 5;         // multi-step MSE horizon
    std::uint64_t seed = 0;
};

/// Derivative-free fit of the linear gray-box: seeded random search over
/// log-uniform coefficient boxes, then coordinate-wise golden-section
/// refinement in log space. Coefficients stay strictly positive by
/// construction.
LinearModel fit_linear(const Dataset& data, const SequenceSet& windows,
                       const BuildingTopology& topo, const LinearFitConfig& cfg);

/// Small feed-forward net (one tanh hidden layer) used by the residual
/// models.
struct MlpConfig {
    std::size_t input_dim = 6;
    std::size_t hidden = 32;
    std::size_t output_dim = 1;
    std::uint64_t seed = 0;
};

class MlpNet {
  public:
    MlpNet() = default;
    explicit MlpNet(const MlpConfig& cfg);

    const MlpConfig& config() const { return cfg_; }
    void for_each_tensor(const std::function<void(const std::string&, TensorData&)>& fn);
    TensorData& tensor(const std::string& name);

    struct Bound {
        ad::Var W1, b1, W2, b2;
        ad::Var operator()(ad::Var x) const;
    };
    Bound bind(ad::Tape& tape) const;

  private:
    MlpConfig cfg_;
    std::vector<std::pair<std::string, TensorData>> tensors_;
};

enum class ResidualTargets { FreeRollout, TeacherForced };

/// Residual correction on top of a fitted linear base. The consistent
/// variant's net sees only the exogenous features x; the unconstrained one
/// also sees T, u and T_out (scaled), which breaks the gradient guarantees.
class ResidualModel : public DynamicsModel {
  public:
    ResidualModel() = default;
    ResidualModel(LinearModel base, bool consistent, std::size_t hidden, std::uint64_t seed);

    std::string kind() const override { return consistent_ ? "res-cons" : "res"; }
    std::size_t zone_count() const override { return base_.zone_count(); }
    TapeRollout roll(ad::Tape& tape, const SeriesView& series,
                     const RolloutOptions& opt) const override;
    void for_each_param(const ParamVisitor& fn) override;
    std::size_t count_parameters() override;

    LinearModel& base() { return base_; }
    const LinearModel& base() const { return base_; }
    MlpNet& net() { return net_; }
    bool consistent() const { return consistent_; }

    std::size_t net_input_dim() const;
    std::vector<double> net_input(const SeriesView& series, std::size_t k,
                                  const std::vector<double>& T_prev) const;

  private:
    LinearModel base_;
    MlpNet net_;
    bool consistent_ = true;
};

struct ResidualFitConfig {
    TrainingConfig training;
    ResidualTargets targets = ResidualTargets::FreeRollout;
};

/// Supervised regression of the residual net onto per-step base-model
/// errors; the base stays frozen.
void fit_residual(ResidualModel& model, const Dataset& data, const SequenceSet& windows,
                  const ResidualFitConfig& cfg);

/// Relative singular-value cutoff below which design-matrix directions are
/// treated as null and excluded from the ARX least-squares solution.
inline constexpr double kArxRankTol = 1e-10;

/// ARX(delta) with exogenous rows [u, T_out, Q_sun], fitted by ordinary
/// least squares over stacked one-step regressions.
class ArxModel : public DynamicsModel {
  public:
    ArxModel() = default;
    ArxModel(std::size_t zone_count, std::size_t delta);

    std::string kind() const override { return "arx"; }
    std::size_t zone_count() const override { return m_; }
    TapeRollout roll(ad::Tape& tape, const SeriesView& series,
                     const RolloutOptions& opt) const override;
    void for_each_param(const ParamVisitor& fn) override;
    std::size_t count_parameters() override;

    std::size_t delta() const { return delta_; }
    std::size_t exo_dim() const { return m_ + 2; }
    /// alpha(i): m x m, beta(i): m x (m+2), i = 0..delta (lag i).
    std::vector<double>& alpha(std::size_t i) { return alpha_[i]; }
    std::vector<double>& beta(std::size_t i) { return beta_[i]; }
    const std::vector<double>& alpha(std::size_t i) const { return alpha_[i]; }
    const std::vector<double>& beta(std::size_t i) const { return beta_[i]; }
    double fit_condition_number() const { return condition_; }

    std::vector<double> predict(const std::vector<std::vector<double>>& T_hist,
                                const std::vector<std::vector<double>>& exo_hist) const;

    friend ArxModel arx_fit(const Dataset& data, const SequenceSet& windows, std::size_t delta);

  private:
    std::size_t m_ = 0, delta_ = 11;
    std::vector<std::vector<double>> alpha_, beta_;  // [lag][row-major]
    double condition_ = 0.0;
};

ArxModel arx_fit(const Dataset& data, const SequenceSet& windows, std::size_t delta = 11);

/// Unconstrained recurrent baseline: T_{k+1} = T_k + f(T_k, u_k, x_k, T_out_k)
/// with a full-schema recurrent net; nothing enforces gradient signs.
class BlackboxModel : public DynamicsModel {
  public:
    BlackboxModel() = default;
    BlackboxModel(BuildingTopology topo, const BlackBoxConfig& cfg, std::uint64_t seed);

    std::string kind() const override { return "blackbox"; }
    std::size_t zone_count() const override { return topo_.zone_count(); }
    TapeRollout roll(ad::Tape& tape, const SeriesView& series,
                     const RolloutOptions& opt) const override;
    void for_each_param(const ParamVisitor& fn) override;
    std::size_t count_parameters() override;
    void absorb_rollout_stats(const TapeRollout& ro) override;

    BlackBoxNet& net() { return net_; }
    const BuildingTopology& topology() const { return topo_; }

  private:
    std::vector<double> full_input(const SeriesView& series, std::size_t k) const;

    BuildingTopology topo_;
    BlackBoxNet net_;
};

/// Physics-penalty term of the PiNN loss: relu of the negated gradients of
/// every zone's final-step temperature w.r.t. each power input and each
/// ambient temperature along the horizon, summed. Requires a rollout with
/// recorded input leaves; the result is itself a recorded function of the
/// parameters (second backward pass supported).
ad::Var pinn_penalty(ad::Tape& tape, const TapeRollout& ro);

/// L_data + lambda * L_phys over a batch of same-tape rollouts.
ad::Var pinn_loss(ad::Tape& tape, const std::vector<TapeRollout>& rollouts,
                  const std::vector<SeriesView>& series, double lambda);

}  // namespace pcnn
