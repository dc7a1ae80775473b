#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pcnn/blackbox.hpp"
#include "pcnn/dataset.hpp"
#include "pcnn/physics.hpp"
#include "pcnn/tape.hpp"
#include "pcnn/topology.hpp"

namespace pcnn {

struct RolloutOptions {
    bool record_inputs = false;  // bind u, T_out (and the start temperature) as leaves
    bool train_mode = false;     // X-PCNN: neighbor temperatures from measured data
    std::size_t x_train_zone = static_cast<std::size_t>(-1);
    /// When set, replaces every black-box output with the given per-free-step
    /// m-vector (used by the variant-equivalence checks).
    const std::vector<std::vector<double>>* inject_f = nullptr;
    bool physics_only = false;  // force f == 0
};

/// One recorded rollout. Free-running predictions cover records
/// warm_len .. len-1 of the series; T_pred[i] predicts record warm_len + i.
/// Input leaves exist for steps warm_len-1 .. len-2 when record_inputs is set.
struct TapeRollout {
    std::size_t warm_len = kWarmStartSteps;
    std::vector<ad::Var> T_pred;
    std::vector<ad::Var> D_vals, E_vals;  // PCNN only; aligned with T_pred
    std::vector<ad::Var> u_leaves, t_out_leaves;
    ad::Var t_start;  // measured start temperature leaf (when record_inputs)
    std::vector<std::pair<std::string, ad::Var>> param_leaves;
    std::vector<BoundNet> bound_nets;
    std::vector<std::size_t> bound_net_owner;  // index into the model's net list
};

/// Per-step D/E/T values of a rollout, plus the warm-start override
/// (T equals the measurement inside the warm-start window).
struct Trace {
    std::size_t warm_len = kWarmStartSteps;
    std::vector<std::vector<double>> D, E, T;  // [record][zone], record 0..len-1
};

Trace to_trace(const TapeRollout& ro, const SeriesView& series);

using ParamVisitor =
    std::function<void(const std::string&, std::size_t rows, std::size_t cols, std::vector<double>&)>;

/// Anything whose multi-step predictions can be recorded on a tape:
/// PCNN variants, the linear and residual gray-box models, the ARX model,
/// and the unconstrained recurrent baseline. The verifier, the trainer, and
/// the PiNN penalty all operate through this surface.
class DynamicsModel {
  public:
    virtual ~DynamicsModel() = default;
    virtual std::string kind() const = 0;
    virtual std::size_t zone_count() const = 0;
    virtual TapeRollout roll(ad::Tape& tape, const SeriesView& series,
                             const RolloutOptions& opt) const = 0;
    virtual void for_each_param(const ParamVisitor& fn) = 0;
    virtual std::size_t count_parameters() = 0;

    /// Training-loop hook: fold a finished rollout's recorded activations
    /// into any running statistics (normalization layers). No-op by default.
    virtual void absorb_rollout_stats(const TapeRollout&) {}

    Trace rollout(const SeriesView& series, const RolloutOptions& opt = {}) const;
};

enum class PcnnVariant { X, M, S };

std::string to_string(PcnnVariant v);
PcnnVariant pcnn_variant_from_string(const std::string& s);

/// Pre-merge X-PCNN physics for one zone: scalar log-coefficients plus one
/// directional log-c per adjacent zone (sorted neighbor order).
struct XZonePhysics {
    std::vector<double> log_a_h{0.0}, log_a_c{0.0}, log_b{0.0};
    std::vector<double> log_c;  // per adjacent zone
};

/// The three multi-zone PCNN architectures behind one class.
///   X: per-zone physics (directional c until merge) and per-zone nets;
///   M: shared physics, per-zone nets;
///   S: shared physics, one net with m outputs.
/// After merge_x() an X model rolls through the same vectorized physics
/// path as M and S.
class PcnnModel : public DynamicsModel {
  public:
    PcnnModel(PcnnVariant variant, BuildingTopology topo, const BlackBoxConfig& net_cfg,
              PhysicsScales s0 = {}, std::uint64_t seed = 0);

    std::string kind() const override { return to_string(variant_) + "-pcnn"; }
    std::size_t zone_count() const override { return topo_.zone_count(); }
    TapeRollout roll(ad::Tape& tape, const SeriesView& series,
                     const RolloutOptions& opt) const override;
    void for_each_param(const ParamVisitor& fn) override;
    std::size_t count_parameters() override;
    void absorb_rollout_stats(const TapeRollout& ro) override;

    PcnnVariant variant() const { return variant_; }
    const BuildingTopology& topology() const { return topo_; }
    bool x_merged() const { return x_merged_; }

    /// Post-training X-PCNN correction: replaces the two directional c values
    /// of each adjacent pair by their arithmetic mean (in effective space)
    /// and switches to symmetric storage. Usage error on M/S.
    void merge_x();

    /// Deserialization hook: marks an X model as already merged so the
    /// shared physics storage (about to be overwritten) is authoritative.
    void mark_x_merged() { x_merged_ = variant_ == PcnnVariant::X; }

    PhysicsParams& shared_physics() { return shared_phys_; }
    const PhysicsParams& shared_physics() const { return shared_phys_; }
    std::vector<XZonePhysics>& x_physics() { return x_phys_; }
    std::vector<BlackBoxNet>& nets() { return nets_; }
    const std::vector<BlackBoxNet>& nets() const { return nets_; }

    /// Effective coefficients in the common vectorized form (X: post-merge
    /// only; pre-merge X has no single symmetric c).
    EffectivePhysics effective_physics() const;

  private:
    TapeRollout roll_vectorized(ad::Tape& tape, const SeriesView& series,
                                const RolloutOptions& opt) const;
    TapeRollout roll_x_premerge(ad::Tape& tape, const SeriesView& series,
                                const RolloutOptions& opt) const;

    PcnnVariant variant_;
    BuildingTopology topo_;
    PhysicsParams shared_phys_;        // M, S, X after merge
    std::vector<XZonePhysics> x_phys_; // X before merge
    bool x_merged_ = false;
    std::vector<BlackBoxNet> nets_;
};

/// Pure-physics multi-zone model (f == 0, fixed effective coefficients);
/// the executable object of the sign-structure guarantees and the
/// verifier's ground fixture.
class PurePhysicsModel : public DynamicsModel {
  public:
    PurePhysicsModel(BuildingTopology topo, EffectivePhysics eff);

    std::string kind() const override { return "pure-physics"; }
    std::size_t zone_count() const override { return topo_.zone_count(); }
    TapeRollout roll(ad::Tape& tape, const SeriesView& series,
                     const RolloutOptions& opt) const override;
    void for_each_param(const ParamVisitor& fn) override {}
    std::size_t count_parameters() override { return 0; }

    const BuildingTopology& topology() const { return topo_; }
    const EffectivePhysics& physics() const { return eff_; }

  private:
    BuildingTopology topo_;
    EffectivePhysics eff_;
};

}  // namespace pcnn
