#pragma once

#include "f0dbn/rbm.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace f0dbn {

/// Ordered stack of RBMs; layer k's hidden units are layer k+1's visible units.
class DbnModel {
public:
    DbnModel() = default;

    /// Throws std::invalid_argument for an empty stack or mismatched inner dimensions.
    explicit DbnModel(std::vector<RbmParams> layers);

    const std::vector<RbmParams>& layers() const noexcept { return layers_; }
    std::size_t num_layers() const noexcept { return layers_.size(); }

    /// Visible dimension followed by each hidden dimension.
    std::vector<std::size_t> layer_sizes() const;

    friend bool operator==(const DbnModel&, const DbnModel&) = default;

private:
    std::vector<RbmParams> layers_;
};

/// Applies hidden_conditional through the first `upto_layer` layers, passing
/// probabilities upward. upto_layer == 0 returns v.
Vector propagate(const DbnModel& model, std::span<const double> v, std::size_t upto_layer);

using LayerEpochObserver =
    std::function<void(std::size_t layer, std::size_t epoch, double reconstruction_error)>;

/// Greedy layer-wise training. hidden_sizes excludes the input dimension,
/// which is taken from data. Layer 0 is trained with config.seed exactly as
/// train_rbm would; upper layers get seeds derived from (config.seed, layer),
/// and each receives one fixed binarization of the propagated probabilities.
DbnModel greedy_train(std::span<const Vector> data, std::span<const std::size_t> hidden_sizes,
                      const RbmTrainConfig& config, const LayerEpochObserver& observer = {});

struct AisConfig {
    std::size_t num_temperatures = 1000;
    std::size_t num_runs = 100;
    std::uint64_t seed = 0;

    void validate() const;
};

struct AisEstimate {
    double log_z = 0.0;
    double stderr_log_z = 0.0;
};

/// Uniform inverse-temperature grid from 0 to 1 inclusive.
std::vector<double> uniform_betas(std::size_t num_temperatures);

/// Annealed importance sampling from the zero-weight RBM with the target's
/// biases (analytic partition function) to the target. Each run draws from
/// Rng::derive(seed, run), so the result does not depend on run order.
AisEstimate ais_log_partition(const RbmParams& params, const AisConfig& config);

/// As above with an explicit, strictly increasing beta grid from 0 to 1.
AisEstimate ais_log_partition(const RbmParams& params, std::span<const double> betas,
                              std::size_t num_runs, std::uint64_t seed);

/// log Z of the zero-weight RBM with the same biases.
double base_log_partition(const RbmParams& params);

/// Hidden layers at or below this width have their expectations enumerated
/// exactly in stack_lower_bound; wider ones use Monte-Carlo estimates.
inline constexpr std::size_t kExactExpectationUnits = 16;
inline constexpr std::size_t kBoundMonteCarloSamples = 256;

/// Mean over data of the variational lower bound on log p(v) for the stack,
/// with factorial posteriors given by propagate() and the top RBM's log Z
/// from AIS. For a single layer this is the RBM log-likelihood.
double stack_lower_bound(const DbnModel& model, std::span<const Vector> data, const AisConfig& ais);

} // namespace f0dbn
