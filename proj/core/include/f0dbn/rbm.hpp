#pragma once

#include "f0dbn/numerics.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace f0dbn {

/// Bernoulli-Bernoulli RBM parameters. weights is V x H, so weights(i, j)
/// couples visible unit i and hidden unit j.
struct RbmParams {
    Matrix weights;
    Vector visible_bias;
    Vector hidden_bias;

    RbmParams() = default;
    RbmParams(std::size_t visible, std::size_t hidden);
    RbmParams(Matrix weights, Vector visible_bias, Vector hidden_bias);

    std::size_t visible_dim() const noexcept { return visible_bias.size(); }
    std::size_t hidden_dim() const noexcept { return hidden_bias.size(); }

    /// Throws std::invalid_argument when shapes disagree or entries are not finite.
    void validate() const;

    friend bool operator==(const RbmParams&, const RbmParams&) = default;
};

struct RbmTrainConfig {
    double learning_rate = 0.002;
    double momentum = 0.95;
    std::size_t epochs = 50;
    std::size_t minibatch_size = 10;
    std::size_t cd_steps = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Parameter-shaped container for a CD estimate of the log-likelihood
/// gradient (ascent direction) or for the momentum term.
struct RbmGradient {
    Matrix d_weights;
    Vector d_visible_bias;
    Vector d_hidden_bias;

    static RbmGradient zeros_like(const RbmParams& params);

    friend bool operator==(const RbmGradient&, const RbmGradient&) = default;
};

using RbmVelocity = RbmGradient;

/// E(v, h) = -v'Wh - b'v - a'h. Throws on non-binary or mis-sized inputs.
double energy(const RbmParams& params, std::span<const double> v, std::span<const double> h);

/// p(h_j = 1 | v). Accepts real-valued v in [0, 1] (mean-field inputs).
Vector hidden_conditional(const RbmParams& params, std::span<const double> v);

/// p(v_i = 1 | h).
Vector visible_conditional(const RbmParams& params, std::span<const double> h);

/// -log sum_h exp(-E(v, h)), hidden units summed in closed form.
double free_energy(const RbmParams& params, std::span<const double> v);

/// CD-k estimate of the log-likelihood gradient averaged over the minibatch.
/// Positive statistics use data and hidden probabilities; the chain is driven
/// by sampled hidden states, reconstructions are visible probabilities.
RbmGradient cd_gradient(const RbmParams& params, std::span<const Vector> minibatch, Rng& rng,
                        std::size_t cd_steps = 1);

struct RbmUpdate {
    RbmParams params;
    RbmVelocity velocity;
};

/// velocity' = m * velocity + lr * grad; params' = params + velocity'.
RbmUpdate apply_update(const RbmParams& params, const RbmGradient& grad,
                       const RbmVelocity& velocity, const RbmTrainConfig& config);

/// Weights ~ N(0, 0.01^2), biases zero.
RbmParams init_rbm(std::size_t visible, std::size_t hidden, Rng& rng);

/// Called after each epoch with the 1-based epoch index and the mean squared
/// one-step reconstruction error over the epoch's minibatches.
using EpochObserver = std::function<void(std::size_t epoch, double reconstruction_error)>;

/// Seeded CD training with momentum. One Rng, seeded from config.seed, is
/// used for initialization, per-epoch shuffles and Gibbs sampling in that order.
RbmParams train_rbm(std::span<const Vector> data, std::size_t visible, std::size_t hidden,
                    const RbmTrainConfig& config, const EpochObserver& observer = {});

/// Largest V + H accepted by the exact enumeration routines.
inline constexpr std::size_t kMaxExactUnits = 24;

/// log Z by summing over the smaller layer's 2^n states with the other layer
/// marginalized analytically.
double exact_log_partition(const RbmParams& params);

/// log Z by brute enumeration of all 2^(V+H) joint states. Test oracle.
double enumerate_log_partition(const RbmParams& params);

/// Mean over data of log p(v).
double exact_log_likelihood(const RbmParams& params, std::span<const Vector> data);

} // namespace f0dbn
