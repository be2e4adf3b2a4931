#pragma once

#include "f0dbn/dbn.hpp"
#include "f0dbn/numerics.hpp"
#include "f0dbn/states.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace f0dbn {

/// Fully connected layer. weights is fan_in x fan_out, matching RbmParams so
/// DBN layers copy across without transposition.
struct DenseLayer {
    Matrix weights;
    Vector bias;

    std::size_t fan_in() const noexcept { return weights.rows(); }
    std::size_t fan_out() const noexcept { return weights.cols(); }

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// z-score statistics of log-F0 (log-Hz) targets.
struct TargetNormalization {
    double mean = 0.0;
    double stddev = 1.0;

    friend bool operator==(const TargetNormalization&, const TargetNormalization&) = default;
};

/// Sigmoid hidden layers followed by a linear head with one unit per HMM state.
struct DnnModel {
    std::vector<DenseLayer> hidden;
    DenseLayer output;
    std::optional<TargetNormalization> normalization;

    std::size_t input_dim() const;
    std::size_t output_dim() const noexcept { return output.fan_out(); }

    /// Throws std::invalid_argument when layer dimensions do not chain, the
    /// head is not kStatesPerPhoneme wide, or stddev is not positive.
    void validate() const;

    friend bool operator==(const DnnModel&, const DnnModel&) = default;
};

/// Parameter-shaped gradient.
struct DnnGradient {
    std::vector<DenseLayer> hidden;
    DenseLayer output;
};

struct TrainSample {
    Vector features;
    Vector targets; // kStatesPerPhoneme log-F0 values
};

struct LossConfig {
    double weight_decay = 0.002;
    double sparsity_target = 0.05;
    double sparsity_weight = 0.001;
};

struct LossTerms {
    double mse = 0.0;
    double weight_decay = 0.0;
    double sparsity = 0.0;

    double total() const noexcept { return mse + weight_decay + sparsity; }
};

/// Copies the DBN's weights and hidden biases into sigmoid layers and draws
/// the output head from N(0, 0.01^2). Normalization is left unset.
DnnModel init_from_dbn(const DbnModel& dbn, std::size_t output_dim, std::uint64_t seed);

/// Random initialization baseline: weights ~ N(0, 1/fan_in), biases zero.
DnnModel init_random(std::span<const std::size_t> layer_sizes, std::size_t output_dim, std::uint64_t seed);

/// Normalized prediction (linear head output).
Vector forward(const DnnModel& model, std::span<const double> features);

/// Activations of every hidden layer, then the output, for one input.
std::vector<Vector> forward_trace(const DnnModel& model, std::span<const double> features);

/// MSE over batch and output units, weight_decay * sum of squared weights,
/// and sparsity_weight * sum over hidden units of KL(rho || batch-mean activation).
/// Targets are compared as given (normalized space).
LossTerms loss(const DnnModel& model, std::span<const TrainSample> batch, const LossConfig& config = {});

/// Exact gradient of loss(...).total().
DnnGradient gradient(const DnnModel& model, std::span<const TrainSample> batch,
                     const LossConfig& config = {});

/// Mean squared error only; the cross-validation criterion.
double mse(const DnnModel& model, std::span<const TrainSample> samples);

struct FinetuneConfig {
    double initial_learning_rate = 0.01;
    std::size_t minibatch_phonemes = 20; // 100 states
    double weight_decay = 0.002;
    double sparsity_target = 0.05;
    double sparsity_weight = 0.001;
    std::size_t patience_epochs = 10;
    double lr_decay_factor = 0.5;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 0;

    LossConfig loss_config() const { return {weight_decay, sparsity_target, sparsity_weight}; }
    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;      // 0 is the state before training
    double learning_rate = 0.0; // rate used during this epoch
    double train_loss = 0.0;    // full objective on the (normalized) training set
    double train_mse = 0.0;
    double cv_mse = 0.0;
    bool lr_halved = false;     // decay was applied after this epoch

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct FinetuneResult {
    DnnModel model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

/// Fits target normalization on the training targets when the model has none.
TargetNormalization fit_normalization(std::span<const TrainSample> samples);

/// Copy of samples with targets mapped to (t - mean) / stddev.
std::vector<TrainSample> normalize_targets(std::span<const TrainSample> samples,
                                           const TargetNormalization& norm);

/// Minibatch SGD on samples with log-Hz targets. Every patience_epochs epochs
/// the cv MSE is compared with the value at the previous window boundary and
/// the learning rate is multiplied by lr_decay_factor if it went up. Returns
/// the snapshot with the lowest cv MSE.
FinetuneResult finetune(const DnnModel& model, std::span<const TrainSample> train,
                        std::span<const TrainSample> cv, const FinetuneConfig& config);

/// Denormalized per-state log-F0 in log-Hz. Throws std::logic_error if the
/// model has no normalization statistics.
Vector predict_states(const DnnModel& model, std::span<const double> features);

} // namespace f0dbn
