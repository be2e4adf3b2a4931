#include "f0dbn/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace f0dbn {

DbnModel::DbnModel(std::vector<RbmParams> layers) : layers_(std::move(layers))
{
    if (layers_.empty()) {
        throw std::invalid_argument("DbnModel: at least one layer is required");
    }
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        layers_[k].validate();
        if (k > 0 && layers_[k - 1].hidden_dim() != layers_[k].visible_dim()) {
            throw std::invalid_argument("DbnModel: layer " + std::to_string(k - 1) + " has "
                                        + std::to_string(layers_[k - 1].hidden_dim())
                                        + " hidden units but layer " + std::to_string(k) + " has "
                                        + std::to_string(layers_[k].visible_dim()) + " visible units");
        }
    }
}

std::vector<std::size_t> DbnModel::layer_sizes() const
{
    std::vector<std::size_t> sizes;
    if (layers_.empty()) {
        return sizes;
    }
    sizes.push_back(layers_.front().visible_dim());
    for (const auto& l : layers_) {
        sizes.push_back(l.hidden_dim());
    }
    return sizes;
}

Vector propagate(const DbnModel& model, std::span<const double> v, std::size_t upto_layer)
{
    if (upto_layer > model.num_layers()) {
        throw std::invalid_argument("propagate: requested layer " + std::to_string(upto_layer)
                                    + " of a " + std::to_string(model.num_layers()) + "-layer model");
    }
    if (model.num_layers() > 0 && v.size() != model.layers().front().visible_dim()) {
        throw std::invalid_argument("propagate: input length " + std::to_string(v.size())
                                    + " does not match visible dimension "
                                    + std::to_string(model.layers().front().visible_dim()));
    }
    Vector x(v.begin(), v.end());
    for (std::size_t k = 0; k < upto_layer; ++k) {
        x = hidden_conditional(model.layers()[k], x);
    }
    return x;
}

DbnModel greedy_train(std::span<const Vector> data, std::span<const std::size_t> hidden_sizes,
                      const RbmTrainConfig& config, const LayerEpochObserver& observer)
{
    if (hidden_sizes.empty()) {
        throw std::invalid_argument("greedy_train: at least one hidden layer is required");
    }
    if (data.empty()) {
        throw std::invalid_argument("greedy_train: empty dataset");
    }
    const std::size_t input_dim = data.front().size();

    std::vector<RbmParams> layers;
    std::vector<Vector> layer_data(data.begin(), data.end());
    std::vector<Vector> probabilities(data.begin(), data.end());
    std::size_t visible = input_dim;

    for (std::size_t k = 0; k < hidden_sizes.size(); ++k) {
        RbmTrainConfig layer_config = config;
        if (k > 0) {
            layer_config.seed = Rng::derive(config.seed, k).next_u64();
        }
        EpochObserver epoch_observer;
        if (observer) {
            epoch_observer = [&observer, k](std::size_t epoch, double err) { observer(k, epoch, err); };
        }
        layers.push_back(train_rbm(layer_data, visible, hidden_sizes[k], layer_config, epoch_observer));

        if (k + 1 < hidden_sizes.size()) {
            Rng lift = Rng::derive(config.seed, 1000 + k);
            for (std::size_t n = 0; n < probabilities.size(); ++n) {
                probabilities[n] = hidden_conditional(layers.back(), probabilities[n]);
                layer_data[n] = bernoulli_sample(probabilities[n], lift);
            }
        }
        visible = hidden_sizes[k];
    }
    return DbnModel(std::move(layers));
}

void AisConfig::validate() const
{
    if (num_temperatures < 2) {
        throw std::invalid_argument("AisConfig: num_temperatures must be at least 2");
    }
    if (num_runs < 1) {
        throw std::invalid_argument("AisConfig: num_runs must be at least 1");
    }
}

std::vector<double> uniform_betas(std::size_t num_temperatures)
{
    if (num_temperatures < 2) {
        throw std::invalid_argument("uniform_betas: need at least 2 temperatures");
    }
    std::vector<double> betas(num_temperatures);
    for (std::size_t k = 0; k < num_temperatures; ++k) {
        betas[k] = static_cast<double>(k) / static_cast<double>(num_temperatures - 1);
    }
    betas.back() = 1.0;
    return betas;
}

double base_log_partition(const RbmParams& params)
{
    double log_z = 0.0;
    for (double b : params.visible_bias) {
        log_z += softplus(b);
    }
    for (double a : params.hidden_bias) {
        log_z += softplus(a);
    }
    return log_z;
}

namespace {

/// log p*_beta(v) with hidden units summed out, for p_beta ~ exp(b'v + a'h + beta v'Wh).
double tempered_log_unnormalized(const RbmParams& params, std::span<const double> v,
                                 std::span<const double> wv, double beta)
{
    double s = dot(params.visible_bias, v);
    for (std::size_t j = 0; j < wv.size(); ++j) {
        s += softplus(params.hidden_bias[j] + beta * wv[j]);
    }
    return s;
}

double entropy(std::span<const double> mu)
{
    double h = 0.0;
    for (double p : mu) {
        if (p > 0.0) {
            h -= p * std::log(p);
        }
        if (p < 1.0) {
            h -= (1.0 - p) * std::log1p(-p);
        }
    }
    return h;
}

/// E over x ~ Bernoulli(mu) of sum_r softplus(bias_r + (linear(x))_r).
template <typename Linear>
double expected_softplus_sum(std::span<const double> mu, std::span<const double> bias, Linear linear,
                             Rng& rng)
{
    auto value = [&](const Vector& x) {
        const Vector act = linear(x);
        double s = 0.0;
        for (std::size_t r = 0; r < act.size(); ++r) {
            s += softplus(bias[r] + act[r]);
        }
        return s;
    };

    const std::size_t n = mu.size();
    if (n <= kExactExpectationUnits) {
        double total = 0.0;
        Vector x(n);
        for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
            double weight = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const bool on = ((code >> i) & 1U) != 0;
                x[i] = on ? 1.0 : 0.0;
                weight *= on ? mu[i] : 1.0 - mu[i];
            }
            if (weight == 0.0) {
                continue;
            }
            total += weight * value(x);
        }
        return total;
    }

    double total = 0.0;
    for (std::size_t s = 0; s < kBoundMonteCarloSamples; ++s) {
        total += value(bernoulli_sample(mu, rng));
    }
    return total / static_cast<double>(kBoundMonteCarloSamples);
}

} // namespace

AisEstimate ais_log_partition(const RbmParams& params, const AisConfig& config)
{
    config.validate();
    return ais_log_partition(params, uniform_betas(config.num_temperatures), config.num_runs, config.seed);
}

AisEstimate ais_log_partition(const RbmParams& params, std::span<const double> betas,
                              std::size_t num_runs, std::uint64_t seed)
{
    params.validate();
    if (betas.size() < 2 || betas.front() != 0.0 || betas.back() != 1.0) {
        throw std::invalid_argument("ais_log_partition: beta grid must run from 0 to 1");
    }
    for (std::size_t k = 1; k < betas.size(); ++k) {
        if (!(betas[k] > betas[k - 1])) {
            throw std::invalid_argument("ais_log_partition: beta grid must be strictly increasing");
        }
    }
    if (num_runs < 1) {
        throw std::invalid_argument("ais_log_partition: num_runs must be at least 1");
    }

    const std::size_t nv = params.visible_dim();
    Vector base_p(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        base_p[i] = sigmoid(params.visible_bias[i]);
    }

    std::vector<double> log_weights(num_runs, 0.0);
    for (std::size_t run = 0; run < num_runs; ++run) {
        Rng rng = Rng::derive(seed, run);
        Vector v = bernoulli_sample(base_p, rng);
        double log_w = 0.0;
        for (std::size_t k = 1; k < betas.size(); ++k) {
            const Vector wv = matvec_transposed(params.weights, v);
            log_w += tempered_log_unnormalized(params, v, wv, betas[k])
                     - tempered_log_unnormalized(params, v, wv, betas[k - 1]);
            if (k + 1 == betas.size()) {
                break;
            }
            // Gibbs transition leaving p_beta_k invariant.
            Vector hp(wv.size());
            for (std::size_t j = 0; j < wv.size(); ++j) {
                hp[j] = sigmoid(params.hidden_bias[j] + betas[k] * wv[j]);
            }
            const Vector h = bernoulli_sample(hp, rng);
            const Vector wh = matvec(params.weights, h);
            Vector vp(nv);
            for (std::size_t i = 0; i < nv; ++i) {
                vp[i] = sigmoid(params.visible_bias[i] + betas[k] * wh[i]);
            }
            v = bernoulli_sample(vp, rng);
        }
        log_weights[run] = log_w;
    }

    const double lse = log_sum_exp(log_weights);
    const double log_mean = lse - std::log(static_cast<double>(num_runs));

    double stderr_log = std::numeric_limits<double>::infinity();
    if (num_runs > 1) {
        // Delta method on the normalized weights: se(log mean w) = sd(w) / (sqrt(R) mean(w)).
        double sum = 0.0;
        double sum_sq = 0.0;
        for (double lw : log_weights) {
            const double w = std::exp(lw - lse);
            sum += w;
            sum_sq += w * w;
        }
        const double r = static_cast<double>(num_runs);
        const double mean = sum / r;
        const double var = std::max(0.0, (sum_sq - r * mean * mean) / (r - 1.0));
        stderr_log = std::sqrt(var / r) / mean;
    }
    return {base_log_partition(params) + log_mean, stderr_log};
}

double stack_lower_bound(const DbnModel& model, std::span<const Vector> data, const AisConfig& ais)
{
    if (model.num_layers() == 0) {
        throw std::invalid_argument("stack_lower_bound: empty model");
    }
    if (data.empty()) {
        throw std::invalid_argument("stack_lower_bound: empty dataset");
    }
    const auto& layers = model.layers();
    const RbmParams& top = layers.back();
    const double log_z = ais_log_partition(top, ais).log_z;
    Rng rng = Rng::derive(ais.seed, 0x5eedb0b0ULL);

    double total = 0.0;
    for (const auto& v : data) {
        if (v.size() != layers.front().visible_dim()) {
            throw std::invalid_argument("stack_lower_bound: data vector has wrong length");
        }
        // mus[k] is the factorial posterior over layer-k units; mus[0] = v.
        std::vector<Vector> mus{v};
        for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
            mus.push_back(hidden_conditional(layers[k], mus.back()));
        }

        double bound = 0.0;
        // Directed terms E[log p(h_{k-1} | h_k)] for k = 1..L-1.
        for (std::size_t k = 1; k < layers.size(); ++k) {
            const RbmParams& layer = layers[k - 1];
            const Vector& below = mus[k - 1];
            const Vector& above = mus[k];
            const Vector mean_act = matvec(layer.weights, above);
            for (std::size_t i = 0; i < below.size(); ++i) {
                bound += below[i] * (layer.visible_bias[i] + mean_act[i]);
            }
            bound -= expected_softplus_sum(
                above, layer.visible_bias, [&](const Vector& x) { return matvec(layer.weights, x); }, rng);
            bound += entropy(above);
        }
        // Top RBM marginal over its visible layer.
        const Vector& top_in = mus.back();
        if (layers.size() == 1) {
            bound = -free_energy(top, top_in);
        } else {
            bound += dot(top.visible_bias, top_in);
            bound += expected_softplus_sum(
                top_in, top.hidden_bias, [&](const Vector& x) { return matvec_transposed(top.weights, x); },
                rng);
        }
        total += bound - log_z;
    }
    return total / static_cast<double>(data.size());
}

} // namespace f0dbn
