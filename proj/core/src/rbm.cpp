#include "f0dbn/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace f0dbn {

RbmParams::RbmParams(std::size_t visible, std::size_t hidden)
    : weights(visible, hidden), visible_bias(visible, 0.0), hidden_bias(hidden, 0.0)
{
}

RbmParams::RbmParams(Matrix w, Vector vb, Vector hb)
    : weights(std::move(w)), visible_bias(std::move(vb)), hidden_bias(std::move(hb))
{
    validate();
}

void RbmParams::validate() const
{
    if (weights.rows() != visible_bias.size() || weights.cols() != hidden_bias.size()) {
        throw std::invalid_argument("RbmParams: weights are " + std::to_string(weights.rows()) + "x"
                                    + std::to_string(weights.cols()) + " but biases have lengths "
                                    + std::to_string(visible_bias.size()) + " and "
                                    + std::to_string(hidden_bias.size()));
    }
    if (!all_finite(weights.data()) || !all_finite(visible_bias) || !all_finite(hidden_bias)) {
        throw std::invalid_argument("RbmParams: non-finite parameter");
    }
}

void RbmTrainConfig::validate() const
{
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("RbmTrainConfig: learning_rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("RbmTrainConfig: momentum must lie in [0, 1)");
    }
    if (minibatch_size < 1) {
        throw std::invalid_argument("RbmTrainConfig: minibatch_size must be at least 1");
    }
    if (cd_steps < 1) {
        throw std::invalid_argument("RbmTrainConfig: cd_steps must be at least 1");
    }
}

RbmGradient RbmGradient::zeros_like(const RbmParams& params)
{
    return {Matrix(params.visible_dim(), params.hidden_dim()), Vector(params.visible_dim(), 0.0),
            Vector(params.hidden_dim(), 0.0)};
}

namespace {

void check_length(std::span<const double> x, std::size_t expected, const char* what)
{
    if (x.size() != expected) {
        throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(expected)
                                    + ", got " + std::to_string(x.size()));
    }
}

struct CdResult {
    RbmGradient grad;
    double reconstruction_error = 0.0;
};

CdResult cd_statistics(const RbmParams& params, std::span<const Vector> minibatch, Rng& rng,
                       std::size_t cd_steps)
{
    if (minibatch.empty()) {
        throw std::invalid_argument("cd_gradient: empty minibatch");
    }
    if (cd_steps < 1) {
        throw std::invalid_argument("cd_gradient: cd_steps must be at least 1");
    }
    const std::size_t nv = params.visible_dim();
    const std::size_t nh = params.hidden_dim();
    CdResult result{RbmGradient::zeros_like(params), 0.0};
    auto& g = result.grad;

    for (const auto& v0 : minibatch) {
        check_length(v0, nv, "cd_gradient");
        if (!is_binary(v0)) {
            throw std::invalid_argument("cd_gradient: training vectors must be binary");
        }
        const Vector h0 = hidden_conditional(params, v0);
        Vector h_sample = bernoulli_sample(h0, rng);
        Vector vk;
        Vector hk;
        for (std::size_t step = 0; step < cd_steps; ++step) {
            vk = visible_conditional(params, h_sample);
            hk = hidden_conditional(params, vk);
            if (step + 1 < cd_steps) {
                h_sample = bernoulli_sample(hk, rng);
            }
        }
        for (std::size_t i = 0; i < nv; ++i) {
            auto row = g.d_weights.row(i);
            for (std::size_t j = 0; j < nh; ++j) {
                row[j] += v0[i] * h0[j] - vk[i] * hk[j];
            }
            g.d_visible_bias[i] += v0[i] - vk[i];
            const double diff = v0[i] - vk[i];
            result.reconstruction_error += diff * diff;
        }
        for (std::size_t j = 0; j < nh; ++j) {
            g.d_hidden_bias[j] += h0[j] - hk[j];
        }
    }

    const double scale = 1.0 / static_cast<double>(minibatch.size());
    for (double& x : g.d_weights.data()) {
        x *= scale;
    }
    for (double& x : g.d_visible_bias) {
        x *= scale;
    }
    for (double& x : g.d_hidden_bias) {
        x *= scale;
    }
    result.reconstruction_error *= scale / static_cast<double>(nv == 0 ? 1 : nv);
    return result;
}

void momentum_step(std::span<double> param, std::span<double> vel, std::span<const double> grad,
                   double momentum, double lr)
{
    for (std::size_t k = 0; k < param.size(); ++k) {
        vel[k] = momentum * vel[k] + lr * grad[k];
        param[k] += vel[k];
    }
}

void check_same_shape(const RbmParams& p, const RbmGradient& g, const char* what)
{
    if (g.d_weights.rows() != p.visible_dim() || g.d_weights.cols() != p.hidden_dim()
        || g.d_visible_bias.size() != p.visible_dim() || g.d_hidden_bias.size() != p.hidden_dim()) {
        throw std::invalid_argument(std::string("apply_update: ") + what + " shape does not match params");
    }
}

void check_enumerable(const RbmParams& params)
{
    if (params.visible_dim() + params.hidden_dim() > kMaxExactUnits) {
        throw std::invalid_argument("exact RBM enumeration limited to V + H <= "
                                    + std::to_string(kMaxExactUnits) + ", got "
                                    + std::to_string(params.visible_dim() + params.hidden_dim()));
    }
}

Vector bits_of(std::uint64_t code, std::size_t n)
{
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>((code >> i) & 1U);
    }
    return x;
}

} // namespace

double energy(const RbmParams& params, std::span<const double> v, std::span<const double> h)
{
    check_length(v, params.visible_dim(), "energy (visible)");
    check_length(h, params.hidden_dim(), "energy (hidden)");
    if (!is_binary(v) || !is_binary(h)) {
        throw std::invalid_argument("energy: unit states must be binary");
    }
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] == 0.0) {
            continue;
        }
        e -= dot(params.weights.row(i), h);
    }
    e -= dot(params.visible_bias, v);
    e -= dot(params.hidden_bias, h);
    return e;
}

Vector hidden_conditional(const RbmParams& params, std::span<const double> v)
{
    check_length(v, params.visible_dim(), "hidden_conditional");
    Vector act = matvec_transposed(params.weights, v);
    for (std::size_t j = 0; j < act.size(); ++j) {
        act[j] = sigmoid(act[j] + params.hidden_bias[j]);
    }
    return act;
}

Vector visible_conditional(const RbmParams& params, std::span<const double> h)
{
    check_length(h, params.hidden_dim(), "visible_conditional");
    Vector act = matvec(params.weights, h);
    for (std::size_t i = 0; i < act.size(); ++i) {
        act[i] = sigmoid(act[i] + params.visible_bias[i]);
    }
    return act;
}

double free_energy(const RbmParams& params, std::span<const double> v)
{
    check_length(v, params.visible_dim(), "free_energy");
    const Vector act = matvec_transposed(params.weights, v);
    double f = -dot(params.visible_bias, v);
    for (std::size_t j = 0; j < act.size(); ++j) {
        f -= softplus(act[j] + params.hidden_bias[j]);
    }
    return f;
}

RbmGradient cd_gradient(const RbmParams& params, std::span<const Vector> minibatch, Rng& rng,
                        std::size_t cd_steps)
{
    return cd_statistics(params, minibatch, rng, cd_steps).grad;
}

RbmUpdate apply_update(const RbmParams& params, const RbmGradient& grad, const RbmVelocity& velocity,
                       const RbmTrainConfig& config)
{
    check_same_shape(params, grad, "gradient");
    check_same_shape(params, velocity, "velocity");
    RbmUpdate out{params, velocity};
    momentum_step(out.params.weights.data(), out.velocity.d_weights.data(), grad.d_weights.data(),
                  config.momentum, config.learning_rate);
    momentum_step(out.params.visible_bias, out.velocity.d_visible_bias, grad.d_visible_bias,
                  config.momentum, config.learning_rate);
    momentum_step(out.params.hidden_bias, out.velocity.d_hidden_bias, grad.d_hidden_bias,
                  config.momentum, config.learning_rate);
    return out;
}

RbmParams init_rbm(std::size_t visible, std::size_t hidden, Rng& rng)
{
    RbmParams p(visible, hidden);
    for (double& w : p.weights.data()) {
        w = rng.normal(0.0, 0.01);
    }
    return p;
}

RbmParams train_rbm(std::span<const Vector> data, std::size_t visible, std::size_t hidden,
                    const RbmTrainConfig& config, const EpochObserver& observer)
{
    config.validate();
    if (data.empty()) {
        throw std::invalid_argument("train_rbm: empty dataset");
    }
    for (const auto& v : data) {
        check_length(v, visible, "train_rbm");
    }

    Rng rng(config.seed);
    RbmParams params = init_rbm(visible, hidden, rng);
    RbmVelocity velocity = RbmGradient::zeros_like(params);

    std::vector<std::size_t> order(data.size());
    std::vector<Vector> batch;
    batch.reserve(config.minibatch_size);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t k = 0; k < order.size(); ++k) {
            order[k] = k;
        }
        rng.shuffle(order);

        double recon = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.minibatch_size) {
            const std::size_t stop = std::min(order.size(), start + config.minibatch_size);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(data[order[k]]);
            }
            CdResult cd = cd_statistics(params, batch, rng, config.cd_steps);
            RbmUpdate upd = apply_update(params, cd.grad, velocity, config);
            params = std::move(upd.params);
            velocity = std::move(upd.velocity);
            recon += cd.reconstruction_error;
            ++batches;
        }
        if (observer) {
            observer(epoch + 1, recon / static_cast<double>(batches));
        }
    }
    return params;
}

double exact_log_partition(const RbmParams& params)
{
    check_enumerable(params);
    const std::size_t nv = params.visible_dim();
    const std::size_t nh = params.hidden_dim();
    const bool sum_visible = nv <= nh;
    const std::size_t n = sum_visible ? nv : nh;

    std::vector<double> terms(std::size_t{1} << n);
    for (std::uint64_t code = 0; code < terms.size(); ++code) {
        const Vector x = bits_of(code, n);
        if (sum_visible) {
            terms[code] = -free_energy(params, x);
        } else {
            const Vector act = matvec(params.weights, x);
            double t = dot(params.hidden_bias, x);
            for (std::size_t i = 0; i < nv; ++i) {
                t += softplus(act[i] + params.visible_bias[i]);
            }
            terms[code] = t;
        }
    }
    return log_sum_exp(terms);
}

double enumerate_log_partition(const RbmParams& params)
{
    check_enumerable(params);
    const std::size_t nv = params.visible_dim();
    const std::size_t nh = params.hidden_dim();
    std::vector<double> terms;
    terms.reserve(std::size_t{1} << (nv + nh));
    for (std::uint64_t vc = 0; vc < (std::uint64_t{1} << nv); ++vc) {
        const Vector v = bits_of(vc, nv);
        for (std::uint64_t hc = 0; hc < (std::uint64_t{1} << nh); ++hc) {
            terms.push_back(-energy(params, v, bits_of(hc, nh)));
        }
    }
    return log_sum_exp(terms);
}

double exact_log_likelihood(const RbmParams& params, std::span<const Vector> data)
{
    if (data.empty()) {
        throw std::invalid_argument("exact_log_likelihood: empty dataset");
    }
    const double log_z = exact_log_partition(params);
    double total = 0.0;
    for (const auto& v : data) {
        total += -free_energy(params, v) - log_z;
    }
    return total / static_cast<double>(data.size());
}

} // namespace f0dbn
