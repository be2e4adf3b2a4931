#include "f0dbn/dnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace f0dbn {

namespace {

constexpr double kRhoClamp = 1e-12;

DenseLayer zero_layer_like(const DenseLayer& l)
{
    return {Matrix(l.fan_in(), l.fan_out()), Vector(l.fan_out(), 0.0)};
}

Vector dense_forward(const DenseLayer& layer, std::span<const double> x)
{
    Vector out = matvec_transposed(layer.weights, x);
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] += layer.bias[j];
    }
    return out;
}

void check_batch(const DnnModel& model, std::span<const TrainSample> batch, const char* what)
{
    if (batch.empty()) {
        throw std::invalid_argument(std::string(what) + ": empty batch");
    }
    const std::size_t in = model.input_dim();
    for (const auto& s : batch) {
        if (s.features.size() != in) {
            throw std::invalid_argument(std::string(what) + ": feature length "
                                        + std::to_string(s.features.size()) + " does not match input "
                                        + std::to_string(in));
        }
        if (s.targets.size() != model.output_dim()) {
            throw std::invalid_argument(std::string(what) + ": expected "
                                        + std::to_string(model.output_dim()) + " targets");
        }
    }
}

double kl_bernoulli(double rho, double rho_hat)
{
    return rho * std::log(rho / rho_hat) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - rho_hat));
}

double clamp_rho(double r)
{
    return std::clamp(r, kRhoClamp, 1.0 - kRhoClamp);
}

struct BatchTrace {
    // activations[b][l] for hidden layer l, then output at index hidden.size().
    std::vector<std::vector<Vector>> activations;
    std::vector<Vector> rho_hat; // per hidden layer
};

BatchTrace trace_batch(const DnnModel& model, std::span<const TrainSample> batch)
{
    BatchTrace t;
    t.activations.reserve(batch.size());
    for (const auto& s : batch) {
        t.activations.push_back(forward_trace(model, s.features));
    }
    for (std::size_t l = 0; l < model.hidden.size(); ++l) {
        Vector r(model.hidden[l].fan_out(), 0.0);
        for (const auto& a : t.activations) {
            for (std::size_t j = 0; j < r.size(); ++j) {
                r[j] += a[l][j];
            }
        }
        for (double& x : r) {
            x = clamp_rho(x / static_cast<double>(batch.size()));
        }
        t.rho_hat.push_back(std::move(r));
    }
    return t;
}

double sum_squared_weights(const DnnModel& model)
{
    double s = 0.0;
    auto add = [&s](const DenseLayer& l) {
        for (double w : l.weights.data()) {
            s += w * w;
        }
    };
    for (const auto& l : model.hidden) {
        add(l);
    }
    add(model.output);
    return s;
}

} // namespace

std::size_t DnnModel::input_dim() const
{
    return hidden.empty() ? output.fan_in() : hidden.front().fan_in();
}

void DnnModel::validate() const
{
    std::size_t prev = input_dim();
    auto check = [&prev](const DenseLayer& l, std::size_t index) {
        if (l.fan_in() != prev) {
            throw std::invalid_argument("DnnModel: layer " + std::to_string(index) + " expects "
                                        + std::to_string(l.fan_in()) + " inputs but receives "
                                        + std::to_string(prev));
        }
        if (l.bias.size() != l.fan_out()) {
            throw std::invalid_argument("DnnModel: layer " + std::to_string(index)
                                        + " bias length does not match its width");
        }
        if (!all_finite(l.weights.data()) || !all_finite(l.bias)) {
            throw std::invalid_argument("DnnModel: non-finite parameter in layer " + std::to_string(index));
        }
        prev = l.fan_out();
    };
    for (std::size_t l = 0; l < hidden.size(); ++l) {
        check(hidden[l], l);
    }
    check(output, hidden.size());
    if (output.fan_out() != kStatesPerPhoneme) {
        throw std::invalid_argument("DnnModel: output layer must have " + std::to_string(kStatesPerPhoneme)
                                    + " units, has " + std::to_string(output.fan_out()));
    }
    if (normalization && !(normalization->stddev > 0.0 && std::isfinite(normalization->mean))) {
        throw std::invalid_argument("DnnModel: normalization stddev must be positive");
    }
}

DnnModel init_from_dbn(const DbnModel& dbn, std::size_t output_dim, std::uint64_t seed)
{
    if (dbn.num_layers() == 0) {
        throw std::invalid_argument("init_from_dbn: empty DBN");
    }
    if (output_dim != kStatesPerPhoneme) {
        throw std::invalid_argument("init_from_dbn: output_dim must be " + std::to_string(kStatesPerPhoneme));
    }
    DnnModel model;
    for (const auto& rbm : dbn.layers()) {
        model.hidden.push_back({rbm.weights, rbm.hidden_bias});
    }
    const std::size_t top = dbn.layers().back().hidden_dim();
    Rng rng(seed);
    model.output = {Matrix(top, output_dim), Vector(output_dim, 0.0)};
    for (double& w : model.output.weights.data()) {
        w = rng.normal(0.0, 0.01);
    }
    return model;
}

DnnModel init_random(std::span<const std::size_t> layer_sizes, std::size_t output_dim, std::uint64_t seed)
{
    if (layer_sizes.size() < 2) {
        throw std::invalid_argument("init_random: need an input size and at least one hidden size");
    }
    if (output_dim != kStatesPerPhoneme) {
        throw std::invalid_argument("init_random: output_dim must be " + std::to_string(kStatesPerPhoneme));
    }
    Rng rng(seed);
    auto make = [&rng](std::size_t in, std::size_t out) {
        DenseLayer l{Matrix(in, out), Vector(out, 0.0)};
        const double sd = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& w : l.weights.data()) {
            w = rng.normal(0.0, sd);
        }
        return l;
    };
    DnnModel model;
    for (std::size_t k = 1; k < layer_sizes.size(); ++k) {
        model.hidden.push_back(make(layer_sizes[k - 1], layer_sizes[k]));
    }
    model.output = make(layer_sizes.back(), output_dim);
    return model;
}

std::vector<Vector> forward_trace(const DnnModel& model, std::span<const double> features)
{
    if (features.size() != model.input_dim()) {
        throw std::invalid_argument("forward: feature length " + std::to_string(features.size())
                                    + " does not match input " + std::to_string(model.input_dim()));
    }
    std::vector<Vector> acts;
    acts.reserve(model.hidden.size() + 1);
    std::span<const double> x = features;
    for (const auto& layer : model.hidden) {
        Vector h = dense_forward(layer, x);
        for (double& z : h) {
            z = sigmoid(z);
        }
        acts.push_back(std::move(h));
        x = acts.back();
    }
    acts.push_back(dense_forward(model.output, x));
    return acts;
}

Vector forward(const DnnModel& model, std::span<const double> features)
{
    return std::move(forward_trace(model, features).back());
}

LossTerms loss(const DnnModel& model, std::span<const TrainSample> batch, const LossConfig& config)
{
    check_batch(model, batch, "loss");
    const BatchTrace t = trace_batch(model, batch);
    LossTerms terms;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const Vector& y = t.activations[b].back();
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double e = y[k] - batch[b].targets[k];
            terms.mse += e * e;
        }
    }
    terms.mse /= static_cast<double>(batch.size() * model.output_dim());
    terms.weight_decay = config.weight_decay * sum_squared_weights(model);
    for (const auto& r : t.rho_hat) {
        for (double rh : r) {
            terms.sparsity += kl_bernoulli(config.sparsity_target, rh);
        }
    }
    terms.sparsity *= config.sparsity_weight;
    return terms;
}

double mse(const DnnModel& model, std::span<const TrainSample> samples)
{
    check_batch(model, samples, "mse");
    double s = 0.0;
    for (const auto& sample : samples) {
        const Vector y = forward(model, sample.features);
        for (std::size_t k = 0; k < y.size(); ++k) {
            const double e = y[k] - sample.targets[k];
            s += e * e;
        }
    }
    return s / static_cast<double>(samples.size() * model.output_dim());
}

DnnGradient gradient(const DnnModel& model, std::span<const TrainSample> batch, const LossConfig& config)
{
    check_batch(model, batch, "gradient");
    const BatchTrace t = trace_batch(model, batch);
    const std::size_t n_hidden = model.hidden.size();
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double out_scale = 2.0 * inv_b / static_cast<double>(model.output_dim());

    DnnGradient g;
    for (const auto& l : model.hidden) {
        g.hidden.push_back(zero_layer_like(l));
    }
    g.output = zero_layer_like(model.output);

    // d sparsity / d activation, identical for every sample of the batch.
    std::vector<Vector> sparsity_grad(n_hidden);
    const double rho = config.sparsity_target;
    for (std::size_t l = 0; l < n_hidden; ++l) {
        sparsity_grad[l].resize(t.rho_hat[l].size());
        for (std::size_t j = 0; j < t.rho_hat[l].size(); ++j) {
            const double rh = t.rho_hat[l][j];
            sparsity_grad[l][j] = config.sparsity_weight * inv_b * (-rho / rh + (1.0 - rho) / (1.0 - rh));
        }
    }

    auto accumulate = [](DenseLayer& gl, std::span<const double> input, const Vector& delta) {
        for (std::size_t i = 0; i < input.size(); ++i) {
            const double xi = input[i];
            if (xi == 0.0) {
                continue;
            }
            auto row = gl.weights.row(i);
            for (std::size_t j = 0; j < delta.size(); ++j) {
                row[j] += xi * delta[j];
            }
        }
        for (std::size_t j = 0; j < delta.size(); ++j) {
            gl.bias[j] += delta[j];
        }
    };

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& acts = t.activations[b];
        Vector delta(model.output_dim());
        for (std::size_t k = 0; k < delta.size(); ++k) {
            delta[k] = out_scale * (acts.back()[k] - batch[b].targets[k]);
        }
        const DenseLayer* above = &model.output;
        DenseLayer* g_above = &g.output;
        for (std::size_t step = 0; step <= n_hidden; ++step) {
            const std::size_t l = n_hidden - step; // layer whose output delta refers to
            std::span<const double> input = l == 0 ? std::span<const double>(batch[b].features)
                                                   : std::span<const double>(acts[l - 1]);
            accumulate(*g_above, input, delta);
            if (l == 0) {
                break;
            }
            // Back through the sigmoid of hidden layer l - 1.
            Vector d_act = matvec(above->weights, delta);
            const Vector& h = acts[l - 1];
            for (std::size_t j = 0; j < d_act.size(); ++j) {
                d_act[j] = (d_act[j] + sparsity_grad[l - 1][j]) * h[j] * (1.0 - h[j]);
            }
            delta = std::move(d_act);
            above = &model.hidden[l - 1];
            g_above = &g.hidden[l - 1];
        }
    }

    auto add_decay = [&config](DenseLayer& gl, const DenseLayer& l) {
        auto gw = gl.weights.data();
        auto w = l.weights.data();
        for (std::size_t k = 0; k < gw.size(); ++k) {
            gw[k] += 2.0 * config.weight_decay * w[k];
        }
    };
    for (std::size_t l = 0; l < n_hidden; ++l) {
        add_decay(g.hidden[l], model.hidden[l]);
    }
    add_decay(g.output, model.output);
    return g;
}

void FinetuneConfig::validate() const
{
    if (!(initial_learning_rate > 0.0)) {
        throw std::invalid_argument("FinetuneConfig: initial_learning_rate must be positive");
    }
    if (minibatch_phonemes < 1) {
        throw std::invalid_argument("FinetuneConfig: minibatch_phonemes must be at least 1");
    }
    if (!(weight_decay >= 0.0) || !(sparsity_weight >= 0.0)) {
        throw std::invalid_argument("FinetuneConfig: penalty weights must be non-negative");
    }
    if (!(sparsity_target > 0.0 && sparsity_target < 1.0)) {
        throw std::invalid_argument("FinetuneConfig: sparsity_target must lie in (0, 1)");
    }
    if (patience_epochs < 1) {
        throw std::invalid_argument("FinetuneConfig: patience_epochs must be at least 1");
    }
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
        throw std::invalid_argument("FinetuneConfig: lr_decay_factor must lie in (0, 1)");
    }
}

TargetNormalization fit_normalization(std::span<const TrainSample> samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("fit_normalization: no samples");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
        for (double t : s.targets) {
            sum += t;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& s : samples) {
        for (double t : s.targets) {
            ss += (t - mean) * (t - mean);
        }
    }
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0)) {
        sd = 1.0;
    }
    return {mean, sd};
}

std::vector<TrainSample> normalize_targets(std::span<const TrainSample> samples, const TargetNormalization& norm)
{
    std::vector<TrainSample> out(samples.begin(), samples.end());
    for (auto& s : out) {
        for (double& t : s.targets) {
            t = (t - norm.mean) / norm.stddev;
        }
    }
    return out;
}

namespace {

void sgd_step(DenseLayer& layer, const DenseLayer& grad, double lr)
{
    auto w = layer.weights.data();
    auto gw = grad.weights.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] -= lr * gw[k];
    }
    for (std::size_t k = 0; k < layer.bias.size(); ++k) {
        layer.bias[k] -= lr * grad.bias[k];
    }
}

} // namespace

FinetuneResult finetune(const DnnModel& initial, std::span<const TrainSample> train,
                        std::span<const TrainSample> cv, const FinetuneConfig& config)
{
    config.validate();
    initial.validate();
    if (train.empty() || cv.empty()) {
        throw std::invalid_argument("finetune: training and cross-validation sets must be non-empty");
    }
    check_batch(initial, train, "finetune (train)");
    check_batch(initial, cv, "finetune (cv)");

    FinetuneResult result{initial, {}, 0};
    if (config.max_epochs == 0) {
        return result;
    }

    DnnModel model = initial;
    if (!model.normalization) {
        model.normalization = fit_normalization(train);
    }
    const std::vector<TrainSample> train_n = normalize_targets(train, *model.normalization);
    const std::vector<TrainSample> cv_n = normalize_targets(cv, *model.normalization);
    const LossConfig lc = config.loss_config();

    double lr = config.initial_learning_rate;
    auto record = [&](std::size_t epoch) {
        EpochRecord r;
        r.epoch = epoch;
        r.learning_rate = lr;
        r.train_loss = loss(model, train_n, lc).total();
        r.train_mse = mse(model, train_n);
        r.cv_mse = mse(model, cv_n);
        return r;
    };

    result.history.push_back(record(0));
    double best_cv = result.history.back().cv_mse;
    double window_reference = best_cv;
    result.model = model;

    Rng rng(config.seed);
    std::vector<std::size_t> order(train_n.size());
    std::vector<TrainSample> batch;
    batch.reserve(config.minibatch_phonemes);

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        for (std::size_t k = 0; k < order.size(); ++k) {
            order[k] = k;
        }
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += config.minibatch_phonemes) {
            const std::size_t stop = std::min(order.size(), start + config.minibatch_phonemes);
            batch.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(train_n[order[k]]);
            }
            const DnnGradient g = gradient(model, batch, lc);
            for (std::size_t l = 0; l < model.hidden.size(); ++l) {
                sgd_step(model.hidden[l], g.hidden[l], lr);
            }
            sgd_step(model.output, g.output, lr);
        }

        EpochRecord r = record(epoch);
        if (r.cv_mse < best_cv) {
            best_cv = r.cv_mse;
            result.model = model;
            result.best_epoch = epoch;
        }
        if (epoch % config.patience_epochs == 0) {
            if (r.cv_mse > window_reference) {
                lr *= config.lr_decay_factor;
                r.lr_halved = true;
            }
            window_reference = r.cv_mse;
        }
        result.history.push_back(r);
    }
    return result;
}

Vector predict_states(const DnnModel& model, std::span<const double> features)
{
    if (!model.normalization) {
        throw std::logic_error("predict_states: model has no target normalization statistics");
    }
    Vector y = forward(model, features);
    for (double& v : y) {
        v = v * model.normalization->stddev + model.normalization->mean;
    }
    return y;
}

} // namespace f0dbn
