#include "f0dbn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace f0dbn {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> ref, std::size_t min_len, const char* what)
{
    if (pred.size() != ref.size()) {
        throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(pred.size())
                                    + " vs " + std::to_string(ref.size()) + ")");
    }
    if (pred.size() < min_len) {
        throw std::invalid_argument(std::string(what) + ": need at least " + std::to_string(min_len) + " frames");
    }
}

} // namespace

double rmse(std::span<const double> pred, std::span<const double> ref)
{
    check_pair(pred, ref, 1, "rmse");
    FrameStats s;
    s.add(pred, ref);
    return s.rmse();
}

double xcorr(std::span<const double> pred, std::span<const double> ref)
{
    check_pair(pred, ref, 2, "xcorr");
    FrameStats s;
    s.add(pred, ref);
    return s.xcorr();
}

void FrameStats::add(double pred, double ref) noexcept
{
    ++n_;
    const double n = static_cast<double>(n_);
    const double dp = pred - mean_p_;
    const double dr = ref - mean_r_;
    mean_p_ += dp / n;
    mean_r_ += dr / n;
    m2_p_ += dp * (pred - mean_p_);
    m2_r_ += dr * (ref - mean_r_);
    c_pr_ += dp * (ref - mean_r_);
    const double e = pred - ref;
    sse_ += e * e;
}

void FrameStats::add(std::span<const double> pred, std::span<const double> ref)
{
    if (pred.size() != ref.size()) {
        throw std::invalid_argument("FrameStats::add: length mismatch");
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
        add(pred[i], ref[i]);
    }
}

void FrameStats::merge(const FrameStats& o) noexcept
{
    if (o.n_ == 0) {
        return;
    }
    if (n_ == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(o.n_);
    const double n = na + nb;
    const double dp = o.mean_p_ - mean_p_;
    const double dr = o.mean_r_ - mean_r_;
    m2_p_ += o.m2_p_ + dp * dp * na * nb / n;
    m2_r_ += o.m2_r_ + dr * dr * na * nb / n;
    c_pr_ += o.c_pr_ + dp * dr * na * nb / n;
    mean_p_ += dp * nb / n;
    mean_r_ += dr * nb / n;
    sse_ += o.sse_;
    n_ += o.n_;
}

double FrameStats::rmse() const
{
    if (n_ == 0) {
        throw std::invalid_argument("rmse: no frames");
    }
    return std::sqrt(sse_ / static_cast<double>(n_));
}

double FrameStats::xcorr() const
{
    if (n_ < 2) {
        throw std::invalid_argument("xcorr: need at least 2 frames");
    }
    if (!(m2_p_ > 0.0) || !(m2_r_ > 0.0)) {
        throw std::domain_error("xcorr: correlation undefined for a constant sequence");
    }
    const double r = c_pr_ / std::sqrt(m2_p_ * m2_r_);
    return std::clamp(r, -1.0, 1.0);
}

EvalResult FrameStats::result() const
{
    double r = std::numeric_limits<double>::quiet_NaN();
    if (n_ >= 2 && m2_p_ > 0.0 && m2_r_ > 0.0) {
        r = xcorr();
    }
    return {rmse(), r, n_};
}

ContinuousContour predict_contour(const DnnModel& model, const UtteranceAnnotation& annotation,
                                  const StateDurations& durations, const PhonemeInventory& inventory,
                                  double frame_period)
{
    const auto features = encode_utterance(annotation, inventory);
    if (features.size() != durations.size()) {
        throw std::invalid_argument("predict_contour: " + std::to_string(durations.size()) + " duration rows for "
                                    + std::to_string(features.size()) + " phonemes");
    }
    StateF0 states(features.size());
    for (std::size_t p = 0; p < features.size(); ++p) {
        const Vector y = predict_states(model, features[p]);
        std::copy(y.begin(), y.end(), states[p].begin());
    }
    return spline_expand(states, durations, frame_period);
}

UtteranceEvaluation evaluate_utterance(const DnnModel& model, const UtteranceAnnotation& annotation,
                                       const StateDurations& durations, const F0Track& ref_track,
                                       const PhonemeInventory& inventory, const EvalOptions& options)
{
    UtteranceEvaluation ev;
    ev.predicted = predict_contour(model, annotation, durations, inventory, ref_track.frame_period);
    const ContinuousContour ref = continuize(ref_track);
    if (ref.values.size() != ev.predicted.values.size()) {
        throw std::invalid_argument("evaluate_utterance: reference has " + std::to_string(ref.values.size())
                                    + " frames, durations cover " + std::to_string(ev.predicted.values.size()));
    }
    for (std::size_t i = 0; i < ref.values.size(); ++i) {
        if (options.voiced_only && !(ref_track.values[i] > 0.0)) {
            continue;
        }
        ev.stats.add(ev.predicted.values[i], ref.values[i]);
    }
    ev.result = ev.stats.result();
    return ev;
}

} // namespace f0dbn
