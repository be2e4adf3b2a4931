#pragma once

#include "f0dbn/contour.hpp"
#include "f0dbn/dnn.hpp"
#include "f0dbn/features.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace f0dbn {

struct EvalResult {
    double rmse = 0.0; // Hz
    double xcorr = 0.0;
    std::size_t n_frames = 0;
};

/// Root mean squared difference. Throws std::invalid_argument on empty or
/// unequal-length input.
double rmse(std::span<const double> pred, std::span<const double> ref);

/// Zero-lag Pearson correlation. Throws std::invalid_argument for unequal
/// lengths or fewer than 2 frames, std::domain_error if either side is constant.
double xcorr(std::span<const double> pred, std::span<const double> ref);

/// Streaming sufficient statistics for rmse and xcorr; merge() pools
/// utterances so the pooled result equals computing over all frames at once.
class FrameStats {
public:
    void add(double pred, double ref) noexcept;
    void add(std::span<const double> pred, std::span<const double> ref);
    void merge(const FrameStats& other) noexcept;

    std::size_t count() const noexcept { return n_; }
    double rmse() const;
    double xcorr() const;
    /// xcorr is NaN when undefined (constant side or a single frame).
    EvalResult result() const;

private:
    std::size_t n_ = 0;
    double mean_p_ = 0.0;
    double mean_r_ = 0.0;
    double m2_p_ = 0.0;
    double m2_r_ = 0.0;
    double c_pr_ = 0.0;
    double sse_ = 0.0;
};

struct EvalOptions {
    /// Score only frames voiced in the reference track.
    bool voiced_only = false;
};

/// Features -> predict_states -> spline_expand.
ContinuousContour predict_contour(const DnnModel& model, const UtteranceAnnotation& annotation,
                                  const StateDurations& durations, const PhonemeInventory& inventory,
                                  double frame_period = kDefaultFramePeriod);

struct UtteranceEvaluation {
    EvalResult result;
    FrameStats stats;
    ContinuousContour predicted;
};

/// Compares the predicted contour with continuize(ref_track) frame by frame.
UtteranceEvaluation evaluate_utterance(const DnnModel& model, const UtteranceAnnotation& annotation,
                                       const StateDurations& durations, const F0Track& ref_track,
                                       const PhonemeInventory& inventory, const EvalOptions& options = {});

} // namespace f0dbn
