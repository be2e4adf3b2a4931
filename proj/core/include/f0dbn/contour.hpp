#pragma once

#include "f0dbn/states.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace f0dbn {

inline constexpr double kDefaultFramePeriod = 0.010;
inline constexpr double kMaxVoicedHz = 1000.0;

/// Frame-level pitch track in Hz; 0 marks an unvoiced frame.
struct F0Track {
    double frame_period = kDefaultFramePeriod;
    std::vector<double> values;

    std::size_t voiced_count() const noexcept;

    /// Throws std::invalid_argument for a non-positive frame period or
    /// values outside {0} U (0, 1000) Hz.
    void validate() const;

    friend bool operator==(const F0Track&, const F0Track&) = default;
};

/// Pitch contour with every frame voiced.
struct ContinuousContour {
    double frame_period = kDefaultFramePeriod;
    std::vector<double> values;

    friend bool operator==(const ContinuousContour&, const ContinuousContour&) = default;
};

/// Frames per HMM state, one row per phoneme.
using PhonemeDurations = std::array<std::size_t, kStatesPerPhoneme>;
using StateDurations = std::vector<PhonemeDurations>;

/// log-F0 (log-Hz) per HMM state, one row per phoneme.
using PhonemeStateF0 = std::array<double, kStatesPerPhoneme>;
using StateF0 = std::vector<PhonemeStateF0>;

std::size_t total_frames(const StateDurations& durations) noexcept;

/// Throws std::invalid_argument if any phoneme has zero total duration.
void validate_durations(const StateDurations& durations);

/// Fills unvoiced frames with a natural cubic spline through the voiced
/// frames (Hz domain); leading and trailing gaps hold the nearest voiced
/// value. Voiced frames are returned unchanged. Interpolated values are
/// floored at half the smallest voiced value so the result stays positive.
/// Throws std::invalid_argument with fewer than 2 voiced frames.
ContinuousContour continuize(const F0Track& track);

/// Mean log-F0 over each state's frame span. A zero-length state takes the
/// value of the nearest non-empty state in the same phoneme (earlier state on
/// ties). Throws std::invalid_argument if total duration != contour length.
StateF0 extract_state_f0(const ContinuousContour& contour, const StateDurations& durations);

/// Natural cubic spline through (span centre, state log-F0) knots of every
/// non-empty state, evaluated at each frame and exponentiated back to Hz.
/// Throws std::invalid_argument with fewer than 2 non-empty states.
ContinuousContour spline_expand(const StateF0& states, const StateDurations& durations,
                                double frame_period = kDefaultFramePeriod);

} // namespace f0dbn
