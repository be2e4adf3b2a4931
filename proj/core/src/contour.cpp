#include "f0dbn/contour.hpp"

#include "f0dbn/spline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace f0dbn {

std::size_t F0Track::voiced_count() const noexcept
{
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](double v) { return v > 0.0; }));
}

void F0Track::validate() const
{
    if (!(frame_period > 0.0)) {
        throw std::invalid_argument("F0Track: frame period must be positive");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!(v == 0.0 || (v > 0.0 && v < kMaxVoicedHz))) {
            throw std::invalid_argument("F0Track: frame " + std::to_string(i) + " has invalid value "
                                        + std::to_string(v));
        }
    }
}

std::size_t total_frames(const StateDurations& durations) noexcept
{
    std::size_t n = 0;
    for (const auto& p : durations) {
        for (std::size_t d : p) {
            n += d;
        }
    }
    return n;
}

void validate_durations(const StateDurations& durations)
{
    for (std::size_t p = 0; p < durations.size(); ++p) {
        std::size_t sum = 0;
        for (std::size_t d : durations[p]) {
            sum += d;
        }
        if (sum == 0) {
            throw std::invalid_argument("durations: phoneme " + std::to_string(p) + " has zero total duration");
        }
    }
}

ContinuousContour continuize(const F0Track& track)
{
    track.validate();
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < track.values.size(); ++i) {
        if (track.values[i] > 0.0) {
            x.push_back(static_cast<double>(i));
            y.push_back(track.values[i]);
        }
    }
    if (x.size() < 2) {
        throw std::invalid_argument("continuize: at least 2 voiced frames required, found "
                                    + std::to_string(x.size()));
    }
    const double floor_hz = 0.5 * *std::min_element(y.begin(), y.end());
    const auto first = static_cast<std::size_t>(x.front());
    const auto last = static_cast<std::size_t>(x.back());
    const NaturalCubicSpline spline(std::move(x), std::move(y));

    ContinuousContour out{track.frame_period, track.values};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        if (out.values[i] > 0.0) {
            continue;
        }
        if (i < first) {
            out.values[i] = track.values[first];
        } else if (i > last) {
            out.values[i] = track.values[last];
        } else {
            out.values[i] = std::max(floor_hz, spline(static_cast<double>(i)));
        }
    }
    return out;
}

StateF0 extract_state_f0(const ContinuousContour& contour, const StateDurations& durations)
{
    validate_durations(durations);
    const std::size_t total = total_frames(durations);
    if (total != contour.values.size()) {
        throw std::invalid_argument("extract_state_f0: durations cover " + std::to_string(total)
                                    + " frames but contour has " + std::to_string(contour.values.size()));
    }
    StateF0 states(durations.size());
    std::size_t frame = 0;
    for (std::size_t p = 0; p < durations.size(); ++p) {
        std::array<bool, kStatesPerPhoneme> filled{};
        for (std::size_t s = 0; s < kStatesPerPhoneme; ++s) {
            const std::size_t n = durations[p][s];
            if (n == 0) {
                continue;
            }
            double sum = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double v = contour.values[frame + k];
                if (!(v > 0.0)) {
                    throw std::invalid_argument("extract_state_f0: contour frame "
                                                + std::to_string(frame + k) + " is not positive");
                }
                sum += std::log(v);
            }
            states[p][s] = sum / static_cast<double>(n);
            filled[s] = true;
            frame += n;
        }
        for (std::size_t s = 0; s < kStatesPerPhoneme; ++s) {
            if (filled[s]) {
                continue;
            }
            for (std::size_t dist = 1; dist < kStatesPerPhoneme; ++dist) {
                if (s >= dist && filled[s - dist]) {
                    states[p][s] = states[p][s - dist];
                    break;
                }
                if (s + dist < kStatesPerPhoneme && filled[s + dist]) {
                    states[p][s] = states[p][s + dist];
                    break;
                }
            }
        }
    }
    return states;
}

ContinuousContour spline_expand(const StateF0& states, const StateDurations& durations, double frame_period)
{
    if (states.size() != durations.size()) {
        throw std::invalid_argument("spline_expand: " + std::to_string(states.size()) + " state rows but "
                                    + std::to_string(durations.size()) + " duration rows");
    }
    if (!(frame_period > 0.0)) {
        throw std::invalid_argument("spline_expand: frame period must be positive");
    }
    std::vector<double> x;
    std::vector<double> y;
    std::size_t frame = 0;
    for (std::size_t p = 0; p < durations.size(); ++p) {
        for (std::size_t s = 0; s < kStatesPerPhoneme; ++s) {
            const std::size_t n = durations[p][s];
            if (n == 0) {
                continue;
            }
            if (!std::isfinite(states[p][s])) {
                throw std::invalid_argument("spline_expand: non-finite state value");
            }
            x.push_back((static_cast<double>(frame) + 0.5 * static_cast<double>(n - 1)) * frame_period);
            y.push_back(states[p][s]);
            frame += n;
        }
    }
    if (x.size() < 2) {
        throw std::invalid_argument("spline_expand: at least 2 states with positive duration required");
    }
    const NaturalCubicSpline spline(std::move(x), std::move(y));
    ContinuousContour out{frame_period, std::vector<double>(frame)};
    for (std::size_t i = 0; i < frame; ++i) {
        out.values[i] = std::exp(spline(static_cast<double>(i) * frame_period));
    }
    return out;
}

} // namespace f0dbn
