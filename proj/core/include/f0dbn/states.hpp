#pragma once

#include <cstddef>

namespace f0dbn {

/// HMM states per phoneme; the DNN head width and the duration file width.
inline constexpr std::size_t kStatesPerPhoneme = 5;

} // namespace f0dbn
