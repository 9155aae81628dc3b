#pragma once

#include <cmath>

#include "umss/common.hpp"

namespace umss::dsp {

inline constexpr int kMidiLow = 21;   // A0
inline constexpr int kMidiHigh = 108; // C8

inline double hz_to_midi(double f) {
    require(f > 0.0, "hz_to_midi: frequency must be positive");
    return 69.0 + 12.0 * std::log2(f / 440.0);
}

inline double midi_to_hz(double n) { return 440.0 * std::exp2((n - 69.0) / 12.0); }

} // namespace umss::dsp
