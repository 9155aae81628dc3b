#pragma once

#include "umss/dsp/wav.hpp"

namespace umss::dsp {

// Band-limited (windowed-sinc) sample rate conversion. Output duration
// matches the input within one sample period.
Waveform resample(const Waveform& w, int target_rate);

// Same kernel, arbitrary target length at an unchanged nominal rate.
std::vector<double> resample_to_length(const std::vector<double>& x, int64_t new_len);

} // namespace umss::dsp
