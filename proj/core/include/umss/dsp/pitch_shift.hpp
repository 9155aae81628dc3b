#pragma once

#include "umss/dsp/wav.hpp"

namespace umss::dsp {

// Duration-preserving pitch shift: phase-vocoder time stretch followed by
// band-limited resampling back to the original length. The fundamental is
// multiplied by 2^(semitones/12).
Waveform pitch_shift(const Waveform& w, double semitones);

// Phase-vocoder time stretch to factor*duration at unchanged pitch.
Waveform time_stretch(const Waveform& w, double factor);

} // namespace umss::dsp
