#pragma once

#include "umss/dsp/stft.hpp"

namespace umss::dsp {

// Classic alternating-projection phase retrieval (zero momentum, zero-phase
// start). Deterministic. The spectral-convergence error
// ||#STFT(out)| - m||_F / ||m||_F is non-increasing over iterations.
Waveform griffin_lim(const MagSpectrogram& m, int n_iters, int sample_rate);

// Frobenius distance between |STFT(w)| and the target magnitude, relative
// to ||target||_F; the quantity the iteration drives down.
double spectral_convergence(const MagSpectrogram& target, const Waveform& w);

} // namespace umss::dsp
