#pragma once

#include <string>

#include "umss/dsp/stft.hpp"

namespace umss::viz {

struct PlotOptions {
    int scale_x = 1; // pixels per frame
    int scale_y = 1; // pixels per bin
    int margin_left = 28;
    int margin_right = 6;
    int margin_top = 6;
    int margin_bottom = 18;
    double db_floor = -80.0;
};

// Log-magnitude spectrogram as a binary PPM (P6): time left-to-right,
// frequency bottom-to-top, tick marks each 0.5 s and 1 kHz.
void write_spectrogram_ppm(const std::string& path, const dsp::MagSpectrogram& mag,
                           int sample_rate, const PlotOptions& opt = {});

// Plot geometry, exposed so callers can map pixels back to (frame, bin).
int plot_width(const dsp::MagSpectrogram& mag, const PlotOptions& opt);
int plot_height(const dsp::MagSpectrogram& mag, const PlotOptions& opt);

// Simple text exchange format for spectrograms (header + T rows of F values).
void write_spectrogram_tsv(const std::string& path, const dsp::MagSpectrogram& mag,
                           int sample_rate);
dsp::MagSpectrogram read_spectrogram_tsv(const std::string& path, int* sample_rate_out);

} // namespace umss::viz
