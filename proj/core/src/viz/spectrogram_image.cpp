#include "umss/viz/spectrogram_image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace umss::viz {

namespace {

struct Rgb {
    unsigned char r, g, b;
};

// Compact viridis-like ramp.
Rgb colormap(double v) {
    static const double anchors[6][3] = {{0.267, 0.005, 0.329}, {0.283, 0.141, 0.458},
                                         {0.254, 0.265, 0.530}, {0.164, 0.471, 0.558},
                                         {0.478, 0.821, 0.318}, {0.993, 0.906, 0.144}};
    v = std::clamp(v, 0.0, 1.0);
    const double pos = v * 5.0;
    const int i = std::min(static_cast<int>(pos), 4);
    const double f = pos - i;
    Rgb c;
    c.r = static_cast<unsigned char>(255.0 * ((1 - f) * anchors[i][0] + f * anchors[i + 1][0]));
    c.g = static_cast<unsigned char>(255.0 * ((1 - f) * anchors[i][1] + f * anchors[i + 1][1]));
    c.b = static_cast<unsigned char>(255.0 * ((1 - f) * anchors[i][2] + f * anchors[i + 1][2]));
    return c;
}

} // namespace

int plot_width(const dsp::MagSpectrogram& mag, const PlotOptions& opt) {
    return opt.margin_left + mag.frames * opt.scale_x + opt.margin_right;
}

int plot_height(const dsp::MagSpectrogram& mag, const PlotOptions& opt) {
    return opt.margin_top + mag.bins * opt.scale_y + opt.margin_bottom;
}

void write_spectrogram_ppm(const std::string& path, const dsp::MagSpectrogram& mag,
                           int sample_rate, const PlotOptions& opt) {
    require(mag.frames > 0 && mag.bins > 0, "plot: empty spectrogram");
    require(sample_rate > 0, "plot: sample rate must be positive");
    const int width = plot_width(mag, opt);
    const int height = plot_height(mag, opt);

    const double peak = mag.max_value();
    const double ref_db = peak > 0.0 ? 20.0 * std::log10(peak) : 0.0;

    std::vector<unsigned char> img(static_cast<size_t>(width) * height * 3, 255);
    auto put = [&](int x, int y, Rgb c) {
        if (x < 0 || x >= width || y < 0 || y >= height) return;
        const size_t i = (static_cast<size_t>(y) * width + x) * 3;
        img[i] = c.r;
        img[i + 1] = c.g;
        img[i + 2] = c.b;
    };

    for (int t = 0; t < mag.frames; ++t)
        for (int f = 0; f < mag.bins; ++f) {
            const double m = mag.at(t, f);
            const double db = 20.0 * std::log10(std::max(m, 1e-12)) - ref_db;
            const double v = (db - opt.db_floor) / (0.0 - opt.db_floor);
            const Rgb c = colormap(v);
            for (int dx = 0; dx < opt.scale_x; ++dx)
                for (int dy = 0; dy < opt.scale_y; ++dy)
                    put(opt.margin_left + t * opt.scale_x + dx,
                        opt.margin_top + (mag.bins - 1 - f) * opt.scale_y + dy, c);
        }

    // Axis frame plus 0.5 s / 1 kHz ticks in the margins.
    const Rgb black{0, 0, 0};
    const int x0 = opt.margin_left, x1 = opt.margin_left + mag.frames * opt.scale_x;
    const int y0 = opt.margin_top, y1 = opt.margin_top + mag.bins * opt.scale_y;
    for (int x = x0 - 1; x <= x1; ++x) {
        put(x, y0 - 1, black);
        put(x, y1, black);
    }
    for (int y = y0 - 1; y <= y1; ++y) {
        put(x0 - 1, y, black);
        put(x1, y, black);
    }
    const double seconds_per_frame =
        static_cast<double>(mag.config.hop_length) / sample_rate;
    for (double s = 0.0;; s += 0.5) {
        const int t = static_cast<int>(std::lround(s / seconds_per_frame));
        if (t >= mag.frames) break;
        for (int d = 1; d <= 5; ++d) put(x0 + t * opt.scale_x, y1 + d, black);
    }
    const double hz_per_bin = static_cast<double>(sample_rate) / mag.config.n_fft;
    for (double hz = 0.0; hz <= 0.5 * sample_rate; hz += 1000.0) {
        const int f = static_cast<int>(std::lround(hz / hz_per_bin));
        if (f >= mag.bins) break;
        for (int d = 1; d <= 5; ++d)
            put(x0 - 1 - d, y0 + (mag.bins - 1 - f) * opt.scale_y, black);
    }

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write image: " + path);
    out << "P6\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
    require(out.good(), "failed writing image payload: " + path);
}

void write_spectrogram_tsv(const std::string& path, const dsp::MagSpectrogram& mag,
                           int sample_rate) {
    std::ofstream out(path);
    require(out.good(), "cannot write spectrogram tsv: " + path);
    out << "#umss_spec v1 sample_rate=" << sample_rate << " n_fft=" << mag.config.n_fft
        << " win_length=" << mag.config.win_length << " hop_length=" << mag.config.hop_length
        << "\n";
    out.precision(10);
    for (int t = 0; t < mag.frames; ++t) {
        for (int f = 0; f < mag.bins; ++f) {
            if (f) out << "\t";
            out << mag.at(t, f);
        }
        out << "\n";
    }
}

dsp::MagSpectrogram read_spectrogram_tsv(const std::string& path, int* sample_rate_out) {
    std::ifstream in(path);
    require(in.good(), "cannot open spectrogram tsv: " + path);
    std::string header;
    std::getline(in, header);
    require(header.rfind("#umss_spec v1", 0) == 0, "not a umss spectrogram tsv: " + path);
    auto field = [&header](const std::string& key) {
        const std::string tag = key + "=";
        const size_t pos = header.find(tag);
        require(pos != std::string::npos, "spectrogram tsv missing field " + key);
        return std::stoi(header.substr(pos + tag.size()));
    };
    dsp::MagSpectrogram mag;
    mag.config.n_fft = field("n_fft");
    mag.config.win_length = field("win_length");
    mag.config.hop_length = field("hop_length");
    mag.bins = mag.config.freq_bins();
    if (sample_rate_out) *sample_rate_out = field("sample_rate");

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        double v;
        int count = 0;
        while (is >> v) {
            mag.values.push_back(v);
            ++count;
        }
        require(count == mag.bins, "spectrogram tsv row width mismatch in " + path);
        ++mag.frames;
    }
    require(mag.frames > 0, "spectrogram tsv has no data rows: " + path);
    return mag;
}

} // namespace umss::viz
