#include "umss/dsp/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace umss::dsp {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_u32(std::ostream& out, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

} // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open wav file: " + path);

    char tag[5] = {0};
    in.read(tag, 4);
    require(std::strncmp(tag, "RIFF", 4) == 0, "not a RIFF file: " + path);
    read_u32(in); // riff size
    in.read(tag, 4);
    require(std::strncmp(tag, "WAVE", 4) == 0, "not a WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    std::vector<char> payload;

    while (in.read(tag, 4)) {
        uint32_t chunk_size = read_u32(in);
        if (std::strncmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in); // byte rate
            read_u16(in); // block align
            bits = read_u16(in);
            if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::strncmp(tag, "data", 4) == 0) {
            payload.resize(chunk_size);
            in.read(payload.data(), chunk_size);
            break;
        } else {
            in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
        }
    }
    require(have_fmt, "wav missing fmt chunk: " + path);
    require(!payload.empty(), "wav missing data chunk: " + path);
    require(channels >= 1, "wav has zero channels: " + path);

    Waveform w;
    w.sample_rate = static_cast<int>(rate);
    const size_t bytes_per_sample = bits / 8;
    const size_t frames = payload.size() / (bytes_per_sample * channels);
    w.samples.resize(frames);

    if (format == 1 && bits == 16) {
        const int16_t* p = reinterpret_cast<const int16_t*>(payload.data());
        for (size_t i = 0; i < frames; ++i) {
            double acc = 0.0;
            for (int c = 0; c < channels; ++c)
                acc += static_cast<double>(p[i * channels + c]) / 32768.0;
            w.samples[i] = acc / channels;
        }
    } else if (format == 3 && bits == 32) {
        const float* p = reinterpret_cast<const float*>(payload.data());
        for (size_t i = 0; i < frames; ++i) {
            double acc = 0.0;
            for (int c = 0; c < channels; ++c) acc += p[i * channels + c];
            w.samples[i] = acc / channels;
        }
    } else {
        throw Error("unsupported wav encoding (want 16-bit PCM or 32-bit float): " + path);
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w, WavFormat format) {
    require(w.sample_rate > 0, "write_wav: sample rate must be positive");
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write wav file: " + path);

    const uint32_t n = static_cast<uint32_t>(w.samples.size());
    const uint16_t bits = format == WavFormat::Pcm16 ? 16 : 32;
    const uint32_t data_size = n * (bits / 8);

    out.write("RIFF", 4);
    write_u32(out, 36 + data_size);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_u32(out, 16);
    write_u16(out, format == WavFormat::Pcm16 ? 1 : 3);
    write_u16(out, 1); // mono
    write_u32(out, static_cast<uint32_t>(w.sample_rate));
    write_u32(out, static_cast<uint32_t>(w.sample_rate) * (bits / 8));
    write_u16(out, bits / 8);
    write_u16(out, bits);
    out.write("data", 4);
    write_u32(out, data_size);

    if (format == WavFormat::Pcm16) {
        for (double v : w.samples) {
            const long q = std::lrint(std::clamp(v, -1.0, 1.0) * 32768.0);
            const int16_t s = static_cast<int16_t>(std::clamp(q, -32768l, 32767l));
            out.write(reinterpret_cast<const char*>(&s), 2);
        }
    } else {
        for (double v : w.samples) {
            float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    }
    require(out.good(), "failed writing wav data: " + path);
}

double peak_abs(const Waveform& w) {
    double peak = 0.0;
    for (double v : w.samples) peak = std::max(peak, std::fabs(v));
    return peak;
}

double rms(const std::vector<double>& samples, size_t begin, size_t count) {
    if (count == 0 || begin >= samples.size()) return 0.0;
    const size_t end = std::min(begin + count, samples.size());
    double acc = 0.0;
    for (size_t i = begin; i < end; ++i) acc += samples[i] * samples[i];
    return std::sqrt(acc / static_cast<double>(end - begin));
}

} // namespace umss::dsp
