#pragma once

#include <string>
#include <vector>

#include "umss/dsp/stft.hpp"

namespace umss::model {

// The proposed models plus the three baselines. MSI and MSI-DIS share one
// parameter inventory and differ in wiring and training objective.
enum class Variant { MSI, MSI_DIS, MSS_ONLY, AMT_ONLY, MULTI_TASK };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);
bool variant_has_decoder(Variant v);
bool variant_has_transcriptor(Variant v);
bool variant_has_disentanglement(Variant v);

struct ModelConfig {
    Variant variant = Variant::MSI;
    int freq_bins = 1025;                         // F of the input spectrogram
    std::vector<int> enc_channels = {32, 64, 128, 256};
    int bottleneck_channels = 256;
    int pitch_rep_width = 128;                    // K; split into gamma/beta halves
    int query_embed_dim = 6;                      // M
    int n_notes = 89;                             // 88 notes + silence
    int query_channels = 32;
    int transcriptor_channels = 64;
    int film_rank = 0;                            // 0 = direct linear map from q
    // Spectrogram domain of the network: values are (mag/scale)^mag_power,
    // inverted exactly on output. 1.0 = raw magnitudes; 0.5 compresses the
    // dynamic range, which converges much faster at desk scale.
    double mag_power = 1.0;

    int levels() const { return static_cast<int>(enc_channels.size()); }
    // Frequency axis padded to a pooling-friendly multiple; cropped back on output.
    int padded_bins() const;
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
    int batch_pairs = 12;
    int epochs = 200;
    int steps_per_epoch = 64;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    uint64_t seed = 1;
    double segment_seconds = 4.0;
    double query_seconds = 4.0;
    int shift_range = 4;
    int keep_last_checkpoints = 10;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct PipelineConfig {
    int sample_rate = 16000;
    dsp::StftConfig stft;
    ModelConfig model;
    TrainConfig train;

    double hop_seconds() const {
        return static_cast<double>(stft.hop_length) / sample_rate;
    }
    void validate() const;
    bool operator==(const PipelineConfig&) const = default;
};

std::string to_json_string(const PipelineConfig& cfg);
PipelineConfig pipeline_from_json_string(const std::string& text);
PipelineConfig read_pipeline_config(const std::string& path);
void write_pipeline_config(const std::string& path, const PipelineConfig& cfg);

} // namespace umss::model
