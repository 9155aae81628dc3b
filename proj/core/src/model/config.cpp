#include "umss/model/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "umss/common.hpp"

using json = nlohmann::json;

namespace umss::model {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::MSI: return "msi";
        case Variant::MSI_DIS: return "msi_dis";
        case Variant::MSS_ONLY: return "mss_only";
        case Variant::AMT_ONLY: return "amt_only";
        case Variant::MULTI_TASK: return "multi_task";
    }
    throw Error("bad variant value");
}

Variant variant_from_name(const std::string& name) {
    if (name == "msi") return Variant::MSI;
    if (name == "msi_dis") return Variant::MSI_DIS;
    if (name == "mss_only") return Variant::MSS_ONLY;
    if (name == "amt_only") return Variant::AMT_ONLY;
    if (name == "multi_task") return Variant::MULTI_TASK;
    throw Error("unknown variant: " + name +
                " (want msi|msi_dis|mss_only|amt_only|multi_task)");
}

bool variant_has_decoder(Variant v) { return v != Variant::AMT_ONLY; }
bool variant_has_transcriptor(Variant v) { return v != Variant::MSS_ONLY; }
bool variant_has_disentanglement(Variant v) {
    return v == Variant::MSI || v == Variant::MSI_DIS;
}

int ModelConfig::padded_bins() const {
    const int mult = 1 << levels();
    return ((freq_bins + mult - 1) / mult) * mult;
}

void ModelConfig::validate() const {
    require(!enc_channels.empty(), "model: enc_channels must be non-empty");
    for (int c : enc_channels) require(c > 0, "model: channel widths must be positive");
    require(bottleneck_channels > 0, "model: bottleneck_channels must be positive");
    require(pitch_rep_width > 0 && pitch_rep_width % 2 == 0,
            "model: pitch_rep_width must be positive and even");
    require(query_embed_dim > 0, "model: query_embed_dim must be positive");
    require(n_notes > 1, "model: n_notes must exceed 1");
    require(freq_bins > 4, "model: freq_bins too small");
    require(query_channels > 0 && transcriptor_channels > 0, "model: conv widths positive");
    require(film_rank >= 0, "model: film_rank must be >= 0");
    require(mag_power > 0.0 && mag_power <= 1.0, "model: mag_power must be in (0, 1]");
    // The transcriptor pools frequency twice at the bottleneck resolution.
    require(padded_bins() / (1 << levels()) >= 4,
            "model: too many levels for this freq_bins (bottleneck narrower than 4 bins)");
}

void TrainConfig::validate() const {
    require(batch_pairs >= 2, "train: batch_pairs must be >= 2 (contrastive loss needs a negative)");
    require(epochs >= 1 && steps_per_epoch >= 1, "train: epochs/steps must be >= 1");
    require(learning_rate > 0.0, "train: learning_rate must be positive");
    require(optimizer == "adam", "train: only the adam optimizer is supported");
    require(segment_seconds > 0.0 && query_seconds > 0.0, "train: segment lengths positive");
    require(shift_range >= 0 && shift_range <= 12, "train: shift_range within [0,12]");
    require(keep_last_checkpoints >= 0, "train: keep_last_checkpoints must be >= 0");
}

void PipelineConfig::validate() const {
    require(sample_rate > 0, "pipeline: sample_rate must be positive");
    dsp::validate(stft);
    require(model.freq_bins == stft.freq_bins(),
            "pipeline: model.freq_bins must equal stft n_fft/2+1");
    model.validate();
    train.validate();
}

namespace {

json stft_to_json(const dsp::StftConfig& s) {
    return json{{"n_fft", s.n_fft},
                {"win_length", s.win_length},
                {"hop_length", s.hop_length},
                {"window", "hann"},
                {"center_pad", s.center_pad}};
}

dsp::StftConfig stft_from_json(const json& j) {
    dsp::StftConfig s;
    s.n_fft = j.at("n_fft").get<int>();
    s.win_length = j.at("win_length").get<int>();
    s.hop_length = j.at("hop_length").get<int>();
    s.center_pad = j.value("center_pad", true);
    if (j.contains("window"))
        require(j.at("window").get<std::string>() == "hann", "config: only hann window supported");
    return s;
}

json model_to_json(const ModelConfig& m) {
    return json{{"variant", variant_name(m.variant)},
                {"freq_bins", m.freq_bins},
                {"enc_channels", m.enc_channels},
                {"bottleneck_channels", m.bottleneck_channels},
                {"pitch_rep_width", m.pitch_rep_width},
                {"query_embed_dim", m.query_embed_dim},
                {"n_notes", m.n_notes},
                {"query_channels", m.query_channels},
                {"transcriptor_channels", m.transcriptor_channels},
                {"film_rank", m.film_rank},
                {"mag_power", m.mag_power}};
}

ModelConfig model_from_json(const json& j) {
    ModelConfig m;
    m.variant = variant_from_name(j.at("variant").get<std::string>());
    m.freq_bins = j.at("freq_bins").get<int>();
    m.enc_channels = j.at("enc_channels").get<std::vector<int>>();
    m.bottleneck_channels = j.value("bottleneck_channels", m.enc_channels.back());
    m.pitch_rep_width = j.value("pitch_rep_width", 128);
    m.query_embed_dim = j.value("query_embed_dim", 6);
    m.n_notes = j.value("n_notes", 89);
    m.query_channels = j.value("query_channels", 32);
    m.transcriptor_channels = j.value("transcriptor_channels", 64);
    m.film_rank = j.value("film_rank", 0);
    m.mag_power = j.value("mag_power", 1.0);
    return m;
}

json train_to_json(const TrainConfig& t) {
    return json{{"batch_pairs", t.batch_pairs},
                {"epochs", t.epochs},
                {"steps_per_epoch", t.steps_per_epoch},
                {"learning_rate", t.learning_rate},
                {"optimizer", t.optimizer},
                {"seed", t.seed},
                {"segment_seconds", t.segment_seconds},
                {"query_seconds", t.query_seconds},
                {"shift_range", t.shift_range},
                {"keep_last_checkpoints", t.keep_last_checkpoints}};
}

TrainConfig train_from_json(const json& j) {
    TrainConfig t;
    t.batch_pairs = j.value("batch_pairs", 12);
    t.epochs = j.value("epochs", 200);
    t.steps_per_epoch = j.value("steps_per_epoch", 64);
    t.learning_rate = j.value("learning_rate", 1e-3);
    t.optimizer = j.value("optimizer", "adam");
    t.seed = j.value("seed", static_cast<uint64_t>(1));
    t.segment_seconds = j.value("segment_seconds", 4.0);
    t.query_seconds = j.value("query_seconds", 4.0);
    t.shift_range = j.value("shift_range", 4);
    t.keep_last_checkpoints = j.value("keep_last_checkpoints", 10);
    return t;
}

} // namespace

std::string to_json_string(const PipelineConfig& cfg) {
    json j;
    j["sample_rate"] = cfg.sample_rate;
    j["stft"] = stft_to_json(cfg.stft);
    j["model"] = model_to_json(cfg.model);
    j["train"] = train_to_json(cfg.train);
    return j.dump(2);
}

PipelineConfig pipeline_from_json_string(const std::string& text) {
    json j = json::parse(text, nullptr, true, true);
    PipelineConfig cfg;
    cfg.sample_rate = j.value("sample_rate", 16000);
    if (j.contains("stft")) cfg.stft = stft_from_json(j.at("stft"));
    if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
    if (j.contains("train")) cfg.train = train_from_json(j.at("train"));
    cfg.model.freq_bins = cfg.stft.freq_bins();
    cfg.validate();
    return cfg;
}

PipelineConfig read_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return pipeline_from_json_string(text);
}

void write_pipeline_config(const std::string& path, const PipelineConfig& cfg) {
    std::ofstream out(path);
    require(out.good(), "cannot write config file: " + path);
    out << to_json_string(cfg) << "\n";
}

} // namespace umss::model
