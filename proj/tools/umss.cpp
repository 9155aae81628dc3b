// umss: query-by-example source separation, frame-wise transcription and
// score-driven synthesis for two-instrument mixtures.
//
// Subcommands: prepare, train, separate, transcribe, synthesize, evaluate,
// plot. All paths are relative to the working directory unless absolute;
// the dataset root may also come from UMSS_DATASET_ROOT.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "umss/data/toy.hpp"
#include "umss/dsp/griffin_lim.hpp"
#include "umss/dsp/pitch.hpp"
#include "umss/dsp/resample.hpp"
#include "umss/eval/evaluate.hpp"
#include "umss/train/trainer.hpp"
#include "umss/viz/spectrogram_image.hpp"

namespace fs = std::filesystem;
using namespace umss;

namespace {

std::string dataset_or_env(std::string dataset) {
    if (!dataset.empty()) return dataset;
    if (const char* env = std::getenv("UMSS_DATASET_ROOT")) return env;
    throw Error("no dataset root: pass --dataset or set UMSS_DATASET_ROOT");
}

dsp::Waveform load_audio(const std::string& path, int sample_rate) {
    dsp::Waveform w = dsp::read_wav(path);
    if (w.sample_rate != sample_rate) w = dsp::resample(w, sample_rate);
    return w;
}

void check_stft_length(const dsp::Waveform& w, const model::PipelineConfig& cfg,
                       const std::string& what) {
    require(static_cast<int>(w.samples.size()) >= cfg.stft.win_length,
            what + " is shorter than one analysis window (" +
                std::to_string(cfg.stft.win_length) + " samples)");
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

data::DatasetSplit load_split(const std::string& root, int sample_rate) {
    const std::string manifest_path = (fs::path(root) / "manifest.json").string();
    data::Manifest manifest = data::read_manifest(manifest_path);
    std::vector<data::Track> tracks = data::load_tracks(root, manifest, sample_rate);
    return data::split_dataset(std::move(tracks), manifest);
}

// Score files reuse the annotation format; --midi-notes switches the middle
// column from Hz to integer MIDI numbers.
std::vector<data::NoteEvent> read_score(const std::string& path, bool midi_notes) {
    std::vector<data::NoteEvent> events = data::parse_annotations(path);
    if (midi_notes)
        for (data::NoteEvent& e : events) e.frequency = dsp::midi_to_hz(e.frequency);
    return events;
}

int run_prepare(const std::string& dataset, const std::string& out_root, bool toy,
                const std::string& timbres, int tracks_per_timbre, double seconds,
                int seen_count, const std::string& seen_csv, double test_fraction,
                uint64_t seed, bool verify) {
    if (toy) {
        data::ToySpec spec;
        if (!timbres.empty()) spec.timbres = split_csv(timbres);
        spec.tracks_per_timbre = tracks_per_timbre;
        spec.track_seconds = seconds;
        spec.seed = seed;
        const int seen = seen_count > 0 ? seen_count
                                        : std::max(1, static_cast<int>(spec.timbres.size()) - 1);
        data::write_toy_dataset(out_root, spec, seen);
        std::cout << "toy dataset written to " << out_root << " ("
                  << spec.timbres.size() * spec.tracks_per_timbre << " tracks)\n";
        return 0;
    }
    const std::string root = dataset_or_env(dataset);
    const std::string manifest_path = (fs::path(root) / "manifest.json").string();
    if (verify && fs::exists(manifest_path)) {
        data::Manifest manifest = data::read_manifest(manifest_path);
        data::verify_checksums(root, manifest);
        std::cout << "checksums verified for " << manifest.checksums.size() << " stems\n";
        return 0;
    }
    std::vector<std::string> seen = seen_csv.empty() ? data::urmp_default_seen()
                                                     : split_csv(seen_csv);
    data::Manifest manifest = data::build_manifest(root, seen, test_fraction, seed);
    data::write_manifest(manifest_path, manifest);
    std::cout << "manifest written to " << manifest_path << " ("
              << manifest.instruments.size() << " instruments, "
              << manifest.test_tracks.size() << " test tracks)\n";
    return 0;
}

int run_train(const std::string& config_path, const std::string& dataset,
              const std::string& out_dir, const std::string& variant, int64_t seed,
              const std::string& resume) {
    model::PipelineConfig cfg = model::read_pipeline_config(config_path);
    if (!variant.empty()) cfg.model.variant = model::variant_from_name(variant);
    if (seed >= 0) cfg.train.seed = static_cast<uint64_t>(seed);
    cfg.validate();

    const std::string root = dataset_or_env(dataset);
    data::DatasetSplit split = load_split(root, cfg.sample_rate);
    require(!split.train.empty(), "train split is empty; check the manifest");

    train::Trainer trainer(cfg, split.train, out_dir);
    if (!resume.empty()) trainer.restore(resume);
    model::write_pipeline_config((fs::path(out_dir) / "config.json").string(), cfg);

    std::cout << "training " << model::variant_name(cfg.model.variant) << " for "
              << cfg.train.epochs << " epochs x " << cfg.train.steps_per_epoch << " steps, "
              << trainer.net().params().total_size() << " parameters\n";
    trainer.run([](int epoch, const train::StepMetrics& m) {
        std::cout << "epoch " << epoch << "  total " << m.total << "\n";
        std::cout.flush();
    });
    std::cout << "checkpoints in " << out_dir << "\n";
    return 0;
}

int run_separate(const std::string& ckpt, const std::string& mixture_path,
                 const std::string& query_path, const std::string& out_path,
                 const std::string& dump_spec) {
    model::PipelineConfig cfg;
    model::Model net = model::model_from_checkpoint(ckpt, &cfg);
    require(model::variant_has_decoder(cfg.model.variant),
            "variant " + model::variant_name(cfg.model.variant) + " has no decoder to separate with");

    dsp::Waveform mixture = load_audio(mixture_path, cfg.sample_rate);
    dsp::Waveform query = load_audio(query_path, cfg.sample_rate);
    check_stft_length(mixture, cfg, "mixture");
    check_stft_length(query, cfg, "query");

    eval::SeparationOutput out = eval::run_separation(net, cfg, mixture, query);
    require(out.audio.has_value(), "no separated audio produced");
    dsp::write_wav(out_path, *out.audio);
    std::cout << "separated audio written to " << out_path << "\n";
    if (out.roll) {
        const std::string notes_path = out_path + ".notes.txt";
        data::write_annotations(notes_path, data::roll_to_notes(*out.roll, cfg.hop_seconds()));
        std::cout << "predicted notes written to " << notes_path << "\n";
    }
    if (!dump_spec.empty()) {
        viz::write_spectrogram_tsv(dump_spec, out.predicted_mag, cfg.sample_rate);
        std::cout << "predicted magnitude written to " << dump_spec << "\n";
    }
    return 0;
}

int run_transcribe(const std::string& ckpt, const std::string& mixture_path,
                   const std::string& query_path, const std::string& out_path) {
    model::PipelineConfig cfg;
    model::Model net = model::model_from_checkpoint(ckpt, &cfg);
    require(model::variant_has_transcriptor(cfg.model.variant),
            "variant " + model::variant_name(cfg.model.variant) + " has no transcriptor");

    dsp::Waveform mixture = load_audio(mixture_path, cfg.sample_rate);
    dsp::Waveform query = load_audio(query_path, cfg.sample_rate);
    check_stft_length(mixture, cfg, "mixture");
    check_stft_length(query, cfg, "query");

    eval::SeparationOutput out = eval::run_separation(net, cfg, mixture, query);
    require(out.roll.has_value(), "no transcription produced");
    data::write_annotations(out_path, data::roll_to_notes(*out.roll, cfg.hop_seconds()));
    std::cout << "notes written to " << out_path << "\n";
    return 0;
}

int run_synthesize(const std::string& ckpt, const std::string& timbre_path,
                   const std::string& score_path, const std::string& out_path,
                   const std::string& query_path, bool midi_notes, int gl_iters) {
    model::PipelineConfig cfg;
    model::Model net = model::model_from_checkpoint(ckpt, &cfg);
    require(cfg.model.variant == model::Variant::MSI_DIS,
            "variant " + model::variant_name(cfg.model.variant) + " cannot synthesize");

    dsp::Waveform timbre_src = load_audio(timbre_path, cfg.sample_rate);
    check_stft_length(timbre_src, cfg, "timbre source");
    dsp::Waveform query =
        query_path.empty() ? timbre_src : load_audio(query_path, cfg.sample_rate);
    check_stft_length(query, cfg, "query");

    dsp::ComplexSpectrogram mix_c = dsp::stft(timbre_src, cfg.stft);
    std::vector<data::NoteEvent> score = read_score(score_path, midi_notes);
    data::MidiRoll roll = data::notes_to_roll(score, mix_c.frames, cfg.hop_seconds());

    eval::SeparationOutput out = eval::run_separation(net, cfg, timbre_src, query, &roll);
    require(!out.predicted_mag.values.empty(), "no spectrogram produced");
    dsp::Waveform audio = dsp::griffin_lim(out.predicted_mag, gl_iters, cfg.sample_rate);
    dsp::write_wav(out_path, audio);
    std::cout << "synthesized audio written to " << out_path << " (" << score.size()
              << " notes, " << gl_iters << " phase-retrieval iterations)\n";
    return 0;
}

int run_evaluate(const std::string& ckpt_dir, int last, const std::string& dataset, int n_pairs,
                 const std::string& out_dir, uint64_t seed, double segment_seconds,
                 double query_seconds) {
    std::vector<std::string> checkpoints;
    for (const auto& entry : fs::directory_iterator(ckpt_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("ckpt_epoch", 0) == 0 && entry.path().extension() == ".bin")
            checkpoints.push_back(entry.path().string());
    }
    std::sort(checkpoints.begin(), checkpoints.end());
    require(!checkpoints.empty(), "no checkpoints found in " + ckpt_dir);
    if (last > 0 && static_cast<int>(checkpoints.size()) > last)
        checkpoints.erase(checkpoints.begin(),
                          checkpoints.end() - static_cast<int64_t>(last));

    model::PipelineConfig cfg;
    model::model_from_checkpoint(checkpoints.back(), &cfg);

    const std::string root = dataset_or_env(dataset);
    data::DatasetSplit split = load_split(root, cfg.sample_rate);
    require(!split.test.empty(), "test split is empty; check the manifest");

    data::SamplerConfig scfg;
    scfg.segment_seconds = segment_seconds > 0 ? segment_seconds : cfg.train.segment_seconds;
    scfg.query_seconds = query_seconds > 0 ? query_seconds : cfg.train.query_seconds;
    scfg.hop_seconds = cfg.hop_seconds();
    Rng rng(seed);
    std::vector<data::TestPair> pairs = data::make_test_pairs(split.test, scfg, n_pairs, rng);

    eval::EvalReport report = eval::evaluate(checkpoints, pairs);
    eval::write_report(out_dir, report);
    std::ifstream table(fs::path(out_dir) / "report.txt");
    std::cout << table.rdbuf();
    return 0;
}

int run_plot(const std::string& in_path, const std::string& out_path, int scale_x, int scale_y,
             int n_fft, int win, int hop) {
    dsp::MagSpectrogram mag;
    int sample_rate = 16000;
    if (fs::path(in_path).extension() == ".wav") {
        dsp::Waveform w = dsp::read_wav(in_path);
        sample_rate = w.sample_rate;
        dsp::StftConfig cfg;
        cfg.n_fft = n_fft;
        cfg.win_length = win;
        cfg.hop_length = hop;
        require(static_cast<int>(w.samples.size()) >= cfg.win_length,
                "input shorter than one analysis window");
        mag = dsp::magnitude(dsp::stft(w, cfg));
    } else {
        mag = viz::read_spectrogram_tsv(in_path, &sample_rate);
    }
    viz::PlotOptions opt;
    opt.scale_x = scale_x;
    opt.scale_y = scale_y;
    viz::write_spectrogram_ppm(out_path, mag, sample_rate, opt);
    std::cout << "spectrogram image written to " << out_path << " ("
              << viz::plot_width(mag, opt) << "x" << viz::plot_height(mag, opt) << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"query-by-example music source separation, transcription and synthesis"};
    app.require_subcommand(1);

    // prepare
    auto* prepare = app.add_subcommand("prepare", "build or verify a dataset manifest; --toy "
                                                  "writes a synthetic dataset");
    std::string p_dataset, p_out, p_timbres, p_seen_csv;
    bool p_toy = false, p_verify = false;
    int p_tracks = 2, p_seen_count = 0;
    double p_seconds = 8.0, p_test_fraction = 0.25;
    uint64_t p_seed = 1;
    prepare->add_option("--dataset", p_dataset, "dataset root (or UMSS_DATASET_ROOT)");
    prepare->add_flag("--toy", p_toy, "generate a synthetic toy dataset");
    prepare->add_option("--out", p_out, "output root for --toy");
    prepare->add_option("--timbres", p_timbres, "comma list of sine,sawtooth,square,triangle");
    prepare->add_option("--tracks", p_tracks, "toy tracks per timbre");
    prepare->add_option("--seconds", p_seconds, "toy track length in seconds");
    prepare->add_option("--seen-count", p_seen_count, "toy: first K timbres are seen");
    prepare->add_option("--seen", p_seen_csv, "comma list of seen instrument labels");
    prepare->add_option("--test-fraction", p_test_fraction,
                        "fraction of each seen instrument's tracks held out");
    prepare->add_option("--seed", p_seed, "manifest/toy sampling seed");
    prepare->add_flag("--verify", p_verify, "verify checksums of an existing manifest");

    // train
    auto* train_cmd = app.add_subcommand("train", "train one variant on the train split");
    std::string t_config, t_dataset, t_out, t_variant, t_resume;
    int64_t t_seed = -1;
    train_cmd->add_option("--config", t_config, "pipeline config json")->required();
    train_cmd->add_option("--dataset", t_dataset, "dataset root (or UMSS_DATASET_ROOT)");
    train_cmd->add_option("--out", t_out, "output directory")->required();
    train_cmd->add_option("--variant", t_variant,
                          "msi|msi_dis|mss_only|amt_only|multi_task (overrides config)");
    train_cmd->add_option("--seed", t_seed, "seed override");
    train_cmd->add_option("--resume", t_resume, "checkpoint to resume from");

    // separate
    auto* sep = app.add_subcommand("separate", "separate the queried source from a mixture");
    std::string s_ckpt, s_mix, s_query, s_out, s_dump;
    sep->add_option("--checkpoint", s_ckpt)->required();
    sep->add_option("--mixture", s_mix)->required();
    sep->add_option("--query", s_query)->required();
    sep->add_option("--out", s_out)->required();
    sep->add_option("--dump-spec", s_dump, "also write the predicted magnitude as tsv");

    // transcribe
    auto* tr = app.add_subcommand("transcribe", "frame-wise transcription of the queried source");
    std::string r_ckpt, r_mix, r_query, r_out;
    tr->add_option("--checkpoint", r_ckpt)->required();
    tr->add_option("--mixture", r_mix)->required();
    tr->add_option("--query", r_query)->required();
    tr->add_option("--out", r_out)->required();

    // synthesize
    auto* syn = app.add_subcommand("synthesize",
                                   "render a new score with a timbre taken from audio");
    std::string y_ckpt, y_timbre, y_score, y_out, y_query;
    bool y_midi = false;
    int y_gl_iters = 60;
    syn->add_option("--checkpoint", y_ckpt)->required();
    syn->add_option("--timbre-source", y_timbre)->required();
    syn->add_option("--score", y_score)->required();
    syn->add_option("--out", y_out)->required();
    syn->add_option("--query", y_query, "query clip (defaults to the timbre source)");
    syn->add_flag("--midi-notes", y_midi, "score middle column is integer MIDI, not Hz");
    syn->add_option("--gl-iters", y_gl_iters, "phase-retrieval iterations");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "SDR/precision over test pairs, last-K checkpoints");
    std::string e_ckpt_dir, e_dataset, e_out;
    int e_last = 10, e_pairs = 32;
    uint64_t e_seed = 1;
    double e_segment = 0.0, e_query_len = 0.0;
    ev->add_option("--checkpoint-dir", e_ckpt_dir)->required();
    ev->add_option("--last", e_last, "how many trailing checkpoints to average");
    ev->add_option("--dataset", e_dataset, "dataset root (or UMSS_DATASET_ROOT)");
    ev->add_option("--pairs", e_pairs, "number of test pairs");
    ev->add_option("--out", e_out, "report directory")->required();
    ev->add_option("--seed", e_seed, "test pair sampling seed");
    ev->add_option("--segment-seconds", e_segment, "test segment length override");
    ev->add_option("--query-seconds", e_query_len, "test query length override");

    // plot
    auto* plot = app.add_subcommand("plot", "log-magnitude spectrogram image (ppm)");
    std::string g_in, g_out;
    int g_sx = 1, g_sy = 1, g_nfft = 1024, g_win = 1024, g_hop = 256;
    plot->add_option("--in", g_in, "wav file or spectrogram tsv")->required();
    plot->add_option("--out", g_out, "output ppm image")->required();
    plot->add_option("--scale-x", g_sx, "pixels per frame");
    plot->add_option("--scale-y", g_sy, "pixels per bin");
    plot->add_option("--n-fft", g_nfft, "fft size for wav input");
    plot->add_option("--win", g_win, "window length for wav input");
    plot->add_option("--hop", g_hop, "hop length for wav input");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed())
            return run_prepare(p_dataset, p_out, p_toy, p_timbres, p_tracks, p_seconds,
                               p_seen_count, p_seen_csv, p_test_fraction, p_seed, p_verify);
        if (train_cmd->parsed())
            return run_train(t_config, t_dataset, t_out, t_variant, t_seed, t_resume);
        if (sep->parsed()) return run_separate(s_ckpt, s_mix, s_query, s_out, s_dump);
        if (tr->parsed()) return run_transcribe(r_ckpt, r_mix, r_query, r_out);
        if (syn->parsed())
            return run_synthesize(y_ckpt, y_timbre, y_score, y_out, y_query, y_midi, y_gl_iters);
        if (ev->parsed())
            return run_evaluate(e_ckpt_dir, e_last, e_dataset, e_pairs, e_out, e_seed, e_segment,
                                e_query_len);
        if (plot->parsed()) return run_plot(g_in, g_out, g_sx, g_sy, g_nfft, g_win, g_hop);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
