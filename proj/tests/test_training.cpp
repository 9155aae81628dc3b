#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "test_config.hpp"
#include "umss/data/toy.hpp"
#include "umss/train/trainer.hpp"

using namespace umss;
namespace fs = std::filesystem;
using model::Variant;

namespace {

std::vector<data::Track> tiny_tracks() {
    data::ToySpec spec;
    spec.timbres = {"sine", "sawtooth"};
    spec.tracks_per_timbre = 1;
    spec.track_seconds = 2.0;
    spec.gap_probability = 0.0;
    spec.note_min_seconds = 0.3;
    spec.note_max_seconds = 0.5;
    spec.seed = 404;
    return data::synth_toy_dataset(spec);
}

model::PipelineConfig tiny_pipeline(Variant v, uint64_t seed) {
    model::PipelineConfig cfg = testcfg::mini_pipeline(v);
    cfg.train.seed = seed;
    cfg.train.batch_pairs = 2;
    cfg.train.segment_seconds = 0.08;
    cfg.train.query_seconds = 0.08;
    cfg.train.shift_range = 1;
    cfg.train.steps_per_epoch = 1;
    cfg.train.epochs = 2;
    return cfg;
}

std::string fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("umss_train_" + name);
    fs::remove_all(p);
    return p.string();
}

} // namespace

TEST_CASE("train: fixed seed gives a bit-identical loss trajectory") {
    auto tracks = tiny_tracks();
    for (Variant v : {Variant::MSI, Variant::MSI_DIS, Variant::MSS_ONLY}) {
        train::Trainer a(tiny_pipeline(v, 7), tracks, fresh_dir("det_a"));
        train::Trainer b(tiny_pipeline(v, 7), tracks, fresh_dir("det_b"));
        for (int s = 0; s < 2; ++s) {
            train::StepMetrics ma = a.step();
            train::StepMetrics mb = b.step();
            INFO(model::variant_name(v) << " step " << s);
            CHECK(ma.total == mb.total); // bitwise
            CHECK(ma.parts.query == mb.parts.query);
        }
    }
}

TEST_CASE("train: logged totals equal the variant aggregate") {
    auto tracks = tiny_tracks();
    for (Variant v :
         {Variant::MSI, Variant::MSI_DIS, Variant::MSS_ONLY, Variant::AMT_ONLY,
          Variant::MULTI_TASK}) {
        train::Trainer t(tiny_pipeline(v, 3), tracks, fresh_dir("agg"));
        train::StepMetrics m = t.step();
        INFO(model::variant_name(v));
        CHECK(std::fabs(m.total - losses::aggregate(v, m.parts)) < 1e-6);
        CHECK(std::isfinite(m.total));
    }
}

TEST_CASE("train: a zero-learning-rate step leaves parameters unchanged") {
    auto tracks = tiny_tracks();
    model::PipelineConfig cfg = tiny_pipeline(Variant::MSI, 5);
    cfg.train.learning_rate = 1e-30; // adam scales the whole update by lr
    train::Trainer t(cfg, tracks, fresh_dir("zero_lr"));
    std::map<std::string, nn::Tensor> before;
    for (const auto& [name, var] : t.net().params().params()) before[name] = var->value;
    t.step();
    for (const auto& [name, var] : t.net().params().params()) {
        const nn::Tensor& prev = before[name];
        double max_delta = 0.0;
        for (int64_t i = 0; i < prev.size(); ++i)
            max_delta = std::max(max_delta, std::fabs(prev[i] - var->value[i]));
        CHECK(max_delta < 1e-20);
    }
}

TEST_CASE("train: gradient norms stay finite over several steps") {
    auto tracks = tiny_tracks();
    train::Trainer t(tiny_pipeline(Variant::MSI_DIS, 9), tracks, fresh_dir("finite"));
    for (int s = 0; s < 3; ++s) {
        t.step();
        for (const auto& [name, var] : t.net().params().params()) {
            if (var->grad.empty()) continue;
            INFO(name);
            CHECK(var->grad.all_finite());
        }
    }
}

TEST_CASE("checkpoint: save/load round trip is bit exact") {
    auto tracks = tiny_tracks();
    const std::string dir = fresh_dir("ckpt");
    train::Trainer t(tiny_pipeline(Variant::MSI, 11), tracks, dir);
    t.step();
    t.save_epoch_checkpoint(1);

    model::TrainState state = model::load_checkpoint(t.checkpoint_path(1));
    CHECK(state.epoch == 1);
    CHECK(state.step == 1);
    for (const auto& [name, var] : t.net().params().params()) {
        REQUIRE(state.params.count(name));
        const nn::Tensor& stored = state.params.at(name);
        REQUIRE(stored.size() == var->value.size());
        for (int64_t i = 0; i < stored.size(); ++i) CHECK(stored[i] == var->value[i]);
    }

    // Restore into a fresh model instance: identical parameters.
    Rng rng(1);
    model::Model fresh(state.pipeline.model, rng);
    model::restore_model(state, fresh);
    for (const auto& [name, var] : t.net().params().params()) {
        const nn::Tensor& restored = fresh.params().at(name)->value;
        for (int64_t i = 0; i < restored.size(); ++i) CHECK(restored[i] == var->value[i]);
    }
}

TEST_CASE("checkpoint: loading into the wrong variant errors") {
    auto tracks = tiny_tracks();
    const std::string dir = fresh_dir("wrong_variant");
    train::Trainer t(tiny_pipeline(Variant::MSI, 13), tracks, dir);
    t.save_epoch_checkpoint(1);

    model::TrainState state = model::load_checkpoint(t.checkpoint_path(1));
    Rng rng(1);
    model::Model other(testcfg::mini_model(Variant::MSS_ONLY), rng);
    CHECK_THROWS_AS(model::restore_model(state, other), Error);

    train::Trainer mismatched(tiny_pipeline(Variant::MSS_ONLY, 13), tracks,
                              fresh_dir("wrong_variant2"));
    CHECK_THROWS_AS(mismatched.restore(t.checkpoint_path(1)), Error);
}

TEST_CASE("checkpoint: a resumed run continues the counter and trajectory") {
    auto tracks = tiny_tracks();

    // One-phase run: 4 steps.
    model::PipelineConfig cfg = tiny_pipeline(Variant::MSI, 17);
    train::Trainer full(cfg, tracks, fresh_dir("resume_full"));
    std::vector<double> full_losses;
    for (int s = 0; s < 4; ++s) full_losses.push_back(full.step().total);

    // Two-phase run: 2 steps, checkpoint, restore, 2 more.
    train::Trainer first(cfg, tracks, fresh_dir("resume_a"));
    first.step();
    first.step();
    first.save_epoch_checkpoint(1);
    CHECK(first.global_step() == 2);

    train::Trainer second(cfg, tracks, fresh_dir("resume_b"));
    second.restore(first.checkpoint_path(1));
    CHECK(second.global_step() == 2);
    std::vector<double> resumed;
    resumed.push_back(second.step().total);
    resumed.push_back(second.step().total);
    CHECK(second.global_step() == 4);

    CHECK(resumed[0] == full_losses[2]); // bitwise: optimizer + sampler state restored
    CHECK(resumed[1] == full_losses[3]);
}

TEST_CASE("train: non-finite loss aborts with a diagnostic snapshot") {
    auto tracks = tiny_tracks();
    const std::string dir = fresh_dir("nan_abort");
    train::Trainer t(tiny_pipeline(Variant::MSI, 19), tracks, dir);
    // Downstream relus absorb NaN inputs, so poison a bias that feeds the
    // softmax directly.
    nn::Var poisoned = t.net().params().at("transcriptor.fc.b");
    poisoned->value[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.step(), Error);
    CHECK(fs::exists(fs::path(dir) / "diagnostic.bin"));
}

TEST_CASE("train: run() writes per-epoch checkpoints and a metrics log") {
    auto tracks = tiny_tracks();
    const std::string dir = fresh_dir("runloop");
    model::PipelineConfig cfg = tiny_pipeline(Variant::MSI, 23);
    cfg.train.epochs = 3;
    cfg.train.keep_last_checkpoints = 2;
    train::Trainer t(cfg, tracks, dir);
    t.run();
    CHECK_FALSE(fs::exists(t.checkpoint_path(1))); // rotated out
    CHECK(fs::exists(t.checkpoint_path(2)));
    CHECK(fs::exists(t.checkpoint_path(3)));
    CHECK(fs::exists(fs::path(dir) / "metrics.tsv"));
}
