#include "umss/model/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

using json = nlohmann::json;

namespace umss::model {

namespace {

constexpr char kMagic[8] = {'U', 'M', 'S', 'S', 'C', 'K', 'P', '1'};
constexpr uint32_t kFormatVersion = 1;

void append_group(json& tensors, const char* group,
                  const std::map<std::string, nn::Tensor>& entries) {
    for (const auto& [name, t] : entries)
        tensors.push_back(json{{"name", name}, {"group", group}, {"shape", t.shape()}});
}

} // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
    json header;
    header["format_version"] = kFormatVersion;
    header["pipeline"] = json::parse(to_json_string(state.pipeline));
    header["epoch"] = state.epoch;
    header["step"] = state.step;
    header["adam_t"] = state.adam_t;
    header["sampler_rng"] = state.sampler_rng;
    json tensors = json::array();
    append_group(tensors, "param", state.params);
    append_group(tensors, "buffer", state.buffers);
    append_group(tensors, "adam_m", state.adam_m);
    append_group(tensors, "adam_v", state.adam_v);
    header["tensors"] = tensors;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    const uint64_t hlen = header_text.size();
    out.write(reinterpret_cast<const char*>(&hlen), 8);
    out.write(header_text.data(), static_cast<std::streamsize>(hlen));
    auto write_group = [&out](const std::map<std::string, nn::Tensor>& entries) {
        for (const auto& [_, t] : entries)
            out.write(reinterpret_cast<const char*>(t.data()),
                      static_cast<std::streamsize>(t.size() * sizeof(double)));
    };
    write_group(state.params);
    write_group(state.buffers);
    write_group(state.adam_m);
    write_group(state.adam_v);
    require(out.good(), "failed writing checkpoint payload: " + path);
}

TrainState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    require(in.good() && std::memcmp(magic, kMagic, 8) == 0,
            "not a umss checkpoint (bad magic): " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string header_text(hlen, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(hlen));
    require(in.good(), "truncated checkpoint header: " + path);

    json header = json::parse(header_text);
    const uint32_t version = header.at("format_version").get<uint32_t>();
    require(version == kFormatVersion,
            "checkpoint format version mismatch: file has " + std::to_string(version) +
                ", this build reads " + std::to_string(kFormatVersion));

    TrainState state;
    state.pipeline = pipeline_from_json_string(header.at("pipeline").dump());
    state.epoch = header.at("epoch").get<int>();
    state.step = header.at("step").get<int64_t>();
    state.adam_t = header.at("adam_t").get<int64_t>();
    state.sampler_rng = header.value("sampler_rng", "");

    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::string group = entry.at("group").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        nn::Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        require(in.good(), "truncated checkpoint tensor data: " + path);
        if (group == "param")
            state.params[name] = std::move(t);
        else if (group == "buffer")
            state.buffers[name] = std::move(t);
        else if (group == "adam_m")
            state.adam_m[name] = std::move(t);
        else if (group == "adam_v")
            state.adam_v[name] = std::move(t);
        else
            throw Error("unknown tensor group in checkpoint: " + group);
    }
    return state;
}

TrainState snapshot_model(const Model& m, const PipelineConfig& cfg) {
    TrainState state;
    state.pipeline = cfg;
    for (const auto& [name, var] : m.params().params()) state.params[name] = var->value;
    for (const auto& [name, buf] : m.params().buffers()) state.buffers[name] = buf;
    return state;
}

void restore_model(const TrainState& state, Model& m) {
    require(state.pipeline.model == m.config(),
            "checkpoint model config does not match the instantiated model "
            "(variant/topology mismatch)");
    for (const auto& [name, t] : state.params) {
        require(m.params().has(name), "checkpoint parameter missing in model: " + name);
        nn::Var v = m.params().at(name);
        require(v->value.shape() == t.shape(), "checkpoint parameter shape mismatch: " + name);
        v->value = t;
    }
    for (const auto& [name, t] : state.buffers) {
        auto& buffers = m.params().buffers();
        auto it = buffers.find(name);
        require(it != buffers.end(), "checkpoint buffer missing in model: " + name);
        require(it->second.shape() == t.shape(), "checkpoint buffer shape mismatch: " + name);
        it->second = t;
    }
}

Model model_from_checkpoint(const std::string& path, PipelineConfig* cfg_out) {
    TrainState state = load_checkpoint(path);
    Rng rng(state.pipeline.train.seed);
    Model m(state.pipeline.model, rng);
    restore_model(state, m);
    if (cfg_out) *cfg_out = state.pipeline;
    return m;
}

} // namespace umss::model
