#include "umss/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "umss/dsp/resample.hpp"
#include "umss/rng.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace umss::data {

bool Manifest::is_seen(const std::string& instr) const {
    auto it = instruments.find(instr);
    require(it != instruments.end(), "unknown instrument label: " + instr);
    require(it->second == "seen" || it->second == "unseen",
            "manifest instrument group must be seen|unseen: " + instr);
    return it->second == "seen";
}

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open manifest: " + path);
    json j = json::parse(in, nullptr, true, true);
    Manifest m;
    for (auto& [k, v] : j.at("instruments").items()) m.instruments[k] = v.get<std::string>();
    if (j.contains("test_tracks"))
        for (auto& v : j.at("test_tracks")) m.test_tracks.push_back(v.get<std::string>());
    if (j.contains("checksums"))
        for (auto& [k, v] : j.at("checksums").items()) m.checksums[k] = v.get<std::string>();
    return m;
}

void write_manifest(const std::string& path, const Manifest& m) {
    json j;
    j["instruments"] = m.instruments;
    j["test_tracks"] = m.test_tracks;
    j["checksums"] = m.checksums;
    std::ofstream out(path);
    require(out.good(), "cannot write manifest: " + path);
    out << j.dump(2) << "\n";
}

namespace {

// AuSep_<idx>_<instr>_<...>.wav -> instrument label.
std::string instrument_from_name(const std::string& stem) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : stem) {
        if (c == '_') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    require(parts.size() >= 3 && parts[0] == "AuSep",
            "unexpected stem file name (want AuSep_<n>_<instr>_*.wav): " + stem);
    return parts[2];
}

std::string notes_path_for(const fs::path& wav_path) {
    std::string name = wav_path.filename().string();
    const std::string prefix = "AuSep";
    name.replace(0, prefix.size(), "Notes");
    fs::path p = wav_path.parent_path() / name;
    p.replace_extension(".txt");
    return p.string();
}

} // namespace

std::vector<Track> load_tracks(const std::string& root, const Manifest& manifest,
                               int target_rate) {
    require(fs::is_directory(root), "dataset root is not a directory: " + root);
    std::vector<fs::path> wavs;
    for (const auto& piece : fs::directory_iterator(root)) {
        if (!piece.is_directory()) continue;
        for (const auto& entry : fs::directory_iterator(piece.path())) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name.rfind("AuSep", 0) == 0 && entry.path().extension() == ".wav")
                wavs.push_back(entry.path());
        }
    }
    std::sort(wavs.begin(), wavs.end());
    require(!wavs.empty(), "no AuSep_*.wav stems found under " + root);

    std::vector<Track> tracks;
    for (const fs::path& p : wavs) {
        Track t;
        t.id = fs::relative(p, root).generic_string();
        t.instrument = instrument_from_name(p.stem().string());
        t.seen = manifest.is_seen(t.instrument);
        t.audio = dsp::read_wav(p.string());
        if (t.audio.sample_rate != target_rate) t.audio = dsp::resample(t.audio, target_rate);
        t.notes = parse_annotations(notes_path_for(p));
        tracks.push_back(std::move(t));
    }
    return tracks;
}

DatasetSplit split_dataset(std::vector<Track> tracks, const Manifest& manifest) {
    DatasetSplit split;
    for (Track& t : tracks) {
        const bool seen = manifest.is_seen(t.instrument);
        t.seen = seen;
        const bool reserved = std::find(manifest.test_tracks.begin(), manifest.test_tracks.end(),
                                        t.id) != manifest.test_tracks.end();
        if (!seen || reserved) {
            split.test.push_back(std::move(t));
        } else {
            split.train.push_back(std::move(t));
        }
    }
    return split;
}

std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open file for checksum: " + path);
    uint64_t h = 1469598103934665603ull;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return std::string(hex);
}

Manifest build_manifest(const std::string& root, const std::vector<std::string>& seen_labels,
                        double test_fraction, uint64_t seed) {
    require(fs::is_directory(root), "dataset root is not a directory: " + root);
    Manifest m;
    std::map<std::string, std::vector<std::string>> by_instrument;
    for (const auto& piece : fs::directory_iterator(root)) {
        if (!piece.is_directory()) continue;
        for (const auto& entry : fs::directory_iterator(piece.path())) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (name.rfind("AuSep", 0) != 0 || entry.path().extension() != ".wav") continue;
            const std::string id = fs::relative(entry.path(), root).generic_string();
            const std::string instr = instrument_from_name(entry.path().stem().string());
            by_instrument[instr].push_back(id);
            m.checksums[id] = file_checksum(entry.path().string());
        }
    }
    require(!by_instrument.empty(), "no stems found under " + root);

    Rng rng(seed);
    for (auto& [instr, ids] : by_instrument) {
        std::sort(ids.begin(), ids.end());
        const bool seen = std::find(seen_labels.begin(), seen_labels.end(), instr) !=
                          seen_labels.end();
        m.instruments[instr] = seen ? "seen" : "unseen";
        if (seen) {
            // Hold out a fraction of each seen instrument's tracks, keeping
            // at least one for training.
            int n_test = static_cast<int>(std::max(0.0, test_fraction) * ids.size());
            n_test = std::min<int>(n_test, static_cast<int>(ids.size()) - 1);
            for (int k = 0; k < n_test; ++k) {
                const int64_t pick = rng.uniform_int(0, static_cast<int64_t>(ids.size()) - 1);
                m.test_tracks.push_back(ids[static_cast<size_t>(pick)]);
                ids.erase(ids.begin() + pick);
            }
        } else {
            for (const std::string& id : ids) m.test_tracks.push_back(id);
        }
    }
    std::sort(m.test_tracks.begin(), m.test_tracks.end());
    return m;
}

void verify_checksums(const std::string& root, const Manifest& manifest) {
    for (const auto& [id, want] : manifest.checksums) {
        const std::string got = file_checksum((fs::path(root) / id).string());
        require(got == want, "checksum mismatch for " + id + " (dataset changed since prepare)");
    }
}

const std::vector<std::string>& urmp_instruments() {
    static const std::vector<std::string> all = {"vn", "va",  "vc",  "db", "fl", "ob", "cl",
                                                 "sax", "bn", "tpt", "hn", "tbn", "tba"};
    return all;
}

const std::vector<std::string>& urmp_default_seen() {
    static const std::vector<std::string> seen = {"vn", "va", "vc", "fl", "cl", "sax", "tpt",
                                                  "tbn"};
    return seen;
}

} // namespace umss::data
