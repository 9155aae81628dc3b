#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace umss {

// Deterministic random source. Distributions are implemented by hand so a
// given seed yields the same stream on every platform and toolchain.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform double in [0, 1), 53 bits of mantissa.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(eng_() % span);
    }

    // Box-Muller; the spare value is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 1e-300) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Independent child stream; used to decouple samplers from init.
    Rng fork(uint64_t stream) {
        uint64_t s = next_u64() ^ (0x9e3779b97f4a7c15ull * (stream + 1));
        return Rng(s);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << eng_ << " " << (have_spare_ ? 1 : 0) << " " << spare_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        int hs = 0;
        is >> eng_ >> hs >> spare_;
        have_spare_ = hs != 0;
    }

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace umss
