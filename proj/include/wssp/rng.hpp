#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wssp {

// 64-bit FNV-1a, used to derive named child seeds and to fingerprint configs.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// One master seed is split into named streams so that adding a consumer never
// perturbs the draws seen by another.  Streams are plain mt19937_64 engines.
class SeedSplitter {
public:
    explicit SeedSplitter(std::uint64_t master) : master_(master) {}

    std::uint64_t child_seed(std::string_view name, std::uint64_t index = 0) const {
        char buf[16];
        for (int i = 0; i < 8; ++i) buf[i] = char((master_ >> (8 * i)) & 0xff);
        for (int i = 0; i < 8; ++i) buf[8 + i] = char((index >> (8 * i)) & 0xff);
        std::uint64_t h = fnv1a64(std::string_view(buf, 16));
        return fnv1a64(name, h);
    }

    std::mt19937_64 stream(std::string_view name, std::uint64_t index = 0) const {
        return std::mt19937_64(child_seed(name, index));
    }

private:
    std::uint64_t master_;
};

// Uniform double in [0,1) with a fully specified bit pattern, so traces are
// byte-identical across standard libraries (std::uniform_real_distribution
// is not pinned down by the standard).
inline double uniform01(std::mt19937_64& rng) {
    return double(rng() >> 11) * 0x1.0p-53;
}

}  // namespace wssp
