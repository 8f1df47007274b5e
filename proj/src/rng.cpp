#include "cdsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace cdsim {

namespace {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

RngStream derive_stream(std::uint64_t master_seed, std::uint64_t config_index, std::string_view purpose) {
    std::uint64_t key = mix64(master_seed);
    key = mix64(key ^ mix64(config_index + 0x632be59bd9b4e019ULL));
    key = mix64(key ^ fnv1a(purpose));
    return RngStream(key);
}

}  // namespace cdsim
