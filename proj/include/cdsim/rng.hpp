#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace cdsim {

/// One reproducible random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the conversions to uniform and normal
/// deviates are done here so results do not depend on the standard library's
/// distribution implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal deviate (Box-Muller, pairs cached).
    double normal();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Stream for one (master seed, configuration, purpose) triple. Streams for
/// different configurations or purposes are seeded from well-mixed,
/// distinct 64-bit keys, so ensemble members are reproducible regardless of
/// the order in which workers process them.
RngStream derive_stream(std::uint64_t master_seed, std::uint64_t config_index, std::string_view purpose);

namespace purpose {
inline constexpr std::string_view positions = "pos";
inline constexpr std::string_view velocities = "vel";
}  // namespace purpose

}  // namespace cdsim
