#pragma once

#include <cmath>
#include <cstdint>

namespace xmamba {

// Counter-based deterministic generator. Each output is a finalizer hash of
// (key, counter), so identical seeds give identical streams on every
// platform and streams can be split without correlation. The finalizer is
// the splitmix64 mixing function.
class SeededRng {
  public:
    explicit SeededRng(std::uint64_t seed) : key_(mix64(seed + kGolden)) {}

    // Independent stream derived from this generator's seed; does not
    // consume from or perturb the parent.
    SeededRng split(std::uint64_t stream) const {
        SeededRng child(0);
        child.key_ = mix64(key_ ^ mix64(stream + kGolden));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() { return mix64(key_ + kGolden * ++counter_); }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; consumes two draws per call.
    double normal() {
        const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    std::uint64_t counter() const { return counter_; }

  private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t mix64(std::uint64_t x) {
        x ^= x >> 30;
        x *= 0xBF58476D1CE4E5B9ull;
        x ^= x >> 27;
        x *= 0x94D049BB133111EBull;
        x ^= x >> 31;
        return x;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace xmamba
