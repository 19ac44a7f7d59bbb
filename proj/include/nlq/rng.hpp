#pragma once

#include <cmath>
#include <cstdint>

namespace nlq {

// Counter-based SplitMix64 stream.
//
// The k-th raw output (k = 1, 2, ...) of a stream with seed s is
//
//     u64(k) = mix64(s + k * 0x9E3779B97F4A7C15)
//
// where mix64 is the splitmix64 finalizer (Steele et al.). Derived values are
// defined so any language port reproduces the stream bit for bit:
//
//     unit()  = (u64 >> 11) * 2^-53                    uniform in [0, 1)
//     open()  = ((u64 >> 11) + 1) * 2^-53              uniform in (0, 1]
//     gauss() = sqrt(-2 ln a) * cos(2 pi b)            a = open(), b = unit()
//
// gauss() always consumes exactly two raw outputs; the sine branch of the
// Box-Muller pair is discarded. Substream seeds come from
//
//     derive(s, id) = mix64(s ^ mix64(id + 0x9E3779B97F4A7C15)).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream_id) {
        return mix64(seed ^ mix64(stream_id + kGamma));
    }

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(seed_ + counter_ * kGamma);
    }

    // [0, 1)
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // (0, 1]
    double next_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller, two raw outputs per call.
    double next_gauss() {
        const double a = next_open();
        const double b = next_unit();
        return std::sqrt(-2.0 * std::log(a)) * std::cos(6.283185307179586476925286766559 * b);
    }

    // Uniform integer in [0, n), n >= 1.
    std::uint64_t below(std::uint64_t n) {
        const auto v = static_cast<std::uint64_t>(next_unit() * static_cast<double>(n));
        return v >= n ? n - 1 : v;
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace nlq
