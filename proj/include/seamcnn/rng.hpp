#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace seamcnn {

// Deterministic draw source: one mt19937_64 engine plus fixed bit-to-double
// mappings, so a given seed yields the same sequence across runs, build
// modes, and model variants. std:: distributions are avoided because their
// output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on the open interval (0,1): 53 high bits, offset by half an ulp.
    double uniform01() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
    }

    // Uniform on the open interval (lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0,n). Modulo bias is irrelevant at the n used here.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    // Fisher-Yates with a pinned visit order.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Derives a stream seed from (seed, stream) with a splitmix64 finalizer;
// used for per-epoch batch shuffles.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace seamcnn
