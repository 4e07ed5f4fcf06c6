#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

namespace rescale {

using Rng = std::mt19937_64;

// splitmix64 step (Steele/Lea/Flood); used only to derive stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seed for one Monte Carlo path. Depends only on (master, index), so results
// are independent of how paths are distributed over workers.
inline std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (index * 0x9e3779b97f4a7c15ULL);
    std::uint64_t a = splitmix64(s);
    std::uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

inline Rng make_rng(std::uint64_t seed) {
    return Rng(seed);
}

// Runs fn(begin, end, block_index) over consecutive blocks of [0, n).
// Blocks are claimed dynamically; callers must write results into per-block
// slots (indexed by block_index) and combine them in block order afterwards,
// which keeps every estimate independent of the worker count.
void parallel_blocks(std::size_t n, unsigned threads, std::size_t block_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

inline std::size_t block_count(std::size_t n, std::size_t block_size) {
    return n == 0 ? 0 : (n + block_size - 1) / block_size;
}

constexpr std::size_t kDefaultMcBlock = 4096;

// Mean/stderr accumulator with compensated sums; merge in block order.
struct MeanAccumulator {
    double sum = 0.0, sum_c = 0.0;    // Kahan sum of values
    double sumsq = 0.0, sumsq_c = 0.0;
    std::size_t count = 0;

    void add(double v) {
        add_to(sum, sum_c, v);
        add_to(sumsq, sumsq_c, v * v);
        ++count;
    }
    void merge(const MeanAccumulator& o) {
        add_to(sum, sum_c, o.sum);
        add_to(sum, sum_c, o.sum_c);
        add_to(sumsq, sumsq_c, o.sumsq);
        add_to(sumsq, sumsq_c, o.sumsq_c);
        count += o.count;
    }
    double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
    // Standard error of the mean; 0 for fewer than two samples.
    double stderr_of_mean() const;

  private:
    static void add_to(double& s, double& c, double v) {
        double t = s + v;
        if (std::abs(s) >= std::abs(v))
            c += (s - t) + v;
        else
            c += (v - t) + s;
        s = t;
    }
};

}  // namespace rescale
