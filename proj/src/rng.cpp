#include "rescale/rng.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace rescale {

void parallel_blocks(std::size_t n, unsigned threads, std::size_t block_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    if (block_size == 0) block_size = kDefaultMcBlock;
    const std::size_t n_blocks = block_count(n, block_size);
    if (threads <= 1 || n_blocks == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            fn(b * block_size, std::min(n, (b + 1) * block_size), b);
        return;
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_blocks));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            fn(b * block_size, std::min(n, (b + 1) * block_size), b);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

double MeanAccumulator::stderr_of_mean() const {
    if (count < 2) return 0.0;
    const double n = static_cast<double>(count);
    const double m = mean();
    double var = (sumsq + sumsq_c) / n - m * m;
    var = std::max(var, 0.0) * n / (n - 1.0);
    return std::sqrt(var / n);
}

}  // namespace rescale
