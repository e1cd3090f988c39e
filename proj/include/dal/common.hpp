#pragma once

// Shared plumbing: error types, deterministic RNG, seed derivation and a
// bounded parallel-for used by training and evaluation.

#include <atomic>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace dal {

// Malformed input data (CSV cells, schema sidecars, query files). The CLI
// maps this to exit code 2; other exceptions land on 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// splitmix64 finalizer, used to derive independent sub-streams from one
// master seed so results do not depend on scheduling or call order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    return mix64(master ^ mix64(stream + 1));
}

// Fixed sub-stream tags. Every random decision in a training or evaluation
// pipeline draws from derive_seed(master, tag [+ index]).
namespace seed_stream {
inline constexpr std::uint64_t split = 0x100000;
inline constexpr std::uint64_t local_fit = 0x200000;  // + division id
inline constexpr std::uint64_t smote = 0x300000;
inline constexpr std::uint64_t forest = 0x400000;
inline constexpr std::uint64_t run = 0x500000;  // + run index
} // namespace seed_stream

// mt19937_64 is fully specified by the standard; the double/index extraction
// is done by hand because std::uniform_*_distribution is not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [0, n)
    std::size_t next_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    std::mt19937_64 engine_;
};

// Runs fn(i) for i in [0, n). Results must be written to pre-sized slots so
// the outcome is independent of worker count.
template <typename Fn>
void parallel_for(unsigned jobs, std::size_t n, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= n) break;
            fn(i);
        }
    };
    std::size_t n_threads = std::min<std::size_t>(jobs, n);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace dal
