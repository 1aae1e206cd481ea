#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace plab {

// Philox4x32-10 block function.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key)
{
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        uint64_t p0 = uint64_t(M0) * ctr[0];
        uint64_t p1 = uint64_t(M1) * ctr[2];
        uint32_t hi0 = uint32_t(p0 >> 32), lo0 = uint32_t(p0);
        uint32_t hi1 = uint32_t(p1 >> 32), lo1 = uint32_t(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

inline uint64_t splitmix64(uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ull)); }

inline uint64_t hash_string(const std::string& s)
{
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
    return h;
}

// Counter-based stream. The key comes from (seed, tag); the high half of the
// counter is the replica index, the low half counts blocks. Two streams with
// different replica indices never share a counter value.
class RngStream {
public:
    using result_type = uint64_t;

    RngStream() : RngStream(0, 0, 0) {}
    RngStream(uint64_t seed, uint64_t replica, uint64_t tag = 0) : seed_(seed), tag_(tag), replica_(replica)
    {
        uint64_t k = hash_combine(seed, tag);
        key_ = {uint32_t(k), uint32_t(k >> 32)};
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<uint64_t>::max(); }

    result_type operator()()
    {
        if (pos_ == 2) refill();
        return buf_[pos_++];
    }

    // uniform on [0,1)
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }
    // uniform on (0,1)
    double uniform_pos() { return (double((*this)() >> 11) + 0.5) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }
    bool bernoulli(double p) { return uniform() < p; }
    int64_t poisson(double mean)
    {
        if (!(mean > 0)) return 0;
        std::poisson_distribution<int64_t> d(mean);
        return d(*this);
    }
    // uniform integer in [0, n)
    uint64_t below(uint64_t n)
    {
        std::uniform_int_distribution<uint64_t> d(0, n - 1);
        return d(*this);
    }

    // independent child stream (e.g. per sub-task within one replica)
    RngStream child(uint64_t sub) const { return RngStream(hash_combine(seed_, tag_ + 1), replica_, hash_combine(sub, replica_)); }

    uint64_t seed() const { return seed_; }
    uint64_t replica() const { return replica_; }

private:
    void refill()
    {
        auto out = philox4x32({uint32_t(block_), uint32_t(block_ >> 32), uint32_t(replica_), uint32_t(replica_ >> 32)}, key_);
        ++block_;
        buf_[0] = (uint64_t(out[1]) << 32) | out[0];
        buf_[1] = (uint64_t(out[3]) << 32) | out[2];
        pos_ = 0;
    }

    uint64_t seed_, tag_, replica_;
    std::array<uint32_t, 2> key_{};
    uint64_t block_ = 0;
    std::array<uint64_t, 2> buf_{};
    int pos_ = 2;
};

inline unsigned worker_count()
{
    if (const char* env = std::getenv("PLAB_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return unsigned(v);
    }
    unsigned h = std::thread::hardware_concurrency();
    return h == 0 ? 1 : h;
}

// Runs fn(i) for i in [0,n). Results must be written to per-index slots so
// that output does not depend on scheduling.
template <class Fn>
void parallel_for(size_t n, Fn&& fn)
{
    unsigned w = worker_count();
    if (w <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    w = unsigned(std::min<size_t>(w, n));
    std::vector<std::exception_ptr> errors(w);
    {
        std::vector<std::jthread> pool;
        pool.reserve(w);
        for (unsigned t = 0; t < w; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (size_t i = t; i < n; i += w) fn(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace plab
