#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tgx {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// 64-bit FNV-1a, used for seed derivation and parameter/config hashing.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed from (root seed, subsystem tag, index).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, std::uint64_t index = 0) {
    return splitmix64(fnv1a(tag, root ^ 0x9e3779b97f4a7c15ull) + index);
}

// Deterministic generator with portable floating-point draws. std::mt19937_64
// output is specified by the standard; the distributions below avoid the
// implementation-defined std:: distribution algorithms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dull)) {}

    std::uint64_t next_u64() {
        state_ = splitmix64(state_ + 0x9e3779b97f4a7c15ull);
        return state_;
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1), safe for logs
    double uniform_open() {
        double u = uniform();
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) {
        // multiply-shift; bias is negligible for n << 2^64
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    double normal() {
        // Box-Muller, one value per call
        double u1 = uniform_open();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double exponential(double mean = 1.0) { return -mean * std::log(uniform_open()); }

    // logistic noise = log U - log(1-U); difference of two Gumbel variates
    double logistic() {
        double u = uniform_open();
        return std::log(u) - std::log1p(-u);
    }

private:
    std::uint64_t state_;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

} // namespace tgx
