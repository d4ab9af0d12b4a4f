#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace tureis {

// Deterministic RNG wrapper. All distribution transforms are implemented here
// (not via std:: distributions, whose output is implementation-defined) so that
// identical seeds give identical streams on any toolchain.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return (gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        // modulo-rejection to avoid bias
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do { v = gen_(); } while (v >= limit);
        return v % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Marsaglia polar method.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        have_spare_ = true;
        return u * f;
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    double exponential(double mean) {
        double u;
        do { u = uniform(); } while (u <= 0.0);
        return -mean * std::log(u);
    }

    // Knuth's method; fine for the small lambdas used here.
    int poisson(double lambda) {
        double limit = std::exp(-lambda);
        double p = 1.0;
        int k = 0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    // Derive an independent stream for a sub-task.
    Rng fork(uint64_t salt) {
        uint64_t s = gen_() ^ (salt * 0x9E3779B97F4A7C15ULL);
        return Rng(s);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace tureis
