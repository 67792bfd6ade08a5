#pragma once

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hetbayes {

/// Seeded generator used by every sampler.
///
/// The engine is std::mt19937_64 (fully specified by the standard); the
/// variate transforms come from Boost.Random so that a seed yields the same
/// stream on every platform and standard library.
class Rng {
public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return boost::random::uniform_01<double>{}(engine_); }

    double normal() { return boost::random::normal_distribution<double>{0.0, 1.0}(engine_); }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Gamma with the given shape and rate (mean shape / rate).
    double gamma(double shape, double rate) {
        return boost::random::gamma_distribution<double>{shape, 1.0 / rate}(engine_);
    }

    std::uint64_t bits() { return engine_(); }

    engine_type& engine() { return engine_; }

private:
    engine_type engine_;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent child seed for a stream path such as (base, n index, replicate).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(base);
    for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

}  // namespace hetbayes
