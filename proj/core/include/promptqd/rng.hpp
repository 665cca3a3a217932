#ifndef PROMPTQD_RNG_HPP
#define PROMPTQD_RNG_HPP

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace promptqd {

/// Seeded random stream with serializable state.
///
/// Variates are drawn directly from the 64-bit engine without any cached
/// state in distribution objects, so serialize()/restore() captures the
/// stream exactly and checkpoints resume bit-identically.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    /// Independent named stream derived from a master seed.
    static Rng substream(std::uint64_t master_seed, std::string_view name);

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Standard normal (Marsaglia polar method, second variate discarded).
    double normal();
    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n);

    std::string serialize() const;
    void restore(const std::string& state);

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace promptqd

#endif
