#include "promptqd/rng.hpp"

#include "promptqd/common.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace promptqd {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

Rng Rng::substream(std::uint64_t master_seed, std::string_view name) {
    return Rng(splitmix64(splitmix64(master_seed) ^ fnv1a64(name)));
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    return u * std::sqrt(-2.0 * std::log(s) / s);
}

std::size_t Rng::below(std::size_t n) {
    // Reject the incomplete top bucket so x % bound is unbiased.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::restore(const std::string& state) {
    std::istringstream is(state);
    std::mt19937_64 e;
    is >> e;
    if (is.fail()) throw LoadError("corrupt random stream state");
    engine_ = e;
}

std::filesystem::path default_data_dir() {
    if (const char* env = std::getenv("PROMPTQD_DATA_DIR"); env && *env) return env;
    std::filesystem::path build_dir = PROMPTQD_BUILD_DATA_DIR;
    if (std::filesystem::exists(build_dir)) return build_dir;
    return PROMPTQD_INSTALL_DATA_DIR;
}

bool all_finite(const Eigen::Ref<const Matrix>& m) {
    return m.allFinite();
}

}  // namespace promptqd
