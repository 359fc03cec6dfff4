#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace msct {

/*** Error taxonomy mapped to CLI exit codes (config 2, data 3, numeric 4). */
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/*** FNV-1a 64-bit hash, used for manifests and architecture fingerprints.
 * Not cryptographic; adequate for provenance bookkeeping. */
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}
inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

/*** splitmix64: cheap, well-mixed stream used to derive independent
 * per-task seeds from (seed, slice, angle, pixel) tuples so results are
 * schedule-independent. */
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/*** Kahan compensated accumulator for photon-conservation style sums. */
struct KahanSum {
    double sum = 0.0, c = 0.0;
    void add(double v) {
        double y = v - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

/*** Static-partition parallel for. n_threads <= 1 runs inline. Tasks must be
 * independent; determinism comes from per-index seeding, not scheduling. */
void parallel_for(std::size_t n, int n_threads, const std::function<void(std::size_t)>& fn);

/*** Worker count resolution: 0 means hardware concurrency. */
int resolve_threads(int requested);

std::uint64_t hash_file(const std::string& path);
std::string read_text_file(const std::string& path);

}  // namespace msct
