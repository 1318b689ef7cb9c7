#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace priorpull {

// Platform-stable 64-bit hash (FNV-1a over length-framed fields, splitmix64
// finalizer). Used for seeds and the mock oracle; not cryptographic.
class StableHash {
public:
    StableHash& add(std::uint64_t value);
    StableHash& add(std::string_view bytes);
    StableHash& add(const char* bytes) { return add(std::string_view(bytes)); }
    std::uint64_t digest() const;

private:
    void mix_byte(unsigned char b);
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

template <typename... Parts>
std::uint64_t stable_hash(const Parts&... parts) {
    StableHash h;
    (h.add(parts), ...);
    return h.digest();
}

// Maps a hash to [0, 1) with 53 bits of resolution.
inline double unit_interval(std::uint64_t h) {
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

using Rng = std::mt19937_64;

// Uniform integer in [0, bound). Rejection sampling, so the result only
// depends on the engine's standardized output sequence.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

} // namespace priorpull
