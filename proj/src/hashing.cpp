#include "priorpull/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace priorpull {

namespace {
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace

void StableHash::mix_byte(unsigned char b) {
    state_ ^= b;
    state_ *= kFnvPrime;
}

StableHash& StableHash::add(std::uint64_t value) {
    mix_byte('u');
    for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(value >> (8 * i)));
    return *this;
}

StableHash& StableHash::add(std::string_view bytes) {
    mix_byte('s');
    add(static_cast<std::uint64_t>(bytes.size()));
    for (char c : bytes) mix_byte(static_cast<unsigned char>(c));
    return *this;
}

std::uint64_t StableHash::digest() const { return splitmix64(state_); }

std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("uniform_below: bound must be positive");
    // Largest multiple of bound representable; values at or above are rejected.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
    for (;;) {
        std::uint64_t v = rng();
        if (v <= limit) return v % bound;
    }
}

std::string sha256_hex(std::string_view bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xf]);
    }
    return out;
}

} // namespace priorpull
