#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace honeymodel {

/// Deterministic engine used everywhere randomness is needed.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Labeled sub-seed derivation: every component hashes its own name into the
/// root seed, so adding a component never perturbs another's stream.
inline std::uint64_t deriveSeed(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(root ^ h);
}

inline std::uint64_t deriveSeed(std::uint64_t root, std::string_view label, std::uint64_t index) {
    return splitmix64(deriveSeed(root, label) ^ splitmix64(index));
}

/// Source of fresh 64-bit entropy for secret-key generation.
/// Keys must be unguessable, so the default pulls from the OS.
class EntropySource {
public:
    virtual ~EntropySource() = default;
    virtual std::uint64_t next() = 0;
};

/// OS-backed entropy (std::random_device reads /dev/urandom on Linux).
class SystemEntropy final : public EntropySource {
public:
    std::uint64_t next() override {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }
};

/// Scripted entropy for tests.
class FixedEntropy final : public EntropySource {
public:
    explicit FixedEntropy(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() override {
        state_ = splitmix64(state_);
        return state_;
    }

private:
    std::uint64_t state_;
};

} // namespace honeymodel
