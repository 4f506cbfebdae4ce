#pragma once

#include <cstdint>
#include <random>

namespace mimo {

using RandomStream = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Node in a tree of named random streams. Children are derived by hashing
// (parent, tag), so a stream's draws depend only on its path from the root
// and never on the order in which sibling streams are consumed.
class StreamKey {
public:
    constexpr StreamKey() noexcept = default;
    constexpr explicit StreamKey(std::uint64_t root) noexcept : value_(mix64(root)) {}

    constexpr StreamKey child(std::uint64_t tag) const noexcept {
        StreamKey k;
        k.value_ = mix64(value_ ^ mix64(tag + 0x632be59bd9b4e019ULL));
        return k;
    }

    constexpr std::uint64_t value() const noexcept { return value_; }

    RandomStream stream() const {
        std::seed_seq seq{static_cast<std::uint32_t>(value_), static_cast<std::uint32_t>(value_ >> 32)};
        return RandomStream(seq);
    }

private:
    std::uint64_t value_ = 0;
};

// Purpose tags used by the simulation harness.
enum class StreamPurpose : std::uint64_t {
    Channel = 1,
    Symbols = 2,
    Noise = 3,
    Trajectory = 4,
};

inline StreamKey child(const StreamKey& key, StreamPurpose p) noexcept {
    return key.child(static_cast<std::uint64_t>(p));
}

} // namespace mimo
