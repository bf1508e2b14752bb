#pragma once

#include <cstdint>
#include <limits>

namespace npgroup {

/// Counter-based 64-bit generator (SplitMix64 output function).
///
/// Draw i of a stream is mix(key + i * golden), so a stream is fully
/// determined by its key and any draw can be reached in O(1). Streams are
/// keyed by (seed, stream id): every replication of a study gets its own
/// stream id and therefore the same numbers whatever thread runs it.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(mix(seed ^ kStreamSalt) + (stream + 1) * kGolden)) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ + (++counter_) * kGolden); }

    void discard(std::uint64_t k) { counter_ += k; }
    std::uint64_t counter() const { return counter_; }

    /// Stream id for replication `rep` of grid point `cell`.
    static std::uint64_t stream_id(std::uint64_t cell, std::uint64_t rep) { return (cell << 32) ^ rep; }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
    static constexpr std::uint64_t kStreamSalt = 0x6a09e667f3bcc909ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace npgroup
