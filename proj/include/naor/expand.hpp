#pragma once

#include <cstdint>
#include <memory>

#include "naor/bitvec.hpp"

namespace naor {

/// Deterministic seed expansion G: {0,1}^n -> {0,1}^L, instantiated as the
/// AES-128-CTR keystream keyed by the seed zero-padded (on the right) to
/// 16 bytes, zero IV, truncated to the requested bit count. Outputs are
/// prefix-consistent in L. The toy variant is the same map restricted to
/// seeds of at most 16 bits so the whole domain can be enumerated.
class ExpansionFunction {
public:
    static ExpansionFunction production() { return ExpansionFunction{false}; }
    static ExpansionFunction toy() { return ExpansionFunction{true}; }

    BitVector expand(const BitVector& seed, std::size_t out_len) const;

    bool is_toy() const { return toy_; }

    /// Largest seed length the toy variant accepts.
    static constexpr std::size_t kToyMaxSeedBits = 16;

private:
    explicit ExpansionFunction(bool toy) : toy_(toy) {}
    bool toy_;
};

/// All 2^n seeds of length n in lexicographic order (bit 0 most significant).
class SeedRange {
public:
    explicit SeedRange(std::size_t n);

    class iterator {
    public:
        iterator(std::size_t n, std::uint64_t index) : n_(n), index_(index) {}
        BitVector operator*() const;
        iterator& operator++() { ++index_; return *this; }
        bool operator!=(const iterator& o) const { return index_ != o.index_; }

    private:
        std::size_t n_;
        std::uint64_t index_;
    };

    iterator begin() const { return iterator{n_, 0}; }
    iterator end() const { return iterator{n_, count_}; }
    std::uint64_t size() const { return count_; }

private:
    std::size_t n_;
    std::uint64_t count_;
};

/// Deterministic byte/bit source for all protocol randomness: an AES-CTR
/// keystream keyed by a root seed. Fork() derives an independent child
/// stream by consuming 128 bits of this one.
class RandomStream {
public:
    explicit RandomStream(const BitVector& seed_bits);
    explicit RandomStream(std::uint64_t seed);
    RandomStream(RandomStream&&) noexcept;
    RandomStream& operator=(RandomStream&&) noexcept;
    ~RandomStream();

    bool draw_bit();
    BitVector draw_bits(std::size_t len);
    /// Uniform in [0, bound) by rejection; bound >= 1.
    std::uint64_t draw_below(std::uint64_t bound);

    RandomStream fork();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace naor
