#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace naor {

/// Arbitrary-length bit string, bit 0 first. Packed into 64-bit words
/// (bit i lives at words()[i/64], position i%64); padding bits beyond
/// size() are always zero, so equality and weight work on whole words.
class BitVector {
public:
    BitVector() = default;
    explicit BitVector(std::size_t len) : len_(len), words_(word_count(len), 0) {}

    static BitVector from_bits(std::initializer_list<int> bits);
    /// Parses a string of '0'/'1' characters, index 0 = first character.
    static BitVector from_string(std::string_view bits);
    /// Unpacks MSB-first bytes (bit i = bit 7-(i%8) of byte i/8).
    static BitVector from_bytes_msb(std::span<const std::uint8_t> bytes, std::size_t len);
    /// Parses the "len:hex" form used at CLI and fixture boundaries,
    /// e.g. "9:a080". Rejects bad syntax and nonzero padding bits.
    static BitVector parse_len_hex(std::string_view text);

    std::size_t size() const { return len_; }
    bool empty() const { return len_ == 0; }

    bool bit(std::size_t i) const;
    void set_bit(std::size_t i, bool value);

    /// Number of set bits.
    std::size_t weight() const;
    /// XOR of all bits.
    bool parity() const { return weight() & 1u; }

    BitVector& operator^=(const BitVector& other);
    friend BitVector operator^(BitVector a, const BitVector& b) { return a ^= b; }
    bool operator==(const BitVector&) const = default;

    /// out[j] = in[(j - k) mod size()]; k is reduced mod size().
    BitVector rotated_right(std::size_t k) const;

    /// Bits [start, start+count) as a new vector.
    BitVector slice(std::size_t start, std::size_t count) const;
    /// Appends all of other's bits after this one's.
    void append(const BitVector& other);
    void push_back(bool bit);

    std::span<const std::uint64_t> words() const { return words_; }

    std::vector<std::uint8_t> to_bytes_msb() const;
    std::string to_string() const;
    std::string to_len_hex() const;

    static std::size_t word_count(std::size_t len) { return (len + 63) / 64; }

private:
    void clear_padding();

    std::size_t len_ = 0;
    std::vector<std::uint64_t> words_;
};

} // namespace naor
