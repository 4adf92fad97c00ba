#include "naor/bitvec.hpp"

#include <bit>
#include <charconv>
#include <stdexcept>

namespace naor {

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

constexpr char kHexDigits[] = "0123456789abcdef";

} // namespace

BitVector BitVector::from_bits(std::initializer_list<int> bits) {
    BitVector v(bits.size());
    std::size_t i = 0;
    for (int b : bits) v.set_bit(i++, b != 0);
    return v;
}

BitVector BitVector::from_string(std::string_view bits) {
    BitVector v(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        char c = bits[i];
        if (c != '0' && c != '1') throw std::invalid_argument("BitVector: expected '0' or '1'");
        v.set_bit(i, c == '1');
    }
    return v;
}

BitVector BitVector::from_bytes_msb(std::span<const std::uint8_t> bytes, std::size_t len) {
    if (bytes.size() * 8 < len) throw std::invalid_argument("BitVector: byte buffer too short");
    BitVector v(len);
    for (std::size_t i = 0; i < len; ++i) {
        if ((bytes[i / 8] >> (7 - (i % 8))) & 1) v.set_bit(i, true);
    }
    return v;
}

BitVector BitVector::parse_len_hex(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos) throw std::invalid_argument("expected len:hex");
    std::size_t len = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + colon, len);
    if (ec != std::errc{} || ptr != text.data() + colon)
        throw std::invalid_argument("bad bit length in len:hex");
    std::string_view hex = text.substr(colon + 1);
    std::size_t nbytes = (len + 7) / 8;
    if (hex.size() != nbytes * 2) throw std::invalid_argument("hex length does not match bit length");
    std::vector<std::uint8_t> bytes(nbytes);
    for (std::size_t i = 0; i < nbytes; ++i) {
        int hi = hex_digit(hex[2 * i]);
        int lo = hex_digit(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("bad hex digit");
        bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    // Padding bits past len must be zero.
    for (std::size_t i = len; i < nbytes * 8; ++i) {
        if ((bytes[i / 8] >> (7 - (i % 8))) & 1)
            throw std::invalid_argument("nonzero padding bits in len:hex");
    }
    return from_bytes_msb(bytes, len);
}

bool BitVector::bit(std::size_t i) const {
    if (i >= len_) throw std::out_of_range("BitVector: bit index out of range");
    return (words_[i >> 6] >> (i & 63)) & 1u;
}

void BitVector::set_bit(std::size_t i, bool value) {
    if (i >= len_) throw std::out_of_range("BitVector: bit index out of range");
    std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (value)
        words_[i >> 6] |= mask;
    else
        words_[i >> 6] &= ~mask;
}

std::size_t BitVector::weight() const {
    std::size_t w = 0;
    for (std::uint64_t word : words_) w += static_cast<std::size_t>(std::popcount(word));
    return w;
}

BitVector& BitVector::operator^=(const BitVector& other) {
    if (len_ != other.len_) throw std::invalid_argument("BitVector: xor length mismatch");
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] ^= other.words_[i];
    return *this;
}

namespace {

// Packed shift toward higher bit positions: out[j] = j >= s ? in[j-s] : 0.
std::vector<std::uint64_t> shift_words_up(std::span<const std::uint64_t> w, std::size_t s) {
    std::vector<std::uint64_t> out(w.size(), 0);
    std::size_t ws = s >> 6, bs = s & 63;
    for (std::size_t i = w.size(); i-- > 0;) {
        if (i < ws) break;
        std::uint64_t lo = w[i - ws];
        std::uint64_t carry = (bs && i >= ws + 1) ? w[i - ws - 1] >> (64 - bs) : 0;
        out[i] = (bs ? lo << bs : lo) | carry;
    }
    return out;
}

// Packed shift toward lower bit positions: out[j] = in[j+s] (zero past the end).
std::vector<std::uint64_t> shift_words_down(std::span<const std::uint64_t> w, std::size_t s) {
    std::vector<std::uint64_t> out(w.size(), 0);
    std::size_t ws = s >> 6, bs = s & 63;
    for (std::size_t i = 0; i + ws < w.size(); ++i) {
        std::uint64_t hi = w[i + ws];
        std::uint64_t carry = (bs && i + ws + 1 < w.size()) ? w[i + ws + 1] << (64 - bs) : 0;
        out[i] = (bs ? hi >> bs : hi) | carry;
    }
    return out;
}

} // namespace

BitVector BitVector::rotated_right(std::size_t k) const {
    if (len_ == 0) return *this;
    k %= len_;
    if (k == 0) return *this;
    BitVector out(len_);
    auto up = shift_words_up(words_, k);
    auto down = shift_words_down(words_, len_ - k);
    for (std::size_t i = 0; i < out.words_.size(); ++i) out.words_[i] = up[i] | down[i];
    out.clear_padding();
    return out;
}

BitVector BitVector::slice(std::size_t start, std::size_t count) const {
    if (start + count > len_) throw std::out_of_range("BitVector: slice out of range");
    BitVector out(count);
    for (std::size_t i = 0; i < count; ++i) out.set_bit(i, bit(start + i));
    return out;
}

void BitVector::append(const BitVector& other) {
    std::size_t old = len_;
    len_ += other.len_;
    words_.resize(word_count(len_), 0);
    for (std::size_t i = 0; i < other.len_; ++i) {
        if (other.bit(i)) set_bit(old + i, true);
    }
}

void BitVector::push_back(bool b) {
    ++len_;
    words_.resize(word_count(len_), 0);
    set_bit(len_ - 1, b);
}

std::vector<std::uint8_t> BitVector::to_bytes_msb() const {
    std::vector<std::uint8_t> bytes((len_ + 7) / 8, 0);
    for (std::size_t i = 0; i < len_; ++i) {
        if (bit(i)) bytes[i / 8] |= static_cast<std::uint8_t>(0x80 >> (i % 8));
    }
    return bytes;
}

std::string BitVector::to_string() const {
    std::string s(len_, '0');
    for (std::size_t i = 0; i < len_; ++i)
        if (bit(i)) s[i] = '1';
    return s;
}

std::string BitVector::to_len_hex() const {
    auto bytes = to_bytes_msb();
    std::string s = std::to_string(len_);
    s += ':';
    for (std::uint8_t b : bytes) {
        s += kHexDigits[b >> 4];
        s += kHexDigits[b & 0xf];
    }
    return s;
}

void BitVector::clear_padding() {
    std::size_t tail = len_ & 63;
    if (tail != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << tail) - 1;
}

} // namespace naor
