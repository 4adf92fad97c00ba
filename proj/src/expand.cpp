#include "naor/expand.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstring>
#include <stdexcept>

namespace naor {

namespace {

struct CtxDeleter {
    void operator()(EVP_CIPHER_CTX* ctx) const { EVP_CIPHER_CTX_free(ctx); }
};
using CtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;

std::array<std::uint8_t, 16> seed_to_key(const BitVector& seed) {
    if (seed.size() == 0) throw std::invalid_argument("expand: seed must be non-empty");
    if (seed.size() > 128) throw std::invalid_argument("expand: seed longer than cipher key");
    std::array<std::uint8_t, 16> key{};
    auto bytes = seed.to_bytes_msb();
    std::memcpy(key.data(), bytes.data(), bytes.size());
    return key;
}

// Keystream of AES-128-CTR under `key`, zero IV, written to out.
void keystream(const std::array<std::uint8_t, 16>& key, std::uint8_t* out, std::size_t nbytes,
               EVP_CIPHER_CTX* ctx) {
    static const std::uint8_t zero_iv[16] = {};
    if (EVP_EncryptInit_ex(ctx, EVP_aes_128_ctr(), nullptr, key.data(), zero_iv) != 1)
        throw std::runtime_error("expand: cipher init failed");
    std::memset(out, 0, nbytes);
    int outl = 0;
    if (EVP_EncryptUpdate(ctx, out, &outl, out, static_cast<int>(nbytes)) != 1 ||
        static_cast<std::size_t>(outl) != nbytes)
        throw std::runtime_error("expand: keystream generation failed");
}

EVP_CIPHER_CTX* scratch_ctx() {
    thread_local CtxPtr ctx{EVP_CIPHER_CTX_new()};
    if (!ctx) throw std::runtime_error("expand: cipher context allocation failed");
    return ctx.get();
}

} // namespace

BitVector ExpansionFunction::expand(const BitVector& seed, std::size_t out_len) const {
    if (out_len == 0) throw std::invalid_argument("expand: output length must be positive");
    if (toy_ && seed.size() > kToyMaxSeedBits)
        throw std::invalid_argument("expand: toy seed longer than 16 bits");
    auto key = seed_to_key(seed);
    std::vector<std::uint8_t> bytes((out_len + 7) / 8);
    keystream(key, bytes.data(), bytes.size(), scratch_ctx());
    return BitVector::from_bytes_msb(bytes, out_len);
}

SeedRange::SeedRange(std::size_t n) : n_(n) {
    if (n == 0 || n > 16) throw std::invalid_argument("SeedRange: n must be in [1, 16]");
    count_ = std::uint64_t{1} << n;
}

BitVector SeedRange::iterator::operator*() const {
    BitVector seed(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        if ((index_ >> (n_ - 1 - i)) & 1) seed.set_bit(i, true);
    }
    return seed;
}

struct RandomStream::Impl {
    std::array<std::uint8_t, 16> key;
    CtxPtr ctx;
    std::array<std::uint8_t, 64> buf;
    std::size_t buf_pos = 0;        // next unread byte in buf
    std::uint64_t block_index = 0;  // AES-CTR blocks consumed so far

    explicit Impl(std::array<std::uint8_t, 16> k) : key(k), ctx(EVP_CIPHER_CTX_new()) {
        if (!ctx) throw std::runtime_error("RandomStream: context allocation failed");
        buf_pos = buf.size();
    }

    void refill() {
        // CTR state is (block_index) big-endian in the IV; continuing the
        // stream across refills just advances the counter.
        std::uint8_t iv[16] = {};
        std::uint64_t ctr = block_index;
        for (int i = 15; i >= 8; --i) {
            iv[i] = static_cast<std::uint8_t>(ctr & 0xff);
            ctr >>= 8;
        }
        if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(), iv) != 1)
            throw std::runtime_error("RandomStream: cipher init failed");
        std::memset(buf.data(), 0, buf.size());
        int outl = 0;
        if (EVP_EncryptUpdate(ctx.get(), buf.data(), &outl, buf.data(),
                              static_cast<int>(buf.size())) != 1)
            throw std::runtime_error("RandomStream: keystream failed");
        block_index += buf.size() / 16;
        buf_pos = 0;
    }

    std::uint8_t next_byte() {
        if (buf_pos == buf.size()) refill();
        return buf[buf_pos++];
    }
};

RandomStream::RandomStream(const BitVector& seed_bits)
    : impl_(std::make_unique<Impl>(seed_to_key(seed_bits))) {}

RandomStream::RandomStream(std::uint64_t seed) {
    BitVector bits(64);
    for (std::size_t i = 0; i < 64; ++i) {
        if ((seed >> (63 - i)) & 1) bits.set_bit(i, true);
    }
    impl_ = std::make_unique<Impl>(seed_to_key(bits));
}

RandomStream::RandomStream(RandomStream&&) noexcept = default;
RandomStream& RandomStream::operator=(RandomStream&&) noexcept = default;
RandomStream::~RandomStream() = default;

bool RandomStream::draw_bit() {
    return impl_->next_byte() & 1;
}

BitVector RandomStream::draw_bits(std::size_t len) {
    std::vector<std::uint8_t> bytes((len + 7) / 8);
    for (auto& b : bytes) b = impl_->next_byte();
    if (len % 8 != 0) bytes.back() &= static_cast<std::uint8_t>(0xff << (8 - len % 8));
    return BitVector::from_bytes_msb(bytes, len);
}

std::uint64_t RandomStream::draw_below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("draw_below: bound must be positive");
    if (bound == 1) return 0;
    // Rejection sampling over the smallest covering power of 256.
    std::size_t nbytes = 1;
    while (nbytes < 8 && (std::uint64_t{1} << (8 * nbytes)) < bound) ++nbytes;
    for (;;) {
        std::uint64_t x = 0;
        for (std::size_t i = 0; i < nbytes; ++i) x = x << 8 | impl_->next_byte();
        if (nbytes == 8) {
            std::uint64_t rem = (UINT64_MAX % bound + 1) % bound; // 2^64 mod bound
            if (rem == 0 || x <= UINT64_MAX - rem) return x % bound;
        } else {
            std::uint64_t space = std::uint64_t{1} << (8 * nbytes);
            if (x < space - space % bound) return x % bound;
        }
    }
}

RandomStream RandomStream::fork() {
    return RandomStream(draw_bits(128));
}

} // namespace naor
