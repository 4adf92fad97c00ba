#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "naor/bitvec.hpp"

namespace naor::wire {

enum class Tag : std::uint8_t {
    Challenge = 0x01,
    Commitment = 0x02,
    Opening = 0x03,
    QChannel = 0x0F, // simulated BB84 transmission (sender's states and bases)
    BasesReveal = 0x10,
    CutChooseRequest = 0x11,
    CutChooseOpenings = 0x12,
    IndexSet = 0x13,
    TransferPayload = 0x14,
    Abort = 0x7F,
};

bool known_tag(std::uint8_t value);
std::string tag_name(Tag tag);

enum class WireErrorKind {
    Truncated,
    NonzeroPadding,
    LengthOverflow,
    UnknownTag,
    OversizeFrame,
    Malformed,
};

class WireError : public std::runtime_error {
public:
    WireError(WireErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    WireErrorKind kind() const { return kind_; }

private:
    WireErrorKind kind_;
};

inline constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 24;
inline constexpr std::size_t kMaxBitVectorBits = std::size_t{1} << 27;

/// 4-byte little-endian bit length, then ceil(len/8) payload bytes with
/// bit 0 in the MSB of byte 0 and zero padding.
std::vector<std::uint8_t> encode_bitvector(const BitVector& v);

/// Exact inverse of encode_bitvector; the whole buffer must be consumed.
BitVector decode_bitvector(std::span<const std::uint8_t> bytes);

/// Decodes one vector starting at `offset`, advancing it past the encoding.
BitVector decode_bitvector_at(std::span<const std::uint8_t> bytes, std::size_t& offset);

struct Frame {
    Tag tag = Tag::Abort;
    std::vector<std::uint8_t> payload;
    /// Protocol-level bits carried (bit-vector contents only; counts, tags
    /// and length prefixes are serialization overhead, not payload).
    std::size_t payload_bits = 0;

    std::size_t encoded_size() const { return 5 + payload.size(); }
    std::vector<std::uint8_t> encode() const;
};

/// Incremental deframer over an ordered byte stream; partial input is
/// buffered until a whole frame is available.
class FrameReader {
public:
    void feed(std::span<const std::uint8_t> bytes);
    /// Next complete frame, or nullopt if more bytes are needed.
    /// Throws WireError on unknown tags and oversize lengths.
    std::optional<Frame> next();
    bool has_pending_bytes() const { return pos_ < buf_.size(); }

private:
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

/// One-shot deframing of a complete buffer; trailing partial data is an error.
std::vector<Frame> deframe_exact(std::span<const std::uint8_t> bytes);

/// Payload builder that tracks semantic payload bits as vectors are added.
class PayloadWriter {
public:
    void put_u8(std::uint8_t v);
    void put_u32(std::uint32_t v);
    void put_bitvector(const BitVector& v);
    Frame finish(Tag tag) &&;

private:
    std::vector<std::uint8_t> bytes_;
    std::size_t bits_ = 0;
};

class PayloadReader {
public:
    explicit PayloadReader(std::span<const std::uint8_t> payload) : payload_(payload) {}
    std::uint8_t get_u8();
    std::uint32_t get_u32();
    BitVector get_bitvector();
    void expect_end() const;
    std::size_t bits_read() const { return bits_; }

private:
    std::span<const std::uint8_t> payload_;
    std::size_t pos_ = 0;
    std::size_t bits_ = 0;
};

enum class Phase { Challenge, Commit, Open, Bb84, CutChoose, ObliviousKeys, Transfer };
enum class Direction { AToB, BToA }; // A = commitment verifier / qOT sender

std::string phase_name(Phase phase);
std::optional<Phase> phase_from_name(std::string_view name);

/// Per-direction, per-phase accounting of protocol payload bits and of the
/// framed bytes that actually cross the transport.
class Transcript {
public:
    void record(Phase phase, Direction dir, std::size_t payload_bits, std::size_t framed_bytes);

    std::uint64_t payload_bits(Phase phase, Direction dir) const;
    std::uint64_t payload_bits(Phase phase) const;
    std::uint64_t total_payload_bits() const;
    std::uint64_t framed_bytes(Phase phase, Direction dir) const;
    std::uint64_t total_framed_bytes() const;
    std::uint64_t frames(Phase phase, Direction dir) const;

    std::string to_text() const;
    bool operator==(const Transcript&) const = default;

private:
    struct Cell {
        std::uint64_t bits = 0;
        std::uint64_t bytes = 0;
        std::uint64_t frames = 0;
        bool operator==(const Cell&) const = default;
    };
    std::array<std::array<Cell, 2>, 7> cells_{};
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Blocking, frame-oriented duplex channel.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send(const Frame& frame) = 0;
    virtual Frame recv() = 0;
};

/// Stream-socket transport; resumes partial reads, throws TransportError
/// on EOF or I/O failure.
class SocketTransport final : public Transport {
public:
    /// addr is "host:port".
    static SocketTransport connect_to(const std::string& addr);
    static SocketTransport listen_accept(const std::string& addr);

    SocketTransport(SocketTransport&& other) noexcept;
    SocketTransport& operator=(SocketTransport&& other) noexcept;
    ~SocketTransport() override;

    void send(const Frame& frame) override;
    Frame recv() override;

private:
    explicit SocketTransport(int fd) : fd_(fd) {}
    int fd_ = -1;
    FrameReader reader_;
};

/// In-process duplex queue; each endpoint is owned by one thread.
class QueuePair {
public:
    QueuePair();
    ~QueuePair();
    Transport& end_a();
    Transport& end_b();

private:
    struct Shared;
    struct Endpoint;
    std::shared_ptr<Shared> shared_;
    std::unique_ptr<Endpoint> a_, b_;
};

} // namespace naor::wire
