#include "naor/wire.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <sstream>

namespace naor::wire {

bool known_tag(std::uint8_t value) {
    switch (static_cast<Tag>(value)) {
        case Tag::Challenge:
        case Tag::Commitment:
        case Tag::Opening:
        case Tag::QChannel:
        case Tag::BasesReveal:
        case Tag::CutChooseRequest:
        case Tag::CutChooseOpenings:
        case Tag::IndexSet:
        case Tag::TransferPayload:
        case Tag::Abort:
            return true;
    }
    return false;
}

std::string tag_name(Tag tag) {
    switch (tag) {
        case Tag::Challenge: return "challenge";
        case Tag::Commitment: return "commitment";
        case Tag::Opening: return "opening";
        case Tag::QChannel: return "qchannel";
        case Tag::BasesReveal: return "bb84-bases-reveal";
        case Tag::CutChooseRequest: return "cut-choose-request";
        case Tag::CutChooseOpenings: return "cut-choose-openings";
        case Tag::IndexSet: return "index-set";
        case Tag::TransferPayload: return "transfer-payload";
        case Tag::Abort: return "abort";
    }
    return "unknown";
}

namespace {

void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return static_cast<std::uint32_t>(bytes[offset]) |
           static_cast<std::uint32_t>(bytes[offset + 1]) << 8 |
           static_cast<std::uint32_t>(bytes[offset + 2]) << 16 |
           static_cast<std::uint32_t>(bytes[offset + 3]) << 24;
}

} // namespace

std::vector<std::uint8_t> encode_bitvector(const BitVector& v) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + (v.size() + 7) / 8);
    put_u32_le(out, static_cast<std::uint32_t>(v.size()));
    auto bytes = v.to_bytes_msb();
    out.insert(out.end(), bytes.begin(), bytes.end());
    return out;
}

BitVector decode_bitvector_at(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    if (bytes.size() - offset < 4)
        throw WireError(WireErrorKind::Truncated, "bit vector: missing length field");
    std::uint64_t len = get_u32_le(bytes, offset);
    if (len > kMaxBitVectorBits)
        throw WireError(WireErrorKind::LengthOverflow, "bit vector: length exceeds limit");
    std::size_t nbytes = static_cast<std::size_t>((len + 7) / 8);
    if (bytes.size() - offset - 4 < nbytes)
        throw WireError(WireErrorKind::Truncated, "bit vector: content truncated");
    std::span<const std::uint8_t> content = bytes.subspan(offset + 4, nbytes);
    for (std::size_t i = len; i < nbytes * 8; ++i) {
        if ((content[i / 8] >> (7 - i % 8)) & 1)
            throw WireError(WireErrorKind::NonzeroPadding, "bit vector: nonzero padding bits");
    }
    offset += 4 + nbytes;
    return BitVector::from_bytes_msb(content, static_cast<std::size_t>(len));
}

BitVector decode_bitvector(std::span<const std::uint8_t> bytes) {
    std::size_t offset = 0;
    BitVector v = decode_bitvector_at(bytes, offset);
    if (offset != bytes.size())
        throw WireError(WireErrorKind::Malformed, "bit vector: trailing bytes");
    return v;
}

std::vector<std::uint8_t> Frame::encode() const {
    if (payload.size() > kMaxFrameBytes)
        throw WireError(WireErrorKind::OversizeFrame, "frame: payload too large");
    std::vector<std::uint8_t> out;
    out.reserve(encoded_size());
    out.push_back(static_cast<std::uint8_t>(tag));
    put_u32_le(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
    // Compact consumed prefix occasionally so the buffer does not grow.
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    }
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameReader::next() {
    if (buf_.size() - pos_ < 5) return std::nullopt;
    std::uint8_t tag = buf_[pos_];
    if (!known_tag(tag)) throw WireError(WireErrorKind::UnknownTag, "frame: unknown tag");
    std::uint32_t len = get_u32_le(buf_, pos_ + 1);
    if (len > kMaxFrameBytes) throw WireError(WireErrorKind::OversizeFrame, "frame: oversize length");
    if (buf_.size() - pos_ - 5 < len) return std::nullopt;
    Frame f;
    f.tag = static_cast<Tag>(tag);
    f.payload.assign(buf_.begin() + static_cast<long>(pos_ + 5),
                     buf_.begin() + static_cast<long>(pos_ + 5 + len));
    pos_ += 5 + len;
    return f;
}

std::vector<Frame> deframe_exact(std::span<const std::uint8_t> bytes) {
    FrameReader reader;
    reader.feed(bytes);
    std::vector<Frame> frames;
    while (auto f = reader.next()) frames.push_back(std::move(*f));
    if (reader.has_pending_bytes())
        throw WireError(WireErrorKind::Truncated, "frame: trailing partial frame");
    return frames;
}

void PayloadWriter::put_u8(std::uint8_t v) {
    bytes_.push_back(v);
}

void PayloadWriter::put_u32(std::uint32_t v) {
    put_u32_le(bytes_, v);
}

void PayloadWriter::put_bitvector(const BitVector& v) {
    auto enc = encode_bitvector(v);
    bytes_.insert(bytes_.end(), enc.begin(), enc.end());
    bits_ += v.size();
}

Frame PayloadWriter::finish(Tag tag) && {
    Frame f;
    f.tag = tag;
    f.payload = std::move(bytes_);
    f.payload_bits = bits_;
    return f;
}

std::uint8_t PayloadReader::get_u8() {
    if (payload_.size() - pos_ < 1)
        throw WireError(WireErrorKind::Truncated, "payload: missing byte");
    return payload_[pos_++];
}

std::uint32_t PayloadReader::get_u32() {
    if (payload_.size() - pos_ < 4)
        throw WireError(WireErrorKind::Truncated, "payload: missing u32");
    std::uint32_t v = get_u32_le(payload_, pos_);
    pos_ += 4;
    return v;
}

BitVector PayloadReader::get_bitvector() {
    BitVector v = decode_bitvector_at(payload_, pos_);
    bits_ += v.size();
    return v;
}

void PayloadReader::expect_end() const {
    if (pos_ != payload_.size())
        throw WireError(WireErrorKind::Malformed, "payload: trailing bytes");
}

std::string phase_name(Phase phase) {
    switch (phase) {
        case Phase::Challenge: return "challenge";
        case Phase::Commit: return "commit";
        case Phase::Open: return "open";
        case Phase::Bb84: return "bb84";
        case Phase::CutChoose: return "cut-choose";
        case Phase::ObliviousKeys: return "okeys";
        case Phase::Transfer: return "transfer";
    }
    return "unknown";
}

std::optional<Phase> phase_from_name(std::string_view name) {
    for (int i = 0; i < 7; ++i) {
        Phase p = static_cast<Phase>(i);
        if (phase_name(p) == name) return p;
    }
    return std::nullopt;
}

void Transcript::record(Phase phase, Direction dir, std::size_t payload_bits,
                        std::size_t framed_bytes) {
    Cell& cell = cells_[static_cast<std::size_t>(phase)][static_cast<std::size_t>(dir)];
    cell.bits += payload_bits;
    cell.bytes += framed_bytes;
    cell.frames += 1;
}

std::uint64_t Transcript::payload_bits(Phase phase, Direction dir) const {
    return cells_[static_cast<std::size_t>(phase)][static_cast<std::size_t>(dir)].bits;
}

std::uint64_t Transcript::payload_bits(Phase phase) const {
    return payload_bits(phase, Direction::AToB) + payload_bits(phase, Direction::BToA);
}

std::uint64_t Transcript::total_payload_bits() const {
    std::uint64_t total = 0;
    for (int p = 0; p < 7; ++p) total += payload_bits(static_cast<Phase>(p));
    return total;
}

std::uint64_t Transcript::framed_bytes(Phase phase, Direction dir) const {
    return cells_[static_cast<std::size_t>(phase)][static_cast<std::size_t>(dir)].bytes;
}

std::uint64_t Transcript::total_framed_bytes() const {
    std::uint64_t total = 0;
    for (auto& row : cells_)
        for (auto& cell : row) total += cell.bytes;
    return total;
}

std::uint64_t Transcript::frames(Phase phase, Direction dir) const {
    return cells_[static_cast<std::size_t>(phase)][static_cast<std::size_t>(dir)].frames;
}

std::string Transcript::to_text() const {
    std::ostringstream os;
    os << "phase        a->b bits  b->a bits  framed bytes\n";
    for (int p = 0; p < 7; ++p) {
        Phase phase = static_cast<Phase>(p);
        std::uint64_t ab = payload_bits(phase, Direction::AToB);
        std::uint64_t ba = payload_bits(phase, Direction::BToA);
        std::uint64_t bytes = framed_bytes(phase, Direction::AToB) +
                              framed_bytes(phase, Direction::BToA);
        if (ab == 0 && ba == 0 && bytes == 0) continue;
        std::string name = phase_name(phase);
        name.resize(12, ' ');
        os << name << ' ' << ab << "  " << ba << "  " << bytes << '\n';
    }
    os << "total payload bits: " << total_payload_bits()
       << ", framed bytes: " << total_framed_bytes() << '\n';
    return os.str();
}

// ---- socket transport ----

namespace {

std::pair<std::string, std::string> split_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size())
        throw TransportError("address must be host:port");
    return {addr.substr(0, colon), addr.substr(colon + 1)};
}

struct AddrInfoDeleter {
    void operator()(addrinfo* p) const { freeaddrinfo(p); }
};

std::unique_ptr<addrinfo, AddrInfoDeleter> resolve(const std::string& addr, bool passive) {
    auto [host, port] = split_addr(addr);
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    if (passive) hints.ai_flags = AI_PASSIVE;
    addrinfo* result = nullptr;
    int rc = getaddrinfo(host.c_str(), port.c_str(), &hints, &result);
    if (rc != 0) throw TransportError(std::string("resolve failed: ") + gai_strerror(rc));
    return std::unique_ptr<addrinfo, AddrInfoDeleter>(result);
}

} // namespace

SocketTransport SocketTransport::connect_to(const std::string& addr) {
    auto info = resolve(addr, false);
    std::string last_error = "no addresses";
    for (addrinfo* ai = info.get(); ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) {
            last_error = std::strerror(errno);
            continue;
        }
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) return SocketTransport(fd);
        last_error = std::strerror(errno);
        ::close(fd);
    }
    throw TransportError("connect failed: " + last_error);
}

SocketTransport SocketTransport::listen_accept(const std::string& addr) {
    auto info = resolve(addr, true);
    std::string last_error = "no addresses";
    for (addrinfo* ai = info.get(); ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) {
            last_error = std::strerror(errno);
            continue;
        }
        int one = 1;
        ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 1) == 0) {
            int conn = ::accept(fd, nullptr, nullptr);
            ::close(fd);
            if (conn < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
            return SocketTransport(conn);
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    throw TransportError("bind/listen failed: " + last_error);
}

SocketTransport::SocketTransport(SocketTransport&& other) noexcept
    : fd_(other.fd_), reader_(std::move(other.reader_)) {
    other.fd_ = -1;
}

SocketTransport& SocketTransport::operator=(SocketTransport&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        fd_ = other.fd_;
        reader_ = std::move(other.reader_);
        other.fd_ = -1;
    }
    return *this;
}

SocketTransport::~SocketTransport() {
    if (fd_ >= 0) ::close(fd_);
}

void SocketTransport::send(const Frame& frame) {
    auto bytes = frame.encode();
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, 0);
        if (n <= 0) throw TransportError(std::string("send failed: ") + std::strerror(errno));
        sent += static_cast<std::size_t>(n);
    }
}

Frame SocketTransport::recv() {
    for (;;) {
        try {
            if (auto f = reader_.next()) return std::move(*f);
        } catch (const WireError& e) {
            throw TransportError(std::string("bad frame on stream: ") + e.what());
        }
        std::uint8_t chunk[4096];
        ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
        if (n == 0) throw TransportError("peer closed mid-stream");
        if (n < 0) throw TransportError(std::string("recv failed: ") + std::strerror(errno));
        reader_.feed({chunk, static_cast<std::size_t>(n)});
    }
}

// ---- in-process duplex queue ----

struct QueuePair::Shared {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<Frame> a_to_b;
    std::deque<Frame> b_to_a;
    bool closed = false;
};

struct QueuePair::Endpoint final : Transport {
    std::shared_ptr<Shared> shared;
    bool is_a;

    Endpoint(std::shared_ptr<Shared> s, bool a) : shared(std::move(s)), is_a(a) {}

    void send(const Frame& frame) override {
        std::lock_guard lock(shared->mutex);
        (is_a ? shared->a_to_b : shared->b_to_a).push_back(frame);
        shared->cv.notify_all();
    }

    Frame recv() override {
        std::unique_lock lock(shared->mutex);
        auto& queue = is_a ? shared->b_to_a : shared->a_to_b;
        shared->cv.wait(lock, [&] { return !queue.empty() || shared->closed; });
        if (queue.empty()) throw TransportError("queue closed");
        Frame f = std::move(queue.front());
        queue.pop_front();
        return f;
    }
};

QueuePair::QueuePair()
    : shared_(std::make_shared<Shared>()),
      a_(std::make_unique<Endpoint>(shared_, true)),
      b_(std::make_unique<Endpoint>(shared_, false)) {}

QueuePair::~QueuePair() {
    std::lock_guard lock(shared_->mutex);
    shared_->closed = true;
    shared_->cv.notify_all();
}

Transport& QueuePair::end_a() { return *a_; }
Transport& QueuePair::end_b() { return *b_; }

} // namespace naor::wire
