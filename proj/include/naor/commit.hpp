#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "naor/bitvec.hpp"
#include "naor/expand.hpp"
#include "naor/wire.hpp"

namespace naor {

/// Stable scheme identifiers.
inline constexpr std::string_view kSchemeNaorBit = "naor-bit";
inline constexpr std::string_view kSchemeNaor2Bit = "naor-2bit";
inline constexpr std::string_view kSchemeCirculantString = "circulant-string";
inline constexpr std::string_view kSchemeKilian = "kilian";

struct Commitment {
    BitVector c;
    BitVector c2; // second commitment string, kilian only
    bool operator==(const Commitment&) const = default;
};

struct Opening {
    BitVector message;
    BitVector seed;        // x
    BitVector kilian_seed; // s, kilian only
};

/// Single-bit scheme: c = G(x) xor b*r with |r| = 3n.
struct NaorParams {
    std::size_t n = 0;
    BitVector r;
};

NaorParams naor_challenge(std::size_t n, RandomStream& rng);
Commitment naor_commit(const NaorParams& p, bool b, const BitVector& seed);
bool naor_verify(const NaorParams& p, const Commitment& cmt, bool b, const BitVector& seed);

/// 2-bit scheme: c = G(x) xor b1*r1 xor b2*rot(r1, 1), |r1| = 3n+3 and r1
/// neither all-zero nor all-one.
struct TwoBitParams {
    std::size_t n = 0;
    BitVector r1;
};

TwoBitParams twobit_challenge(std::size_t n, RandomStream& rng);
/// Throws if r1 is a forbidden (constant) challenge or has the wrong width.
TwoBitParams make_twobit_params(std::size_t n, BitVector r1);
Commitment twobit_commit(const TwoBitParams& p, const BitVector& message, const BitVector& seed);
bool twobit_verify(const TwoBitParams& p, const Commitment& cmt, const BitVector& message,
                   const BitVector& seed);

/// t-bit string scheme over a width-z circulant challenge; z is the smallest
/// power of two strictly greater than 6n+2t and r1 has odd weight.
struct StringParams {
    std::size_t n = 0;
    std::size_t t = 0;
    std::size_t z = 0;
    BitVector r1;
};

std::size_t string_width(std::size_t n, std::size_t t);
StringParams string_params(std::size_t n, std::size_t t, RandomStream& rng);
StringParams make_string_params(std::size_t n, std::size_t t, BitVector r1);
/// Messages shorter than t are zero-padded on the right before committing.
Commitment string_commit(const StringParams& p, const BitVector& message, const BitVector& seed);
bool string_verify(const StringParams& p, const Commitment& cmt, const BitVector& message,
                   const BitVector& seed);

/// Seed-commitment amortization: c1 commits to an inner seed s through the
/// string scheme, c2 = G(s) xor b masks the message itself.
struct KilianParams {
    std::size_t n = 0;
    std::size_t l = 0; // inner seed length
    std::size_t t = 0;
    std::size_t z = 0; // smallest power of two > 6n+2l
    BitVector r1;
};

/// l = 0 selects the default inner seed length l = n.
KilianParams kilian_params(std::size_t n, std::size_t t, RandomStream& rng, std::size_t l = 0);
KilianParams make_kilian_params(std::size_t n, std::size_t t, std::size_t l, BitVector r1);
Commitment kilian_commit(const KilianParams& p, const BitVector& message, const BitVector& seed_x,
                         const BitVector& seed_s);
bool kilian_verify(const KilianParams& p, const Commitment& cmt, const BitVector& message,
                   const BitVector& seed_x, const BitVector& seed_s);

// ---- generic dispatch over the four base schemes ----

using SchemeParams = std::variant<NaorParams, TwoBitParams, StringParams, KilianParams>;

std::string_view scheme_id(const SchemeParams& params);
std::size_t scheme_message_bits(const SchemeParams& params);
std::size_t scheme_security_bits(const SchemeParams& params);
/// The verifier-chosen challenge vector (r or r1).
const BitVector& challenge_bits(const SchemeParams& params);
/// Samples the verifier challenge for `id` with the given sizes (t and l
/// ignored where a scheme has no use for them).
SchemeParams make_challenge(std::string_view id, std::size_t n, std::size_t t, std::size_t l,
                            RandomStream& rng);
std::pair<Commitment, Opening> commit_with(const SchemeParams& params, const BitVector& message,
                                           RandomStream& rng);
bool verify_with(const SchemeParams& params, const Commitment& cmt, const BitVector& message,
                 const Opening& opening);

// ---- preprocessing wrapper (mask-ahead commitments) ----

struct PreprocRecord {
    BitVector mask; // m, scheme_message_bits(base) bits
    Commitment inner;
    Opening inner_opening; // prover-side secret
    bool consumed = false;
};

std::vector<PreprocRecord> preproc_offline(const SchemeParams& base, std::size_t count,
                                           RandomStream& rng);
/// Online commitment: message xor mask. Marks the record consumed; throws
/// std::logic_error on reuse.
BitVector preproc_commit(PreprocRecord& rec, const BitVector& message);
/// Verifies the claimed inner opening and recovers the committed message
/// from the online bits. Returns {false, empty} when the inner check fails.
std::pair<bool, BitVector> preproc_verify(const SchemeParams& base, const Commitment& inner,
                                          const BitVector& online_c, const Opening& claimed);

/// Hands out offline records one at a time; safe to share across threads.
class PreprocStore {
public:
    PreprocStore(const SchemeParams& base, std::size_t count, RandomStream& rng)
        : records_(preproc_offline(base, count, rng)) {}

    /// Index of the next unconsumed record, or npos when exhausted.
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t acquire();
    PreprocRecord& record(std::size_t index) { return records_[index]; }
    std::size_t size() const { return records_.size(); }

private:
    std::mutex mutex_;
    std::vector<PreprocRecord> records_;
    std::size_t next_ = 0;
};

// ---- wire codecs shared by the exchange runner and the OT session ----

void write_commitment(wire::PayloadWriter& w, const Commitment& cmt);
Commitment read_commitment(wire::PayloadReader& r);
void write_opening(wire::PayloadWriter& w, const Opening& opening);
Opening read_opening(wire::PayloadReader& r);

// ---- interactive exchange with transcript accounting ----

struct ExchangeSpec {
    std::string scheme{kSchemeNaor2Bit}; // base id or "preproc(<base>)"
    std::size_t n = 128;
    std::size_t t = 2;
    std::size_t l = 0; // kilian inner seed length, 0 = default
    std::size_t count = 1;
    bool reuse_challenge = true;
};

struct ExchangeResult {
    wire::Transcript transcript;
    bool all_verified = false;
    std::size_t online_payload_bits = 0; // preprocessing mode only
};

/// Parses "preproc(<base>)" wrappers; returns the base id and sets `preproc`.
std::string_view parse_scheme_id(std::string_view id, bool& preproc);

/// Runs challenge -> commitments -> openings over frames for `count`
/// messages drawn from rng, counting every payload bit both ways.
ExchangeResult run_commit_exchange(const ExchangeSpec& spec, std::uint64_t seed);

} // namespace naor
