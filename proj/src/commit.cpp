#include "naor/commit.hpp"

#include <stdexcept>

namespace naor {

namespace {

const ExpansionFunction& prg() {
    static const ExpansionFunction g = ExpansionFunction::production();
    return g;
}

bool constant_vector(const BitVector& v) {
    std::size_t w = v.weight();
    return w == 0 || w == v.size();
}

// Constant-shape comparison: recompute the full expected commitment and
// compare, never short-circuit on early mismatch.
bool equal_vectors(const BitVector& a, const BitVector& b) {
    if (a.size() != b.size()) return false;
    std::uint64_t diff = 0;
    auto wa = a.words(), wb = b.words();
    for (std::size_t i = 0; i < wa.size(); ++i) diff |= wa[i] ^ wb[i];
    return diff == 0;
}

BitVector odd_weight_challenge(std::size_t z, RandomStream& rng) {
    for (;;) {
        BitVector r1 = rng.draw_bits(z);
        if (r1.weight() % 2 == 1) return r1;
    }
}

// c = G(x) + sum of message-selected rotations of r1, width z.
BitVector masked_expansion(const BitVector& seed, const BitVector& selector, const BitVector& r1,
                           std::size_t z) {
    BitVector c = prg().expand(seed, z);
    BitVector r = r1;
    for (std::size_t i = 0; i < selector.size(); ++i) {
        if (selector.bit(i)) c ^= r;
        if (i + 1 < selector.size()) r = r.rotated_right(1);
    }
    return c;
}

} // namespace

NaorParams naor_challenge(std::size_t n, RandomStream& rng) {
    if (n == 0) throw std::invalid_argument("naor_challenge: n must be positive");
    return NaorParams{n, rng.draw_bits(3 * n)};
}

Commitment naor_commit(const NaorParams& p, bool b, const BitVector& seed) {
    if (seed.size() != p.n) throw std::invalid_argument("naor_commit: seed length mismatch");
    if (p.r.size() != 3 * p.n) throw std::invalid_argument("naor_commit: challenge length mismatch");
    BitVector c = prg().expand(seed, 3 * p.n);
    if (b) c ^= p.r;
    return Commitment{std::move(c), {}};
}

bool naor_verify(const NaorParams& p, const Commitment& cmt, bool b, const BitVector& seed) {
    if (seed.size() != p.n || p.r.size() != 3 * p.n) return false;
    BitVector expected = prg().expand(seed, 3 * p.n);
    if (b) expected ^= p.r;
    return equal_vectors(cmt.c, expected) && cmt.c2.empty();
}

TwoBitParams make_twobit_params(std::size_t n, BitVector r1) {
    if (n == 0) throw std::invalid_argument("twobit: n must be positive");
    if (r1.size() != 3 * n + 3) throw std::invalid_argument("twobit: challenge length mismatch");
    if (constant_vector(r1)) throw std::invalid_argument("twobit: all-zero/all-one challenge forbidden");
    return TwoBitParams{n, std::move(r1)};
}

TwoBitParams twobit_challenge(std::size_t n, RandomStream& rng) {
    if (n == 0) throw std::invalid_argument("twobit_challenge: n must be positive");
    for (;;) {
        BitVector r1 = rng.draw_bits(3 * n + 3);
        if (!constant_vector(r1)) return TwoBitParams{n, std::move(r1)};
    }
}

Commitment twobit_commit(const TwoBitParams& p, const BitVector& message, const BitVector& seed) {
    if (message.size() != 2) throw std::invalid_argument("twobit_commit: message must be 2 bits");
    if (seed.size() != p.n) throw std::invalid_argument("twobit_commit: seed length mismatch");
    if (p.r1.size() != 3 * p.n + 3 || constant_vector(p.r1))
        throw std::invalid_argument("twobit_commit: invalid challenge");
    return Commitment{masked_expansion(seed, message, p.r1, 3 * p.n + 3), {}};
}

bool twobit_verify(const TwoBitParams& p, const Commitment& cmt, const BitVector& message,
                   const BitVector& seed) {
    if (message.size() != 2 || seed.size() != p.n) return false;
    if (p.r1.size() != 3 * p.n + 3 || constant_vector(p.r1)) return false;
    return equal_vectors(cmt.c, masked_expansion(seed, message, p.r1, 3 * p.n + 3)) &&
           cmt.c2.empty();
}

std::size_t string_width(std::size_t n, std::size_t t) {
    std::size_t z = 1;
    while (z <= 6 * n + 2 * t) z <<= 1;
    return z;
}

StringParams make_string_params(std::size_t n, std::size_t t, BitVector r1) {
    if (n == 0 || t == 0) throw std::invalid_argument("string: n and t must be positive");
    std::size_t z = string_width(n, t);
    if (r1.size() != z) throw std::invalid_argument("string: challenge length mismatch");
    if (r1.weight() % 2 == 0) throw std::invalid_argument("string: challenge weight must be odd");
    return StringParams{n, t, z, std::move(r1)};
}

StringParams string_params(std::size_t n, std::size_t t, RandomStream& rng) {
    if (n == 0 || t == 0) throw std::invalid_argument("string_params: n and t must be positive");
    std::size_t z = string_width(n, t);
    return StringParams{n, t, z, odd_weight_challenge(z, rng)};
}

namespace {

BitVector pad_message(const BitVector& message, std::size_t t) {
    if (message.size() == t) return message;
    BitVector padded(t);
    for (std::size_t i = 0; i < message.size(); ++i)
        if (message.bit(i)) padded.set_bit(i, true);
    return padded;
}

} // namespace

Commitment string_commit(const StringParams& p, const BitVector& message, const BitVector& seed) {
    if (message.size() > p.t) throw std::invalid_argument("string_commit: message longer than t");
    if (seed.size() != p.n) throw std::invalid_argument("string_commit: seed length mismatch");
    if (p.r1.size() != p.z || p.r1.weight() % 2 == 0)
        throw std::invalid_argument("string_commit: invalid challenge");
    return Commitment{masked_expansion(seed, pad_message(message, p.t), p.r1, p.z), {}};
}

bool string_verify(const StringParams& p, const Commitment& cmt, const BitVector& message,
                   const BitVector& seed) {
    if (message.size() > p.t || seed.size() != p.n) return false;
    if (p.r1.size() != p.z || p.r1.weight() % 2 == 0) return false;
    return equal_vectors(cmt.c, masked_expansion(seed, pad_message(message, p.t), p.r1, p.z)) &&
           cmt.c2.empty();
}

KilianParams make_kilian_params(std::size_t n, std::size_t t, std::size_t l, BitVector r1) {
    if (n == 0 || t == 0) throw std::invalid_argument("kilian: n and t must be positive");
    if (l == 0) l = n;
    std::size_t z = string_width(n, l);
    if (r1.size() != z) throw std::invalid_argument("kilian: challenge length mismatch");
    if (r1.weight() % 2 == 0) throw std::invalid_argument("kilian: challenge weight must be odd");
    return KilianParams{n, l, t, z, std::move(r1)};
}

KilianParams kilian_params(std::size_t n, std::size_t t, RandomStream& rng, std::size_t l) {
    if (n == 0 || t == 0) throw std::invalid_argument("kilian_params: n and t must be positive");
    if (l == 0) l = n;
    std::size_t z = string_width(n, l);
    return KilianParams{n, l, t, z, odd_weight_challenge(z, rng)};
}

Commitment kilian_commit(const KilianParams& p, const BitVector& message, const BitVector& seed_x,
                         const BitVector& seed_s) {
    if (message.size() != p.t) throw std::invalid_argument("kilian_commit: message length mismatch");
    if (seed_x.size() != p.n) throw std::invalid_argument("kilian_commit: seed length mismatch");
    if (seed_s.size() != p.l) throw std::invalid_argument("kilian_commit: inner seed length mismatch");
    Commitment cmt;
    cmt.c = masked_expansion(seed_x, seed_s, p.r1, p.z);
    cmt.c2 = prg().expand(seed_s, p.t);
    cmt.c2 ^= message;
    return cmt;
}

bool kilian_verify(const KilianParams& p, const Commitment& cmt, const BitVector& message,
                   const BitVector& seed_x, const BitVector& seed_s) {
    if (message.size() != p.t || seed_x.size() != p.n || seed_s.size() != p.l) return false;
    if (p.r1.size() != p.z || p.r1.weight() % 2 == 0) return false;
    BitVector c1 = masked_expansion(seed_x, seed_s, p.r1, p.z);
    BitVector c2 = prg().expand(seed_s, p.t);
    c2 ^= message;
    // Evaluate both legs before combining so the shape stays constant.
    bool ok1 = equal_vectors(cmt.c, c1);
    bool ok2 = equal_vectors(cmt.c2, c2);
    return ok1 && ok2;
}

std::string_view scheme_id(const SchemeParams& params) {
    switch (params.index()) {
        case 0: return kSchemeNaorBit;
        case 1: return kSchemeNaor2Bit;
        case 2: return kSchemeCirculantString;
        default: return kSchemeKilian;
    }
}

std::size_t scheme_message_bits(const SchemeParams& params) {
    return std::visit(
        [](const auto& p) -> std::size_t {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NaorParams>) return 1;
            else if constexpr (std::is_same_v<T, TwoBitParams>) return 2;
            else return p.t;
        },
        params);
}

std::size_t scheme_security_bits(const SchemeParams& params) {
    return std::visit([](const auto& p) { return p.n; }, params);
}

const BitVector& challenge_bits(const SchemeParams& params) {
    return std::visit(
        [](const auto& p) -> const BitVector& {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, NaorParams>) return p.r;
            else return p.r1;
        },
        params);
}

SchemeParams make_challenge(std::string_view id, std::size_t n, std::size_t t, std::size_t l,
                            RandomStream& rng) {
    if (id == kSchemeNaorBit) return naor_challenge(n, rng);
    if (id == kSchemeNaor2Bit) return twobit_challenge(n, rng);
    if (id == kSchemeCirculantString) return string_params(n, t, rng);
    if (id == kSchemeKilian) return kilian_params(n, t, rng, l);
    throw std::invalid_argument("unknown scheme id: " + std::string(id));
}

std::pair<Commitment, Opening> commit_with(const SchemeParams& params, const BitVector& message,
                                           RandomStream& rng) {
    return std::visit(
        [&](const auto& p) -> std::pair<Commitment, Opening> {
            using T = std::decay_t<decltype(p)>;
            BitVector seed = rng.draw_bits(p.n);
            if constexpr (std::is_same_v<T, NaorParams>) {
                if (message.size() != 1)
                    throw std::invalid_argument("commit_with: naor-bit takes a 1-bit message");
                return {naor_commit(p, message.bit(0), seed), Opening{message, seed, {}}};
            } else if constexpr (std::is_same_v<T, TwoBitParams>) {
                return {twobit_commit(p, message, seed), Opening{message, seed, {}}};
            } else if constexpr (std::is_same_v<T, StringParams>) {
                return {string_commit(p, message, seed), Opening{message, seed, {}}};
            } else {
                BitVector s = rng.draw_bits(p.l);
                return {kilian_commit(p, message, seed, s), Opening{message, seed, s}};
            }
        },
        params);
}

bool verify_with(const SchemeParams& params, const Commitment& cmt, const BitVector& message,
                 const Opening& opening) {
    return std::visit(
        [&](const auto& p) -> bool {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, NaorParams>) {
                if (message.size() != 1) return false;
                return naor_verify(p, cmt, message.bit(0), opening.seed);
            } else if constexpr (std::is_same_v<T, TwoBitParams>) {
                return twobit_verify(p, cmt, message, opening.seed);
            } else if constexpr (std::is_same_v<T, StringParams>) {
                return string_verify(p, cmt, message, opening.seed);
            } else {
                return kilian_verify(p, cmt, message, opening.seed, opening.kilian_seed);
            }
        },
        params);
}

std::vector<PreprocRecord> preproc_offline(const SchemeParams& base, std::size_t count,
                                           RandomStream& rng) {
    std::vector<PreprocRecord> records;
    records.reserve(count);
    std::size_t mask_bits = scheme_message_bits(base);
    for (std::size_t i = 0; i < count; ++i) {
        BitVector mask = rng.draw_bits(mask_bits);
        auto [cmt, opening] = commit_with(base, mask, rng);
        records.push_back(PreprocRecord{std::move(mask), std::move(cmt), std::move(opening), false});
    }
    return records;
}

BitVector preproc_commit(PreprocRecord& rec, const BitVector& message) {
    if (rec.consumed) throw std::logic_error("preproc_commit: record already consumed");
    if (message.size() != rec.mask.size())
        throw std::invalid_argument("preproc_commit: message length mismatch");
    rec.consumed = true;
    return message ^ rec.mask;
}

std::pair<bool, BitVector> preproc_verify(const SchemeParams& base, const Commitment& inner,
                                          const BitVector& online_c, const Opening& claimed) {
    if (!verify_with(base, inner, claimed.message, claimed)) return {false, {}};
    if (online_c.size() != claimed.message.size()) return {false, {}};
    return {true, claimed.message ^ online_c};
}

std::size_t PreprocStore::acquire() {
    std::lock_guard lock(mutex_);
    if (next_ >= records_.size()) return npos;
    return next_++;
}

void write_commitment(wire::PayloadWriter& w, const Commitment& cmt) {
    w.put_u8(cmt.c2.empty() ? 1 : 2);
    w.put_bitvector(cmt.c);
    if (!cmt.c2.empty()) w.put_bitvector(cmt.c2);
}

Commitment read_commitment(wire::PayloadReader& r) {
    std::uint8_t parts = r.get_u8();
    if (parts != 1 && parts != 2)
        throw wire::WireError(wire::WireErrorKind::Malformed, "commitment: bad part count");
    Commitment cmt;
    cmt.c = r.get_bitvector();
    if (parts == 2) cmt.c2 = r.get_bitvector();
    return cmt;
}

void write_opening(wire::PayloadWriter& w, const Opening& opening) {
    w.put_u8(opening.kilian_seed.empty() ? 2 : 3);
    w.put_bitvector(opening.message);
    w.put_bitvector(opening.seed);
    if (!opening.kilian_seed.empty()) w.put_bitvector(opening.kilian_seed);
}

Opening read_opening(wire::PayloadReader& r) {
    std::uint8_t parts = r.get_u8();
    if (parts != 2 && parts != 3)
        throw wire::WireError(wire::WireErrorKind::Malformed, "opening: bad part count");
    Opening o;
    o.message = r.get_bitvector();
    o.seed = r.get_bitvector();
    if (parts == 3) o.kilian_seed = r.get_bitvector();
    return o;
}

std::string_view parse_scheme_id(std::string_view id, bool& preproc) {
    preproc = false;
    if (id.starts_with("preproc(") && id.ends_with(")")) {
        preproc = true;
        return id.substr(8, id.size() - 9);
    }
    return id;
}

namespace {

const SchemeParams& challenge_for(const std::vector<SchemeParams>& challenges, std::size_t i,
                                  bool reuse) {
    return challenges[reuse ? 0 : i];
}

} // namespace

ExchangeResult run_commit_exchange(const ExchangeSpec& spec, std::uint64_t seed) {
    RandomStream root(seed);
    RandomStream verifier_rng = root.fork();
    RandomStream prover_rng = root.fork();

    bool preproc = false;
    std::string_view base_id = parse_scheme_id(spec.scheme, preproc);

    ExchangeResult result;
    auto& transcript = result.transcript;
    using wire::Direction;
    using wire::Phase;
    auto record = [&](Phase phase, Direction dir, const wire::Frame& frame) {
        transcript.record(phase, dir, frame.payload_bits, frame.encoded_size());
    };

    // Verifier samples challenges (one, or one per commitment).
    std::size_t challenge_count = spec.reuse_challenge ? 1 : spec.count;
    std::vector<SchemeParams> challenges;
    challenges.reserve(challenge_count);
    for (std::size_t i = 0; i < challenge_count; ++i)
        challenges.push_back(make_challenge(base_id, spec.n, spec.t, spec.l, verifier_rng));
    for (const auto& params : challenges) {
        wire::PayloadWriter w;
        w.put_bitvector(challenge_bits(params));
        record(Phase::Challenge, Direction::AToB, std::move(w).finish(wire::Tag::Challenge));
    }

    // Prover answers with commitments, then openings; the verifier decodes
    // each frame and replays verification from wire data only.
    std::vector<BitVector> messages;
    std::vector<wire::Frame> commit_frames, open_frames;
    std::size_t msg_bits = scheme_message_bits(challenges[0]);

    if (preproc) {
        // Offline: commit to random masks; online: xor bits only.
        std::vector<PreprocRecord> records;
        for (std::size_t i = 0; i < spec.count; ++i) {
            const auto& params = challenge_for(challenges, i, spec.reuse_challenge);
            auto recs = preproc_offline(params, 1, prover_rng);
            records.push_back(std::move(recs[0]));
            wire::PayloadWriter w;
            write_commitment(w, records.back().inner);
            record(Phase::Commit, Direction::BToA, std::move(w).finish(wire::Tag::Commitment));
        }
        BitVector online;
        for (std::size_t i = 0; i < spec.count; ++i) {
            messages.push_back(prover_rng.draw_bits(msg_bits));
            online.append(preproc_commit(records[i], messages.back()));
        }
        {
            wire::PayloadWriter w;
            w.put_bitvector(online);
            wire::Frame f = std::move(w).finish(wire::Tag::Commitment);
            result.online_payload_bits = f.payload_bits;
            record(Phase::Commit, Direction::BToA, f);
        }
        result.all_verified = true;
        for (std::size_t i = 0; i < spec.count; ++i) {
            wire::PayloadWriter w;
            write_opening(w, records[i].inner_opening);
            wire::Frame f = std::move(w).finish(wire::Tag::Opening);
            record(Phase::Open, Direction::BToA, f);
            wire::PayloadReader r(f.payload);
            Opening claimed = read_opening(r);
            auto [ok, recovered] =
                preproc_verify(challenge_for(challenges, i, spec.reuse_challenge),
                               records[i].inner, online.slice(i * msg_bits, msg_bits), claimed);
            result.all_verified = result.all_verified && ok && recovered == messages[i];
        }
        return result;
    }

    for (std::size_t i = 0; i < spec.count; ++i) {
        messages.push_back(prover_rng.draw_bits(msg_bits));
        auto [cmt, opening] =
            commit_with(challenge_for(challenges, i, spec.reuse_challenge), messages.back(),
                        prover_rng);
        {
            wire::PayloadWriter w;
            write_commitment(w, cmt);
            commit_frames.push_back(std::move(w).finish(wire::Tag::Commitment));
            record(Phase::Commit, Direction::BToA, commit_frames.back());
        }
        {
            wire::PayloadWriter w;
            write_opening(w, opening);
            open_frames.push_back(std::move(w).finish(wire::Tag::Opening));
            record(Phase::Open, Direction::BToA, open_frames.back());
        }
    }

    result.all_verified = true;
    for (std::size_t i = 0; i < spec.count; ++i) {
        wire::PayloadReader cr(commit_frames[i].payload);
        Commitment cmt = read_commitment(cr);
        cr.expect_end();
        wire::PayloadReader orr(open_frames[i].payload);
        Opening opening = read_opening(orr);
        orr.expect_end();
        bool ok = verify_with(challenge_for(challenges, i, spec.reuse_challenge), cmt,
                              opening.message, opening) &&
                  opening.message == messages[i];
        result.all_verified = result.all_verified && ok;
    }
    return result;
}

} // namespace naor
