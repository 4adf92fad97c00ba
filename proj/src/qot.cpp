#include "naor/qot.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>

namespace naor::qot {

ToeplitzHash ToeplitzHash::sample(std::size_t rows, std::size_t cols, RandomStream& rng) {
    std::size_t diag = rows + cols == 0 ? 0 : rows + cols - 1;
    return ToeplitzHash{rows, cols, rng.draw_bits(diag)};
}

ToeplitzHash ToeplitzHash::from_diagonal(std::size_t rows, std::size_t cols, BitVector diagonal) {
    std::size_t expected = rows + cols == 0 ? 0 : rows + cols - 1;
    if (diagonal.size() != expected)
        throw std::invalid_argument("toeplitz: diagonal length mismatch");
    return ToeplitzHash{rows, cols, std::move(diagonal)};
}

BitVector ToeplitzHash::apply(const BitVector& v) const {
    if (v.size() != cols) throw std::invalid_argument("toeplitz: input length mismatch");
    BitVector out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        bool acc = false;
        for (std::size_t j = 0; j < cols; ++j) {
            if (v.bit(j) && diagonal.bit(i + cols - 1 - j)) acc = !acc;
        }
        out.set_bit(i, acc);
    }
    return out;
}

BitVector measure_bb84(const BitVector& sender_x, const BitVector& sender_theta,
                       const BitVector& receiver_theta, RandomStream& rng) {
    std::size_t n = sender_x.size();
    if (sender_theta.size() != n || receiver_theta.size() != n)
        throw std::invalid_argument("measure_bb84: length mismatch");
    BitVector out(n);
    for (std::size_t i = 0; i < n; ++i) {
        bool hit = receiver_theta.bit(i) == sender_theta.bit(i) ? sender_x.bit(i) : rng.draw_bit();
        out.set_bit(i, hit);
    }
    return out;
}

std::pair<Bb84SenderInit, Bb84ReceiverInit> bb84_simulate(std::size_t n, RandomStream& rng) {
    Bb84SenderInit sender{rng.draw_bits(n), rng.draw_bits(n)};
    BitVector theta_r = rng.draw_bits(n);
    BitVector x_r = measure_bb84(sender.x, sender.theta, theta_r, rng);
    return {std::move(sender), Bb84ReceiverInit{std::move(theta_r), std::move(x_r)}};
}

std::string adversary_name(Adversary a) {
    switch (a) {
        case Adversary::Honest: return "honest";
        case Adversary::Delaying: return "delaying";
        case Adversary::Equivocating: return "equivocating";
        case Adversary::OutcomeFlipper: return "outcome-flipper";
    }
    return "unknown";
}

std::optional<Adversary> adversary_from_name(std::string_view name) {
    for (int i = 0; i < 4; ++i) {
        Adversary a = static_cast<Adversary>(i);
        if (adversary_name(a) == name) return a;
    }
    return std::nullopt;
}

namespace {

using wire::Direction;
using wire::Frame;
using wire::Phase;
using wire::Tag;

Phase phase_of(Tag tag) {
    switch (tag) {
        case Tag::Challenge: return Phase::Challenge;
        case Tag::Commitment: return Phase::Commit;
        case Tag::Opening: return Phase::Open;
        case Tag::QChannel: return Phase::Bb84;
        case Tag::CutChooseRequest:
        case Tag::CutChooseOpenings:
        case Tag::Abort: return Phase::CutChoose;
        case Tag::BasesReveal: return Phase::ObliviousKeys;
        case Tag::IndexSet:
        case Tag::TransferPayload: return Phase::Transfer;
    }
    return Phase::CutChoose;
}

BitVector indices_to_bitmap(const std::vector<std::uint32_t>& indices, std::size_t n) {
    BitVector map(n);
    for (auto i : indices) map.set_bit(i, true);
    return map;
}

std::vector<std::uint32_t> bitmap_to_indices(const BitVector& map) {
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < map.size(); ++i)
        if (map.bit(i)) out.push_back(static_cast<std::uint32_t>(i));
    return out;
}

BitVector select_bits(const BitVector& v, const std::vector<std::uint32_t>& indices) {
    BitVector out(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) out.set_bit(k, v.bit(indices[k]));
    return out;
}

std::vector<std::uint32_t> complement_of(const std::vector<std::uint32_t>& sorted, std::size_t n) {
    std::vector<std::uint32_t> out;
    out.reserve(n - sorted.size());
    std::size_t k = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (k < sorted.size() && sorted[k] == i)
            ++k;
        else
            out.push_back(i);
    }
    return out;
}

/// Uniform size-k subset of [0, n), ascending.
std::vector<std::uint32_t> sample_subset(std::size_t n, std::size_t k, RandomStream& rng) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.draw_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Abort reason codes carried on the wire.
enum : std::uint8_t {
    kAbortInvalidOpening = 1,
    kAbortOutcomeMismatch = 2,
    kAbortIndexSetInvalid = 3,
};

std::string abort_reason_name(std::uint8_t code) {
    switch (code) {
        case kAbortInvalidOpening: return "invalid-opening";
        case kAbortOutcomeMismatch: return "outcome-mismatch";
        case kAbortIndexSetInvalid: return "index-set-invalid";
    }
    return "unknown";
}

constexpr std::uint32_t kNoIndex = 0xffffffffu;

Frame make_abort_frame(std::uint8_t reason, std::optional<std::size_t> index) {
    wire::PayloadWriter w;
    w.put_u8(reason);
    w.put_u32(index ? static_cast<std::uint32_t>(*index) : kNoIndex);
    return std::move(w).finish(Tag::Abort);
}

AbortInfo parse_abort(const Frame& frame) {
    wire::PayloadReader r(frame.payload);
    std::uint8_t reason = r.get_u8();
    std::uint32_t index = r.get_u32();
    r.expect_end();
    AbortInfo info;
    info.phase = Phase::CutChoose;
    info.reason = abort_reason_name(reason);
    if (index != kNoIndex) info.index = index;
    return info;
}

// The commitment layer of a session: parsed challenge params plus the
// reuse policy. params_for(i) picks the challenge covering index i.
struct CommitLayer {
    std::string base_id;
    bool preproc = false;
    bool reuse = true;
    std::vector<SchemeParams> challenges;

    const SchemeParams& params_for(std::size_t i) const {
        return challenges[reuse ? 0 : i];
    }
};

std::string validated_base_id(const SessionConfig& cfg, bool& preproc) {
    std::string_view base = parse_scheme_id(cfg.scheme, preproc);
    if (base != kSchemeNaor2Bit && base != kSchemeCirculantString && base != kSchemeKilian)
        throw std::invalid_argument("qot: scheme must commit to 2-bit strings: " +
                                    std::string(base));
    return std::string(base);
}

SchemeParams challenge_from_bits(const std::string& base_id, std::size_t commit_n, BitVector r) {
    try {
        if (base_id == kSchemeNaor2Bit) return make_twobit_params(commit_n, std::move(r));
        if (base_id == kSchemeCirculantString) return make_string_params(commit_n, 2, std::move(r));
        return make_kilian_params(commit_n, 2, commit_n, std::move(r));
    } catch (const std::invalid_argument& e) {
        throw SessionError(std::string("bad challenge: ") + e.what());
    }
}

void expect_tag(const Frame& frame, Tag tag) {
    if (frame.tag != tag)
        throw SessionError("unexpected frame: got " + wire::tag_name(frame.tag) + ", expected " +
                           wire::tag_name(tag));
}

} // namespace

// ---------------------------------------------------------------- sender

struct SenderMachine::State {
    enum class Stage {
        Start,
        WaitMaskCommitments, // preproc only
        WaitCommitments,
        WaitOpenings,
        WaitIndexSet,
        Done,
        Aborted,
    };

    SessionConfig cfg;
    BitVector m0, m1;
    RandomStream rng;
    Stage stage = Stage::Start;

    CommitLayer layer;
    BitVector x, theta;                  // x^S, theta^S
    std::vector<Commitment> commitments; // per index (inner commitments in preproc mode)
    BitVector online_bits;               // preproc online xor bits, 2n
    std::vector<std::uint32_t> cut_set;  // T, ascending
    std::vector<std::uint32_t> live;     // ascending
    BitVector ok;                        // x^S on live indices
    bool accepted = false;

    State(const SessionConfig& c, BitVector msg0, BitVector msg1, RandomStream r)
        : cfg(c), m0(std::move(msg0)), m1(std::move(msg1)), rng(std::move(r)) {
        if (cfg.n == 0) throw std::invalid_argument("qot: n must be positive");
        if (m0.size() != cfg.msg_bits || m1.size() != cfg.msg_bits)
            throw std::invalid_argument("qot: message length must equal msg_bits");
        if (cfg.cut_fraction < 0.0 || cfg.cut_fraction > 1.0)
            throw std::invalid_argument("qot: cut_fraction must be in [0, 1]");
        layer.preproc = false;
        layer.base_id = validated_base_id(cfg, layer.preproc);
        layer.reuse = cfg.reuse_challenge;
    }
};

SenderMachine::SenderMachine(const SessionConfig& config, BitVector m0, BitVector m1,
                             RandomStream rng)
    : st_(std::make_unique<State>(config, std::move(m0), std::move(m1), std::move(rng))) {}

SenderMachine::~SenderMachine() = default;

bool SenderMachine::accepted_cut_and_choose() const { return st_->accepted; }
const BitVector& SenderMachine::oblivious_key() const { return st_->ok; }
const std::vector<std::uint32_t>& SenderMachine::live_indices() const { return st_->live; }

StepResult SenderMachine::step(std::optional<Frame> in, std::vector<Frame>& out) {
    auto& st = *st_;
    using Stage = State::Stage;

    auto emit = [&](Frame frame) {
        transcript_.record(phase_of(frame.tag), Direction::AToB, frame.payload_bits,
                           frame.encoded_size());
        out.push_back(std::move(frame));
    };
    auto consume = [&](const Frame& frame, std::size_t payload_bits) {
        transcript_.record(phase_of(frame.tag), Direction::BToA, payload_bits,
                           frame.encoded_size());
    };
    auto abort_with = [&](std::uint8_t reason, std::optional<std::size_t> index) {
        emit(make_abort_frame(reason, index));
        abort_ = AbortInfo{Phase::CutChoose, abort_reason_name(reason), index};
        st.stage = Stage::Aborted;
        return StepResult::Aborted;
    };

    if (st.stage == Stage::Start) {
        if (in) throw SessionError("sender: unexpected frame before start");
        std::size_t challenge_count = st.layer.reuse ? 1 : st.cfg.n;
        for (std::size_t i = 0; i < challenge_count; ++i)
            st.layer.challenges.push_back(
                make_challenge(st.layer.base_id, st.cfg.commit_n, 2, 0, st.rng));
        auto emit_qchannel = [&] {
            st.x = st.rng.draw_bits(st.cfg.n);
            st.theta = st.rng.draw_bits(st.cfg.n);
            wire::PayloadWriter w;
            w.put_bitvector(st.x);
            w.put_bitvector(st.theta);
            emit(std::move(w).finish(Tag::QChannel));
        };
        if (!st.layer.preproc) emit_qchannel();
        {
            wire::PayloadWriter w;
            w.put_u32(static_cast<std::uint32_t>(challenge_count));
            for (const auto& params : st.layer.challenges)
                w.put_bitvector(challenge_bits(params));
            emit(std::move(w).finish(Tag::Challenge));
        }
        st.stage = st.layer.preproc ? Stage::WaitMaskCommitments : Stage::WaitCommitments;
        return StepResult::NeedFrame;
    }

    if (!in) return st.stage == Stage::Done      ? StepResult::Finished
             : st.stage == Stage::Aborted        ? StepResult::Aborted
                                                 : StepResult::NeedFrame;

    if (in->tag == Tag::Abort) {
        wire::PayloadReader pr(in->payload);
        consume(*in, 0);
        abort_ = parse_abort(*in);
        st.stage = Stage::Aborted;
        return StepResult::Aborted;
    }

    switch (st.stage) {
        case Stage::WaitMaskCommitments: {
            expect_tag(*in, Tag::Commitment);
            wire::PayloadReader r(in->payload);
            std::uint32_t count = r.get_u32();
            if (count != st.cfg.n) throw SessionError("sender: mask commitment count mismatch");
            for (std::uint32_t i = 0; i < count; ++i) st.commitments.push_back(read_commitment(r));
            r.expect_end();
            consume(*in, r.bits_read());
            // Preprocessing done; start the BB84 phase.
            st.x = st.rng.draw_bits(st.cfg.n);
            st.theta = st.rng.draw_bits(st.cfg.n);
            wire::PayloadWriter w;
            w.put_bitvector(st.x);
            w.put_bitvector(st.theta);
            emit(std::move(w).finish(Tag::QChannel));
            st.stage = Stage::WaitCommitments;
            return StepResult::NeedFrame;
        }

        case Stage::WaitCommitments: {
            expect_tag(*in, Tag::Commitment);
            wire::PayloadReader r(in->payload);
            if (st.layer.preproc) {
                st.online_bits = r.get_bitvector();
                if (st.online_bits.size() != 2 * st.cfg.n)
                    throw SessionError("sender: online bit count mismatch");
            } else {
                std::uint32_t count = r.get_u32();
                if (count != st.cfg.n) throw SessionError("sender: commitment count mismatch");
                for (std::uint32_t i = 0; i < count; ++i)
                    st.commitments.push_back(read_commitment(r));
            }
            r.expect_end();
            consume(*in, r.bits_read());

            std::size_t cut = static_cast<std::size_t>(st.cfg.cut_fraction *
                                                       static_cast<double>(st.cfg.n));
            cut = std::min(cut, st.cfg.n);
            st.cut_set = sample_subset(st.cfg.n, cut, st.rng);
            wire::PayloadWriter w;
            w.put_bitvector(indices_to_bitmap(st.cut_set, st.cfg.n));
            emit(std::move(w).finish(Tag::CutChooseRequest));
            st.stage = Stage::WaitOpenings;
            return StepResult::NeedFrame;
        }

        case Stage::WaitOpenings: {
            expect_tag(*in, Tag::CutChooseOpenings);
            wire::PayloadReader r(in->payload);
            std::uint32_t count = r.get_u32();
            if (count != st.cut_set.size()) throw SessionError("sender: opening count mismatch");
            std::vector<Opening> openings;
            openings.reserve(count);
            for (std::uint32_t i = 0; i < count; ++i) openings.push_back(read_opening(r));
            r.expect_end();
            consume(*in, r.bits_read());

            for (std::size_t k = 0; k < st.cut_set.size(); ++k) {
                std::size_t i = st.cut_set[k];
                const SchemeParams& params = st.layer.params_for(i);
                BitVector revealed;
                if (st.layer.preproc) {
                    auto [ok, recovered] = preproc_verify(params, st.commitments[i],
                                                          st.online_bits.slice(2 * i, 2),
                                                          openings[k]);
                    if (!ok) return abort_with(kAbortInvalidOpening, i);
                    revealed = std::move(recovered);
                } else {
                    if (openings[k].message.size() != 2 ||
                        !verify_with(params, st.commitments[i], openings[k].message, openings[k]))
                        return abort_with(kAbortInvalidOpening, i);
                    revealed = openings[k].message;
                }
                // revealed = (basis, outcome); outcomes must match on equal bases.
                if (revealed.bit(0) == st.theta.bit(i) && revealed.bit(1) != st.x.bit(i))
                    return abort_with(kAbortOutcomeMismatch, i);
            }

            st.accepted = true;
            st.live = complement_of(st.cut_set, st.cfg.n);
            st.ok = select_bits(st.x, st.live);
            wire::PayloadWriter w;
            w.put_bitvector(st.theta);
            emit(std::move(w).finish(Tag::BasesReveal));
            st.stage = Stage::WaitIndexSet;
            return StepResult::NeedFrame;
        }

        case Stage::WaitIndexSet: {
            expect_tag(*in, Tag::IndexSet);
            wire::PayloadReader r(in->payload);
            BitVector bitmap = r.get_bitvector();
            r.expect_end();
            consume(*in, r.bits_read());
            if (bitmap.size() != st.cfg.n) throw SessionError("sender: index set bitmap size");
            std::vector<std::uint32_t> received = bitmap_to_indices(bitmap);
            if (!std::includes(st.live.begin(), st.live.end(), received.begin(), received.end()))
                return abort_with(kAbortIndexSetInvalid, std::nullopt);

            // From the sender's frame the received set is set 0 and its
            // complement within the live indices is set 1.
            std::vector<std::uint32_t> other;
            std::set_difference(st.live.begin(), st.live.end(), received.begin(), received.end(),
                                std::back_inserter(other));
            ToeplitzHash f0 = ToeplitzHash::sample(st.cfg.msg_bits, received.size(), st.rng);
            ToeplitzHash f1 = ToeplitzHash::sample(st.cfg.msg_bits, other.size(), st.rng);
            BitVector s0 = st.m0 ^ f0.apply(select_bits(st.x, received));
            BitVector s1 = st.m1 ^ f1.apply(select_bits(st.x, other));
            wire::PayloadWriter w;
            w.put_bitvector(f0.diagonal);
            w.put_bitvector(f1.diagonal);
            w.put_bitvector(s0);
            w.put_bitvector(s1);
            emit(std::move(w).finish(Tag::TransferPayload));
            st.stage = Stage::Done;
            return StepResult::Finished;
        }

        case Stage::Start:
        case Stage::Done:
        case Stage::Aborted:
            throw SessionError("sender: frame after session end");
    }
    throw SessionError("sender: unreachable stage");
}

// -------------------------------------------------------------- receiver

struct ReceiverMachine::State {
    enum class Stage {
        Init,
        WaitChallengePre, // preproc only: challenge precedes the BB84 phase
        WaitQChannel,
        WaitChallenge,
        WaitCutRequest,
        WaitBasesReveal,
        WaitTransfer,
        Done,
        Aborted,
    };

    SessionConfig cfg;
    bool choice;
    RandomStream rng;
    Stage stage = Stage::Init;

    CommitLayer layer;
    BitVector photon_x, photon_theta; // stored qchannel payload (delaying adversary)
    BitVector theta, x;               // theta^R, x^R
    BitVector committed;              // 2n bits actually committed (may differ from x)
    std::vector<Commitment> commitments;
    std::vector<Opening> openings;        // per index
    std::vector<PreprocRecord> records;   // preproc masks
    std::vector<std::uint32_t> cut_set, live, i0, i1;
    std::vector<std::uint32_t> sent_set;  // the I_b actually sent
    BitVector ok;
    BitVector out_message;
    std::optional<std::pair<BitVector, BitVector>> both;

    State(const SessionConfig& c, bool b, RandomStream r)
        : cfg(c), choice(b), rng(std::move(r)) {
        if (cfg.n == 0) throw std::invalid_argument("qot: n must be positive");
        layer.preproc = false;
        layer.base_id = validated_base_id(cfg, layer.preproc);
        layer.reuse = cfg.reuse_challenge;
    }

    void measure(const BitVector& sx, const BitVector& stheta) {
        if (cfg.adversary == Adversary::Delaying) {
            // Memory attack: keep the transmitted states, commit to guesses.
            photon_x = sx;
            photon_theta = stheta;
            theta = rng.draw_bits(cfg.n);
            x = rng.draw_bits(cfg.n);
        } else {
            theta = rng.draw_bits(cfg.n);
            x = measure_bb84(sx, stheta, theta, rng);
        }
        committed = BitVector(2 * cfg.n);
        for (std::size_t i = 0; i < cfg.n; ++i) {
            bool outcome = x.bit(i);
            if (cfg.adversary == Adversary::OutcomeFlipper) outcome = !outcome;
            committed.set_bit(2 * i, theta.bit(i));
            committed.set_bit(2 * i + 1, outcome);
        }
    }

    void parse_challenges(wire::PayloadReader& r) {
        std::uint32_t count = r.get_u32();
        std::size_t expected = layer.reuse ? 1 : cfg.n;
        if (count != expected) throw SessionError("receiver: challenge count mismatch");
        for (std::uint32_t i = 0; i < count; ++i)
            layer.challenges.push_back(
                challenge_from_bits(layer.base_id, cfg.commit_n, r.get_bitvector()));
    }

    // Opening the receiver presents for index i during cut-and-choose.
    Opening opening_for(std::size_t i) {
        if (cfg.adversary != Adversary::Equivocating) return openings[i];
        // Try to reopen with the outcome bit flipped. At enumerable commit
        // sizes search the whole seed space; otherwise reuse the honest
        // seed, which a binding scheme rejects.
        Opening forged = openings[i];
        forged.message = committed.slice(2 * i, 2);
        forged.message.set_bit(1, !forged.message.bit(1));
        if (layer.preproc) {
            // Equivocating on the mask: claim mask' = mask xor (0,1).
            forged.message = records[i].mask;
            forged.message.set_bit(1, !forged.message.bit(1));
        }
        const SchemeParams& params = layer.params_for(i);
        const Commitment& cmt = layer.preproc ? records[i].inner : commitments[i];
        if (cfg.commit_n <= ExpansionFunction::kToyMaxSeedBits &&
            layer.base_id != kSchemeKilian) {
            for (const BitVector& seed : SeedRange(cfg.commit_n)) {
                Opening attempt{forged.message, seed, {}};
                if (verify_with(params, cmt, forged.message, attempt)) return attempt;
            }
        }
        return forged;
    }
};

ReceiverMachine::ReceiverMachine(const SessionConfig& config, bool choice_bit, RandomStream rng)
    : st_(std::make_unique<State>(config, choice_bit, std::move(rng))) {}

ReceiverMachine::~ReceiverMachine() = default;

const BitVector& ReceiverMachine::output() const { return st_->out_message; }
const BitVector& ReceiverMachine::oblivious_key() const { return st_->ok; }
const std::vector<std::uint32_t>& ReceiverMachine::matching_indices() const { return st_->i0; }
const std::vector<std::uint32_t>& ReceiverMachine::differing_indices() const { return st_->i1; }
const std::optional<std::pair<BitVector, BitVector>>& ReceiverMachine::recovered_both() const {
    return st_->both;
}

StepResult ReceiverMachine::step(std::optional<Frame> in, std::vector<Frame>& out) {
    auto& st = *st_;
    using Stage = State::Stage;

    auto emit = [&](Frame frame) {
        transcript_.record(phase_of(frame.tag), Direction::BToA, frame.payload_bits,
                           frame.encoded_size());
        out.push_back(std::move(frame));
    };
    auto consume = [&](const Frame& frame, std::size_t payload_bits) {
        transcript_.record(phase_of(frame.tag), Direction::AToB, payload_bits,
                           frame.encoded_size());
    };
    auto commit_all = [&] {
        // One commitment per BB84 state, fresh seed each; in preprocessing
        // mode the online commitment is a single xor against the masks.
        if (st.layer.preproc) {
            BitVector online;
            for (std::size_t i = 0; i < st.cfg.n; ++i)
                online.append(preproc_commit(st.records[i], st.committed.slice(2 * i, 2)));
            wire::PayloadWriter w;
            w.put_bitvector(online);
            emit(std::move(w).finish(Tag::Commitment));
        } else {
            wire::PayloadWriter w;
            w.put_u32(static_cast<std::uint32_t>(st.cfg.n));
            for (std::size_t i = 0; i < st.cfg.n; ++i) {
                auto [cmt, opening] = commit_with(st.layer.params_for(i),
                                                  st.committed.slice(2 * i, 2), st.rng);
                write_commitment(w, cmt);
                st.commitments.push_back(std::move(cmt));
                st.openings.push_back(std::move(opening));
            }
            emit(std::move(w).finish(Tag::Commitment));
        }
    };

    if (st.stage == Stage::Init) {
        if (in) throw SessionError("receiver: unexpected frame before start");
        st.stage = st.layer.preproc ? Stage::WaitChallengePre : Stage::WaitQChannel;
        return StepResult::NeedFrame;
    }

    if (!in) return st.stage == Stage::Done      ? StepResult::Finished
             : st.stage == Stage::Aborted        ? StepResult::Aborted
                                                 : StepResult::NeedFrame;

    if (in->tag == Tag::Abort) {
        consume(*in, 0);
        abort_ = parse_abort(*in);
        st.stage = Stage::Aborted;
        return StepResult::Aborted;
    }

    switch (st.stage) {
        case Stage::WaitChallengePre: {
            expect_tag(*in, Tag::Challenge);
            wire::PayloadReader r(in->payload);
            st.parse_challenges(r);
            r.expect_end();
            consume(*in, r.bits_read());
            // Preprocessing phase: commit to random masks ahead of the OT.
            wire::PayloadWriter w;
            w.put_u32(static_cast<std::uint32_t>(st.cfg.n));
            for (std::size_t i = 0; i < st.cfg.n; ++i) {
                auto recs = preproc_offline(st.layer.params_for(i), 1, st.rng);
                write_commitment(w, recs[0].inner);
                st.records.push_back(std::move(recs[0]));
            }
            emit(std::move(w).finish(Tag::Commitment));
            st.stage = Stage::WaitQChannel;
            return StepResult::NeedFrame;
        }

        case Stage::WaitQChannel: {
            expect_tag(*in, Tag::QChannel);
            wire::PayloadReader r(in->payload);
            BitVector sx = r.get_bitvector();
            BitVector stheta = r.get_bitvector();
            r.expect_end();
            consume(*in, r.bits_read());
            if (sx.size() != st.cfg.n || stheta.size() != st.cfg.n)
                throw SessionError("receiver: BB84 length mismatch (check --n)");
            st.measure(sx, stheta);
            if (st.layer.preproc) {
                commit_all();
                st.stage = Stage::WaitCutRequest;
            } else {
                st.stage = Stage::WaitChallenge;
            }
            return StepResult::NeedFrame;
        }

        case Stage::WaitChallenge: {
            expect_tag(*in, Tag::Challenge);
            wire::PayloadReader r(in->payload);
            st.parse_challenges(r);
            r.expect_end();
            consume(*in, r.bits_read());
            commit_all();
            st.stage = Stage::WaitCutRequest;
            return StepResult::NeedFrame;
        }

        case Stage::WaitCutRequest: {
            expect_tag(*in, Tag::CutChooseRequest);
            wire::PayloadReader r(in->payload);
            BitVector bitmap = r.get_bitvector();
            r.expect_end();
            consume(*in, r.bits_read());
            if (bitmap.size() != st.cfg.n) throw SessionError("receiver: cut bitmap size");
            st.cut_set = bitmap_to_indices(bitmap);
            wire::PayloadWriter w;
            w.put_u32(static_cast<std::uint32_t>(st.cut_set.size()));
            for (std::uint32_t i : st.cut_set)
                write_opening(w, st.layer.preproc && st.cfg.adversary != Adversary::Equivocating
                                     ? st.records[i].inner_opening
                                     : st.opening_for(i));
            emit(std::move(w).finish(Tag::CutChooseOpenings));
            st.stage = Stage::WaitBasesReveal;
            return StepResult::NeedFrame;
        }

        case Stage::WaitBasesReveal: {
            expect_tag(*in, Tag::BasesReveal);
            wire::PayloadReader r(in->payload);
            BitVector stheta = r.get_bitvector();
            r.expect_end();
            consume(*in, r.bits_read());
            if (stheta.size() != st.cfg.n) throw SessionError("receiver: bases length mismatch");
            if (st.cfg.adversary == Adversary::Delaying) {
                // Measure the stored states in the revealed bases: every
                // outcome now matches the sender's bits.
                st.theta = stheta;
                st.x = st.photon_x;
            }
            st.live = complement_of(st.cut_set, st.cfg.n);
            st.i0.clear();
            st.i1.clear();
            for (std::uint32_t i : st.live) {
                if (st.theta.bit(i) == stheta.bit(i))
                    st.i0.push_back(i);
                else
                    st.i1.push_back(i);
            }
            st.ok = select_bits(st.x, st.live);
            std::vector<std::uint32_t> send_set;
            if (st.cfg.adversary == Adversary::Delaying) {
                // All live indices match; send a random half-size subset so
                // the set looks like an honest I_b.
                std::vector<std::uint32_t> pick =
                    sample_subset(st.live.size(), st.live.size() / 2, st.rng);
                for (std::uint32_t k : pick) send_set.push_back(st.live[k]);
            } else {
                send_set = st.choice ? st.i1 : st.i0;
            }
            st.i0_sent_ = false;
            wire::PayloadWriter w;
            w.put_bitvector(indices_to_bitmap(send_set, st.cfg.n));
            emit(std::move(w).finish(Tag::IndexSet));
            st.sent_set = std::move(send_set);
            st.stage = Stage::WaitTransfer;
            return StepResult::NeedFrame;
        }

        case Stage::WaitTransfer: {
            expect_tag(*in, Tag::TransferPayload);
            wire::PayloadReader r(in->payload);
            BitVector d0 = r.get_bitvector();
            BitVector d1 = r.get_bitvector();
            BitVector s0 = r.get_bitvector();
            BitVector s1 = r.get_bitvector();
            r.expect_end();
            consume(*in, r.bits_read());
            if (s0.size() != st.cfg.msg_bits || s1.size() != st.cfg.msg_bits)
                throw SessionError("receiver: transfer string length mismatch");

            std::size_t n_sent = st.sent_set.size();
            std::size_t n_other = st.live.size() - n_sent;
            auto expect_diag = [&](const BitVector& d, std::size_t cols) {
                std::size_t want = st.cfg.msg_bits + cols == 0 ? 0 : st.cfg.msg_bits + cols - 1;
                if (d.size() != want) throw SessionError("receiver: hash diagonal length");
            };
            expect_diag(d0, n_sent);
            expect_diag(d1, n_other);

            if (st.cfg.adversary == Adversary::Delaying) {
                std::vector<std::uint32_t> other;
                std::set_difference(st.live.begin(), st.live.end(), st.sent_set.begin(),
                                    st.sent_set.end(), std::back_inserter(other));
                ToeplitzHash f0 = ToeplitzHash::from_diagonal(st.cfg.msg_bits, n_sent, d0);
                ToeplitzHash f1 = ToeplitzHash::from_diagonal(st.cfg.msg_bits, n_other, d1);
                BitVector g0 = s0 ^ f0.apply(select_bits(st.x, st.sent_set));
                BitVector g1 = s1 ^ f1.apply(select_bits(st.x, other));
                st.both = std::make_pair(g0, g1);
                st.out_message = st.choice ? g1 : g0;
            } else {
                const BitVector& sb = st.choice ? s1 : s0;
                const BitVector& db = st.choice ? d1 : d0;
                ToeplitzHash fb = ToeplitzHash::from_diagonal(st.cfg.msg_bits, st.i0.size(), db);
                st.out_message = sb ^ fb.apply(select_bits(st.x, st.i0));
            }
            st.stage = Stage::Done;
            return StepResult::Finished;
        }

        case Stage::Init:
        case Stage::Done:
        case Stage::Aborted:
            throw SessionError("receiver: frame after session end");
    }
    throw SessionError("receiver: unreachable stage");
}

// ---------------------------------------------------------------- runner

std::string SessionReport::to_text() const {
    std::ostringstream os;
    os << "completed: " << (completed ? "yes" : "no") << '\n';
    if (abort) {
        os << "abort: phase=" << wire::phase_name(abort->phase) << " reason=" << abort->reason;
        if (abort->index) os << " index=" << *abort->index;
        os << '\n';
    }
    os << "choice_bit: " << (choice_bit ? 1 : 0) << '\n';
    if (completed) {
        os << "receiver_output: " << receiver_output.to_len_hex() << '\n';
        os << "output_matches_choice: " << (output_matches_choice ? "yes" : "no") << '\n';
        os << "oblivious_keys_agree: " << (oblivious_keys_agree ? "yes" : "no") << '\n';
    }
    if (adversary_learned_both) os << "adversary_learned_both: yes\n";
    os << "transcript:\n" << transcript.to_text();
    return os.str();
}

SessionReport run_session(const SessionConfig& config, const BitVector& m0, const BitVector& m1,
                          bool choice_bit, std::uint64_t seed) {
    RandomStream root(seed);
    RandomStream sender_rng = root.fork();
    RandomStream receiver_rng = root.fork();
    SenderMachine sender(config, m0, m1, std::move(sender_rng));
    ReceiverMachine receiver(config, choice_bit, std::move(receiver_rng));

    std::deque<Frame> to_receiver, to_sender;
    std::vector<Frame> emitted;
    StepResult sres = sender.step(std::nullopt, emitted);
    for (auto& f : emitted) to_receiver.push_back(std::move(f));
    emitted.clear();
    StepResult rres = receiver.step(std::nullopt, emitted);
    for (auto& f : emitted) to_sender.push_back(std::move(f));

    while (true) {
        bool progress = false;
        if (rres == StepResult::NeedFrame && !to_receiver.empty()) {
            Frame f = std::move(to_receiver.front());
            to_receiver.pop_front();
            emitted.clear();
            rres = receiver.step(std::move(f), emitted);
            for (auto& g : emitted) to_sender.push_back(std::move(g));
            progress = true;
        }
        if (sres == StepResult::NeedFrame && !to_sender.empty()) {
            Frame f = std::move(to_sender.front());
            to_sender.pop_front();
            emitted.clear();
            sres = sender.step(std::move(f), emitted);
            for (auto& g : emitted) to_receiver.push_back(std::move(g));
            progress = true;
        }
        if (!progress) break;
    }
    if ((sres == StepResult::NeedFrame || rres == StepResult::NeedFrame))
        throw SessionError("session stalled without abort");

    SessionReport report;
    report.completed = sres == StepResult::Finished && rres == StepResult::Finished;
    report.abort = sender.abort_info() ? sender.abort_info() : receiver.abort_info();
    report.transcript = sender.transcript();
    report.sender_m0 = m0;
    report.sender_m1 = m1;
    report.choice_bit = choice_bit;
    if (report.completed) {
        report.receiver_output = receiver.output();
        report.output_matches_choice = report.receiver_output == (choice_bit ? m1 : m0);
        // Compare oblivious keys on I0: positions of I0 within the live set.
        const auto& live = sender.live_indices();
        const auto& i0 = receiver.matching_indices();
        BitVector ok_s(i0.size()), ok_r(i0.size());
        std::size_t pos = 0;
        for (std::size_t k = 0; k < i0.size(); ++k) {
            while (pos < live.size() && live[pos] < i0[k]) ++pos;
            ok_s.set_bit(k, sender.oblivious_key().bit(pos));
            ok_r.set_bit(k, receiver.oblivious_key().bit(pos));
        }
        report.oblivious_keys_agree = ok_s == ok_r;
        if (receiver.recovered_both()) {
            report.adversary_learned_both = receiver.recovered_both()->first == m0 &&
                                            receiver.recovered_both()->second == m1;
        }
    }
    return report;
}

StepResult drive_party(PartyMachine& machine, wire::Transport& transport) {
    std::vector<Frame> out;
    StepResult res = machine.step(std::nullopt, out);
    for (const auto& f : out) transport.send(f);
    while (res == StepResult::NeedFrame) {
        Frame incoming = transport.recv();
        out.clear();
        res = machine.step(std::move(incoming), out);
        for (const auto& f : out) transport.send(f);
    }
    return res;
}

} // namespace naor::qot
