#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "naor/bitvec.hpp"
#include "naor/commit.hpp"
#include "naor/expand.hpp"
#include "naor/wire.hpp"

namespace naor::qot {

/// Linear two-universal hash h(v) = T v over GF(2); T is the rows x cols
/// Toeplitz matrix with T[i][j] = diagonal[i - j + cols - 1].
struct ToeplitzHash {
    std::size_t rows = 0;
    std::size_t cols = 0;
    BitVector diagonal; // rows + cols - 1 bits (empty when rows or cols is 0)

    static ToeplitzHash sample(std::size_t rows, std::size_t cols, RandomStream& rng);
    static ToeplitzHash from_diagonal(std::size_t rows, std::size_t cols, BitVector diagonal);
    BitVector apply(const BitVector& v) const;
};

struct Bb84SenderInit {
    BitVector x;     // transmitted random bits
    BitVector theta; // bases, 0 = +, 1 = x
};

struct Bb84ReceiverInit {
    BitVector theta; // measurement bases
    BitVector x;     // outcomes
};

/// Ideal noiseless channel law: outcome equals the transmitted bit on
/// matching bases and is uniform otherwise.
BitVector measure_bb84(const BitVector& sender_x, const BitVector& sender_theta,
                       const BitVector& receiver_theta, RandomStream& rng);

std::pair<Bb84SenderInit, Bb84ReceiverInit> bb84_simulate(std::size_t n, RandomStream& rng);

enum class Adversary { Honest, Delaying, Equivocating, OutcomeFlipper };

std::string adversary_name(Adversary a);
std::optional<Adversary> adversary_from_name(std::string_view name);

struct SessionConfig {
    std::size_t n = 1024;       // BB84 states
    std::size_t msg_bits = 32;  // transfer message length
    double cut_fraction = 0.5;  // |T| = floor(n * cut_fraction)
    std::size_t commit_n = 128; // commitment security parameter
    std::string scheme{kSchemeNaor2Bit}; // 2-bit capable id, or preproc(...)
    bool reuse_challenge = true;
    Adversary adversary = Adversary::Honest;
};

struct AbortInfo {
    wire::Phase phase = wire::Phase::CutChoose;
    std::string reason;
    std::optional<std::size_t> index;
};

/// Thrown on malformed or out-of-order messages (not protocol aborts).
class SessionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class StepResult { NeedFrame, Finished, Aborted };

/// Message-driven party. step() consumes at most one incoming frame and
/// appends any frames to send; parties share no state besides frames.
class PartyMachine {
public:
    virtual ~PartyMachine() = default;
    virtual StepResult step(std::optional<wire::Frame> in, std::vector<wire::Frame>& out) = 0;

    const wire::Transcript& transcript() const { return transcript_; }
    const std::optional<AbortInfo>& abort_info() const { return abort_; }

protected:
    wire::Transcript transcript_;
    std::optional<AbortInfo> abort_;
};

class SenderMachine final : public PartyMachine {
public:
    SenderMachine(const SessionConfig& config, BitVector m0, BitVector m1, RandomStream rng);
    ~SenderMachine() override;

    StepResult step(std::optional<wire::Frame> in, std::vector<wire::Frame>& out) override;

    bool accepted_cut_and_choose() const;
    const BitVector& oblivious_key() const; // x^S restricted to live indices
    const std::vector<std::uint32_t>& live_indices() const;

private:
    struct State;
    std::unique_ptr<State> st_;
};

class ReceiverMachine final : public PartyMachine {
public:
    ReceiverMachine(const SessionConfig& config, bool choice_bit, RandomStream rng);
    ~ReceiverMachine() override;

    StepResult step(std::optional<wire::Frame> in, std::vector<wire::Frame>& out) override;

    const BitVector& output() const; // m_b once finished
    const BitVector& oblivious_key() const;
    const std::vector<std::uint32_t>& matching_indices() const;  // I0
    const std::vector<std::uint32_t>& differing_indices() const; // I1
    /// Delaying adversary only: both messages recovered after an accept.
    const std::optional<std::pair<BitVector, BitVector>>& recovered_both() const;

private:
    struct State;
    std::unique_ptr<State> st_;
};

struct SessionReport {
    bool completed = false;
    std::optional<AbortInfo> abort;
    wire::Transcript transcript;
    BitVector receiver_output;
    BitVector sender_m0, sender_m1;
    bool choice_bit = false;
    // Lockstep-only cross-party checks.
    bool output_matches_choice = false;
    bool oblivious_keys_agree = false;
    bool adversary_learned_both = false;

    std::string to_text() const;
};

/// Runs both machines on one thread, moving frames between them.
SessionReport run_session(const SessionConfig& config, const BitVector& m0, const BitVector& m1,
                          bool choice_bit, std::uint64_t seed);

/// Drives one machine over a blocking transport (socket or queue endpoint).
StepResult drive_party(PartyMachine& machine, wire::Transport& transport);

} // namespace naor::qot
