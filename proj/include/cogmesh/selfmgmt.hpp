#pragma once

#include "cogmesh/error.hpp"
#include "cogmesh/qos.hpp"
#include "cogmesh/spectrum.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>

namespace cogmesh::selfmgmt {

using spectrum::ChannelId;
using spectrum::SpectrumOffer;

enum class SuMode { Sensing, Normal, Warning, Failure };

inline constexpr std::array<SuMode, 4> kModes{SuMode::Sensing, SuMode::Normal, SuMode::Warning,
                                              SuMode::Failure};

inline std::string_view to_string(SuMode m) {
    switch (m) {
    case SuMode::Sensing: return "Sensing";
    case SuMode::Normal: return "Normal";
    case SuMode::Warning: return "Warning";
    case SuMode::Failure: return "Failure";
    }
    return "?";
}

inline std::optional<SuMode> mode_from_string(std::string_view s) {
    for (auto m : kModes)
        if (to_string(m) == s) return m;
    return std::nullopt;
}

enum class Outcome { Cooperate, Refuse };

inline std::string_view to_string(Outcome o) {
    return o == Outcome::Cooperate ? "Cooperate" : "Refuse";
}

inline std::optional<Outcome> outcome_from_string(std::string_view s) {
    if (s == "Cooperate") return Outcome::Cooperate;
    if (s == "Refuse") return Outcome::Refuse;
    return std::nullopt;
}

struct SuState {
    SuMode mode = SuMode::Sensing;
    // Present iff mode == Normal.
    std::optional<ChannelId> bound_channel;
    // Channel under negotiation (Warning) or the one that just failed (Failure).
    std::optional<ChannelId> pending_channel;
    std::uint64_t negotiation_attempts = 0;
    std::uint64_t handover_count = 0;
    // Transmission seconds still needed by the current session.
    double session_clock = 0.0;
    // Channels already ruled out in the current healing episode.
    std::set<ChannelId> excluded;
    // Consecutive handovers that found no candidate.
    int backoff_level = 0;

    bool operator==(const SuState&) const = default;
};

struct UseSpectrum {
    ChannelId channel;
    bool operator==(const UseSpectrum&) const = default;
};
struct Negotiate {
    ChannelId channel;
    bool operator==(const Negotiate&) const = default;
};
struct Handover {
    bool operator==(const Handover&) const = default;
};
struct Idle {
    bool operator==(const Idle&) const = default;
};

using Action = std::variant<UseSpectrum, Negotiate, Handover, Idle>;

inline std::string_view action_name(const Action& a) {
    return std::visit(
        [](const auto& v) -> std::string_view {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, UseSpectrum>) return "UseSpectrum";
            else if constexpr (std::is_same_v<T, Negotiate>) return "Negotiate";
            else if constexpr (std::is_same_v<T, Handover>) return "Handover";
            else return "Idle";
        },
        a);
}

struct Transition {
    SuState state;
    Action action;
};

inline constexpr int kMaxBackoffMultiplier = 8;

/// Delay before re-sensing after `level` consecutive empty handovers:
/// one sensing period, doubling, capped at eight periods.
inline double backoff_delay(int level, double sensing_period) {
    if (level <= 1) return sensing_period;
    const int shift = std::min(level - 1, 3);
    return sensing_period * std::min(1 << shift, kMaxBackoffMultiplier);
}

namespace detail {

inline void require_mode(const SuState& s, SuMode expected, std::string_view op) {
    if (s.mode != expected)
        throw ProtocolError(std::string(op) + " requires mode " + std::string(to_string(expected)) +
                            ", SU is in " + std::string(to_string(s.mode)));
}

inline Transition enter_normal(SuState s, ChannelId ch) {
    s.mode = SuMode::Normal;
    s.bound_channel = ch;
    s.pending_channel.reset();
    s.excluded.clear();
    s.backoff_level = 0;
    return {std::move(s), UseSpectrum{ch}};
}

inline Transition enter_warning(SuState s, ChannelId ch) {
    s.mode = SuMode::Warning;
    s.bound_channel.reset();
    s.pending_channel = ch;
    return {std::move(s), Negotiate{ch}};
}

inline Transition enter_failure(SuState s, ChannelId ch) {
    s.mode = SuMode::Failure;
    s.bound_channel.reset();
    s.pending_channel = ch;
    s.excluded.insert(ch);
    return {std::move(s), Handover{}};
}

} // namespace detail

inline Transition on_offer(const SuState& state, const SpectrumOffer& offer) {
    detail::require_mode(state, SuMode::Sensing, "on_offer");
    switch (offer.offered_class()) {
    case qos::QosClass::C1: return detail::enter_normal(state, offer.channel_id());
    case qos::QosClass::C2: return detail::enter_warning(state, offer.channel_id());
    case qos::QosClass::C3: return detail::enter_failure(state, offer.channel_id());
    }
    throw ProtocolError("unknown offer class");
}

/// One cooperate/refuse exchange per Warning entry. A refusal goes straight
/// to Failure without re-sensing the refused channel.
inline Transition on_negotiation_result(const SuState& state, Outcome outcome) {
    detail::require_mode(state, SuMode::Warning, "on_negotiation_result");
    SuState s = state;
    ++s.negotiation_attempts;
    const ChannelId ch = *state.pending_channel;
    if (outcome == Outcome::Cooperate) return detail::enter_normal(std::move(s), ch);
    return detail::enter_failure(std::move(s), ch);
}

inline Transition on_degradation(const SuState& state, const qos::QosMeasurement& fresh) {
    detail::require_mode(state, SuMode::Normal, "on_degradation");
    const ChannelId ch = *state.bound_channel;
    switch (qos::classify(fresh)) {
    case qos::QosClass::C1: return {state, Idle{}};
    case qos::QosClass::C2: return detail::enter_warning(state, ch);
    case qos::QosClass::C3: return detail::enter_failure(state, ch);
    }
    throw ProtocolError("unknown measurement class");
}

/// `next` is the re-sensed best remaining candidate, or empty when none is
/// left. An empty handover closes the healing episode and schedules a
/// backed-off re-sense.
inline Transition on_handover(const SuState& state, const std::optional<SpectrumOffer>& next) {
    detail::require_mode(state, SuMode::Failure, "on_handover");
    SuState s = state;
    ++s.handover_count;
    s.mode = SuMode::Sensing;
    s.pending_channel.reset();
    if (!next) {
        s.excluded.clear();
        ++s.backoff_level;
        return {std::move(s), Idle{}};
    }
    if (s.excluded.contains(next->channel_id()))
        throw ProtocolError("handover target " + std::to_string(next->channel_id()) +
                            " was already excluded in this healing episode");
    return on_offer(s, *next);
}

/// Ends the current session from any mode and releases every channel.
inline Transition on_session_end(const SuState& state) {
    SuState s = state;
    s.mode = SuMode::Sensing;
    s.bound_channel.reset();
    s.pending_channel.reset();
    s.excluded.clear();
    s.backoff_level = 0;
    s.session_clock = 0.0;
    return {std::move(s), Idle{}};
}

struct OfferInput {
    SpectrumOffer offer;
};
struct NegotiationInput {
    Outcome outcome;
};
struct DegradationInput {
    qos::QosMeasurement fresh;
};
struct HandoverInput {
    std::optional<SpectrumOffer> next;
};
struct SessionEndInput {};

using SuInput =
    std::variant<OfferInput, NegotiationInput, DegradationInput, HandoverInput, SessionEndInput>;

/// Single dispatch point over the transition table.
inline Transition step(const SuState& state, const SuInput& input) {
    return std::visit(
        [&](const auto& in) -> Transition {
            using T = std::decay_t<decltype(in)>;
            if constexpr (std::is_same_v<T, OfferInput>) return on_offer(state, in.offer);
            else if constexpr (std::is_same_v<T, NegotiationInput>)
                return on_negotiation_result(state, in.outcome);
            else if constexpr (std::is_same_v<T, DegradationInput>)
                return on_degradation(state, in.fresh);
            else if constexpr (std::is_same_v<T, HandoverInput>)
                return on_handover(state, in.next);
            else return on_session_end(state);
        },
        input);
}

} // namespace cogmesh::selfmgmt
