#pragma once

#include "cogmesh/error.hpp"
#include "cogmesh/qos.hpp"
#include "cogmesh/spectrum.hpp"
#include "cogmesh/trace.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cogmesh::knowledge {

using spectrum::Channel;
using spectrum::ChannelId;
using spectrum::PrimaryUser;
using spectrum::PuId;

inline constexpr std::string_view kKnowledgeSchema = "cogmesh-kb/1";

struct PuCounters {
    std::uint64_t negotiations = 0;
    std::uint64_t cooperations = 0;
    bool operator==(const PuCounters&) const = default;
};

struct ChannelCounters {
    PuId owner = 0;
    // Offers seen, indexed by class (C1, C2, C3).
    std::array<std::uint64_t, 3> offers{};
    bool operator==(const ChannelCounters&) const = default;
};

// Learned negotiation outcomes per PU and offer history per channel. Scores
// are Laplace-smoothed frequencies.
class KnowledgeBase {
public:
    KnowledgeBase(std::span<const Channel> channels, std::span<const PrimaryUser> pus,
                  double alpha = 1.0)
        : alpha_(alpha) {
        if (!(alpha > 0.0)) throw DomainError("knowledge smoothing alpha must be positive");
        std::map<spectrum::BandId, PuId> owner_of_band;
        for (const auto& p : pus) {
            pus_[p.id] = {};
            owner_of_band[p.band_id] = p.id;
        }
        for (const auto& c : channels) {
            auto it = owner_of_band.find(c.band_id);
            if (it == owner_of_band.end())
                throw ReferentialError("channel " + std::to_string(c.id) + " has no owning PU");
            channels_[c.id].owner = it->second;
        }
    }

    double alpha() const { return alpha_; }

    /// Folds one event into the counters. Offer and NegotiationEnd records
    /// carry information; every other kind is accepted and ignored.
    void record(const engine::EventRecord& e) {
        using engine::EventKind;
        if (e.kind == EventKind::Offer) {
            if (!e.channel || !e.qos_class) throw InputError("Offer record needs channel and class");
            auto& c = channel_at(*e.channel);
            ++c.offers[static_cast<std::size_t>(*e.qos_class) - 1];
        } else if (e.kind == EventKind::NegotiationEnd) {
            if (!e.outcome) throw InputError("NegotiationEnd record needs an outcome");
            PuId pu;
            if (e.pu) pu = *e.pu;
            else if (e.channel) pu = channel_at(*e.channel).owner;
            else throw InputError("NegotiationEnd record needs a PU or channel");
            auto& p = pu_at(pu);
            ++p.negotiations;
            if (*e.outcome == selfmgmt::Outcome::Cooperate) ++p.cooperations;
        }
    }

    double cooperation_estimate(PuId pu) const {
        const auto& p = pu_at(pu);
        return (static_cast<double>(p.cooperations) + alpha_) /
               (static_cast<double>(p.negotiations) + 2.0 * alpha_);
    }

    /// Smoothed probability that the next offer on `ch` is C1.
    double c1_likelihood(ChannelId ch) const {
        const auto& c = channel_at(ch);
        const double total = static_cast<double>(c.offers[0] + c.offers[1] + c.offers[2]);
        return (static_cast<double>(c.offers[0]) + alpha_) / (total + 3.0 * alpha_);
    }

    double score(ChannelId ch) const {
        return cooperation_estimate(channel_at(ch).owner) * c1_likelihood(ch);
    }

    PuId owner(ChannelId ch) const { return channel_at(ch).owner; }

    const PuCounters& pu_counters(PuId pu) const { return pu_at(pu); }
    const ChannelCounters& channel_counters(ChannelId ch) const { return channel_at(ch); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = kKnowledgeSchema;
        j["alpha"] = alpha_;
        j["primary_users"] = nlohmann::json::array();
        for (const auto& [id, p] : pus_)
            j["primary_users"].push_back(
                {{"id", id}, {"negotiations", p.negotiations}, {"cooperations", p.cooperations}});
        j["channels"] = nlohmann::json::array();
        for (const auto& [id, c] : channels_)
            j["channels"].push_back({{"id", id},
                                     {"pu", c.owner},
                                     {"offers", {{"C1", c.offers[0]}, {"C2", c.offers[1]},
                                                 {"C3", c.offers[2]}}}});
        return j;
    }

    /// Replaces counters with those of a dumped knowledge base. Every id in
    /// the dump must exist in this scenario.
    void load_json(const nlohmann::json& j) {
        try {
            if (j.at("schema").get<std::string>() != kKnowledgeSchema)
                throw InputError("knowledge dump has unsupported schema");
            for (const auto& p : j.at("primary_users")) {
                PuCounters c{p.at("negotiations").get<std::uint64_t>(),
                             p.at("cooperations").get<std::uint64_t>()};
                if (c.cooperations > c.negotiations)
                    throw InputError("knowledge dump has more cooperations than negotiations");
                pu_at(p.at("id").get<PuId>()) = c;
            }
            for (const auto& ch : j.at("channels")) {
                auto& c = channel_at(ch.at("id").get<ChannelId>());
                const auto& o = ch.at("offers");
                c.offers = {o.at("C1").get<std::uint64_t>(), o.at("C2").get<std::uint64_t>(),
                            o.at("C3").get<std::uint64_t>()};
            }
        } catch (const nlohmann::json::exception& e) {
            throw InputError(std::string("malformed knowledge dump: ") + e.what());
        }
    }

    bool operator==(const KnowledgeBase&) const = default;

private:
    PuCounters& pu_at(PuId pu) {
        auto it = pus_.find(pu);
        if (it == pus_.end()) throw ReferentialError("unknown PU " + std::to_string(pu));
        return it->second;
    }
    const PuCounters& pu_at(PuId pu) const { return const_cast<KnowledgeBase*>(this)->pu_at(pu); }

    ChannelCounters& channel_at(ChannelId ch) {
        auto it = channels_.find(ch);
        if (it == channels_.end()) throw ReferentialError("unknown channel " + std::to_string(ch));
        return it->second;
    }
    const ChannelCounters& channel_at(ChannelId ch) const {
        return const_cast<KnowledgeBase*>(this)->channel_at(ch);
    }

    double alpha_;
    std::map<PuId, PuCounters> pus_;
    std::map<ChannelId, ChannelCounters> channels_;
};

inline double cooperation_estimate(const KnowledgeBase& kb, PuId pu) {
    return kb.cooperation_estimate(pu);
}

/// Descending score, ties by ascending channel id.
inline std::vector<Channel> rank_channels(const KnowledgeBase& kb,
                                          std::vector<Channel> candidates) {
    std::vector<std::pair<double, Channel>> scored;
    scored.reserve(candidates.size());
    for (auto& c : candidates) scored.emplace_back(kb.score(c.id), std::move(c));
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second.id < b.second.id;
    });
    std::vector<Channel> out;
    out.reserve(scored.size());
    for (auto& [s, c] : scored) out.push_back(std::move(c));
    return out;
}

} // namespace cogmesh::knowledge
