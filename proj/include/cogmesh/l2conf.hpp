#pragma once

#include "cogmesh/error.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace cogmesh::l2conf {

using NodeId = int;
using ChannelId = int;

enum class Phase { Phase1, Phase2 };

// TDMA timing: a frame holds one slot per node, a Phase1 round holds
// `m_channels` frames and a Phase2 round a single frame.
struct TdmaLayout {
    int n_nodes = 1;
    int m_channels = 1;
    Phase phase = Phase::Phase1;
};

inline void validate(const TdmaLayout& l) {
    if (l.n_nodes < 1 || l.m_channels < 1)
        throw InputError("TDMA layout needs at least one node and one channel");
}

inline NodeId slot_owner(const TdmaLayout& layout, std::uint64_t global_slot) {
    validate(layout);
    return static_cast<NodeId>(global_slot % static_cast<std::uint64_t>(layout.n_nodes));
}

inline std::uint64_t frame_length(const TdmaLayout& layout) {
    validate(layout);
    return static_cast<std::uint64_t>(layout.n_nodes);
}

inline std::uint64_t round_length(const TdmaLayout& layout) {
    const auto frame = frame_length(layout);
    return layout.phase == Phase::Phase1 ? frame * static_cast<std::uint64_t>(layout.m_channels)
                                         : frame;
}

struct NodeChannels {
    NodeId node = 0;
    std::set<ChannelId> channels;
    std::set<NodeId> neighbors;
};

struct Transmission {
    std::uint64_t slot = 0;
    NodeId sender = 0;
    ChannelId channel = 0;
};

// node -> (heard neighbor -> common channel set)
using DiscoveryMap = std::map<NodeId, std::map<NodeId, std::set<ChannelId>>>;

struct DiscoveryResult {
    DiscoveryMap common;
    std::vector<Transmission> transmissions;
    std::uint64_t slots = 0;

    /// Slots that carried more than one transmission.
    std::uint64_t collisions() const {
        std::map<std::uint64_t, int> per_slot;
        for (const auto& t : transmissions) ++per_slot[t.slot];
        return static_cast<std::uint64_t>(std::count_if(
            per_slot.begin(), per_slot.end(), [](const auto& kv) { return kv.second > 1; }));
    }
};

/// Replays `rounds` Phase1 rounds. In frame f each node, during its own
/// slot, broadcasts its id and channel set on the f-th channel of its sorted
/// channel list (silent when it has fewer than f + 1 channels). A neighbor
/// hears the broadcast iff that channel is in its own set and records the
/// intersection of both channel sets.
inline DiscoveryResult discover(const std::vector<NodeChannels>& nodes, const TdmaLayout& layout,
                                int rounds = 1) {
    if (layout.phase != Phase::Phase1) throw InputError("discovery runs in Phase1 rounds");
    if (layout.n_nodes != static_cast<int>(nodes.size()))
        throw InputError("layout has " + std::to_string(layout.n_nodes) + " nodes but " +
                         std::to_string(nodes.size()) + " were described");
    if (rounds < 1) throw InputError("at least one round is required");
    std::vector<const NodeChannels*> by_id(nodes.size(), nullptr);
    for (const auto& n : nodes) {
        if (n.node < 0 || n.node >= layout.n_nodes)
            throw InputError("node id " + std::to_string(n.node) + " outside [0, N)");
        if (by_id[n.node]) throw InputError("duplicate node id " + std::to_string(n.node));
        by_id[n.node] = &n;
    }
    std::vector<std::string> violations;
    for (const auto& n : nodes)
        for (auto nb : n.neighbors) {
            if (nb < 0 || nb >= layout.n_nodes || nb == n.node) {
                violations.push_back("node " + std::to_string(n.node) + " lists invalid neighbor " +
                                     std::to_string(nb));
            } else if (!by_id[nb]->neighbors.contains(n.node)) {
                violations.push_back("neighbor relation is asymmetric: " + std::to_string(n.node) +
                                     " -> " + std::to_string(nb));
            }
        }
    if (!violations.empty()) throw ValidationError(std::move(violations));

    DiscoveryResult out;
    const auto round_slots = round_length(layout);
    const auto frame = frame_length(layout);
    out.slots = round_slots * static_cast<std::uint64_t>(rounds);
    for (std::uint64_t slot = 0; slot < out.slots; ++slot) {
        const auto frame_in_round = static_cast<std::size_t>((slot % round_slots) / frame);
        const auto& sender = *by_id[slot_owner(layout, slot)];
        if (frame_in_round >= sender.channels.size()) continue;
        const ChannelId ch = *std::next(sender.channels.begin(),
                                        static_cast<std::ptrdiff_t>(frame_in_round));
        out.transmissions.push_back({slot, sender.node, ch});
        for (auto nb : sender.neighbors) {
            const auto& rx = *by_id[nb];
            if (!rx.channels.contains(ch)) continue;
            std::set<ChannelId> both;
            std::set_intersection(sender.channels.begin(), sender.channels.end(),
                                  rx.channels.begin(), rx.channels.end(),
                                  std::inserter(both, both.end()));
            out.common[rx.node][sender.node] = std::move(both);
        }
    }
    return out;
}

} // namespace cogmesh::l2conf
