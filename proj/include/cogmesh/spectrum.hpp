#pragma once

#include "cogmesh/qos.hpp"
#include "cogmesh/rng.hpp"

#include <algorithm>
#include <set>
#include <span>
#include <vector>

namespace cogmesh::spectrum {

using ChannelId = int;
using BandId = int;
using PuId = int;

struct Channel {
    ChannelId id = 0;
    BandId band_id = 0;
    qos::QosMeasurement qos_mean;
    // Per-field half-width of the uniform sensing noise.
    qos::QosMeasurement qos_spread;
};

struct PrimaryUser {
    PuId id = 0;
    BandId band_id = 0;
    double coop_prob = 0.0;
    double arrival_rate = 0.0; // per hour
    double service_rate = 0.0; // per hour
};

class SpectrumOffer {
public:
    SpectrumOffer(ChannelId channel, const qos::QosMeasurement& measured, double time)
        : channel_id_(channel), measured_(measured), offered_class_(qos::classify(measured)),
          time_(time) {}

    ChannelId channel_id() const { return channel_id_; }
    const qos::QosMeasurement& measured() const { return measured_; }
    qos::QosClass offered_class() const { return offered_class_; }
    double time() const { return time_; }

private:
    ChannelId channel_id_;
    qos::QosMeasurement measured_;
    qos::QosClass offered_class_;
    double time_;
};

/// Perturbs each field of the channel's mean by an independent uniform draw
/// in +/- spread and clamps it to the field's domain. One draw per field is
/// consumed even when the spread is zero so stream positions stay aligned.
inline qos::QosMeasurement sense_measurement(const Channel& channel, RngStream& rng) {
    qos::QosMeasurement out;
    for (auto p : qos::kParameters) {
        const double mean = qos::get(channel.qos_mean, p);
        const double spread = qos::get(channel.qos_spread, p);
        const double u = rng.uniform(-1.0, 1.0);
        const double v = spread > 0.0 ? mean + spread * u : mean;
        qos::get(out, p) = std::clamp(v, 0.0, qos::domain_max(p));
    }
    return out;
}

inline SpectrumOffer sense(const Channel& channel, RngStream& rng, double time = 0.0) {
    return SpectrumOffer(channel.id, sense_measurement(channel, rng), time);
}

/// Channels not in `exclude`, in id order.
inline std::vector<Channel> candidate_channels(std::span<const Channel> channels,
                                               const std::set<ChannelId>& exclude) {
    std::vector<Channel> out;
    for (const auto& c : channels)
        if (!exclude.contains(c.id)) out.push_back(c);
    std::sort(out.begin(), out.end(),
              [](const Channel& a, const Channel& b) { return a.id < b.id; });
    return out;
}

/// Channels not in `exclude`, ordered by `rank`, which receives the
/// id-ordered list and must return a permutation of it (e.g. the knowledge
/// base's score ranking).
template <typename Ranker>
std::vector<Channel> candidate_channels(std::span<const Channel> channels,
                                        const std::set<ChannelId>& exclude, Ranker&& rank) {
    return rank(candidate_channels(channels, exclude));
}

} // namespace cogmesh::spectrum
