#pragma once

#include "cogmesh/error.hpp"
#include "cogmesh/event_queue.hpp"
#include "cogmesh/format.hpp"
#include "cogmesh/knowledge.hpp"
#include "cogmesh/markov.hpp"
#include "cogmesh/qos.hpp"
#include "cogmesh/rng.hpp"
#include "cogmesh/scenario.hpp"
#include "cogmesh/selfmgmt.hpp"
#include "cogmesh/spectrum.hpp"
#include "cogmesh/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace cogmesh::engine {

using scenario::ScenarioConfig;
using selfmgmt::SuState;
using spectrum::ChannelId;
using spectrum::PuId;

// Level a cooperating PU commits to on the negotiated channel: monitored
// fields are never worse than these.
inline constexpr qos::QosMeasurement kGuaranteedC1{500.0, 100.0, 20.0, 0.5};

inline constexpr double kSecondsPerHour = 3600.0;

struct RunResult {
    Trace trace;
    RunMetrics metrics;
    knowledge::KnowledgeBase kb;
};

namespace detail {

struct SessionStartEv {};
struct SenseTickEv {
    std::uint64_t token;
};
struct MonitorTickEv {
    std::uint64_t token;
};
struct NegotiationDoneEv {
    std::uint64_t token;
};
struct SessionCompleteEv {
    std::uint64_t token;
};
struct OutageDeadlineEv {
    std::uint64_t token;
};
struct PuArrivalEv {
    std::size_t pu;
};
struct PuDepartureEv {
    std::size_t pu;
    ChannelId channel;
};

using Ev = std::variant<SessionStartEv, SenseTickEv, MonitorTickEv, NegotiationDoneEv,
                        SessionCompleteEv, OutageDeadlineEv, PuArrivalEv, PuDepartureEv>;

// One single-threaded run of the SU against the scenario's spectrum.
class Simulation {
public:
    Simulation(const ScenarioConfig& cfg, std::uint64_t seed, double duration,
               const knowledge::KnowledgeBase* prior)
        : cfg_(cfg), duration_(duration), sensing_rng_(seed, "sensing"),
          negotiation_rng_(seed, "negotiation"), session_rng_(seed, "session"),
          kb_(prior ? *prior
                    : knowledge::KnowledgeBase(cfg.channels, cfg.primary_users,
                                               cfg.learning.alpha)) {
        trace_.seed = seed;
        trace_.duration = round_sig9(duration);
        for (const auto& p : cfg.primary_users)
            pu_rng_.emplace_back(seed, "pu-traffic/" + std::to_string(p.id));
        for (const auto& c : cfg.channels) {
            channel_index_[c.id] = &c;
            owner_index_[c.id] = owner_of(c.band_id);
        }
    }

    RunResult run() {
        queue_.push(0.0, SessionStartEv{});
        for (std::size_t k = 0; k < cfg_.primary_users.size(); ++k) {
            const auto& p = cfg_.primary_users[k];
            if (p.arrival_rate > 0.0)
                queue_.push(pu_rng_[k].exponential(p.arrival_rate / kSecondsPerHour),
                            PuArrivalEv{k});
        }
        while (!queue_.empty() && queue_.next_time() <= duration_) {
            auto e = queue_.pop();
            now_ = e.time;
            std::visit([this](const auto& ev) { handle(ev); }, e.payload);
        }
        RunResult out{std::move(trace_), {}, std::move(kb_)};
        out.metrics = compute_metrics(out.trace);
        return out;
    }

private:
    std::size_t owner_of(spectrum::BandId band) const {
        for (std::size_t k = 0; k < cfg_.primary_users.size(); ++k)
            if (cfg_.primary_users[k].band_id == band) return k;
        throw ReferentialError("band " + std::to_string(band) + " has no PU");
    }

    void emit(EventRecord r) {
        r.time = round_sig9(now_);
        kb_.record(r);
        trace_.records.push_back(std::move(r));
    }

    std::vector<spectrum::Channel> candidates() const {
        if (!cfg_.learning.enabled) return spectrum::candidate_channels(cfg_.channels, su_.excluded);
        return spectrum::candidate_channels(cfg_.channels, su_.excluded,
                                            [this](std::vector<spectrum::Channel> c) {
                                                return knowledge::rank_channels(kb_, std::move(c));
                                            });
    }

    std::optional<ChannelId> su_held_channel() const {
        if (su_.bound_channel) return su_.bound_channel;
        if (su_.mode == selfmgmt::SuMode::Warning) return su_.pending_channel;
        return std::nullopt;
    }

    qos::QosMeasurement occupied(qos::QosMeasurement m) const {
        m.bandwidth_kbps = 0.0;
        return m;
    }

    spectrum::SpectrumOffer sense_channel(const spectrum::Channel& ch) {
        emit({.kind = EventKind::Sense, .channel = ch.id});
        auto m = spectrum::sense_measurement(ch, sensing_rng_);
        if (pu_on_channel_.contains(ch.id)) m = occupied(m);
        // The offer is classified on the value the trace will carry.
        for (auto p : qos::kParameters) qos::get(m, p) = round_sig9(qos::get(m, p));
        spectrum::SpectrumOffer offer(ch.id, m, now_);
        emit({.kind = EventKind::Offer,
              .channel = ch.id,
              .qos_class = offer.offered_class(),
              .measured = m});
        return offer;
    }

    void on_mode_change(selfmgmt::SuMode from, selfmgmt::SuMode to) {
        using selfmgmt::SuMode;
        emit({.kind = EventKind::ModeChange, .channel = su_.bound_channel ? su_.bound_channel
                                                                          : su_.pending_channel,
              .from_mode = from, .to_mode = to});
        if (from == SuMode::Normal) {
            su_.session_clock = std::max(0.0, su_.session_clock - (now_ - normal_since_));
            guaranteed_.reset();
            ++session_token_;
            ++su_token_;
            queue_.push(now_ + cfg_.su.max_outage, OutageDeadlineEv{++outage_token_});
        }
        if (to == SuMode::Normal) {
            normal_since_ = now_;
            ++outage_token_;
            queue_.push(now_ + su_.session_clock, SessionCompleteEv{++session_token_});
        }
    }

    void apply(selfmgmt::Transition t) {
        const auto from = su_.mode;
        su_ = std::move(t.state);
        if (from != su_.mode) on_mode_change(from, su_.mode);
        std::visit([this](const auto& a) { act(a); }, t.action);
    }

    void act(const selfmgmt::UseSpectrum&) {
        queue_.push(now_ + cfg_.su.monitor_period, MonitorTickEv{++su_token_});
    }

    void act(const selfmgmt::Negotiate& n) {
        emit({.kind = EventKind::NegotiationStart,
              .channel = n.channel,
              .pu = cfg_.primary_users[owner_index_.at(n.channel)].id});
        queue_.push(now_ + cfg_.su.negotiation_latency, NegotiationDoneEv{++su_token_});
    }

    void act(const selfmgmt::Handover&) {
        if (!cfg_.su.handover_enabled) {
            end_session(false);
            return;
        }
        emit({.kind = EventKind::Handover, .channel = su_.pending_channel});
        const auto list = candidates();
        if (list.empty()) {
            apply(selfmgmt::on_handover(su_, std::nullopt));
            return;
        }
        auto offer = sense_channel(list.front());
        apply(selfmgmt::on_handover(su_, offer));
    }

    void act(const selfmgmt::Idle&) {
        using selfmgmt::SuMode;
        if (su_.mode == SuMode::Normal) {
            queue_.push(now_ + cfg_.su.monitor_period, MonitorTickEv{++su_token_});
        } else if (su_.mode == SuMode::Sensing && in_session_) {
            queue_.push(now_ + selfmgmt::backoff_delay(su_.backoff_level, cfg_.su.sensing_period),
                        SenseTickEv{++su_token_});
        }
    }

    void start_session() {
        in_session_ = true;
        const double length = cfg_.su.session_distribution == scenario::SessionDistribution::Fixed
                                  ? cfg_.su.session_mean
                                  : session_rng_.exponential(1.0 / cfg_.su.session_mean);
        su_.session_clock = length;
        emit({.kind = EventKind::SessionStart});
        queue_.push(now_ + cfg_.su.max_outage, OutageDeadlineEv{++outage_token_});
        queue_.push(now_, SenseTickEv{++su_token_});
    }

    void end_session(bool completed) {
        emit({.kind = EventKind::SessionEnd, .completed = completed});
        in_session_ = false;
        apply(selfmgmt::on_session_end(su_));
        guaranteed_.reset();
        ++su_token_;
        ++session_token_;
        ++outage_token_;
        // After an abort the SU waits one sensing period, so a zero-latency
        // refuse loop still advances time.
        queue_.push(now_ + (completed ? 0.0 : cfg_.su.sensing_period), SessionStartEv{});
    }

    void handle(const SessionStartEv&) { start_session(); }

    void handle(const SenseTickEv& e) {
        if (e.token != su_token_ || su_.mode != selfmgmt::SuMode::Sensing) return;
        const auto list = candidates();
        if (list.empty()) {
            queue_.push(now_ + cfg_.su.sensing_period, SenseTickEv{++su_token_});
            return;
        }
        auto offer = sense_channel(list.front());
        apply(selfmgmt::on_offer(su_, offer));
    }

    void handle(const MonitorTickEv& e) {
        if (e.token != su_token_ || su_.mode != selfmgmt::SuMode::Normal) return;
        const auto ch = *su_.bound_channel;
        auto m = spectrum::sense_measurement(*channel_index_.at(ch), sensing_rng_);
        if (guaranteed_ == ch) {
            m.bandwidth_kbps = std::max(m.bandwidth_kbps, kGuaranteedC1.bandwidth_kbps);
            m.delay_ms = std::min(m.delay_ms, kGuaranteedC1.delay_ms);
            m.jitter_ms = std::min(m.jitter_ms, kGuaranteedC1.jitter_ms);
            m.error_rate_pct = std::min(m.error_rate_pct, kGuaranteedC1.error_rate_pct);
        }
        apply(selfmgmt::on_degradation(su_, m));
    }

    void finish_negotiation(selfmgmt::Outcome outcome, bool reclaimed) {
        const auto ch = *su_.pending_channel;
        EventRecord r{.kind = EventKind::NegotiationEnd,
                      .channel = ch,
                      .pu = cfg_.primary_users[owner_index_.at(ch)].id,
                      .outcome = outcome};
        if (reclaimed) r.preempted = true;
        emit(std::move(r));
        if (outcome == selfmgmt::Outcome::Cooperate) guaranteed_ = ch;
        apply(selfmgmt::on_negotiation_result(su_, outcome));
    }

    void handle(const NegotiationDoneEv& e) {
        if (e.token != su_token_ || su_.mode != selfmgmt::SuMode::Warning) return;
        const auto& pu = cfg_.primary_users[owner_index_.at(*su_.pending_channel)];
        const bool coop = negotiation_rng_.bernoulli(pu.coop_prob);
        finish_negotiation(coop ? selfmgmt::Outcome::Cooperate : selfmgmt::Outcome::Refuse, false);
    }

    void handle(const SessionCompleteEv& e) {
        if (e.token != session_token_ || su_.mode != selfmgmt::SuMode::Normal) return;
        su_.session_clock = 0.0;
        end_session(true);
    }

    void handle(const OutageDeadlineEv& e) {
        if (e.token != outage_token_ || su_.mode == selfmgmt::SuMode::Normal || !in_session_) return;
        end_session(false);
    }

    // A PU call takes the lowest free channel of its band. With none free it
    // reclaims the channel the SU holds there, if any; otherwise it is blocked.
    void handle(const PuArrivalEv& e) {
        const auto& pu = cfg_.primary_users[e.pu];
        auto& rng = pu_rng_[e.pu];
        queue_.push(now_ + rng.exponential(pu.arrival_rate / kSecondsPerHour), PuArrivalEv{e.pu});
        const auto held = su_held_channel();
        std::optional<ChannelId> free, reclaim;
        for (const auto& c : cfg_.channels) {
            if (c.band_id != pu.band_id || pu_on_channel_.contains(c.id)) continue;
            if (held == c.id) reclaim = c.id;
            else if (!free || c.id < *free) free = c.id;
        }
        const auto service = rng.exponential(pu.service_rate / kSecondsPerHour);
        if (!free && !reclaim) {
            emit({.kind = EventKind::PuArrival, .pu = pu.id, .blocked = true, .preempted = false});
            return;
        }
        const ChannelId ch = free ? *free : *reclaim;
        pu_on_channel_[ch] = e.pu;
        queue_.push(now_ + service, PuDepartureEv{e.pu, ch});
        emit({.kind = EventKind::PuArrival, .channel = ch, .pu = pu.id, .blocked = false,
              .preempted = !free});
        if (free) return;
        if (su_.mode == selfmgmt::SuMode::Normal) {
            auto m = occupied(spectrum::sense_measurement(*channel_index_.at(ch), sensing_rng_));
            guaranteed_.reset();
            apply(selfmgmt::on_degradation(su_, m));
        } else {
            // Reclaiming the channel under negotiation ends it as a refusal.
            ++su_token_;
            finish_negotiation(selfmgmt::Outcome::Refuse, true);
        }
    }

    void handle(const PuDepartureEv& e) {
        pu_on_channel_.erase(e.channel);
        emit({.kind = EventKind::PuDeparture, .channel = e.channel,
              .pu = cfg_.primary_users[e.pu].id});
    }

    const ScenarioConfig& cfg_;
    double duration_;
    double now_ = 0.0;
    RngStream sensing_rng_;
    RngStream negotiation_rng_;
    RngStream session_rng_;
    std::vector<RngStream> pu_rng_;
    knowledge::KnowledgeBase kb_;
    SuState su_;
    EventQueue<Ev> queue_;
    Trace trace_;
    std::map<ChannelId, const spectrum::Channel*> channel_index_;
    std::map<ChannelId, std::size_t> owner_index_;
    std::map<ChannelId, std::size_t> pu_on_channel_;
    std::optional<ChannelId> guaranteed_;
    bool in_session_ = false;
    double normal_since_ = 0.0;
    std::uint64_t su_token_ = 0;
    std::uint64_t session_token_ = 0;
    std::uint64_t outage_token_ = 0;
};

} // namespace detail

/// Runs one seeded simulation. `prior` seeds the knowledge base (e.g. from a
/// dump); otherwise learning starts empty.
inline RunResult run(const ScenarioConfig& cfg, std::uint64_t seed, double duration,
                     const knowledge::KnowledgeBase* prior = nullptr) {
    if (!(duration > 0.0) || !std::isfinite(duration))
        throw ValidationError({"duration must be positive and finite"});
    return detail::Simulation(cfg, seed, duration, prior).run();
}

inline RunResult run(const ScenarioConfig& cfg) { return run(cfg, cfg.seed, cfg.duration); }

/// Independent runs, one per seed. The output order follows `seeds` and does
/// not depend on `threads`.
inline std::vector<RunMetrics> sweep(const ScenarioConfig& cfg, std::span<const std::uint64_t> seeds,
                                     double duration, unsigned threads = 1) {
    std::vector<RunMetrics> out(seeds.size());
    threads = std::max(1u, threads);
    for (std::size_t start = 0; start < seeds.size(); start += threads) {
        const auto end = std::min(seeds.size(), start + threads);
        std::vector<std::future<RunMetrics>> batch;
        for (std::size_t k = start; k < end; ++k)
            batch.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                       [&cfg, s = seeds[k], duration] {
                                           return run(cfg, s, duration).metrics;
                                       }));
        for (std::size_t k = start; k < end; ++k) out[k] = batch[k - start].get();
    }
    return out;
}

struct LearningComparison {
    std::vector<std::optional<double>> failure_on;
    std::vector<std::optional<double>> failure_off;
    // Seeds where both arms negotiated at least once.
    std::size_t pairs = 0;
    double mean_on = 0.0;
    double mean_off = 0.0;
    // Mean of (off - on) over the pairs; positive when learning helps.
    double mean_difference = 0.0;
    double difference_std_error = 0.0;
};

/// Runs every seed with knowledge-ranked handover and with id-ordered
/// handover and pairs the negotiation failure rates.
inline LearningComparison compare_learning(const ScenarioConfig& cfg,
                                           std::span<const std::uint64_t> seeds, double duration,
                                           unsigned threads = 1) {
    auto on_cfg = cfg;
    on_cfg.learning.enabled = true;
    auto off_cfg = cfg;
    off_cfg.learning.enabled = false;
    const auto on = sweep(on_cfg, seeds, duration, threads);
    const auto off = sweep(off_cfg, seeds, duration, threads);
    LearningComparison out;
    std::vector<double> diffs;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        out.failure_on.push_back(on[k].negotiation_failure_rate);
        out.failure_off.push_back(off[k].negotiation_failure_rate);
        if (on[k].negotiation_failure_rate && off[k].negotiation_failure_rate) {
            out.mean_on += *on[k].negotiation_failure_rate;
            out.mean_off += *off[k].negotiation_failure_rate;
            diffs.push_back(*off[k].negotiation_failure_rate - *on[k].negotiation_failure_rate);
        }
    }
    out.pairs = diffs.size();
    if (out.pairs == 0) return out;
    const double n = static_cast<double>(out.pairs);
    out.mean_on /= n;
    out.mean_off /= n;
    for (double d : diffs) out.mean_difference += d / n;
    if (out.pairs > 1) {
        double ss = 0.0;
        for (double d : diffs) ss += (d - out.mean_difference) * (d - out.mean_difference);
        out.difference_std_error = std::sqrt(ss / (n - 1.0) / n);
    }
    return out;
}

struct OccupancyRunResult {
    std::uint64_t su_arrivals = 0;
    std::uint64_t su_blocked = 0;
    std::uint64_t preemptions = 0;
    markov::Estimate blocking;
};

/// Event-queue simulation of the occupancy model with handover disabled:
/// each sensing attempt is an independent SU arrival that either finds a
/// free channel or is blocked, and a preempted SU leaves for good. Blocking
/// is measured over `su_arrivals` arrivals after a warm-up of 1 %, with
/// standard errors from 100 batch means.
inline OccupancyRunResult occupancy_run(const markov::OccupancyModel& m, std::uint64_t seed,
                                        std::uint64_t su_arrivals) {
    markov::validate(m);
    if (!(m.lambda_s > 0.0)) throw DomainError("occupancy_run needs SU arrivals");
    if (su_arrivals < static_cast<std::uint64_t>(markov::kBatches) * 10)
        throw DomainError("occupancy_run needs at least 1000 SU arrivals");

    struct PuArrive {};
    struct SuArrive {};
    struct PuLeave {};
    struct SuLeave {
        std::uint64_t id;
    };
    using OccEv = std::variant<PuArrive, SuArrive, PuLeave, SuLeave>;

    RngStream pu_rng(seed, "occupancy/pu");
    RngStream su_rng(seed, "occupancy/su");
    EventQueue<OccEv> q;
    int pus = 0;
    std::vector<std::uint64_t> active_sus;
    std::uint64_t next_su = 0;
    const std::uint64_t warmup = su_arrivals / 100;
    const std::uint64_t per_batch = su_arrivals / markov::kBatches;
    std::vector<double> batch_blocked(markov::kBatches, 0.0);
    OccupancyRunResult out;
    std::uint64_t seen = 0;

    if (m.lambda_p > 0.0) q.push(pu_rng.exponential(m.lambda_p), PuArrive{});
    q.push(su_rng.exponential(m.lambda_s), SuArrive{});
    while (!q.empty() && out.su_arrivals < per_batch * markov::kBatches) {
        auto e = q.pop();
        const double now = e.time;
        std::visit(
            [&](const auto& ev) {
                using T = std::decay_t<decltype(ev)>;
                const int busy = pus + static_cast<int>(active_sus.size());
                if constexpr (std::is_same_v<T, PuArrive>) {
                    q.push(now + pu_rng.exponential(m.lambda_p), PuArrive{});
                    if (busy < m.channels) {
                        ++pus;
                    } else if (!active_sus.empty()) {
                        active_sus.pop_back();
                        ++pus;
                        if (seen >= warmup) ++out.preemptions;
                    } else {
                        return;
                    }
                    q.push(now + pu_rng.exponential(m.mu_p), PuLeave{});
                } else if constexpr (std::is_same_v<T, SuArrive>) {
                    q.push(now + su_rng.exponential(m.lambda_s), SuArrive{});
                    const bool blocked = busy >= m.channels;
                    if (seen++ >= warmup) {
                        const auto b = static_cast<std::size_t>(out.su_arrivals / per_batch);
                        ++out.su_arrivals;
                        if (blocked) {
                            ++out.su_blocked;
                            batch_blocked[b] += 1.0;
                        }
                    }
                    if (!blocked) {
                        const auto id = next_su++;
                        active_sus.push_back(id);
                        q.push(now + su_rng.exponential(m.mu_s), SuLeave{id});
                    }
                } else if constexpr (std::is_same_v<T, PuLeave>) {
                    --pus;
                } else {
                    auto it = std::find(active_sus.begin(), active_sus.end(), ev.id);
                    if (it != active_sus.end()) active_sus.erase(it);
                }
            },
            e.payload);
    }
    const double nb = static_cast<double>(markov::kBatches);
    const double per = static_cast<double>(per_batch);
    out.blocking.value = static_cast<double>(out.su_blocked) / static_cast<double>(out.su_arrivals);
    double ss = 0.0;
    for (double b : batch_blocked) {
        const double r = b / per - out.blocking.value;
        ss += r * r;
    }
    out.blocking.std_error = std::sqrt(ss / (nb - 1.0) / nb);
    return out;
}

} // namespace cogmesh::engine
