#pragma once

#include "cogmesh/error.hpp"
#include "cogmesh/format.hpp"
#include "cogmesh/qos.hpp"
#include "cogmesh/selfmgmt.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace cogmesh::engine {

using selfmgmt::Outcome;
using selfmgmt::SuMode;

inline constexpr std::string_view kTraceSchema = "cogmesh-trace/1";
inline constexpr std::string_view kMetricsSchema = "cogmesh-metrics/1";

enum class EventKind {
    Sense,
    Offer,
    ModeChange,
    NegotiationStart,
    NegotiationEnd,
    Handover,
    SessionStart,
    SessionEnd,
    PuArrival,
    PuDeparture,
};

inline constexpr std::array<EventKind, 10> kEventKinds{
    EventKind::Sense,        EventKind::Offer,           EventKind::ModeChange,
    EventKind::NegotiationStart, EventKind::NegotiationEnd, EventKind::Handover,
    EventKind::SessionStart, EventKind::SessionEnd,      EventKind::PuArrival,
    EventKind::PuDeparture};

inline std::string_view to_string(EventKind k) {
    switch (k) {
    case EventKind::Sense: return "Sense";
    case EventKind::Offer: return "Offer";
    case EventKind::ModeChange: return "ModeChange";
    case EventKind::NegotiationStart: return "NegotiationStart";
    case EventKind::NegotiationEnd: return "NegotiationEnd";
    case EventKind::Handover: return "Handover";
    case EventKind::SessionStart: return "SessionStart";
    case EventKind::SessionEnd: return "SessionEnd";
    case EventKind::PuArrival: return "PuArrival";
    case EventKind::PuDeparture: return "PuDeparture";
    }
    return "?";
}

inline std::optional<EventKind> kind_from_string(std::string_view s) {
    for (auto k : kEventKinds)
        if (to_string(k) == s) return k;
    return std::nullopt;
}

// One timestamped simulation event. Payload fields are present only for the
// kinds that use them.
struct EventRecord {
    double time = 0.0;
    EventKind kind = EventKind::Sense;
    std::optional<int> channel;
    std::optional<int> pu;
    std::optional<qos::QosClass> qos_class;
    std::optional<qos::QosMeasurement> measured;
    std::optional<Outcome> outcome;
    std::optional<SuMode> from_mode;
    std::optional<SuMode> to_mode;
    // SessionEnd: whether the session finished its transmission.
    std::optional<bool> completed;
    // PuArrival: the call found no free channel in its band.
    std::optional<bool> blocked;
    // PuArrival: the call took the SU's channel.
    std::optional<bool> preempted;

    bool operator==(const EventRecord&) const = default;
};

struct Trace {
    std::uint64_t seed = 0;
    double duration = 0.0;
    std::vector<EventRecord> records;

    bool operator==(const Trace&) const = default;
};

namespace detail {

inline void put_num(std::string& out, std::string_view key, double v) {
    out += ",\"";
    out += key;
    out += "\":";
    out += format_sig9(v);
}

inline void put_int(std::string& out, std::string_view key, long long v) {
    out += ",\"";
    out += key;
    out += "\":";
    out += std::to_string(v);
}

inline void put_str(std::string& out, std::string_view key, std::string_view v) {
    out += ",\"";
    out += key;
    out += "\":\"";
    out += v;
    out += '"';
}

inline void put_bool(std::string& out, std::string_view key, bool v) {
    out += ",\"";
    out += key;
    out += "\":";
    out += v ? "true" : "false";
}

} // namespace detail

/// One JSON object per record with a fixed key order and 9-significant-digit
/// floats, so identical runs serialize byte-identically.
inline std::string to_json_line(const EventRecord& r) {
    std::string out = "{\"t\":" + format_sig9(r.time);
    detail::put_str(out, "kind", to_string(r.kind));
    if (r.channel) detail::put_int(out, "channel", *r.channel);
    if (r.pu) detail::put_int(out, "pu", *r.pu);
    if (r.qos_class) detail::put_str(out, "class", qos::to_string(*r.qos_class));
    if (r.measured) {
        out += ",\"measured\":[";
        out += format_sig9(r.measured->bandwidth_kbps) + ",";
        out += format_sig9(r.measured->delay_ms) + ",";
        out += format_sig9(r.measured->jitter_ms) + ",";
        out += format_sig9(r.measured->error_rate_pct) + "]";
    }
    if (r.outcome) detail::put_str(out, "outcome", selfmgmt::to_string(*r.outcome));
    if (r.from_mode) detail::put_str(out, "from", selfmgmt::to_string(*r.from_mode));
    if (r.to_mode) detail::put_str(out, "to", selfmgmt::to_string(*r.to_mode));
    if (r.completed) detail::put_bool(out, "completed", *r.completed);
    if (r.blocked) detail::put_bool(out, "blocked", *r.blocked);
    if (r.preempted) detail::put_bool(out, "preempted", *r.preempted);
    out += '}';
    return out;
}

inline std::string header_line(const Trace& t) {
    std::string out = "{\"schema\":\"";
    out += kTraceSchema;
    out += "\",\"seed\":" + std::to_string(t.seed);
    detail::put_num(out, "duration", t.duration);
    out += '}';
    return out;
}

inline void write_trace(std::ostream& os, const Trace& t) {
    os << header_line(t) << '\n';
    for (const auto& r : t.records) os << to_json_line(r) << '\n';
}

namespace detail {

inline EventRecord parse_record(const nlohmann::json& j, std::size_t line) {
    auto fail = [line](const std::string& msg) -> ParseError { return ParseError(line, msg); };
    if (!j.is_object()) throw fail("record is not a JSON object");
    EventRecord r;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& key = it.key();
        const auto& v = it.value();
        auto as_str = [&]() -> std::string {
            if (!v.is_string()) throw fail("field '" + key + "' must be a string");
            return v.get<std::string>();
        };
        auto as_int = [&]() -> int {
            if (!v.is_number_integer()) throw fail("field '" + key + "' must be an integer");
            return v.get<int>();
        };
        auto as_bool = [&]() -> bool {
            if (!v.is_boolean()) throw fail("field '" + key + "' must be a boolean");
            return v.get<bool>();
        };
        auto as_mode = [&]() -> SuMode {
            auto m = selfmgmt::mode_from_string(as_str());
            if (!m) throw fail("unknown mode '" + v.get<std::string>() + "'");
            return *m;
        };
        if (key == "t") {
            if (!v.is_number()) throw fail("field 't' must be a number");
            r.time = v.get<double>();
        } else if (key == "kind") {
            auto k = kind_from_string(as_str());
            if (!k) throw fail("unknown event kind '" + v.get<std::string>() + "'");
            r.kind = *k;
        } else if (key == "channel") {
            r.channel = as_int();
        } else if (key == "pu") {
            r.pu = as_int();
        } else if (key == "class") {
            auto c = qos::class_from_string(as_str());
            if (!c) throw fail("unknown class '" + v.get<std::string>() + "'");
            r.qos_class = *c;
        } else if (key == "measured") {
            if (!v.is_array() || v.size() != 4) throw fail("field 'measured' must be a 4-array");
            for (const auto& x : v)
                if (!x.is_number()) throw fail("field 'measured' must hold numbers");
            r.measured = qos::QosMeasurement{v[0].get<double>(), v[1].get<double>(),
                                             v[2].get<double>(), v[3].get<double>()};
        } else if (key == "outcome") {
            auto o = selfmgmt::outcome_from_string(as_str());
            if (!o) throw fail("unknown outcome '" + v.get<std::string>() + "'");
            r.outcome = *o;
        } else if (key == "from") {
            r.from_mode = as_mode();
        } else if (key == "to") {
            r.to_mode = as_mode();
        } else if (key == "completed") {
            r.completed = as_bool();
        } else if (key == "blocked") {
            r.blocked = as_bool();
        } else if (key == "preempted") {
            r.preempted = as_bool();
        } else {
            throw fail("unknown field '" + key + "'");
        }
    }
    if (!j.contains("t") || !j.contains("kind")) throw fail("record needs 't' and 'kind'");
    if (r.kind == EventKind::ModeChange && !r.to_mode) throw fail("ModeChange needs 'to'");
    if (r.kind == EventKind::NegotiationEnd && !r.outcome)
        throw fail("NegotiationEnd needs 'outcome'");
    return r;
}

} // namespace detail

/// Parses a JSON Lines trace. Errors carry the 1-based line number.
inline Trace read_trace(std::istream& is) {
    Trace t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(lineno, e.what());
        }
        if (!have_header) {
            if (!j.is_object() || j.value("schema", "") != kTraceSchema)
                throw ParseError(lineno, "missing header with schema " + std::string(kTraceSchema));
            if (!j.contains("seed") || !j["seed"].is_number_unsigned() || !j.contains("duration") ||
                !j["duration"].is_number())
                throw ParseError(lineno, "header needs 'seed' and 'duration'");
            t.seed = j["seed"].get<std::uint64_t>();
            t.duration = j["duration"].get<double>();
            have_header = true;
            continue;
        }
        auto r = detail::parse_record(j, lineno);
        if (!t.records.empty() && r.time < t.records.back().time)
            throw ParseError(lineno, "record time goes backwards");
        t.records.push_back(std::move(r));
    }
    if (!have_header) throw ParseError(lineno == 0 ? 1 : lineno, "empty trace");
    return t;
}

struct RunMetrics {
    double duration = 0.0;
    std::uint64_t negotiations = 0;
    std::uint64_t refusals = 0;
    // Refusals over negotiations; empty when no negotiation happened.
    std::optional<double> negotiation_failure_rate;
    std::uint64_t handovers = 0;
    // Seconds spent in each mode, indexed by SuMode.
    std::array<double, 4> mode_occupancy{};
    std::uint64_t sessions_completed = 0;
    std::uint64_t sessions_aborted = 0;
    // Mean length of a Normal sojourn, i.e. of continuous C1 service.
    double mean_time_in_c1 = 0.0;

    double occupancy(SuMode m) const { return mode_occupancy[static_cast<std::size_t>(m)]; }

    bool operator==(const RunMetrics&) const = default;
};

/// Pure function of the trace; the SU starts in Sensing at time 0.
inline RunMetrics compute_metrics(const Trace& trace) {
    RunMetrics m;
    m.duration = trace.duration;
    SuMode current = SuMode::Sensing;
    double since = 0.0;
    double normal_total = 0.0;
    std::uint64_t normal_sojourns = 0;
    double prev = 0.0;
    for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const auto& r = trace.records[i];
        if (r.time < prev) throw ParseError(i + 2, "record time goes backwards");
        prev = r.time;
        switch (r.kind) {
        case EventKind::ModeChange: {
            const double dt = r.time - since;
            m.mode_occupancy[static_cast<std::size_t>(current)] += dt;
            if (current == SuMode::Normal) normal_total += dt;
            if (*r.to_mode == SuMode::Normal && current != SuMode::Normal) ++normal_sojourns;
            current = *r.to_mode;
            since = r.time;
            break;
        }
        case EventKind::NegotiationEnd:
            ++m.negotiations;
            if (*r.outcome == Outcome::Refuse) ++m.refusals;
            break;
        case EventKind::Handover: ++m.handovers; break;
        case EventKind::SessionEnd:
            if (r.completed.value_or(false)) ++m.sessions_completed;
            else ++m.sessions_aborted;
            break;
        default: break;
        }
    }
    const double tail = trace.duration - since;
    m.mode_occupancy[static_cast<std::size_t>(current)] += tail;
    if (current == SuMode::Normal) normal_total += tail;
    if (m.negotiations > 0)
        m.negotiation_failure_rate =
            static_cast<double>(m.refusals) / static_cast<double>(m.negotiations);
    if (normal_sojourns > 0) m.mean_time_in_c1 = normal_total / static_cast<double>(normal_sojourns);
    return m;
}

inline std::string metrics_json(const RunMetrics& m) {
    std::ostringstream os;
    os << "{\n";
    os << "  \"schema\": \"" << kMetricsSchema << "\",\n";
    os << "  \"duration\": " << format_sig9(m.duration) << ",\n";
    os << "  \"negotiations\": " << m.negotiations << ",\n";
    os << "  \"refusals\": " << m.refusals << ",\n";
    os << "  \"negotiation_failure_rate\": "
       << (m.negotiation_failure_rate ? format_sig9(*m.negotiation_failure_rate) : "null") << ",\n";
    os << "  \"handovers\": " << m.handovers << ",\n";
    os << "  \"mode_occupancy\": {";
    for (std::size_t i = 0; i < selfmgmt::kModes.size(); ++i) {
        os << (i ? ", " : "") << '"' << selfmgmt::to_string(selfmgmt::kModes[i])
           << "\": " << format_sig9(m.mode_occupancy[i]);
    }
    os << "},\n";
    os << "  \"sessions_completed\": " << m.sessions_completed << ",\n";
    os << "  \"sessions_aborted\": " << m.sessions_aborted << ",\n";
    os << "  \"mean_time_in_c1\": " << format_sig9(m.mean_time_in_c1) << "\n";
    os << "}\n";
    return os.str();
}

inline std::string metrics_csv(const RunMetrics& m) {
    std::ostringstream os;
    os << "duration,negotiations,refusals,negotiation_failure_rate,handovers,"
          "occupancy_sensing,occupancy_normal,occupancy_warning,occupancy_failure,"
          "sessions_completed,sessions_aborted,mean_time_in_c1\n";
    os << format_sig9(m.duration) << ',' << m.negotiations << ',' << m.refusals << ','
       << (m.negotiation_failure_rate ? format_sig9(*m.negotiation_failure_rate) : "") << ','
       << m.handovers;
    for (double v : m.mode_occupancy) os << ',' << format_sig9(v);
    os << ',' << m.sessions_completed << ',' << m.sessions_aborted << ','
       << format_sig9(m.mean_time_in_c1) << '\n';
    return os.str();
}

} // namespace cogmesh::engine
