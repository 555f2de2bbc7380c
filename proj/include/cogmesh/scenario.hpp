#pragma once

#include "cogmesh/error.hpp"
#include "cogmesh/markov.hpp"
#include "cogmesh/qos.hpp"
#include "cogmesh/spectrum.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace cogmesh::scenario {

inline constexpr int kScenarioSchema = 1;
// The only supported way of combining per-parameter classes. It is an
// interpretation, kept visible in the configuration.
inline constexpr std::string_view kWorstOfFour = "worst-of-four";

enum class SessionDistribution { Exponential, Fixed };

struct SuConfig {
    double sensing_period = 1.0;
    double monitor_period = 5.0;
    SessionDistribution session_distribution = SessionDistribution::Exponential;
    // Mean transmission seconds a video-conference session needs.
    double session_mean = 600.0;
    // Seconds a session may go without service before it is aborted.
    double max_outage = 120.0;
    double negotiation_latency = 0.1;
    bool handover_enabled = true;
};

struct LearningConfig {
    bool enabled = true;
    double alpha = 1.0;
};

struct ScenarioConfig {
    std::vector<spectrum::Channel> channels;
    std::vector<spectrum::PrimaryUser> primary_users;
    SuConfig su;
    LearningConfig learning;
    std::optional<markov::OccupancyModel> markov;
    std::string qos_combination{kWorstOfFour};
    double duration = 3600.0;
    std::uint64_t seed = 1;
};

namespace detail {

// Walks a JSON document and records every violation instead of stopping at
// the first one.
class Reader {
public:
    std::vector<std::string> violations;

    void fail(const std::string& path, const std::string& msg) {
        violations.push_back(path + ": " + msg);
    }

    bool object(const nlohmann::json& j, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
        if (!j.is_object()) {
            fail(path, "must be an object");
            return false;
        }
        for (auto it = j.begin(); it != j.end(); ++it)
            if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
                fail(path + "." + it.key(), "unknown key");
        return true;
    }

    void number(const nlohmann::json& j, const std::string& key, const std::string& path,
                double& out, bool required = false) {
        if (!j.contains(key)) {
            if (required) fail(path + "." + key, "is required");
            return;
        }
        const auto& v = j.at(key);
        if (!v.is_number()) return fail(path + "." + key, "must be a number");
        out = v.get<double>();
        if (!std::isfinite(out)) fail(path + "." + key, "must be finite");
    }

    void integer(const nlohmann::json& j, const std::string& key, const std::string& path,
                 int& out, bool required = false) {
        if (!j.contains(key)) {
            if (required) fail(path + "." + key, "is required");
            return;
        }
        const auto& v = j.at(key);
        if (!v.is_number_integer()) return fail(path + "." + key, "must be an integer");
        out = v.get<int>();
    }

    void boolean(const nlohmann::json& j, const std::string& key, const std::string& path,
                 bool& out) {
        if (!j.contains(key)) return;
        const auto& v = j.at(key);
        if (!v.is_boolean()) return fail(path + "." + key, "must be a boolean");
        out = v.get<bool>();
    }

    qos::QosMeasurement measurement(const nlohmann::json& j, const std::string& path,
                                    bool required) {
        qos::QosMeasurement m;
        if (!object(j, path, {"bandwidth_kbps", "delay_ms", "jitter_ms", "error_rate_pct"}))
            return m;
        for (auto p : qos::kParameters) {
            const auto key = std::string(key_of(p));
            number(j, key, path, qos::get(m, p), required);
            if (qos::get(m, p) < 0.0) fail(path + "." + key, "must be non-negative");
        }
        if (m.error_rate_pct > 100.0) fail(path + ".error_rate_pct", "must be at most 100");
        return m;
    }

    static std::string_view key_of(qos::Parameter p) {
        switch (p) {
        case qos::Parameter::Bandwidth: return "bandwidth_kbps";
        case qos::Parameter::Delay: return "delay_ms";
        case qos::Parameter::Jitter: return "jitter_ms";
        case qos::Parameter::Error: return "error_rate_pct";
        }
        return "";
    }
};

} // namespace detail

/// Parses and validates a scenario document. Throws ValidationError listing
/// every violation.
inline ScenarioConfig parse_scenario(const nlohmann::json& doc) {
    detail::Reader rd;
    ScenarioConfig cfg;
    if (!rd.object(doc, "$",
                   {"schema", "seed", "duration", "channels", "primary_users", "su", "learning",
                    "markov", "qos"}))
        throw ValidationError(std::move(rd.violations));

    if (!doc.contains("schema")) rd.fail("$.schema", "is required");
    else if (!doc["schema"].is_number_integer() || doc["schema"].get<int>() != kScenarioSchema)
        rd.fail("$.schema", "must be " + std::to_string(kScenarioSchema));

    if (doc.contains("seed")) {
        const auto& s = doc["seed"];
        if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0))
            rd.fail("$.seed", "must be a non-negative integer");
        else cfg.seed = doc["seed"].get<std::uint64_t>();
    }
    rd.number(doc, "duration", "$", cfg.duration);
    if (!(cfg.duration > 0.0)) rd.fail("$.duration", "must be positive");

    std::set<int> channel_ids, pu_ids;
    std::map<int, int> pus_per_band;
    if (!doc.contains("primary_users") || !doc["primary_users"].is_array()) {
        rd.fail("$.primary_users", "must be an array");
    } else {
        std::size_t k = 0;
        for (const auto& p : doc["primary_users"]) {
            const auto path = "$.primary_users[" + std::to_string(k++) + "]";
            if (!rd.object(p, path, {"id", "band_id", "coop_prob", "arrival_rate", "service_rate"}))
                continue;
            spectrum::PrimaryUser pu;
            rd.integer(p, "id", path, pu.id, true);
            rd.integer(p, "band_id", path, pu.band_id, true);
            rd.number(p, "coop_prob", path, pu.coop_prob, true);
            rd.number(p, "arrival_rate", path, pu.arrival_rate);
            rd.number(p, "service_rate", path, pu.service_rate);
            if (pu.coop_prob < 0.0 || pu.coop_prob > 1.0) rd.fail(path + ".coop_prob", "must be in [0,1]");
            if (pu.arrival_rate < 0.0) rd.fail(path + ".arrival_rate", "must be non-negative");
            if (pu.service_rate < 0.0) rd.fail(path + ".service_rate", "must be non-negative");
            if (pu.arrival_rate > 0.0 && !(pu.service_rate > 0.0))
                rd.fail(path + ".service_rate", "must be positive when arrival_rate is");
            if (!pu_ids.insert(pu.id).second) rd.fail(path + ".id", "duplicate PU id");
            ++pus_per_band[pu.band_id];
            cfg.primary_users.push_back(pu);
        }
    }

    if (!doc.contains("channels") || !doc["channels"].is_array() || doc["channels"].empty()) {
        rd.fail("$.channels", "must be a non-empty array");
    } else {
        std::size_t k = 0;
        for (const auto& c : doc["channels"]) {
            const auto path = "$.channels[" + std::to_string(k++) + "]";
            if (!rd.object(c, path, {"id", "band_id", "qos_mean", "qos_spread"})) continue;
            spectrum::Channel ch;
            rd.integer(c, "id", path, ch.id, true);
            rd.integer(c, "band_id", path, ch.band_id, true);
            if (!c.contains("qos_mean")) rd.fail(path + ".qos_mean", "is required");
            else ch.qos_mean = rd.measurement(c["qos_mean"], path + ".qos_mean", true);
            if (c.contains("qos_spread"))
                ch.qos_spread = rd.measurement(c["qos_spread"], path + ".qos_spread", false);
            if (!channel_ids.insert(ch.id).second) rd.fail(path + ".id", "duplicate channel id");
            const auto owners = pus_per_band.count(ch.band_id) ? pus_per_band[ch.band_id] : 0;
            if (owners != 1)
                rd.fail(path + ".band_id", "band " + std::to_string(ch.band_id) + " has " +
                                               std::to_string(owners) +
                                               " primary users, expected exactly one");
            cfg.channels.push_back(ch);
        }
    }

    if (doc.contains("su")) {
        const auto& s = doc["su"];
        if (rd.object(s, "$.su",
                      {"sensing_period", "monitor_period", "session_distribution", "session_mean",
                       "max_outage", "negotiation_latency", "handover_enabled"})) {
            rd.number(s, "sensing_period", "$.su", cfg.su.sensing_period);
            rd.number(s, "monitor_period", "$.su", cfg.su.monitor_period);
            rd.number(s, "session_mean", "$.su", cfg.su.session_mean);
            rd.number(s, "max_outage", "$.su", cfg.su.max_outage);
            rd.number(s, "negotiation_latency", "$.su", cfg.su.negotiation_latency);
            rd.boolean(s, "handover_enabled", "$.su", cfg.su.handover_enabled);
            if (s.contains("session_distribution")) {
                const auto& d = s["session_distribution"];
                if (d == "exponential") cfg.su.session_distribution = SessionDistribution::Exponential;
                else if (d == "fixed") cfg.su.session_distribution = SessionDistribution::Fixed;
                else rd.fail("$.su.session_distribution", "must be \"exponential\" or \"fixed\"");
            }
            if (!(cfg.su.sensing_period > 0.0)) rd.fail("$.su.sensing_period", "must be positive");
            if (!(cfg.su.monitor_period > 0.0)) rd.fail("$.su.monitor_period", "must be positive");
            if (!(cfg.su.session_mean > 0.0)) rd.fail("$.su.session_mean", "must be positive");
            if (!(cfg.su.max_outage > 0.0)) rd.fail("$.su.max_outage", "must be positive");
            if (cfg.su.negotiation_latency < 0.0)
                rd.fail("$.su.negotiation_latency", "must be non-negative");
        }
    }

    if (doc.contains("learning")) {
        const auto& l = doc["learning"];
        if (rd.object(l, "$.learning", {"enabled", "alpha"})) {
            rd.boolean(l, "enabled", "$.learning", cfg.learning.enabled);
            rd.number(l, "alpha", "$.learning", cfg.learning.alpha);
            if (!(cfg.learning.alpha > 0.0)) rd.fail("$.learning.alpha", "must be positive");
        }
    }

    if (doc.contains("qos")) {
        const auto& q = doc["qos"];
        if (rd.object(q, "$.qos", {"combination"}) && q.contains("combination")) {
            if (q["combination"] != kWorstOfFour)
                rd.fail("$.qos.combination", "only \"worst-of-four\" is supported");
        }
    }

    if (doc.contains("markov")) {
        const auto& m = doc["markov"];
        if (rd.object(m, "$.markov", {"channels", "lambda_p", "mu_p", "lambda_s", "mu_s"})) {
            markov::OccupancyModel om;
            rd.integer(m, "channels", "$.markov", om.channels, true);
            rd.number(m, "lambda_p", "$.markov", om.lambda_p, true);
            rd.number(m, "mu_p", "$.markov", om.mu_p, true);
            rd.number(m, "lambda_s", "$.markov", om.lambda_s, true);
            rd.number(m, "mu_s", "$.markov", om.mu_s, true);
            try {
                markov::validate(om);
            } catch (const ValidationError& e) {
                for (const auto& v : e.violations()) rd.fail("$.markov", v);
            }
            cfg.markov = om;
        }
    }

    if (!rd.violations.empty()) throw ValidationError(std::move(rd.violations));
    return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open file");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError({path + ": " + e.what()});
    }
    return parse_scenario(doc);
}

} // namespace cogmesh::scenario
