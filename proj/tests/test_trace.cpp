#include "cogmesh/trace.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace cogmesh;
using namespace cogmesh::engine;

namespace {

Trace make_trace(double duration, std::vector<EventRecord> records) {
    Trace t;
    t.seed = 1;
    t.duration = duration;
    t.records = std::move(records);
    return t;
}

EventRecord mode_change(double t, SuMode from, SuMode to) {
    return {.time = t, .kind = EventKind::ModeChange, .from_mode = from, .to_mode = to};
}

EventRecord negotiation_end(double t, Outcome o) {
    return {.time = t, .kind = EventKind::NegotiationEnd, .channel = 1, .pu = 1, .outcome = o};
}

} // namespace

TEST(ComputeMetrics, FailureRateFromNegotiationEnds) {
    const auto m = compute_metrics(make_trace(
        10, {negotiation_end(1, Outcome::Cooperate), negotiation_end(2, Outcome::Refuse),
             negotiation_end(3, Outcome::Cooperate), negotiation_end(4, Outcome::Cooperate)}));
    EXPECT_EQ(m.negotiations, 4u);
    EXPECT_DOUBLE_EQ(*m.negotiation_failure_rate, 0.25);
}

TEST(ComputeMetrics, EmptyTraceIsAllSensing) {
    const auto m = compute_metrics(make_trace(123.5, {}));
    EXPECT_DOUBLE_EQ(m.occupancy(SuMode::Sensing), 123.5);
    EXPECT_DOUBLE_EQ(m.occupancy(SuMode::Normal), 0.0);
    EXPECT_FALSE(m.negotiation_failure_rate);
    EXPECT_EQ(m.mean_time_in_c1, 0.0);
}

TEST(ComputeMetrics, CountsHandovers) {
    std::vector<EventRecord> r;
    for (double t : {1.0, 2.0, 3.0}) r.push_back({.time = t, .kind = EventKind::Handover});
    EXPECT_EQ(compute_metrics(make_trace(5, r)).handovers, 3u);
}

TEST(ComputeMetrics, OccupancyAndNormalSojourns) {
    const auto m = compute_metrics(make_trace(
        100, {mode_change(10, SuMode::Sensing, SuMode::Normal),
              mode_change(40, SuMode::Normal, SuMode::Warning),
              mode_change(41, SuMode::Warning, SuMode::Failure),
              mode_change(41, SuMode::Failure, SuMode::Normal),
              {.time = 60, .kind = EventKind::SessionEnd, .completed = true},
              mode_change(60, SuMode::Normal, SuMode::Sensing),
              {.time = 70, .kind = EventKind::SessionEnd, .completed = false}}));
    EXPECT_DOUBLE_EQ(m.occupancy(SuMode::Sensing), 10 + 40);
    EXPECT_DOUBLE_EQ(m.occupancy(SuMode::Normal), 30 + 19);
    EXPECT_DOUBLE_EQ(m.occupancy(SuMode::Warning), 1);
    EXPECT_DOUBLE_EQ(m.occupancy(SuMode::Failure), 0);
    EXPECT_DOUBLE_EQ(m.mean_time_in_c1, 49.0 / 2.0);
    EXPECT_EQ(m.sessions_completed, 1u);
    EXPECT_EQ(m.sessions_aborted, 1u);
}

TEST(TraceIo, RoundTripPreservesRandomTraces) {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> dt(0, 3);
    std::uniform_int_distribution<int> kind(0, 9), small(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
        Trace t;
        t.seed = gen();
        t.duration = round_sig9(500 + dt(gen));
        double now = 0;
        for (int n = 0; n < 200; ++n) {
            now += dt(gen);
            EventRecord r{.time = round_sig9(now), .kind = kEventKinds[kind(gen)]};
            if (small(gen)) r.channel = small(gen);
            if (small(gen) == 0) r.pu = small(gen);
            if (small(gen) == 1) r.qos_class = static_cast<qos::QosClass>(small(gen) % 3 + 1);
            if (small(gen) == 2)
                r.measured = qos::QosMeasurement{round_sig9(dt(gen) * 100), 1, 2, round_sig9(dt(gen))};
            if (r.kind == EventKind::ModeChange || small(gen) == 3) {
                r.from_mode = selfmgmt::kModes[small(gen)];
                r.to_mode = selfmgmt::kModes[small(gen)];
            }
            if (r.kind == EventKind::NegotiationEnd || small(gen) == 0)
                r.outcome = small(gen) % 2 ? Outcome::Cooperate : Outcome::Refuse;
            if (small(gen) == 1) r.completed = small(gen) % 2;
            if (small(gen) == 2) r.blocked = false;
            if (small(gen) == 3) r.preempted = true;
            t.records.push_back(r);
        }
        std::stringstream ss;
        write_trace(ss, t);
        const auto back = read_trace(ss);
        ASSERT_EQ(back, t);
        ASSERT_EQ(compute_metrics(back), compute_metrics(t));
    }
}

TEST(TraceIo, ParseErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            read_trace(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    const std::string header = "{\"schema\":\"cogmesh-trace/1\",\"seed\":1,\"duration\":10}\n";
    EXPECT_EQ(line_of(""), 1u);
    EXPECT_EQ(line_of("{\"schema\":\"other\"}\n"), 1u);
    EXPECT_EQ(line_of(header + "{\"t\":1,\"kind\":\"Sense\"}\nnot json\n"), 3u);
    EXPECT_EQ(line_of(header + "{\"t\":1,\"kind\":\"Teleport\"}\n"), 2u);
    EXPECT_EQ(line_of(header + "{\"t\":2,\"kind\":\"Sense\"}\n{\"t\":1,\"kind\":\"Sense\"}\n"), 3u);
    EXPECT_EQ(line_of(header + "{\"t\":1,\"kind\":\"ModeChange\"}\n"), 2u);
    EXPECT_EQ(line_of(header + "{\"t\":1,\"kind\":\"Sense\",\"bogus\":1}\n"), 2u);
    EXPECT_EQ(line_of(header + "{\"t\":1,\"kind\":\"Sense\"}\n"), 0u);
}

TEST(TraceIo, FixedSignificantDigits) {
    EventRecord r{.time = 1.0 / 3.0, .kind = EventKind::Sense, .channel = 2};
    EXPECT_EQ(to_json_line(r), "{\"t\":0.333333333,\"kind\":\"Sense\",\"channel\":2}");
}

TEST(MetricsOutput, JsonAndCsvShapes) {
    RunMetrics m;
    m.duration = 10;
    m.negotiations = 4;
    m.refusals = 1;
    m.negotiation_failure_rate = 0.25;
    m.mode_occupancy = {1, 7, 2, 0};
    const auto j = nlohmann::json::parse(metrics_json(m));
    EXPECT_EQ(j["schema"], "cogmesh-metrics/1");
    EXPECT_EQ(j["negotiation_failure_rate"], 0.25);
    EXPECT_EQ(j["mode_occupancy"]["Normal"], 7);
    m.negotiation_failure_rate.reset();
    EXPECT_TRUE(nlohmann::json::parse(metrics_json(m))["negotiation_failure_rate"].is_null());
    const auto csv = metrics_csv(m);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
    EXPECT_NE(csv.find("\n10,4,1,,0,1,7,2,0,0,0,0\n"), std::string::npos);
}
