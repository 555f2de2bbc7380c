#pragma once

#include "cogmesh/engine.hpp"
#include "cogmesh/error.hpp"
#include "cogmesh/format.hpp"
#include "cogmesh/knowledge.hpp"
#include "cogmesh/l2conf.hpp"
#include "cogmesh/markov.hpp"
#include "cogmesh/scenario.hpp"
#include "cogmesh/trace.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace cogmesh::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;
inline constexpr int kExitUsage = 64;

inline constexpr std::string_view kL2Schema = "cogmesh-l2/1";

struct Topology {
    std::vector<l2conf::NodeChannels> nodes;
    int m_channels = 1;
    int rounds = 1;
};

/// Reads a topology document: {"schema": 1, "m": int?, "rounds": int?,
/// "nodes": [{"node", "channels", "neighbors"}]}. `m` defaults to the
/// largest channel set.
inline Topology parse_topology(const nlohmann::json& doc) {
    std::vector<std::string> v;
    Topology t;
    if (!doc.is_object()) throw ValidationError({"$: must be an object"});
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "schema" && it.key() != "m" && it.key() != "rounds" && it.key() != "nodes")
            v.push_back("$." + it.key() + ": unknown key");
    if (doc.value("schema", 0) != 1) v.push_back("$.schema: must be 1");
    if (!doc.contains("nodes") || !doc["nodes"].is_array() || doc["nodes"].empty()) {
        v.push_back("$.nodes: must be a non-empty array");
        throw ValidationError(std::move(v));
    }
    std::size_t k = 0;
    std::size_t widest = 1;
    for (const auto& n : doc["nodes"]) {
        const auto path = "$.nodes[" + std::to_string(k++) + "]";
        l2conf::NodeChannels nc;
        try {
            for (auto it = n.begin(); it != n.end(); ++it)
                if (it.key() != "node" && it.key() != "channels" && it.key() != "neighbors")
                    v.push_back(path + "." + it.key() + ": unknown key");
            nc.node = n.at("node").get<int>();
            for (int c : n.at("channels").get<std::vector<int>>()) nc.channels.insert(c);
            for (int nb : n.value("neighbors", std::vector<int>{})) nc.neighbors.insert(nb);
        } catch (const nlohmann::json::exception& e) {
            v.push_back(path + ": " + e.what());
            continue;
        }
        if (nc.channels.empty()) v.push_back(path + ".channels: must be non-empty");
        widest = std::max(widest, nc.channels.size());
        t.nodes.push_back(std::move(nc));
    }
    t.m_channels = static_cast<int>(widest);
    if (doc.contains("m")) {
        if (!doc["m"].is_number_integer() || doc["m"].get<int>() < 1)
            v.push_back("$.m: must be a positive integer");
        else t.m_channels = doc["m"].get<int>();
    }
    if (doc.contains("rounds")) {
        if (!doc["rounds"].is_number_integer() || doc["rounds"].get<int>() < 1)
            v.push_back("$.rounds: must be a positive integer");
        else t.rounds = doc["rounds"].get<int>();
    }
    if (!v.empty()) throw ValidationError(std::move(v));
    return t;
}

inline nlohmann::json discovery_json(const Topology& t, const l2conf::DiscoveryResult& r) {
    nlohmann::json j;
    j["schema"] = kL2Schema;
    j["n_nodes"] = t.nodes.size();
    j["m"] = t.m_channels;
    j["rounds"] = t.rounds;
    j["slots"] = r.slots;
    j["transmissions"] = r.transmissions.size();
    j["collisions"] = r.collisions();
    j["discovery"] = nlohmann::json::object();
    for (const auto& [node, heard] : r.common) {
        auto& row = j["discovery"][std::to_string(node)];
        row = nlohmann::json::object();
        for (const auto& [nb, chans] : heard)
            row[std::to_string(nb)] = std::vector<int>(chans.begin(), chans.end());
    }
    return j;
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open file");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError({path + ": " + e.what()});
    }
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << content;
    if (!out) throw IoError(path.string() + ": write failed");
}

inline std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto log = std::make_shared<spdlog::logger>("cogmesh", sink);
    log->set_pattern("cogmesh: %l: %v");
    const char* env = std::getenv("COGMESH_LOG");
    const std::string level = env ? env : "error";
    if (level == "debug") log->set_level(spdlog::level::debug);
    else if (level == "info") log->set_level(spdlog::level::info);
    else log->set_level(spdlog::level::err);
    return log;
}

/// Entry point behind the `cogmesh` binary. Data goes to `out`, diagnostics
/// and errors to `err`.
inline int cli_run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Autonomic cognitive-radio SU simulator and analysis toolkit", "cogmesh"};
    app.require_subcommand(1);

    std::string config, outdir, dump_kb, load_kb, topology, l2out;
    std::uint64_t seed = 0;
    double duration = 0.0;
    int rounds = 0;
    unsigned seeds = 20, jobs = 1;
    std::uint64_t first_seed = 1;

    auto* run_cmd = app.add_subcommand("run", "Run one seeded simulation and write its trace and metrics");
    run_cmd->add_option("--config", config, "Scenario JSON file")->required();
    auto* seed_opt = run_cmd->add_option("--seed", seed, "Run seed (overrides the scenario)");
    auto* dur_opt = run_cmd->add_option("--duration", duration, "Simulated seconds (overrides the scenario)");
    run_cmd->add_option("--out", outdir, "Output directory for trace.jsonl, metrics.json, metrics.csv")
        ->required();
    run_cmd->add_option("--dump-kb", dump_kb, "Write the final knowledge base as JSON");
    run_cmd->add_option("--load-kb", load_kb, "Start from a dumped knowledge base");

    auto* analyze_cmd = app.add_subcommand("analyze", "Print Markov blocking and non-completion probabilities");
    analyze_cmd->add_option("--config", config, "Scenario JSON file with a markov block")->required();

    auto* l2_cmd = app.add_subcommand("l2sim", "Replay TDMA channel discovery and emit the discovery map");
    l2_cmd->add_option("--topology", topology, "Topology JSON file")->required();
    l2_cmd->add_option("--out", l2out, "Write the discovery map here instead of standard output");
    auto* rounds_opt = l2_cmd->add_option("--rounds", rounds, "Phase 1 rounds (overrides the topology)");

    auto* cmp_cmd = app.add_subcommand("compare-learning", "Paired negotiation failure rates with learning on and off");
    cmp_cmd->add_option("--config", config, "Scenario JSON file")->required();
    cmp_cmd->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
    cmp_cmd->add_option("--first-seed", first_seed, "First seed of the sweep");
    auto* cmp_dur = cmp_cmd->add_option("--duration", duration, "Simulated seconds per run (overrides the scenario)");
    cmp_cmd->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

    auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file and exit");
    validate_cmd->add_option("--config", config, "Scenario JSON file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto parsed = app.get_subcommands();
        out << (parsed.empty() ? app.help() : parsed.front()->help());
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "cogmesh: usage-error: " << e.what() << '\n' << app.help();
        return kExitUsage;
    }

    auto log = make_logger(err);
    try {
        if (*run_cmd) {
            auto cfg = scenario::load_scenario(config);
            if (*seed_opt) cfg.seed = seed;
            if (*dur_opt) cfg.duration = duration;
            std::optional<knowledge::KnowledgeBase> prior;
            if (!load_kb.empty()) {
                prior.emplace(cfg.channels, cfg.primary_users, cfg.learning.alpha);
                prior->load_json(read_json_file(load_kb));
            }
            log->info("run seed={} duration={}", cfg.seed, format_sig9(cfg.duration));
            auto result = engine::run(cfg, cfg.seed, cfg.duration, prior ? &*prior : nullptr);
            std::filesystem::create_directories(outdir);
            std::ostringstream trace;
            engine::write_trace(trace, result.trace);
            write_file(std::filesystem::path(outdir) / "trace.jsonl", trace.str());
            write_file(std::filesystem::path(outdir) / "metrics.json", engine::metrics_json(result.metrics));
            write_file(std::filesystem::path(outdir) / "metrics.csv", engine::metrics_csv(result.metrics));
            if (!dump_kb.empty()) write_file(dump_kb, result.kb.to_json().dump(2) + "\n");
            log->info("wrote {} records to {}", result.trace.records.size(), outdir);
        } else if (*analyze_cmd) {
            const auto cfg = scenario::load_scenario(config);
            if (!cfg.markov) throw ValidationError({config + ": $.markov: is required for analyze"});
            const auto& m = *cfg.markov;
            const auto g = markov::build_generator(m);
            const auto d = markov::stationary(g);
            log->debug("residual={}", format_sig9(d.residual()));
            out << "states=" << g.size() << '\n';
            out << "blocking=" << format_fixed9(markov::blocking_probability(d, m)) << '\n';
            try {
                out << "noncompletion=" << format_fixed9(markov::noncompletion_probability(d, m)) << '\n';
            } catch (const UndefinedMetricError&) {
                out << "noncompletion=undefined\n";
            }
        } else if (*l2_cmd) {
            auto topo = parse_topology(read_json_file(topology));
            if (*rounds_opt) {
                if (rounds < 1) throw ValidationError({"--rounds: must be positive"});
                topo.rounds = rounds;
            }
            const l2conf::TdmaLayout layout{static_cast<int>(topo.nodes.size()), topo.m_channels,
                                            l2conf::Phase::Phase1};
            const auto result = l2conf::discover(topo.nodes, layout, topo.rounds);
            const auto doc = discovery_json(topo, result).dump(2) + "\n";
            if (l2out.empty()) out << doc;
            else write_file(l2out, doc);
        } else if (*cmp_cmd) {
            auto cfg = scenario::load_scenario(config);
            if (*cmp_dur) cfg.duration = duration;
            std::vector<std::uint64_t> list(seeds);
            std::iota(list.begin(), list.end(), first_seed);
            const auto r = engine::compare_learning(cfg, list, cfg.duration, jobs);
            out << "seeds=" << list.size() << '\n';
            out << "pairs=" << r.pairs << '\n';
            out << "mean_failure_on=" << format_fixed9(r.mean_on) << '\n';
            out << "mean_failure_off=" << format_fixed9(r.mean_off) << '\n';
            out << "mean_difference=" << format_fixed9(r.mean_difference) << '\n';
            out << "difference_std_error=" << format_fixed9(r.difference_std_error) << '\n';
        } else if (*validate_cmd) {
            scenario::load_scenario(config);
        }
    } catch (const ValidationError& e) {
        for (const auto& v : e.violations()) err << "cogmesh: " << e.kind() << ": " << v << '\n';
        return kExitValidation;
    } catch (const Error& e) {
        err << "cogmesh: " << e.kind() << ": " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "cogmesh: runtime-error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

} // namespace cogmesh::cli
