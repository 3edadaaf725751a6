#pragma once

#include "mnemo/action_parser.hpp"
#include "mnemo/error.hpp"
#include "mnemo/json_io.hpp"
#include "mnemo/optimizer.hpp"
#include "mnemo/records.hpp"
#include "mnemo/sim.hpp"

#include <cstdlib>
#include <string>
#include <variant>
#include <vector>

// Pinned test assets. A fixture directory holds MANIFEST.json:
//
//   {"format_version":1,
//    "fixtures":{"<name>":{"type":"<type>","path":"<file>","checksum":"fnv1a64:<hex>"}}}
//
// and every file it names. Checksums cover the raw file bytes.
namespace mnemo {

#ifndef MNEMO_DEFAULT_FIXTURE_DIR
#define MNEMO_DEFAULT_FIXTURE_DIR "fixtures/v1"
#endif

inline fs::path default_fixture_dir() {
    if (const char* env = std::getenv("MNEMO_FIXTURE_DIR"); env && *env) return env;
    return MNEMO_DEFAULT_FIXTURE_DIR;
}

// A memory scenario: a task, the episodic history leading up to it, and the
// semantic and experiential entries available to it.
struct MemoryScenario {
    Instruction task;
    std::vector<Transition> episodic;
    std::vector<SeedRule> semantic;
    std::vector<SeedExperience> experiential;
    Json expect; // scenario-specific expectations, read by tests
};

struct AgentOutputFixture {
    std::string text;
    ParsedAgentOutput expected;
};

struct ParserCorpus {
    std::vector<ParsedAgentOutput> items;
};

struct GrpoCase {
    OptimizationBatch batch;
    double expected_objective = 0.0;
};

struct GrpoCases {
    std::vector<GrpoCase> cases;
};

struct HashingVector {
    std::string input;
    std::size_t dimension = 0;
    std::vector<double> values;
};

struct HashingVectors {
    std::vector<HashingVector> vectors;
    Json pairs; // [{"a","b","cosine"}]
};

using FixtureContent =
    std::variant<MemoryScenario, AgentOutputFixture, ParserCorpus, GrpoCases, HashingVectors, EnvironmentSpec>;

namespace detail {

[[noreturn]] inline void bad_fixture(const std::string& what) { throw Error(ErrorCode::malformed_record, what); }

inline ParsedAgentOutput parsed_output_from_json(const Json& j) {
    ParsedAgentOutput p;
    p.progress_evaluation = j.at("progress_evaluation").get<std::string>();
    p.decision_rationale = j.at("decision_rationale").get<std::string>();
    p.history_summary = j.at("history_summary").get<std::string>();
    p.action = validate_action(action_from_json(j.at("action")));
    return p;
}

inline std::vector<double> reals(const Json& j) {
    std::vector<double> out;
    for (const auto& x : j) out.push_back(x.get<double>());
    return out;
}

inline MemoryScenario scenario_from_json(const Json& j) {
    MemoryScenario s;
    s.task.text = j.at("task").get<std::string>();
    std::size_t step = 1;
    for (const auto& m : j.value("episodic", Json::array())) {
        s.episodic.push_back(Transition{observation_from_json(m.at("pre")), action_from_json(m.at("action")),
                                        observation_from_json(m.at("post")), step++});
    }
    for (const auto& r : j.value("semantic", Json::array())) {
        s.semantic.push_back({r.at("rule").get<std::string>(), r.at("source").get<std::string>()});
    }
    for (const auto& e : j.value("experiential", Json::array())) {
        Json rec = Json::object();
        rec["format_version"] = record_format_version;
        rec["id"] = e.at("id");
        rec["goal"] = e.at("goal");
        rec["success"] = e.value("success", true);
        rec["steps"] = e.at("steps");
        s.experiential.push_back({trajectory_record_from_json(rec).trajectory, e.at("summary").get<std::string>()});
    }
    s.expect = j.value("expect", Json::object());
    return s;
}

inline GrpoCases grpo_from_json(const Json& j) {
    GrpoCases out;
    for (const auto& c : j.at("cases")) {
        GrpoCase g;
        g.batch.beta = c.at("beta").get<double>();
        g.batch.step = c.at("k").get<double>();
        g.batch.clip.total_steps = c.at("K").get<double>();
        g.batch.clip.eps_low = c.at("eps_low").get<double>();
        g.batch.clip.eps_init = c.at("eps_init").get<double>();
        g.batch.clip.eps_end = c.at("eps_end").get<double>();
        for (const auto& grp : c.at("groups")) {
            SampleGroup group;
            for (const auto& s : grp) {
                group.push_back({{reals(s.at("current")), reals(s.at("old")), reals(s.at("reference"))},
                                 s.at("reward").get<double>()});
            }
            g.batch.groups.push_back(std::move(group));
        }
        g.expected_objective = c.at("expected_objective").get<double>();
        out.cases.push_back(std::move(g));
    }
    return out;
}

inline HashingVectors hashing_from_json(const Json& j) {
    HashingVectors out;
    for (const auto& v : j.at("vectors")) {
        HashingVector h;
        h.input = v.at("input").get<std::string>();
        h.dimension = v.at("dimension").get<std::size_t>();
        h.values.assign(h.dimension, 0.0);
        for (const auto& nz : v.at("nonzero")) {
            const auto i = nz.at(0).get<std::size_t>();
            if (i >= h.dimension) bad_fixture("hashing index out of range");
            h.values[i] = nz.at(1).get<double>();
        }
        out.vectors.push_back(std::move(h));
    }
    out.pairs = j.value("pairs", Json::array());
    return out;
}

inline FixtureContent fixture_from_json(const std::string& type, const Json& j) {
    if (type == "memory_scenario") return scenario_from_json(j);
    if (type == "agent_output") {
        return AgentOutputFixture{j.at("text").get<std::string>(), parsed_output_from_json(j.at("expected"))};
    }
    if (type == "parser_corpus") {
        ParserCorpus c;
        for (const auto& item : j.at("items")) c.items.push_back(parsed_output_from_json(item));
        return c;
    }
    if (type == "grpo_batches") return grpo_from_json(j);
    if (type == "hashing_vectors") return hashing_from_json(j);
    if (type == "environment") return environment_from_json(j);
    bad_fixture("unknown fixture type " + type);
}

} // namespace detail

class FixtureSet {
public:
    explicit FixtureSet(fs::path dir = default_fixture_dir()) : dir_(std::move(dir)) {
        try {
            manifest_ = Json::parse(read_file(dir_ / "MANIFEST.json"));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::malformed_record, std::string("fixture manifest: ") + e.what());
        }
        if (manifest_.value("format_version", 0) != 1) {
            throw Error(ErrorCode::version_mismatch, "fixture manifest version");
        }
    }

    const fs::path& dir() const noexcept { return dir_; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (auto it = manifest_.at("fixtures").begin(); it != manifest_.at("fixtures").end(); ++it) {
            out.push_back(it.key());
        }
        return out;
    }

    std::string type_of(std::string_view name) const { return entry(name).at("type").get<std::string>(); }

    fs::path path_of(std::string_view name) const { return dir_ / entry(name).at("path").get<std::string>(); }

    // Raw bytes after the checksum check.
    std::string read_verified(std::string_view name) const {
        const auto& e = entry(name);
        const auto body = read_file(dir_ / e.at("path").get<std::string>());
        const auto want = e.at("checksum").get<std::string>();
        const auto got = "fnv1a64:" + hex64(fnv1a64(body));
        if (want != got) throw Error(ErrorCode::checksum_mismatch, std::string(name) + ": " + got + " != " + want);
        return body;
    }

    FixtureContent load(std::string_view name) const {
        const auto body = read_verified(name);
        try {
            return detail::fixture_from_json(type_of(name), Json::parse(body));
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::malformed_record, std::string(name) + ": " + e.what());
        }
    }

    template <class T>
    T load_as(std::string_view name) const {
        auto content = load(name);
        if (auto* v = std::get_if<T>(&content)) return std::move(*v);
        throw Error(ErrorCode::unknown_fixture, std::string(name) + " has type " + type_of(name));
    }

private:
    const Json& entry(std::string_view name) const {
        const auto& fx = manifest_.at("fixtures");
        const auto it = fx.find(std::string(name));
        if (it == fx.end()) throw Error(ErrorCode::unknown_fixture, std::string(name));
        return *it;
    }

    fs::path dir_;
    Json manifest_;
};

inline FixtureContent load_fixture(std::string_view name, const fs::path& dir = default_fixture_dir()) {
    return FixtureSet(dir).load(name);
}

template <class T>
T load_fixture_as(std::string_view name, const fs::path& dir = default_fixture_dir()) {
    return FixtureSet(dir).load_as<T>(name);
}

} // namespace mnemo
