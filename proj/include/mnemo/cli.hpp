#pragma once

#include "mnemo/agent.hpp"
#include "mnemo/config.hpp"
#include "mnemo/fixtures.hpp"
#include "mnemo/hindsight.hpp"
#include "mnemo/optimizer.hpp"
#include "mnemo/remote_embedding.hpp"
#include "mnemo/rewards.hpp"
#include "mnemo/store.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <iostream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

// Single-binary command surface. Each subcommand reads and writes the
// line-delimited record formats; diagnostics go to err as "error: Kind(detail)".
//
// Exit status: 0 ok, 1 library error, 2 usage error.
namespace mnemo {

inline std::shared_ptr<const EmbeddingProvider> make_provider(const Config& c) {
    if (c.provider == ProviderKind::remote) {
        return std::make_shared<RemoteEmbedder>(
            c.endpoint, c.dimension, std::chrono::milliseconds(static_cast<long long>(c.timeout_s * 1000.0)));
    }
    return std::make_shared<HashingEmbedder>(c.dimension);
}

namespace cli_detail {

inline void emit(std::ostream& out, const std::optional<std::string>& path, const std::vector<Json>& records) {
    const auto body = join_records(records);
    if (path) {
        write_file_atomic(*path, body);
    } else {
        out << body;
    }
}

// A name from the fixture manifest, or a path to an environment file.
inline EnvironmentSpec resolve_environment(const std::string& name, const std::string& fixture_dir) {
    if (fs::is_regular_file(name)) return load_environment(name);
    return FixtureSet(fixture_dir.empty() ? default_fixture_dir() : fs::path(fixture_dir))
        .load_as<EnvironmentSpec>(name);
}

inline std::unique_ptr<MemoryRepository> open_store(const std::optional<std::string>& dir, const Config& c) {
    auto provider = make_provider(c);
    if (!dir) return std::make_unique<MemoryRepository>(provider);
    return load(*dir, provider);
}

inline GroundTruth ground_truth_from_json(const Json& j) {
    detail::reject_unknown_keys(j, {"action", "target_box", "target_answer"}, "ground_truth");
    GroundTruth gt;
    const auto name = detail::as_string(detail::require(j, "action"), "action");
    auto kind = parse_action_kind(name);
    if (!kind) throw Error(ErrorCode::malformed_record, "unknown action " + name);
    gt.action_kind = *kind;
    if (auto it = j.find("target_box"); it != j.end() && !it->is_null()) gt.target_box = bbox_from_json(*it);
    if (auto it = j.find("target_answer"); it != j.end() && !it->is_null()) {
        gt.target_answer = detail::as_string(*it, "target_answer");
    }
    return gt;
}

// Batch file: one record per sequence,
//   {"group": <id>, "reward": r, "tokens": [[logp_cur, logp_old, logp_ref], ...]}
// Groups keep the order of their first appearance.
inline std::pair<OptimizationBatch, std::vector<std::string>> read_batch(const fs::path& path) {
    OptimizationBatch batch;
    std::vector<std::string> ids;
    std::map<std::string, std::size_t> index;
    for (const auto& j : read_records(path)) {
        if (!j.is_object()) throw Error(ErrorCode::malformed_record, "sequence record must be an object");
        detail::reject_unknown_keys(j, {"format_version", "group", "reward", "tokens"}, "sequence record");
        const auto& g = detail::require(j, "group");
        const std::string gid = g.is_string() ? g.get<std::string>() : g.dump();
        SequenceSample s;
        s.reward = detail::as_real(detail::require(j, "reward"), "reward");
        const auto& tokens = detail::require(j, "tokens");
        if (!tokens.is_array()) throw Error(ErrorCode::malformed_record, "tokens must be a list");
        for (const auto& t : tokens) {
            if (!t.is_array() || t.size() != 3) throw Error(ErrorCode::length_mismatch, "token needs 3 log-probs");
            s.logp.current.push_back(detail::as_real(t[0], "logp"));
            s.logp.old.push_back(detail::as_real(t[1], "logp"));
            s.logp.reference.push_back(detail::as_real(t[2], "logp"));
        }
        auto [it, fresh] = index.emplace(gid, batch.groups.size());
        if (fresh) {
            batch.groups.emplace_back();
            ids.push_back(gid);
        }
        batch.groups[it->second].push_back(std::move(s));
    }
    return {std::move(batch), std::move(ids)};
}

} // namespace cli_detail

inline int cli_dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"mnemo: hierarchical agent memory, reward and training-kernel tools"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "mnemo 1.0");

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (default: $MNEMO_CONFIG)");

    // Flag overrides shared by several subcommands.
    struct Overrides {
        std::size_t top_k = 0, horizon = 0, dimension = 0, min_steps = 0, failure_cap = 0;
        double lambda = 0, beta = 0, k = 0, big_k = 0;
        std::string strategy, provider, endpoint;
        std::uint64_t seed = 0;
        std::size_t n_ground = 0, n_evolve = 0;
    } ov;
    std::map<std::string, CLI::Option*> opts;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Add rules and trajectory records to a memory store");
    std::string ingest_store;
    std::vector<std::string> ingest_traj, ingest_rules;
    ingest->add_option("--store", ingest_store, "Store directory")->required();
    ingest->add_option("--trajectories", ingest_traj, "Trajectory record files");
    ingest->add_option("--rules", ingest_rules, "Rule record files ({\"rule\",\"source\"} per line)");
    opts["ingest.dimension"] = ingest->add_option("--dimension", ov.dimension, "Embedding dimension");

    // query-memory
    auto* query = app.add_subcommand("query-memory", "Retrieve semantic and experiential entries");
    std::string q_store, q_text, q_obs;
    std::optional<std::string> q_out;
    query->add_option("--store", q_store, "Store directory")->required();
    query->add_option("--instruction", q_text, "Task instruction")->required();
    query->add_option("--observation", q_obs, "Observation record (JSON text or file)");
    query->add_option("--out", q_out, "Output file (default stdout)");
    opts["query.top_k"] = query->add_option("--top-k", ov.top_k, "K");
    opts["query.lambda"] = query->add_option("--lambda", ov.lambda, "Intent weight in [0,1]");
    opts["query.strategy"] = query->add_option("--strategy", ov.strategy, "top_k | mixed | success_only");

    // reward-eval
    auto* reward = app.add_subcommand("reward-eval", "Score agent outputs against ground truth");
    std::string r_in;
    std::optional<std::string> r_out;
    reward->add_option("--in", r_in, "Records {\"id\",\"output\",\"ground_truth\"}")->required();
    reward->add_option("--out", r_out, "Output file (default stdout)");

    // grpo-step
    auto* grpo = app.add_subcommand("grpo-step", "Evaluate the clipped group objective on a batch");
    std::string g_batch;
    std::optional<std::string> g_out;
    grpo->add_option("--batch", g_batch, "Sequence records")->required();
    grpo->add_option("--out", g_out, "Output file (default stdout)");
    opts["grpo.k"] = grpo->add_option("--k", ov.k, "Training progress k");
    opts["grpo.K"] = grpo->add_option("--K", ov.big_k, "Total steps K");
    opts["grpo.beta"] = grpo->add_option("--beta", ov.beta, "KL coefficient");

    // relabel
    auto* relabel = app.add_subcommand("relabel", "Relabel failed trajectories with verified sub-goals");
    std::string rl_in, rl_verifier = "fixture", rl_fixture, rl_fixture_dir;
    std::optional<std::string> rl_out;
    relabel->add_option("--in", rl_in, "Trajectory records")->required();
    relabel->add_option("--verifier", rl_verifier, "Verifier kind (fixture)");
    relabel->add_option("--fixture", rl_fixture, "Environment fixture name or file")->required();
    relabel->add_option("--fixture-dir", rl_fixture_dir, "Fixture directory");
    relabel->add_option("--out", rl_out, "Output file (default stdout)");

    // split
    auto* split = app.add_subcommand("split", "Filter a pool and build ground/evolve splits");
    std::vector<std::string> sp_in;
    std::string sp_dir;
    split->add_option("--in", sp_in, "Trajectory record files")->required();
    split->add_option("--out-dir", sp_dir, "Output directory")->required();
    opts["split.n_ground"] = split->add_option("--n-ground", ov.n_ground, "Ground split size");
    opts["split.n_evolve"] = split->add_option("--n-evolve", ov.n_evolve, "Evolve split size");
    opts["split.seed"] = split->add_option("--seed", ov.seed, "Shuffle seed");
    opts["split.min_steps"] = split->add_option("--min-steps", ov.min_steps, "Minimum trajectory length");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run scripted episodes in an environment fixture");
    std::string s_fixture, s_policy = "oracle", s_task, s_fixture_dir;
    std::optional<std::string> s_store, s_out, s_results;
    std::size_t s_episodes = 1;
    bool s_no_seed = false, s_no_jitter = false;
    sim->add_option("--fixture", s_fixture, "Environment fixture name or file")->required();
    sim->add_option("--fixture-dir", s_fixture_dir, "Fixture directory");
    sim->add_option("--policy", s_policy, "oracle | guided | blind | malformed");
    sim->add_option("--task", s_task, "Task id (default: first task)");
    sim->add_option("--episodes", s_episodes, "Number of episodes");
    sim->add_option("--store", s_store, "Memory store directory (loaded, then saved)");
    sim->add_option("--out", s_out, "Trajectory records of every episode");
    sim->add_option("--results", s_results, "Episode result records");
    sim->add_flag("--no-seed-memory", s_no_seed, "Do not load the fixture's memory seed");
    sim->add_flag("--no-jitter", s_no_jitter, "Disable layout jitter");
    opts["sim.seed"] = sim->add_option("--seed", ov.seed, "Base seed; episode i uses seed + i");
    opts["sim.failure_cap"] = sim->add_option("--failure-cap", ov.failure_cap, "Unparseable outputs tolerated");
    opts["sim.strategy"] = sim->add_option("--strategy", ov.strategy, "top_k | mixed | success_only");

    // stats
    auto* stats = app.add_subcommand("stats", "Summarize a store or record files");
    std::optional<std::string> st_store;
    std::vector<std::string> st_in;
    stats->add_option("--store", st_store, "Store directory");
    stats->add_option("--in", st_in, "Trajectory record files");

    for (auto* sub : {ingest, query, sim}) {
        opts[std::string(sub->get_name()) + ".provider"] =
            sub->add_option("--provider", ov.provider, "hashing | remote");
        opts[std::string(sub->get_name()) + ".endpoint"] = sub->add_option("--endpoint", ov.endpoint, "Remote URL");
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    const auto set = [&](const std::string& key) { return opts.contains(key) && opts[key]->count() > 0; };

    try {
        Config cfg = load_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path));
        for (const auto* sub : {"ingest", "query-memory", "simulate"}) {
            if (set(std::string(sub) + ".provider")) {
                if (ov.provider == "hashing") cfg.provider = ProviderKind::hashing;
                else if (ov.provider == "remote") cfg.provider = ProviderKind::remote;
                else throw Error(ErrorCode::usage_error, "--provider " + ov.provider);
            }
            if (set(std::string(sub) + ".endpoint")) cfg.endpoint = ov.endpoint;
        }
        if (set("ingest.dimension")) cfg.dimension = ov.dimension;
        if (set("query.top_k")) cfg.memory.top_k = ov.top_k;
        if (set("query.lambda")) cfg.memory.lambda = ov.lambda;
        for (const auto* key : {"query.strategy", "sim.strategy"}) {
            if (set(key)) {
                auto s = parse_retrieval_strategy(ov.strategy);
                if (!s) throw Error(ErrorCode::usage_error, "--strategy " + ov.strategy);
                cfg.strategy = *s;
            }
        }
        if (set("grpo.K")) cfg.clip.total_steps = ov.big_k;
        if (set("grpo.beta")) cfg.beta = ov.beta;
        if (set("split.n_ground")) cfg.n_ground = ov.n_ground;
        if (set("split.n_evolve")) cfg.n_evolve = ov.n_evolve;
        if (set("split.seed") || set("sim.seed")) cfg.seed = ov.seed;
        if (set("split.min_steps")) cfg.min_steps = ov.min_steps;
        if (set("sim.failure_cap")) cfg.failure_cap = ov.failure_cap;
        if (s_no_jitter) cfg.jitter = false;
        validate_config(cfg);

        if (*ingest) {
            auto repo = cli_detail::open_store(ingest_store, cfg);
            std::size_t sem = 0, exp = 0, skipped = 0;
            for (const auto& f : ingest_rules) {
                for (const auto& j : read_records(f)) {
                    detail::reject_unknown_keys(j, {"rule", "source"}, "rule record");
                    try {
                        repo->add_semantic_entry(detail::as_string(detail::require(j, "rule"), "rule"),
                                                 detail::as_string(detail::require(j, "source"), "source"));
                        ++sem;
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::duplicate_entry) throw;
                        ++skipped;
                    }
                }
            }
            for (const auto& f : ingest_traj) {
                for (const auto& r : read_trajectory_records(f)) {
                    try {
                        repo->add_experiential_entry(r.trajectory, template_summary);
                        ++exp;
                    } catch (const Error& e) {
                        if (e.code() != ErrorCode::duplicate_entry && e.code() != ErrorCode::empty_trajectory) throw;
                        ++skipped;
                    }
                }
            }
            persist(*repo, ingest_store);
            Json s = Json::object();
            s["added_semantic"] = sem;
            s["added_experiential"] = exp;
            s["skipped"] = skipped;
            s["semantic"] = repo->semantic_size();
            s["experiential"] = repo->experiential_size();
            out << dump_record(s) << "\n";
        } else if (*query) {
            auto repo = cli_detail::open_store(q_store, cfg);
            const Instruction q = validate_instruction(Instruction{q_text});
            std::vector<Json> recs;
            const auto add = [&](const char* memory, const std::vector<ScoredItem>& items) {
                for (std::size_t i = 0; i < items.size(); ++i) {
                    Json j = Json::object();
                    j["memory"] = memory;
                    j["rank"] = i + 1;
                    j["id"] = items[i].id.value;
                    j["score"] = items[i].score;
                    j["text"] = items[i].text;
                    recs.push_back(std::move(j));
                }
            };
            add("semantic", repo->retrieve_semantic(q, cfg.memory.top_k));
            if (!q_obs.empty()) {
                const std::string text = fs::is_regular_file(q_obs) ? read_file(q_obs) : q_obs;
                const auto o = validate_observation(observation_from_json(parse_record(text)));
                add("experiential",
                    repo->retrieve_experiential(q, o, cfg.memory.top_k, cfg.memory.lambda, cfg.strategy));
            } else {
                // Without an observation only the intent term can be scored.
                add("experiential", repo->retrieve_experiential(embed_text(repo->provider(), q.text),
                                                                EmbeddingVector{std::vector<double>(cfg.dimension, 0.0)},
                                                                cfg.memory.top_k, 1.0, cfg.strategy));
            }
            cli_detail::emit(out, q_out, recs);
        } else if (*reward) {
            std::vector<Json> recs;
            for (const auto& j : read_records(r_in)) {
                detail::reject_unknown_keys(j, {"id", "output", "ground_truth"}, "reward record");
                const auto gt = cli_detail::ground_truth_from_json(detail::require(j, "ground_truth"));
                const auto r = evaluate_reward(detail::as_string(detail::require(j, "output"), "output"), gt,
                                               cfg.weights);
                Json o = Json::object();
                if (j.contains("id")) o["id"] = j["id"];
                o["r_format"] = r.r_format;
                o["r_type"] = r.r_type;
                o["r_param"] = r.r_param;
                o["r_acc"] = r.r_acc;
                o["r_total"] = r.r_total;
                recs.push_back(std::move(o));
            }
            cli_detail::emit(out, r_out, recs);
        } else if (*grpo) {
            auto [batch, ids] = cli_detail::read_batch(g_batch);
            batch.beta = cfg.beta;
            batch.clip = cfg.clip;
            batch.step = set("grpo.k") ? ov.k : 0.0;
            const auto res = grpo_objective(batch);
            std::vector<Json> recs;
            Json s = Json::object();
            s["kind"] = "summary";
            s["objective"] = res.objective;
            s["eps_cur"] = res.eps_cur;
            s["k"] = batch.step;
            s["K"] = batch.clip.total_steps;
            s["groups"] = res.groups.size();
            recs.push_back(std::move(s));
            for (std::size_t g = 0; g < res.groups.size(); ++g) {
                Json gj = Json::object();
                gj["kind"] = "group";
                gj["group"] = ids[g];
                gj["objective"] = res.groups[g].objective;
                gj["advantages"] = res.groups[g].advantages;
                recs.push_back(std::move(gj));
                for (std::size_t i = 0; i < res.groups[g].sequences.size(); ++i) {
                    const auto& sr = res.groups[g].sequences[i];
                    Json sj = Json::object();
                    sj["kind"] = "sequence";
                    sj["group"] = ids[g];
                    sj["index"] = i;
                    sj["advantage"] = sr.advantage;
                    Json ratio = Json::array(), clipped = Json::array(), surrogate = Json::array(), kl = Json::array();
                    for (const auto& t : sr.tokens) {
                        ratio.push_back(t.ratio);
                        clipped.push_back(t.clipped);
                        surrogate.push_back(t.surrogate);
                        kl.push_back(t.kl);
                    }
                    sj["ratio"] = std::move(ratio);
                    sj["clipped"] = std::move(clipped);
                    sj["surrogate"] = std::move(surrogate);
                    sj["kl"] = std::move(kl);
                    recs.push_back(std::move(sj));
                }
            }
            cli_detail::emit(out, g_out, recs);
        } else if (*relabel) {
            if (rl_verifier != "fixture") throw Error(ErrorCode::usage_error, "--verifier " + rl_verifier);
            const FixtureVerifier verifier(cli_detail::resolve_environment(rl_fixture, rl_fixture_dir));
            std::vector<Trajectory> pool;
            for (const auto& r : read_trajectory_records(rl_in)) pool.push_back(r.trajectory);
            const auto samples = relabel_pool(pool, verifier);
            std::vector<Json> recs;
            for (const auto& s : samples) recs.push_back(to_json(s));
            cli_detail::emit(out, rl_out, recs);
            if (rl_out) out << "relabeled " << samples.size() << " samples from " << pool.size() << " trajectories\n";
        } else if (*split) {
            std::vector<TrajectoryRecord> pool;
            for (const auto& f : sp_in) {
                for (auto& r : read_trajectory_records(f)) pool.push_back(std::move(r));
            }
            const auto filtered = filter_trajectories(pool, FilterConfig{cfg.min_steps});
            const auto s = build_splits(filtered, cfg.n_ground, cfg.n_evolve, cfg.seed);
            write_splits(s, sp_dir);
            Json j = Json::object();
            j["pool"] = pool.size();
            j["filtered"] = filtered.size();
            j["ground"] = s.ground.size();
            j["evolve"] = s.evolve.size();
            j["unassigned"] = s.unassigned.size();
            out << dump_record(j) << "\n";
        } else if (*sim) {
            const auto spec = cli_detail::resolve_environment(s_fixture, s_fixture_dir);
            const std::string task = s_task.empty() ? spec.tasks.front().id : s_task;
            if (!spec.find_task(task)) throw Error(ErrorCode::unknown_task, task);
            auto repo = cli_detail::open_store(s_store, cfg);
            if (!s_no_seed) seed_memory(*repo, spec);
            const std::size_t before = repo->experiential_size();
            auto policy = make_policy(s_policy, spec);
            ScriptedEnvironment env(spec, cfg.seed, cfg.jitter);
            EpisodeConfig ec;
            ec.memory = cfg.memory;
            ec.strategy = cfg.strategy;
            ec.failure_cap = cfg.failure_cap;
            EpisodicStore episodic(cfg.memory.horizon);
            std::vector<Json> trajs, results;
            std::size_t successes = 0, stored = 0;
            for (std::size_t i = 0; i < s_episodes; ++i) {
                env.set_seed(cfg.seed + i);
                const auto r = run_episode(env, task, *policy, *repo, episodic, ec);
                successes += r.success ? 1 : 0;
                stored += r.stored ? 1 : 0;
                trajs.push_back(to_json(TrajectoryRecord{r.trajectory, std::string("simulate"), std::nullopt}));
                results.push_back(to_json(r));
            }
            if (s_out) write_file_atomic(*s_out, join_records(trajs));
            if (s_results) write_file_atomic(*s_results, join_records(results));
            if (s_store) persist(*repo, *s_store);
            Json j = Json::object();
            j["fixture"] = spec.name;
            j["task"] = task;
            j["policy"] = s_policy;
            j["episodes"] = s_episodes;
            j["successes"] = successes;
            j["new_entries"] = repo->experiential_size() - before;
            j["stored"] = stored;
            j["experiential"] = repo->experiential_size();
            out << dump_record(j) << "\n";
        } else if (*stats) {
            Json j = Json::object();
            if (st_store) {
                auto repo = cli_detail::open_store(st_store, cfg);
                const auto entries = repo->experiential_entries();
                j["dimension"] = repo->dimension();
                j["provider"] = std::string(to_string(repo->provider().kind()));
                j["semantic"] = repo->semantic_size();
                j["experiential"] = entries.size();
                j["experiential_success"] =
                    std::count_if(entries.begin(), entries.end(), [](const auto& e) { return e.success; });
            }
            if (!st_in.empty()) {
                std::size_t n = 0, ok = 0, steps = 0, relabeled = 0;
                for (const auto& f : st_in) {
                    for (const auto& r : read_trajectory_records(f)) {
                        ++n;
                        ok += r.trajectory.success ? 1 : 0;
                        steps += r.trajectory.transitions.size();
                        relabeled += r.provenance ? 1 : 0;
                    }
                }
                j["trajectories"] = n;
                j["successes"] = ok;
                j["steps"] = steps;
                j["relabeled"] = relabeled;
            }
            if (!st_store && st_in.empty()) throw Error(ErrorCode::usage_error, "stats needs --store or --in");
            out << dump_record(j) << "\n";
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::usage_error ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace mnemo
