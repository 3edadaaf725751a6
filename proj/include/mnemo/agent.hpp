#pragma once

#include "mnemo/action_parser.hpp"
#include "mnemo/memory.hpp"
#include "mnemo/records.hpp"
#include "mnemo/sim.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

// The observe -> retrieve -> act -> step loop, plus scripted policies that
// stand in for a model at desk scale.
namespace mnemo {

class Policy {
public:
    virtual ~Policy() = default;
    virtual void begin_episode(const Instruction&) {}
    // Returns agent-output text in the tagged format.
    virtual std::string act(const Observation& o, const Instruction& q, const RetrievedContext& ctx) = 0;
};

// Wraps any (Observation, Instruction, RetrievedContext) -> text callable.
class CallablePolicy final : public Policy {
public:
    using Fn = std::function<std::string(const Observation&, const Instruction&, const RetrievedContext&)>;
    explicit CallablePolicy(Fn fn) : fn_(std::move(fn)) {}
    std::string act(const Observation& o, const Instruction& q, const RetrievedContext& ctx) override {
        return fn_(o, q, ctx);
    }

private:
    Fn fn_;
};

enum class ScriptMode {
    oracle,  // knows the answer at every branch point
    guided,  // takes branch hints from retrieved experience, else the first option
    blind,   // as guided, but never looks at memory
};

// Finds "choose '<label>'" in retrieved summaries, in rank order.
inline std::optional<std::string> branch_hint(const RetrievedContext& ctx) {
    static constexpr std::string_view marker = "choose '";
    for (const auto& s : ctx.experiential) {
        const auto at = s.find(marker);
        if (at == std::string::npos) continue;
        const auto start = at + marker.size();
        const auto end = s.find('\'', start);
        if (end != std::string::npos && end > start) return s.substr(start, end - start);
    }
    return std::nullopt;
}

// Follows a task's declared solution, one step per call.
class ScriptedPolicy final : public Policy {
public:
    ScriptedPolicy(const EnvironmentSpec& spec, ScriptMode mode) : spec_(&spec), mode_(mode) {}

    void begin_episode(const Instruction& q) override {
        task_ = spec_->find_task_by_instruction(q.text);
        next_ = 0;
    }

    std::string act(const Observation& o, const Instruction&, const RetrievedContext& ctx) override {
        ParsedAgentOutput out;
        out.progress_evaluation = "On " + o.screen_id + " after " + std::to_string(next_) + " steps.";
        if (!task_ || next_ >= task_->solution.size()) {
            out.decision_rationale = "No scripted step left.";
            out.history_summary = "Waiting.";
            out.action.kind = ActionKind::wait;
            return serialize_agent_output(out);
        }
        const auto& step = task_->solution[next_++];
        std::optional<std::string> widget = step.widget;
        if (!step.options.empty()) widget = choose(step, o, ctx);

        out.action.kind = step.kind;
        out.action.value = step.value;
        const Widget* w = widget ? o.find_widget(*widget) : nullptr;
        if (widget && !w) {
            // Target is not on screen; do nothing rather than tap blindly.
            out.decision_rationale = "Expected widget " + *widget + " is missing.";
            out.history_summary = "Waiting.";
            out.action = Action{};
            return serialize_agent_output(out);
        }
        if (w) {
            if (step.kind == ActionKind::scroll) {
                out.action.region = w->box;
            } else {
                out.action.position = w->box.center();
            }
            if (!out.action.value && !w->label.empty() && step.kind != ActionKind::type_text) {
                out.action.value = w->label;
            }
        }
        out.decision_rationale = "Next step is " + describe(out.action) + ".";
        out.history_summary = "Executed " + std::to_string(next_) + " scripted steps.";
        return serialize_agent_output(out);
    }

private:
    std::string choose(const SolutionStep& step, const Observation& o, const RetrievedContext& ctx) const {
        if (mode_ == ScriptMode::oracle) return *step.answer;
        if (mode_ == ScriptMode::guided) {
            if (auto hint = branch_hint(ctx)) {
                for (const auto& id : step.options) {
                    const auto* w = o.find_widget(id);
                    if (w && w->label == *hint) return id;
                }
            }
        }
        return step.options.front();
    }

    const EnvironmentSpec* spec_;
    ScriptMode mode_;
    const TaskSpec* task_ = nullptr;
    std::size_t next_ = 0;
};

// Emits text that never parses.
class MalformedPolicy final : public Policy {
public:
    std::string act(const Observation&, const Instruction&, const RetrievedContext&) override {
        return "<Progress_Evaluation>lost</Progress_Evaluation><Answer>{'action': 'click'";
    }
};

inline std::unique_ptr<Policy> make_policy(std::string_view name, const EnvironmentSpec& spec) {
    if (name == "oracle") return std::make_unique<ScriptedPolicy>(spec, ScriptMode::oracle);
    if (name == "guided") return std::make_unique<ScriptedPolicy>(spec, ScriptMode::guided);
    if (name == "blind") return std::make_unique<ScriptedPolicy>(spec, ScriptMode::blind);
    if (name == "malformed") return std::make_unique<MalformedPolicy>();
    throw Error(ErrorCode::usage_error, "unknown policy " + std::string(name));
}

// --- episode loop ----------------------------------------------------------

struct EpisodeConfig {
    MemoryConfig memory;
    RetrievalStrategy strategy = RetrievalStrategy::top_k;
    std::size_t failure_cap = 3; // unparseable outputs tolerated before giving up
    bool use_memory = true;      // retrieve semantic/experiential context
    bool store_success = true;   // add successful trajectories to experiential memory
    Summarizer summarizer = template_summary;
};

struct EpisodeResult {
    Trajectory trajectory;
    bool success = false;
    std::size_t steps_used = 0;
    std::vector<double> rewards;         // environment reward per step
    std::vector<double> format_rewards;  // 1 if the step's output parsed
    std::size_t unparseable = 0;
    bool stored = false;                 // became a new experiential entry
};

inline Json to_json(const EpisodeResult& r) {
    Json j = Json::object();
    j["format_version"] = record_format_version;
    j["trajectory"] = to_json(r.trajectory);
    j["success"] = r.success;
    j["steps_used"] = r.steps_used;
    j["rewards"] = r.rewards;
    j["format_rewards"] = r.format_rewards;
    j["unparseable"] = r.unparseable;
    j["stored"] = r.stored;
    return j;
}

inline std::string episode_trajectory_id(const std::string& task_id, const Trajectory& t) {
    const auto k = dedup_key(t);
    return task_id + "-" + hex64(fnv1a64(hex64(k.goal_hash) + hex64(k.actions_hash)));
}

// Clears the episodic store and resets the environment to the task's start.
inline Observation reset(ScriptedEnvironment& env, std::string_view task_id, EpisodicStore& episodic) {
    auto o = env.reset(task_id);
    episodic.clear();
    return o;
}

inline EpisodeResult run_episode(ScriptedEnvironment& env, std::string_view task_id, Policy& policy,
                                 MemoryRepository& memory, EpisodicStore& episodic, const EpisodeConfig& cfg = {}) {
    auto obs = reset(env, task_id, episodic);
    const TaskSpec& task = env.task();
    policy.begin_episode(task.instruction);

    EpisodeResult result;
    result.trajectory.goal = task.instruction;
    std::size_t t = 1;
    while (!env.done()) {
        RetrievedContext ctx;
        if (cfg.use_memory) {
            ctx = retrieve_context(memory, episodic, t, task.instruction, obs, cfg.memory, cfg.strategy);
        } else {
            ctx = assemble_context(episodic.context(t, cfg.memory.horizon), {}, {});
        }
        const auto text = policy.act(obs, task.instruction, ctx);
        std::optional<ParsedAgentOutput> parsed;
        try {
            parsed = parse_agent_output(text);
        } catch (const Error&) {
        }
        if (!parsed) {
            ++result.unparseable;
            result.format_rewards.push_back(0.0);
            const auto r = env.idle_step();
            result.rewards.push_back(r.reward);
            ++t;
            if (result.unparseable >= cfg.failure_cap) break;
            continue;
        }
        result.format_rewards.push_back(1.0);
        const auto r = env.step(parsed->action);
        Transition m{obs, parsed->action, r.observation, t};
        episodic.append(m);
        result.trajectory.transitions.push_back(std::move(m));
        result.rewards.push_back(r.reward);
        obs = r.observation;
        ++t;
    }
    result.steps_used = env.steps_used();
    result.success = env.terminal_reached();
    result.trajectory.success = result.success;
    result.trajectory.id = episode_trajectory_id(task.id, result.trajectory);

    if (result.success && cfg.store_success && !result.trajectory.transitions.empty()) {
        try {
            memory.add_experiential_entry(result.trajectory, cfg.summarizer);
            result.stored = true;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::duplicate_entry) throw;
        }
    }
    return result;
}

inline EpisodeResult run_episode(ScriptedEnvironment& env, std::string_view task_id, Policy& policy,
                                 MemoryRepository& memory, const EpisodeConfig& cfg = {}) {
    EpisodicStore episodic(cfg.memory.horizon);
    return run_episode(env, task_id, policy, memory, episodic, cfg);
}

// Loads a fixture's seed rules and experiences; entries already present are skipped.
inline void seed_memory(MemoryRepository& memory, const EnvironmentSpec& spec) {
    for (const auto& r : spec.seed_rules) {
        try {
            memory.add_semantic_entry(r.rule, r.source);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::duplicate_entry) throw;
        }
    }
    for (const auto& e : spec.seed_experiences) {
        try {
            memory.add_experiential_entry(e.trajectory, e.summary);
        } catch (const Error& err) {
            if (err.code() != ErrorCode::duplicate_entry) throw;
        }
    }
}

} // namespace mnemo
