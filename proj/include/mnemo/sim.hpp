#pragma once

#include "mnemo/core.hpp"
#include "mnemo/error.hpp"
#include "mnemo/hindsight.hpp"
#include "mnemo/json_io.hpp"
#include "mnemo/records.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

// Scripted GUI environment. Screens are widget trees; transitions fire when an
// action of the declared kind hits the declared widget. Fixture files:
//
//   {
//     "schema_version": 1, "name": "...", "gamma": 0.99,
//     "screens":     { "<screen_id>": [ {"id","role","label","box"}, ... ], ... },
//     "transitions": [ {"from","action","widget"?,"value"?,"to"}, ... ],
//     "tasks": [ {
//        "id", "instruction", "start", "budget",
//        "terminal": {"screen"?, "typed"?: [..]},
//        "subgoals": [ {"goal", "screen"?, "typed"?: [..]} ],
//        "solution": [ {"action", "widget"?, "value"?, "options"?: [..], "answer"?} ]
//     } ],
//     "memory_seed": { "semantic": [ {"rule","source"} ],
//                      "experiential": [ {"id","goal","steps","summary"} ] }
//   }
//
// A solution step with "options" is a branch point: "answer" names the right
// widget, and nothing on screen says which one it is.
namespace mnemo {

inline constexpr int environment_schema_version = 1;

// Decidable from the current screen and the typed-text log.
struct ScreenPredicate {
    std::optional<std::string> screen;
    std::vector<std::string> typed;

    bool holds(std::string_view screen_id, const std::vector<std::string>& typed_log) const {
        if (screen && *screen != screen_id) return false;
        for (const auto& t : typed) {
            if (std::find(typed_log.begin(), typed_log.end(), t) == typed_log.end()) return false;
        }
        return true;
    }
};

struct Trigger {
    std::string from;
    ActionKind kind = ActionKind::click;
    std::optional<std::string> widget;
    std::optional<std::string> value;
    std::string to;
};

struct SubGoal {
    std::string goal;
    ScreenPredicate predicate;
};

struct SolutionStep {
    ActionKind kind = ActionKind::click;
    std::optional<std::string> widget;
    std::optional<std::string> value;
    std::vector<std::string> options;
    std::optional<std::string> answer;
};

struct TaskSpec {
    std::string id;
    Instruction instruction;
    std::string start;
    std::size_t budget = 10;
    ScreenPredicate terminal;
    std::vector<SubGoal> subgoals;
    std::vector<SolutionStep> solution;
};

struct SeedRule {
    std::string rule;
    std::string source;
};

struct SeedExperience {
    Trajectory trajectory;
    std::string summary;
};

struct EnvironmentSpec {
    std::string name;
    double gamma = 1.0; // carried for completeness; rewards are undiscounted here
    std::vector<std::string> screen_order;
    std::map<std::string, std::vector<Widget>> screens;
    std::vector<Trigger> triggers;
    std::vector<TaskSpec> tasks;
    std::vector<SeedRule> seed_rules;
    std::vector<SeedExperience> seed_experiences;

    const TaskSpec* find_task(std::string_view id) const noexcept {
        for (const auto& t : tasks) {
            if (t.id == id) return &t;
        }
        return nullptr;
    }

    const TaskSpec* find_task_by_instruction(std::string_view text) const noexcept {
        for (const auto& t : tasks) {
            if (t.instruction.text == text) return &t;
        }
        return nullptr;
    }
};

// --- fixture parsing -------------------------------------------------------

namespace detail {

[[noreturn]] inline void bad_env(const std::string& what) { throw Error(ErrorCode::invalid_environment, what); }

inline const Json& env_field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) bad_env(std::string("missing ") + key);
    return j.at(key);
}

inline std::string env_string(const Json& j, const char* key) {
    const auto& v = env_field(j, key);
    if (!v.is_string()) bad_env(std::string(key) + " must be a string");
    return v.get<std::string>();
}

inline std::optional<std::string> env_opt_string(const Json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) bad_env(std::string(key) + " must be a string");
    return it->get<std::string>();
}

inline std::vector<std::string> env_strings(const Json& j, const char* key) {
    std::vector<std::string> out;
    auto it = j.find(key);
    if (it == j.end()) return out;
    if (!it->is_array()) bad_env(std::string(key) + " must be a list");
    for (const auto& s : *it) {
        if (!s.is_string()) bad_env(std::string(key) + " entries must be strings");
        out.push_back(s.get<std::string>());
    }
    return out;
}

inline ActionKind env_kind(const Json& j) {
    const auto name = env_string(j, "action");
    auto k = parse_action_kind(name);
    if (!k) bad_env("unknown action kind " + name);
    return *k;
}

inline ScreenPredicate env_predicate(const Json& j) {
    return {env_opt_string(j, "screen"), env_strings(j, "typed")};
}

inline void env_keys(const Json& j, std::initializer_list<std::string_view> allowed, const char* what) {
    if (!j.is_object()) bad_env(std::string(what) + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
            bad_env(std::string("unknown key ") + it.key() + " in " + what);
        }
    }
}

} // namespace detail

inline EnvironmentSpec environment_from_json(const Json& j) {
    using namespace detail;
    env_keys(j, {"schema_version", "name", "gamma", "screens", "transitions", "tasks", "memory_seed"},
             "environment");
    const auto& ver = env_field(j, "schema_version");
    if (!ver.is_number_integer() || ver.get<int>() != environment_schema_version) {
        throw Error(ErrorCode::version_mismatch, "environment schema_version " + ver.dump());
    }
    EnvironmentSpec env;
    env.name = env_string(j, "name");
    if (auto it = j.find("gamma"); it != j.end()) {
        if (!it->is_number() || !(it->get<double>() >= 0.0 && it->get<double>() <= 1.0)) bad_env("gamma");
        env.gamma = it->get<double>();
    }

    const auto& screens = env_field(j, "screens");
    if (!screens.is_object() || screens.empty()) bad_env("screens must be a non-empty object");
    for (auto it = screens.begin(); it != screens.end(); ++it) {
        std::vector<Widget> ws;
        if (!it->is_array()) bad_env("screen " + it.key() + " must be a list of widgets");
        for (const auto& w : *it) {
            try {
                ws.push_back(widget_from_json(w));
            } catch (const Error& e) {
                bad_env("screen " + it.key() + ": " + e.what());
            }
        }
        try {
            validate_observation(Observation{it.key(), ws, std::nullopt});
        } catch (const Error& e) {
            bad_env("screen " + it.key() + ": " + e.what());
        }
        env.screen_order.push_back(it.key());
        env.screens.emplace(it.key(), std::move(ws));
    }
    const auto screen_exists = [&](const std::string& s) { return env.screens.contains(s); };
    const auto widget_exists = [&](const std::string& s, const std::string& w) {
        const auto& ws = env.screens.at(s);
        return std::any_of(ws.begin(), ws.end(), [&](const Widget& x) { return x.id == w; });
    };

    for (const auto& t : env_field(j, "transitions")) {
        env_keys(t, {"from", "action", "widget", "value", "to"}, "transition");
        Trigger tr{env_string(t, "from"), env_kind(t), env_opt_string(t, "widget"), env_opt_string(t, "value"),
                   env_string(t, "to")};
        if (!screen_exists(tr.from) || !screen_exists(tr.to)) bad_env("transition references unknown screen");
        if (tr.widget && !widget_exists(tr.from, *tr.widget)) {
            bad_env("transition widget " + *tr.widget + " not on " + tr.from);
        }
        env.triggers.push_back(std::move(tr));
    }

    const auto& tasks = env_field(j, "tasks");
    if (!tasks.is_array() || tasks.empty()) bad_env("tasks must be a non-empty list");
    for (const auto& t : tasks) {
        env_keys(t, {"id", "instruction", "start", "budget", "terminal", "subgoals", "solution"}, "task");
        TaskSpec task;
        task.id = env_string(t, "id");
        task.instruction.text = env_string(t, "instruction");
        task.start = env_string(t, "start");
        if (!screen_exists(task.start)) bad_env("task " + task.id + " starts on unknown screen");
        const auto& budget = env_field(t, "budget");
        if (!budget.is_number_unsigned() || budget.get<std::size_t>() == 0) bad_env("budget must be > 0");
        task.budget = budget.get<std::size_t>();
        env_keys(env_field(t, "terminal"), {"screen", "typed"}, "terminal");
        task.terminal = env_predicate(t.at("terminal"));
        if (task.terminal.screen && !screen_exists(*task.terminal.screen)) bad_env("terminal screen unknown");
        if (auto it = t.find("subgoals"); it != t.end()) {
            for (const auto& g : *it) {
                env_keys(g, {"goal", "screen", "typed"}, "subgoal");
                task.subgoals.push_back({env_string(g, "goal"), env_predicate(g)});
            }
        }
        if (auto it = t.find("solution"); it != t.end()) {
            for (const auto& s : *it) {
                env_keys(s, {"action", "widget", "value", "options", "answer"}, "solution step");
                SolutionStep st{env_kind(s), env_opt_string(s, "widget"), env_opt_string(s, "value"),
                                env_strings(s, "options"), env_opt_string(s, "answer")};
                if (!st.options.empty() &&
                    (!st.answer || std::find(st.options.begin(), st.options.end(), *st.answer) == st.options.end())) {
                    bad_env("solution branch needs an answer among its options");
                }
                task.solution.push_back(std::move(st));
            }
        }
        if (env.find_task(task.id)) bad_env("duplicate task " + task.id);
        env.tasks.push_back(std::move(task));
    }

    if (auto it = j.find("memory_seed"); it != j.end()) {
        env_keys(*it, {"semantic", "experiential"}, "memory_seed");
        if (auto s = it->find("semantic"); s != it->end()) {
            for (const auto& r : *s) {
                env_keys(r, {"rule", "source"}, "semantic seed");
                env.seed_rules.push_back({env_string(r, "rule"), env_string(r, "source")});
            }
        }
        if (auto e = it->find("experiential"); e != it->end()) {
            for (const auto& x : *e) {
                env_keys(x, {"id", "goal", "steps", "summary"}, "experiential seed");
                Json rec = Json::object();
                rec["format_version"] = record_format_version;
                rec["id"] = env_string(x, "id");
                rec["goal"] = env_string(x, "goal");
                rec["success"] = true;
                rec["steps"] = env_field(x, "steps");
                try {
                    env.seed_experiences.push_back(
                        {trajectory_record_from_json(rec).trajectory, env_string(x, "summary")});
                } catch (const Error& err) {
                    bad_env(std::string("experiential seed: ") + err.what());
                }
            }
        }
    }
    return env;
}

inline EnvironmentSpec load_environment(const fs::path& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::invalid_environment, path.string() + ": " + e.what());
    }
    return environment_from_json(j);
}

// --- the environment ---------------------------------------------------------

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
};

class ScriptedEnvironment {
public:
    static constexpr double max_jitter = 0.05;

    explicit ScriptedEnvironment(EnvironmentSpec spec, std::uint64_t seed = 0, bool jitter = false)
        : spec_(std::move(spec)), seed_(seed), jitter_(jitter) {}

    const EnvironmentSpec& spec() const noexcept { return spec_; }
    const TaskSpec& task() const {
        if (!task_) throw Error(ErrorCode::episode_finished, "no task has been reset");
        return *task_;
    }
    std::uint64_t seed() const noexcept { return seed_; }
    void set_seed(std::uint64_t seed) noexcept { seed_ = seed; }
    bool jitter() const noexcept { return jitter_; }
    void set_jitter(bool on) noexcept { jitter_ = on; }

    const std::string& current_screen() const noexcept { return screen_; }
    const std::vector<std::string>& typed_log() const noexcept { return typed_; }
    std::size_t steps_used() const noexcept { return steps_; }
    bool done() const noexcept { return done_; }

    Observation reset(std::string_view task_id) {
        task_ = spec_.find_task(task_id);
        if (!task_) throw Error(ErrorCode::unknown_task, std::string(task_id));
        layout_ = spec_.screens;
        if (jitter_) apply_jitter();
        screen_ = task_->start;
        typed_.clear();
        steps_ = 0;
        done_ = false;
        return observe();
    }

    Observation observe() const {
        Observation o;
        o.screen_id = screen_;
        o.widgets = layout_.at(screen_);
        return o;
    }

    StepResult step(const Action& a) {
        if (!task_ || done_) throw Error(ErrorCode::episode_finished, task_ ? task_->id : "no episode");
        ++steps_;
        if (a.kind == ActionKind::type_text && a.value) typed_.push_back(*a.value);
        if (const Trigger* t = match(a)) screen_ = t->to;
        StepResult r;
        if (task_->terminal.holds(screen_, typed_)) {
            r.reward = 1.0;
            done_ = true;
        } else if (steps_ >= task_->budget) {
            done_ = true;
        }
        r.done = done_;
        r.observation = observe();
        return r;
    }

    // Consumes one unit of budget without touching the screen.
    StepResult idle_step() {
        if (!task_ || done_) throw Error(ErrorCode::episode_finished, task_ ? task_->id : "no episode");
        ++steps_;
        if (steps_ >= task_->budget) done_ = true;
        return {observe(), 0.0, done_};
    }

    bool terminal_reached() const { return task_ && task_->terminal.holds(screen_, typed_); }

private:
    const Trigger* match(const Action& a) const {
        const auto& widgets = layout_.at(screen_);
        const auto hit = [&]() -> const Widget* {
            std::optional<Point> p = a.position;
            if (!p && a.region) p = a.region->center();
            if (!p) return nullptr;
            for (const auto& w : widgets) {
                if (w.box.contains(*p)) return &w;
            }
            return nullptr;
        }();
        for (const auto& t : spec_.triggers) {
            if (t.from != screen_ || t.kind != a.kind) continue;
            switch (a.kind) {
                case ActionKind::click:
                case ActionKind::long_press:
                case ActionKind::scroll:
                    if (t.widget && (!hit || hit->id != *t.widget)) continue;
                    if (!t.widget && a.kind != ActionKind::scroll && !hit) continue;
                    break;
                case ActionKind::type_text:
                    if (t.widget && (!hit || hit->id != *t.widget)) continue;
                    if (t.value && a.value != t.value) continue;
                    break;
                case ActionKind::open_app:
                    if (t.value && a.value != t.value) continue;
                    break;
                default:
                    break;
            }
            return &t;
        }
        return nullptr;
    }

    // Shifts every box by up to max_jitter per axis on a 1e-4 grid, keeping it
    // inside the unit square.
    void apply_jitter() {
        std::mt19937_64 rng(seed_);
        const auto offset = [&] {
            return (static_cast<double>(detail::bounded_draw(rng, 1001)) - 500.0) * 1e-4;
        };
        for (const auto& id : spec_.screen_order) {
            for (auto& w : layout_.at(id)) {
                const double dx = std::clamp(offset(), -w.box.x_min, 1.0 - w.box.x_max);
                const double dy = std::clamp(offset(), -w.box.y_min, 1.0 - w.box.y_max);
                w.box = BoundingBox{std::clamp(w.box.x_min + dx, 0.0, 1.0), std::clamp(w.box.y_min + dy, 0.0, 1.0),
                                    std::clamp(w.box.x_max + dx, 0.0, 1.0), std::clamp(w.box.y_max + dy, 0.0, 1.0)};
            }
        }
    }

    EnvironmentSpec spec_;
    std::uint64_t seed_;
    bool jitter_;
    std::map<std::string, std::vector<Widget>> layout_;
    const TaskSpec* task_ = nullptr;
    std::string screen_;
    std::vector<std::string> typed_;
    std::size_t steps_ = 0;
    bool done_ = false;
};

// --- verifier for goal relabeling -----------------------------------------

// Candidate goals of a trajectory are the declared sub-goals of its task plus
// the instructions of every other task in the fixture. A prefix achieves a
// goal when the goal's predicate holds on the prefix's final screen and the
// text typed along it.
class FixtureVerifier final : public SubGoalVerifier {
public:
    explicit FixtureVerifier(EnvironmentSpec spec) : spec_(std::move(spec)) {}

    std::vector<std::string> candidates(const Trajectory& t) const override {
        std::vector<std::string> out;
        const auto* own = spec_.find_task_by_instruction(t.goal.text);
        if (own) {
            for (const auto& g : own->subgoals) out.push_back(g.goal);
        }
        for (const auto& task : spec_.tasks) {
            if (&task != own) out.push_back(task.instruction.text);
        }
        return out;
    }

    bool verify(const Trajectory& prefix, std::string_view goal) const override {
        if (prefix.transitions.empty()) return false;
        const auto* pred = predicate_for(goal);
        if (!pred) return false;
        std::vector<std::string> typed;
        for (const auto& m : prefix.transitions) {
            if (m.action.kind == ActionKind::type_text && m.action.value) typed.push_back(*m.action.value);
        }
        return pred->holds(prefix.transitions.back().post.screen_id, typed);
    }

private:
    const ScreenPredicate* predicate_for(std::string_view goal) const {
        for (const auto& task : spec_.tasks) {
            if (task.instruction.text == goal) return &task.terminal;
            for (const auto& g : task.subgoals) {
                if (g.goal == goal) return &g.predicate;
            }
        }
        return nullptr;
    }

    EnvironmentSpec spec_;
};

} // namespace mnemo
