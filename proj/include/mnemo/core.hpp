#pragma once

#include "mnemo/error.hpp"
#include "mnemo/text.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace mnemo {

// Normalized screen coordinate; both axes in [0,1].
struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    bool operator==(const BoundingBox&) const = default;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    double area() const noexcept { return width() * height(); }
    Point center() const noexcept { return {(x_min + x_max) / 2.0, (y_min + y_max) / 2.0}; }

    // Boundary is inside.
    bool contains(Point p) const noexcept {
        return x_min <= p.x && p.x <= x_max && y_min <= p.y && p.y <= y_max;
    }
};

enum class ActionKind {
    click,
    long_press,
    scroll,
    type_text,
    open_app,
    navigate_home,
    navigate_back,
    wait,
    complete,
    impossible,
};

inline constexpr std::array<ActionKind, 10> all_action_kinds{
    ActionKind::click,         ActionKind::long_press,    ActionKind::scroll,
    ActionKind::type_text,     ActionKind::open_app,      ActionKind::navigate_home,
    ActionKind::navigate_back, ActionKind::wait,          ActionKind::complete,
    ActionKind::impossible,
};

constexpr std::string_view to_string(ActionKind kind) {
    switch (kind) {
        case ActionKind::click: return "click";
        case ActionKind::long_press: return "long_press";
        case ActionKind::scroll: return "scroll";
        case ActionKind::type_text: return "type_text";
        case ActionKind::open_app: return "open_app";
        case ActionKind::navigate_home: return "navigate_home";
        case ActionKind::navigate_back: return "navigate_back";
        case ActionKind::wait: return "wait";
        case ActionKind::complete: return "complete";
        case ActionKind::impossible: return "impossible";
    }
    return "unknown";
}

// Accepts the canonical names plus the spellings used by common GUI action
// spaces (TYPE, INPUT_TEXT, HOME, BACK, ...), case-insensitively.
inline std::optional<ActionKind> parse_action_kind(std::string_view name) {
    std::string lower;
    lower.reserve(name.size());
    for (char c : name) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c == '-' || c == ' ') c = '_';
        lower.push_back(c);
    }
    for (auto kind : all_action_kinds) {
        if (lower == to_string(kind)) return kind;
    }
    if (lower == "type" || lower == "input_text" || lower == "text" || lower == "input") {
        return ActionKind::type_text;
    }
    if (lower == "home") return ActionKind::navigate_home;
    if (lower == "back") return ActionKind::navigate_back;
    if (lower == "longpress") return ActionKind::long_press;
    return std::nullopt;
}

struct Action {
    ActionKind kind = ActionKind::wait;
    std::optional<std::string> value;
    std::optional<Point> position;
    std::optional<BoundingBox> region;

    bool operator==(const Action&) const = default;
};

struct Widget {
    std::string id;
    std::string role;
    std::string label;
    BoundingBox box;

    bool operator==(const Widget&) const = default;
};

struct Observation {
    std::string screen_id;
    std::vector<Widget> widgets;
    std::optional<std::string> raw_image_ref;

    bool operator==(const Observation&) const = default;

    const Widget* find_widget(std::string_view id) const noexcept {
        for (const auto& w : widgets) {
            if (w.id == id) return &w;
        }
        return nullptr;
    }

    // First widget in tree order whose box contains p.
    const Widget* hit_test(Point p) const noexcept {
        for (const auto& w : widgets) {
            if (w.box.contains(p)) return &w;
        }
        return nullptr;
    }
};

struct Instruction {
    std::string text;

    bool operator==(const Instruction&) const = default;
};

// m_k = <o_k, a_k, o_{k+1}>
struct Transition {
    Observation pre;
    Action action;
    Observation post;
    std::size_t step_index = 1;

    bool operator==(const Transition&) const = default;
};

struct Trajectory {
    std::string id;
    Instruction goal;
    std::vector<Transition> transitions;
    bool success = false;

    bool operator==(const Trajectory&) const = default;
};

// --- validation --------------------------------------------------------------

namespace detail {
inline bool unit_interval(double v) noexcept { return v >= 0.0 && v <= 1.0; }
} // namespace detail

inline Point validate_point(Point p) {
    if (!detail::unit_interval(p.x) || !detail::unit_interval(p.y)) {
        throw Error(ErrorCode::invalid_geometry, "point outside [0,1]");
    }
    return p;
}

inline BoundingBox validate_bbox(BoundingBox b) {
    for (double v : {b.x_min, b.y_min, b.x_max, b.y_max}) {
        if (!detail::unit_interval(v)) {
            throw Error(ErrorCode::invalid_geometry, "coordinate outside [0,1]");
        }
    }
    if (b.x_min > b.x_max) throw Error(ErrorCode::invalid_geometry, "x_min > x_max");
    if (b.y_min > b.y_max) throw Error(ErrorCode::invalid_geometry, "y_min > y_max");
    return b;
}

inline Action validate_action(Action a) {
    if (a.position) validate_point(*a.position);
    if (a.region) validate_bbox(*a.region);
    const auto need_value = [&] {
        if (!a.value || a.value->empty()) throw Error(ErrorCode::missing_field, "value");
    };
    const auto forbid_geometry = [&] {
        if (a.position) throw Error(ErrorCode::unexpected_field, "position");
        if (a.region) throw Error(ErrorCode::unexpected_field, "region");
    };
    switch (a.kind) {
        case ActionKind::click:
        case ActionKind::long_press:
            if (!a.position) throw Error(ErrorCode::missing_field, "position");
            break;
        case ActionKind::scroll:
            if (!a.position && !a.region) throw Error(ErrorCode::missing_field, "region");
            break;
        case ActionKind::type_text:
        case ActionKind::open_app:
            need_value();
            break;
        case ActionKind::navigate_home:
        case ActionKind::navigate_back:
        case ActionKind::complete:
        case ActionKind::impossible:
            forbid_geometry();
            break;
        case ActionKind::wait:
            break;
    }
    return a;
}

inline Instruction validate_instruction(Instruction q) {
    if (trim(q.text).empty()) throw Error(ErrorCode::empty_input, "instruction");
    return q;
}

inline Observation validate_observation(Observation o) {
    std::unordered_set<std::string> seen;
    for (const auto& w : o.widgets) {
        validate_bbox(w.box);
        if (!seen.insert(w.id).second) {
            throw Error(ErrorCode::invalid_observation, "duplicate widget id " + w.id);
        }
    }
    return o;
}

// Step indices strictly increase and consecutive transitions are contiguous by
// screen_id (post of step k is the pre of step k+1).
inline const Trajectory& validate_trajectory(const Trajectory& t) {
    for (std::size_t i = 0; i < t.transitions.size(); ++i) {
        const auto& m = t.transitions[i];
        validate_observation(m.pre);
        validate_observation(m.post);
        validate_action(m.action);
        if (i == 0) continue;
        const auto& prev = t.transitions[i - 1];
        if (m.step_index <= prev.step_index) {
            throw Error(ErrorCode::non_monotonic_step, "step " + std::to_string(m.step_index));
        }
        if (prev.post.screen_id != m.pre.screen_id) {
            throw Error(ErrorCode::invalid_trajectory,
                        "discontinuity at step " + std::to_string(m.step_index));
        }
    }
    return t;
}

// --- compact text forms ------------------------------------------------------

// click(Apply), click(0.3,0.66), scroll(0.1,0.2,0.9,0.8), navigate_back()
inline std::string describe(const Action& a) {
    std::string out(to_string(a.kind));
    out.push_back('(');
    if (a.value && !a.value->empty()) {
        out += *a.value;
    } else if (a.position) {
        out += format_real(a.position->x) + "," + format_real(a.position->y);
    } else if (a.region) {
        out += format_real(a.region->x_min) + "," + format_real(a.region->y_min) + "," +
               format_real(a.region->x_max) + "," + format_real(a.region->y_max);
    }
    out.push_back(')');
    return out;
}

inline std::string describe(const Transition& m) {
    return "(" + m.pre.screen_id + ", " + describe(m.action) + ", " + m.post.screen_id + ")";
}

// Canonical action-sequence text; the basis of experiential dedup keys.
inline std::string action_sequence_key(const Trajectory& t) {
    std::string out;
    for (const auto& m : t.transitions) {
        out += std::string(to_string(m.action.kind));
        out.push_back('\x1f');
        out += m.action.value.value_or("");
        out.push_back('\x1f');
        if (m.action.position) {
            out += format_real(m.action.position->x, RealFormat::exact) + "," +
                   format_real(m.action.position->y, RealFormat::exact);
        }
        out.push_back('\x1f');
        if (m.action.region) {
            const auto& r = *m.action.region;
            out += format_real(r.x_min, RealFormat::exact) + "," +
                   format_real(r.y_min, RealFormat::exact) + "," +
                   format_real(r.x_max, RealFormat::exact) + "," +
                   format_real(r.y_max, RealFormat::exact);
        }
        out.push_back('\x1e');
    }
    return out;
}

struct DedupKey {
    std::uint64_t goal_hash = 0;
    std::uint64_t actions_hash = 0;

    auto operator<=>(const DedupKey&) const = default;
};

inline DedupKey dedup_key(const Trajectory& t) {
    return {fnv1a64(t.goal.text), fnv1a64(action_sequence_key(t))};
}

} // namespace mnemo
