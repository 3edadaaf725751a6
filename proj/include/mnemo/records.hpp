#pragma once

#include "mnemo/core.hpp"
#include "mnemo/error.hpp"
#include "mnemo/json_io.hpp"

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Line-delimited trajectory records and the JSON forms of the core types.
//
// One trajectory per line:
//   {"format_version":1,"id":..,"goal":..,"success":..,
//    "steps":[{"step_index":1,"pre":..,"action":{..},"post":..}, ...],
//    "source":..,"provenance":{"origin":..,"prefix_length":..}}
// An observation with no widgets and no image is written as its bare screen_id
// string; otherwise as {"screen_id":..,"widgets":[..],"image":..}.
namespace mnemo {

inline constexpr int record_format_version = 1;

namespace detail {

[[noreturn]] inline void bad_record(const std::string& what) {
    throw Error(ErrorCode::malformed_record, what);
}

inline const Json& require(const Json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) bad_record(std::string("missing key ") + key);
    return *it;
}

inline void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                                const char* what) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (auto k : allowed) ok = ok || it.key() == k;
        if (!ok) bad_record(std::string("unknown key '") + it.key() + "' in " + what);
    }
}

inline double as_real(const Json& j, const char* what) {
    if (!j.is_number()) bad_record(std::string(what) + " must be a number");
    return j.get<double>();
}

inline std::string as_string(const Json& j, const char* what) {
    if (!j.is_string()) bad_record(std::string(what) + " must be a string");
    return j.get<std::string>();
}

} // namespace detail

inline Json to_json(Point p) { return Json::array({p.x, p.y}); }

inline Json to_json(const BoundingBox& b) {
    return Json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

inline Point point_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 2) detail::bad_record("point must be [x,y]");
    return validate_point({detail::as_real(j[0], "x"), detail::as_real(j[1], "y")});
}

inline BoundingBox bbox_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 4) detail::bad_record("box must be [x_min,y_min,x_max,y_max]");
    return validate_bbox({detail::as_real(j[0], "x_min"), detail::as_real(j[1], "y_min"),
                          detail::as_real(j[2], "x_max"), detail::as_real(j[3], "y_max")});
}

inline Json to_json(const Action& a) {
    Json j = Json::object();
    j["kind"] = std::string(to_string(a.kind));
    if (a.value) j["value"] = *a.value;
    if (a.position) j["position"] = to_json(*a.position);
    if (a.region) j["region"] = to_json(*a.region);
    return j;
}

inline Action action_from_json(const Json& j) {
    if (!j.is_object()) detail::bad_record("action must be an object");
    detail::reject_unknown_keys(j, {"kind", "value", "position", "region"}, "action");
    Action a;
    const auto name = detail::as_string(detail::require(j, "kind"), "kind");
    auto kind = parse_action_kind(name);
    if (!kind) detail::bad_record("unknown action kind " + name);
    a.kind = *kind;
    if (auto it = j.find("value"); it != j.end() && !it->is_null()) {
        a.value = detail::as_string(*it, "value");
    }
    if (auto it = j.find("position"); it != j.end() && !it->is_null()) a.position = point_from_json(*it);
    if (auto it = j.find("region"); it != j.end() && !it->is_null()) a.region = bbox_from_json(*it);
    return validate_action(std::move(a));
}

inline Json to_json(const Widget& w) {
    Json j = Json::object();
    j["id"] = w.id;
    j["role"] = w.role;
    j["label"] = w.label;
    j["box"] = to_json(w.box);
    return j;
}

inline Widget widget_from_json(const Json& j) {
    if (!j.is_object()) detail::bad_record("widget must be an object");
    detail::reject_unknown_keys(j, {"id", "role", "label", "box"}, "widget");
    Widget w;
    w.id = detail::as_string(detail::require(j, "id"), "id");
    w.role = j.contains("role") ? detail::as_string(j["role"], "role") : std::string{};
    w.label = j.contains("label") ? detail::as_string(j["label"], "label") : std::string{};
    w.box = bbox_from_json(detail::require(j, "box"));
    return w;
}

inline Json to_json(const Observation& o) {
    if (o.widgets.empty() && !o.raw_image_ref) return Json(o.screen_id);
    Json j = Json::object();
    j["screen_id"] = o.screen_id;
    Json ws = Json::array();
    for (const auto& w : o.widgets) ws.push_back(to_json(w));
    j["widgets"] = std::move(ws);
    if (o.raw_image_ref) j["image"] = *o.raw_image_ref;
    return j;
}

inline Observation observation_from_json(const Json& j) {
    Observation o;
    if (j.is_string()) {
        o.screen_id = j.get<std::string>();
        return o;
    }
    if (!j.is_object()) detail::bad_record("observation must be a string or object");
    detail::reject_unknown_keys(j, {"screen_id", "widgets", "image"}, "observation");
    o.screen_id = detail::as_string(detail::require(j, "screen_id"), "screen_id");
    if (auto it = j.find("widgets"); it != j.end()) {
        if (!it->is_array()) detail::bad_record("widgets must be an array");
        for (const auto& w : *it) o.widgets.push_back(widget_from_json(w));
    }
    if (auto it = j.find("image"); it != j.end() && !it->is_null()) {
        o.raw_image_ref = detail::as_string(*it, "image");
    }
    return validate_observation(std::move(o));
}

// Where a trajectory came from when it is a derived sample.
struct Provenance {
    std::string origin_id;
    std::size_t prefix_length = 0;

    bool operator==(const Provenance&) const = default;
};

struct TrajectoryRecord {
    Trajectory trajectory;
    std::optional<std::string> source;
    std::optional<Provenance> provenance;

    bool operator==(const TrajectoryRecord&) const = default;
};

inline Json to_json(const TrajectoryRecord& r) {
    const auto& t = r.trajectory;
    Json j = Json::object();
    j["format_version"] = record_format_version;
    j["id"] = t.id;
    j["goal"] = t.goal.text;
    j["success"] = t.success;
    Json steps = Json::array();
    for (const auto& m : t.transitions) {
        Json s = Json::object();
        s["step_index"] = m.step_index;
        s["pre"] = to_json(m.pre);
        s["action"] = to_json(m.action);
        s["post"] = to_json(m.post);
        steps.push_back(std::move(s));
    }
    j["steps"] = std::move(steps);
    if (r.source) j["source"] = *r.source;
    if (r.provenance) {
        Json p = Json::object();
        p["origin"] = r.provenance->origin_id;
        p["prefix_length"] = r.provenance->prefix_length;
        j["provenance"] = std::move(p);
    }
    return j;
}

inline Json to_json(const Trajectory& t) { return to_json(TrajectoryRecord{t, {}, {}}); }

inline TrajectoryRecord trajectory_record_from_json(const Json& j) {
    if (!j.is_object()) detail::bad_record("trajectory record must be an object");
    detail::reject_unknown_keys(
        j, {"format_version", "id", "goal", "success", "steps", "source", "provenance"},
        "trajectory record");
    const auto& ver = detail::require(j, "format_version");
    if (!ver.is_number_integer() || ver.get<int>() != record_format_version) {
        throw Error(ErrorCode::version_mismatch, "trajectory record format_version " + ver.dump());
    }
    TrajectoryRecord r;
    auto& t = r.trajectory;
    t.id = detail::as_string(detail::require(j, "id"), "id");
    t.goal.text = detail::as_string(detail::require(j, "goal"), "goal");
    const auto& success = detail::require(j, "success");
    if (!success.is_boolean()) detail::bad_record("success must be a boolean");
    t.success = success.get<bool>();
    const auto& steps = detail::require(j, "steps");
    if (!steps.is_array()) detail::bad_record("steps must be an array");
    for (const auto& s : steps) {
        if (!s.is_object()) detail::bad_record("step must be an object");
        detail::reject_unknown_keys(s, {"step_index", "pre", "action", "post"}, "step");
        Transition m;
        const auto& idx = detail::require(s, "step_index");
        if (!idx.is_number_unsigned()) detail::bad_record("step_index must be a non-negative integer");
        m.step_index = idx.get<std::size_t>();
        m.pre = observation_from_json(detail::require(s, "pre"));
        m.action = action_from_json(detail::require(s, "action"));
        m.post = observation_from_json(detail::require(s, "post"));
        t.transitions.push_back(std::move(m));
    }
    if (auto it = j.find("source"); it != j.end() && !it->is_null()) {
        r.source = detail::as_string(*it, "source");
    }
    if (auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) detail::bad_record("provenance must be an object");
        Provenance p;
        p.origin_id = detail::as_string(detail::require(*it, "origin"), "origin");
        const auto& k = detail::require(*it, "prefix_length");
        if (!k.is_number_unsigned()) detail::bad_record("prefix_length must be a non-negative integer");
        p.prefix_length = k.get<std::size_t>();
        r.provenance = std::move(p);
    }
    validate_trajectory(t);
    return r;
}

inline std::vector<TrajectoryRecord> read_trajectory_records(const fs::path& path) {
    std::vector<TrajectoryRecord> out;
    for (const auto& j : read_records(path)) out.push_back(trajectory_record_from_json(j));
    return out;
}

inline void write_trajectory_records(const fs::path& path,
                                     const std::vector<TrajectoryRecord>& records) {
    std::vector<Json> js;
    js.reserve(records.size());
    for (const auto& r : records) js.push_back(to_json(r));
    write_file_atomic(path, join_records(js));
}

} // namespace mnemo
