#pragma once

#include "mnemo/action_parser.hpp"
#include "mnemo/core.hpp"
#include "mnemo/error.hpp"
#include "mnemo/math_expr.hpp"
#include "mnemo/text.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

// Hierarchical reward:
//
//   R_total = w_f R_format + w_a R_acc,          w_f + w_a = 1
//   R_acc   = w_t R_type + w_p R_param,          w_t + w_p = 1   (only if R_format = 1)
//
// R_param depends on the ground-truth action kind: point-in-box for click and
// long_press, IoU against a threshold for scroll, exact match or arithmetic
// equivalence for text-valued actions.
namespace mnemo {

struct RewardWeights {
    double w_f = 0.1;
    double w_a = 0.9;
    double w_t = 0.5;
    double w_p = 0.5;
    double tau_iou = 0.5;
    double math_tolerance = 1e-6;
};

inline const RewardWeights& validate_weights(const RewardWeights& w) {
    for (double v : {w.w_f, w.w_a, w.w_t, w.w_p}) {
        if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::invalid_weights, "weight outside [0,1]");
    }
    if (std::abs(w.w_f + w.w_a - 1.0) > 1e-12) throw Error(ErrorCode::invalid_weights, "w_f + w_a != 1");
    if (std::abs(w.w_t + w.w_p - 1.0) > 1e-12) throw Error(ErrorCode::invalid_weights, "w_t + w_p != 1");
    if (!(w.tau_iou > 0.0 && w.tau_iou <= 1.0)) throw Error(ErrorCode::invalid_weights, "tau_iou outside (0,1]");
    if (!(w.math_tolerance >= 0.0)) throw Error(ErrorCode::invalid_weights, "math tolerance < 0");
    return w;
}

struct GroundTruth {
    ActionKind action_kind = ActionKind::click;
    std::optional<BoundingBox> target_box;
    std::optional<std::string> target_answer;

    bool operator==(const GroundTruth&) const = default;
};

inline const GroundTruth& validate_ground_truth(const GroundTruth& gt) {
    switch (gt.action_kind) {
        case ActionKind::click:
        case ActionKind::long_press:
        case ActionKind::scroll:
            if (!gt.target_box) {
                throw Error(ErrorCode::inconsistent_ground_truth,
                            std::string(to_string(gt.action_kind)) + " requires target_box");
            }
            validate_bbox(*gt.target_box);
            break;
        case ActionKind::type_text:
        case ActionKind::open_app:
            if (!gt.target_answer) {
                throw Error(ErrorCode::inconsistent_ground_truth,
                            std::string(to_string(gt.action_kind)) + " requires target_answer");
            }
            break;
        default:
            break;
    }
    return gt;
}

struct RewardBreakdown {
    double r_format = 0.0;
    double r_type = 0.0;
    double r_param = 0.0;
    double r_acc = 0.0;
    double r_total = 0.0;

    bool operator==(const RewardBreakdown&) const = default;
};

inline double point_reward(Point p, const BoundingBox& b) noexcept { return b.contains(p) ? 1.0 : 0.0; }

inline double iou(const BoundingBox& a, const BoundingBox& b) noexcept {
    const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
    const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

inline double bbox_reward(const BoundingBox& pred, const BoundingBox& gt, double tau_iou) {
    if (!(tau_iou > 0.0 && tau_iou <= 1.0)) throw Error(ErrorCode::invalid_weights, "tau_iou outside (0,1]");
    const double v = iou(pred, gt);
    return v >= tau_iou ? 1.0 : v / tau_iou;
}

// Exact match after trimming, or arithmetic equivalence within tol.
inline bool math_verify(std::string_view answer, std::string_view gt, double tol = 1e-6) {
    const auto a = trim(answer);
    const auto g = trim(gt);
    if (a == g) return true;
    const auto va = ArithmeticEvaluator::evaluate(a);
    const auto vg = ArithmeticEvaluator::evaluate(g);
    return va && vg && std::abs(*va - *vg) <= tol;
}

namespace detail {

inline double parameter_reward(const Action& pred, const GroundTruth& gt, const RewardWeights& w) {
    switch (gt.action_kind) {
        case ActionKind::click:
        case ActionKind::long_press:
            return pred.position ? point_reward(*pred.position, *gt.target_box) : 0.0;
        case ActionKind::scroll: {
            if (pred.region) return bbox_reward(*pred.region, *gt.target_box, w.tau_iou);
            if (pred.position) {
                const BoundingBox point_box{pred.position->x, pred.position->y, pred.position->x,
                                            pred.position->y};
                return bbox_reward(point_box, *gt.target_box, w.tau_iou);
            }
            return 0.0;
        }
        case ActionKind::type_text:
        case ActionKind::open_app:
            return pred.value && math_verify(*pred.value, *gt.target_answer, w.math_tolerance) ? 1.0 : 0.0;
        case ActionKind::complete:
            if (gt.target_answer) {
                return pred.value && math_verify(*pred.value, *gt.target_answer, w.math_tolerance) ? 1.0
                                                                                                   : 0.0;
            }
            return 1.0;
        default:
            return 1.0;
    }
}

} // namespace detail

inline RewardBreakdown evaluate_reward(std::string_view model_text, const GroundTruth& gt,
                                       const RewardWeights& w = {}) {
    validate_weights(w);
    validate_ground_truth(gt);
    RewardBreakdown r;
    std::optional<ParsedAgentOutput> parsed;
    try {
        parsed = parse_agent_output(model_text);
    } catch (const Error&) {
        return r;
    }
    r.r_format = 1.0;
    r.r_type = parsed->action.kind == gt.action_kind ? 1.0 : 0.0;
    // Parameters are only graded for the right kind of action.
    r.r_param = r.r_type == 1.0 ? detail::parameter_reward(parsed->action, gt, w) : 0.0;
    // Weight sums are only pinned to 1e-12; keep the components inside [0,1].
    r.r_acc = std::clamp(w.w_t * r.r_type + w.w_p * r.r_param, 0.0, 1.0);
    r.r_total = std::clamp(w.w_f * r.r_format + w.w_a * r.r_acc, 0.0, 1.0);
    return r;
}

} // namespace mnemo
