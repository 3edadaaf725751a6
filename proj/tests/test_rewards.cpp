#include "support.hpp"

#include <gtest/gtest.h>

using namespace mnemo;

namespace {

std::string output(const std::string& answer) {
    return "<Progress_Evaluation>p</Progress_Evaluation><Decision_Rationale>d</Decision_Rationale>"
           "<History_Summary>h</History_Summary><Answer>" +
           answer + "</Answer>";
}

GroundTruth click_at(BoundingBox b) { return GroundTruth{ActionKind::click, b, std::nullopt}; }

} // namespace

TEST(Weights, Validation) {
    EXPECT_NO_THROW(validate_weights({}));
    for (auto w : {RewardWeights{0.2, 0.9}, RewardWeights{0.1, 0.9, 0.6, 0.5}, RewardWeights{-0.1, 1.1},
                   RewardWeights{0.1, 0.9, 0.5, 0.5, 0.0}, RewardWeights{0.1, 0.9, 0.5, 0.5, 0.5, -1.0}}) {
        try {
            validate_weights(w);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::invalid_weights);
        }
    }
}

TEST(GroundTruthCheck, KindNeedsItsTarget) {
    for (auto k : {ActionKind::click, ActionKind::long_press, ActionKind::scroll}) {
        EXPECT_THROW(validate_ground_truth({k, std::nullopt, std::nullopt}), Error);
    }
    for (auto k : {ActionKind::type_text, ActionKind::open_app}) {
        try {
            validate_ground_truth({k, std::nullopt, std::nullopt});
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::inconsistent_ground_truth);
        }
    }
    EXPECT_NO_THROW(validate_ground_truth({ActionKind::navigate_back, std::nullopt, std::nullopt}));
}

TEST(Grounding, PointAndIou) {
    const BoundingBox b{0.2, 0.2, 0.4, 0.4};
    EXPECT_EQ(point_reward({0.2, 0.4}, b), 1.0);
    EXPECT_EQ(point_reward({0.41, 0.3}, b), 0.0);
    EXPECT_EQ(iou(b, b), 1.0);
    EXPECT_EQ(iou(b, {0.5, 0.5, 0.6, 0.6}), 0.0);
    EXPECT_NEAR(iou(b, {0.3, 0.2, 0.5, 0.4}), 1.0 / 3.0, 1e-12);
    EXPECT_EQ(iou({0.1, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.1, 0.1}), 0.0);
}

TEST(Grounding, BboxRewardBranches) {
    const BoundingBox gt{0.2, 0.2, 0.4, 0.4};
    EXPECT_EQ(bbox_reward(gt, gt, 0.5), 1.0);
    const BoundingBox half{0.3, 0.2, 0.5, 0.4}; // IoU = 1/3
    EXPECT_NEAR(bbox_reward(half, gt, 0.5), (1.0 / 3.0) / 0.5, 1e-12);
    EXPECT_EQ(bbox_reward(half, gt, 0.3), 1.0);
    EXPECT_THROW(bbox_reward(half, gt, 0.0), Error);
}

TEST(MathVerify, ExactAndArithmetic) {
    EXPECT_TRUE(math_verify(" 42 ", "42"));
    EXPECT_TRUE(math_verify("6*7", "42"));
    EXPECT_TRUE(math_verify("(1+2)/4", ".75"));
    EXPECT_TRUE(math_verify("-3", "-(1+2)"));
    EXPECT_FALSE(math_verify("41", "42"));
    EXPECT_TRUE(math_verify("1/0", "1/0"));
    EXPECT_FALSE(math_verify("Paris", "paris"));
    EXPECT_TRUE(math_verify("0.1+0.2", "0.3"));
    EXPECT_FALSE(math_verify("0.1", "0.2", 0.05));
    EXPECT_EQ(ArithmeticEvaluator::evaluate("2*(3+4)-5/5"), 13.0);
    EXPECT_EQ(ArithmeticEvaluator::evaluate("2*"), std::nullopt);
    EXPECT_EQ(ArithmeticEvaluator::evaluate(std::string(200, '(') + "1" + std::string(200, ')')), std::nullopt);
}

TEST(Reward, WorkedExampleScoresOne) {
    const auto fx = load_fixture_as<AgentOutputFixture>("b3-answer");
    const auto r = evaluate_reward(fx.text, click_at({0.25, 0.6, 0.35, 0.7}));
    EXPECT_EQ(r.r_format, 1.0);
    EXPECT_EQ(r.r_type, 1.0);
    EXPECT_EQ(r.r_param, 1.0);
    EXPECT_EQ(r.r_acc, 1.0);
    EXPECT_EQ(r.r_total, 1.0);
}

TEST(Reward, TypeMatchPointMiss) {
    const auto r = evaluate_reward(output("{'action': 'click', 'position': [0.9, 0.9]}"), click_at({0.1, 0.1, 0.2, 0.2}));
    EXPECT_EQ(r.r_type, 1.0);
    EXPECT_EQ(r.r_param, 0.0);
    EXPECT_EQ(r.r_acc, 0.5);
    EXPECT_NEAR(r.r_total, 0.55, 1e-12);
}

TEST(Reward, FormatGate) {
    const auto r = evaluate_reward("<Answer>{'action': 'click', 'position': [0.15, 0.15]}</Answer>",
                                   click_at({0.1, 0.1, 0.2, 0.2}));
    EXPECT_EQ(r, RewardBreakdown{});
}

TEST(Reward, WrongKindEarnsFormatOnly) {
    const auto r = evaluate_reward(output("{'action': 'long_press', 'position': [0.15, 0.15]}"),
                                   click_at({0.1, 0.1, 0.2, 0.2}));
    EXPECT_EQ(r.r_type, 0.0);
    EXPECT_EQ(r.r_param, 0.0);
    EXPECT_NEAR(r.r_total, 0.1, 1e-15);
}

TEST(Reward, ScrollAndTextKinds) {
    const GroundTruth scroll{ActionKind::scroll, BoundingBox{0.0, 0.3, 1.0, 0.9}, std::nullopt};
    auto r = evaluate_reward(output("{'action': 'scroll', 'position': [0.0, 0.3, 1.0, 0.9]}"), scroll);
    EXPECT_EQ(r.r_total, 1.0);
    r = evaluate_reward(output("{'action': 'scroll', 'position': [0.5, 0.5]}"), scroll);
    EXPECT_EQ(r.r_param, 0.0);
    EXPECT_NEAR(r.r_total, 0.55, 1e-12);

    const GroundTruth typed{ActionKind::type_text, std::nullopt, std::string("12")};
    EXPECT_EQ(evaluate_reward(output("{'action': 'type', 'value': '3*4'}"), typed).r_total, 1.0);
    EXPECT_NEAR(evaluate_reward(output("{'action': 'type', 'value': '13'}"), typed).r_total, 0.55, 1e-12);

    const GroundTruth done{ActionKind::complete, std::nullopt, std::string("7")};
    EXPECT_EQ(evaluate_reward(output("{'action': 'complete', 'value': '7'}"), done).r_total, 1.0);
    EXPECT_NEAR(evaluate_reward(output("{'action': 'complete'}"), done).r_total, 0.55, 1e-12);
    const GroundTruth back{ActionKind::navigate_back, std::nullopt, std::nullopt};
    EXPECT_EQ(evaluate_reward(output("{'action': 'back'}"), back).r_total, 1.0);
}

TEST(Reward, CustomWeights) {
    const RewardWeights w{0.3, 0.7, 0.2, 0.8};
    const auto r = evaluate_reward(output("{'action': 'click', 'position': [0.9, 0.9]}"), click_at({0, 0, 0.1, 0.1}), w);
    EXPECT_NEAR(r.r_total, 0.3 + 0.7 * 0.2, 1e-15);
    EXPECT_THROW(evaluate_reward("", click_at({0, 0, 0.1, 0.1}), RewardWeights{0.5, 0.6}), Error);
}
