#include "support.hpp"

#include <gtest/gtest.h>

using namespace mnemo;
using mnemo::testing::chain;
using mnemo::testing::click;
using mnemo::testing::screen;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::io_error;
}

} // namespace

TEST(Error, MessageCarriesKindAndDetail) {
    const Error e(ErrorCode::invalid_geometry, "x outside [0,1]");
    EXPECT_STREQ(e.what(), "InvalidGeometry(x outside [0,1])");
    EXPECT_EQ(e.code(), ErrorCode::invalid_geometry);
    EXPECT_EQ(e.detail(), "x outside [0,1]");
    EXPECT_STREQ(Error(ErrorCode::empty_input, "").what(), "EmptyInput");
}

TEST(Fnv1a64, KnownVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
    EXPECT_EQ(hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
    EXPECT_EQ(hex64(1), "0000000000000001");
}

TEST(Text, TrimAndUtf8) {
    EXPECT_EQ(trim("  a b \n\t"), "a b");
    EXPECT_EQ(trim(" \n "), "");
    const auto cps = utf8_decode("a\xC3\xA9\xE6\x97\xA5");
    ASSERT_EQ(cps.size(), 3u);
    EXPECT_EQ(cps[1], U'é');
    EXPECT_EQ(cps[2], U'日');
    const auto bad = utf8_decode("\xFF" "a\xC3");
    ASSERT_EQ(bad.size(), 3u);
    EXPECT_EQ(bad[0], 0xFFFDu);
    EXPECT_EQ(bad[1], U'a');
    EXPECT_EQ(bad[2], 0xFFFDu);
    std::string round;
    for (char32_t cp : utf8_decode("x\xF0\x9F\x98\x80y")) utf8_append(round, cp);
    EXPECT_EQ(round, "x\xF0\x9F\x98\x80y");
}

TEST(Text, FormatReal) {
    EXPECT_EQ(format_real(0.3), "0.3");
    EXPECT_EQ(format_real(1.0), "1");
    EXPECT_EQ(format_real(0.1 + 0.2), "0.3");
    EXPECT_EQ(format_real(0.1 + 0.2, RealFormat::exact), "0.30000000000000004");
    EXPECT_EQ(format_real(1.0 / 3.0), "0.333333333");
    EXPECT_EQ(std::stod(format_real(1.0 / 3.0, RealFormat::exact)), 1.0 / 3.0);
}

TEST(Text, PairwiseSumMatchesPlainSumOnIntegers) {
    std::vector<double> xs;
    for (int i = 1; i <= 1000; ++i) xs.push_back(i);
    EXPECT_EQ(pairwise_sum(xs), 500500.0);
    EXPECT_EQ(pairwise_sum(std::span<const double>{}), 0.0);
}

TEST(Geometry, BoxContainsBoundary) {
    const BoundingBox b{0.1, 0.2, 0.3, 0.4};
    EXPECT_TRUE(b.contains({0.1, 0.2}));
    EXPECT_TRUE(b.contains({0.3, 0.4}));
    EXPECT_FALSE(b.contains({0.3000001, 0.3}));
    EXPECT_DOUBLE_EQ(b.area(), 0.2 * 0.2);
    EXPECT_EQ(b.center(), (Point{0.2, 0.30000000000000004}));
}

TEST(Geometry, Validation) {
    EXPECT_EQ(code_of([] { validate_point({1.01, 0.5}); }), ErrorCode::invalid_geometry);
    EXPECT_EQ(code_of([] { validate_point({0.5, -0.0001}); }), ErrorCode::invalid_geometry);
    EXPECT_EQ(code_of([] { validate_bbox({0.5, 0.1, 0.4, 0.2}); }), ErrorCode::invalid_geometry);
    EXPECT_EQ(code_of([] { validate_bbox({0.1, 0.5, 0.4, 0.2}); }), ErrorCode::invalid_geometry);
    EXPECT_NO_THROW(validate_bbox({0.2, 0.2, 0.2, 0.2}));
    EXPECT_NO_THROW(validate_point({0.0, 1.0}));
    EXPECT_EQ(code_of([] { validate_point({std::nan(""), 0.5}); }), ErrorCode::invalid_geometry);
}

TEST(Action, KindNamesAndAliases) {
    for (auto k : all_action_kinds) EXPECT_EQ(parse_action_kind(to_string(k)), k);
    EXPECT_EQ(parse_action_kind("TYPE"), ActionKind::type_text);
    EXPECT_EQ(parse_action_kind("input_text"), ActionKind::type_text);
    EXPECT_EQ(parse_action_kind("Home"), ActionKind::navigate_home);
    EXPECT_EQ(parse_action_kind("BACK"), ActionKind::navigate_back);
    EXPECT_EQ(parse_action_kind("long-press"), ActionKind::long_press);
    EXPECT_EQ(parse_action_kind("swipe"), std::nullopt);
}

TEST(Action, ValidationPerKind) {
    Action a;
    a.kind = ActionKind::click;
    EXPECT_EQ(code_of([&] { validate_action(a); }), ErrorCode::missing_field);
    a.position = Point{0.3, 0.66};
    EXPECT_NO_THROW(validate_action(a));
    a.position = Point{1.5, 0.5};
    EXPECT_EQ(code_of([&] { validate_action(a); }), ErrorCode::invalid_geometry);

    Action s;
    s.kind = ActionKind::scroll;
    EXPECT_EQ(code_of([&] { validate_action(s); }), ErrorCode::missing_field);
    s.region = BoundingBox{0, 0.3, 1, 0.9};
    s.value = "Down";
    EXPECT_NO_THROW(validate_action(s));

    Action t;
    t.kind = ActionKind::type_text;
    EXPECT_EQ(code_of([&] { validate_action(t); }), ErrorCode::missing_field);
    t.value = "";
    EXPECT_EQ(code_of([&] { validate_action(t); }), ErrorCode::missing_field);
    t.value = "hello";
    t.position = Point{0.5, 0.5};
    EXPECT_NO_THROW(validate_action(t));

    Action o;
    o.kind = ActionKind::open_app;
    EXPECT_EQ(code_of([&] { validate_action(o); }), ErrorCode::missing_field);

    for (auto k : {ActionKind::navigate_home, ActionKind::navigate_back, ActionKind::complete,
                   ActionKind::impossible}) {
        Action n;
        n.kind = k;
        EXPECT_NO_THROW(validate_action(n));
        n.position = Point{0.1, 0.1};
        EXPECT_EQ(code_of([&] { validate_action(n); }), ErrorCode::unexpected_field);
        n.position.reset();
        n.region = BoundingBox{0, 0, 1, 1};
        EXPECT_EQ(code_of([&] { validate_action(n); }), ErrorCode::unexpected_field);
    }
    Action w;
    w.kind = ActionKind::wait;
    EXPECT_NO_THROW(validate_action(w));
}

TEST(Observation, DuplicateWidgetIdsRejected) {
    Observation o{"s", {mnemo::testing::widget("a", "button", "A", {0, 0, 0.1, 0.1}),
                        mnemo::testing::widget("a", "button", "B", {0.2, 0.2, 0.3, 0.3})},
                  std::nullopt};
    EXPECT_EQ(code_of([&] { validate_observation(o); }), ErrorCode::invalid_observation);
    o.widgets[1].id = "b";
    EXPECT_NO_THROW(validate_observation(o));
    EXPECT_EQ(o.hit_test({0.25, 0.25})->id, "b");
    EXPECT_EQ(o.hit_test({0.9, 0.9}), nullptr);
    EXPECT_EQ(o.find_widget("a")->label, "A");
}

TEST(Instruction, EmptyRejected) {
    EXPECT_EQ(code_of([] { validate_instruction({"  \n"}); }), ErrorCode::empty_input);
    EXPECT_NO_THROW(validate_instruction({"Open Settings"}));
}

TEST(Trajectory, ContiguityAndMonotonicity) {
    auto t = chain("t", "goal", 3);
    EXPECT_NO_THROW(validate_trajectory(t));
    auto gap = t;
    gap.transitions[1].pre.screen_id = "elsewhere";
    EXPECT_EQ(code_of([&] { validate_trajectory(gap); }), ErrorCode::invalid_trajectory);
    auto back = t;
    back.transitions[2].step_index = 2;
    EXPECT_EQ(code_of([&] { validate_trajectory(back); }), ErrorCode::non_monotonic_step);
    Trajectory empty;
    EXPECT_NO_THROW(validate_trajectory(empty));
}

TEST(Describe, CompactForms) {
    EXPECT_EQ(describe(click("Settings")), "click(Settings)");
    Action p;
    p.kind = ActionKind::click;
    p.position = Point{0.3, 0.66};
    EXPECT_EQ(describe(p), "click(0.3,0.66)");
    Action r;
    r.kind = ActionKind::scroll;
    r.region = BoundingBox{0.1, 0.2, 0.9, 0.8};
    EXPECT_EQ(describe(r), "scroll(0.1,0.2,0.9,0.8)");
    Action b;
    b.kind = ActionKind::navigate_back;
    EXPECT_EQ(describe(b), "navigate_back()");
    const Transition m{screen("HomeScreen"), click("Settings"), screen("SettingsPage"), 1};
    EXPECT_EQ(describe(m), "(HomeScreen, click(Settings), SettingsPage)");
}

TEST(DedupKey, DependsOnGoalAndActionsOnly) {
    auto a = chain("a", "goal", 3);
    auto b = chain("b", "goal", 3, true, "other");
    EXPECT_EQ(dedup_key(a), dedup_key(b));
    b.transitions[1].action.position = Point{0.5, 0.5000001};
    EXPECT_NE(dedup_key(a), dedup_key(b));
    auto c = chain("c", "another goal", 3);
    EXPECT_NE(dedup_key(a), dedup_key(c));
}
