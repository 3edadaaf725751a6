#include "support.hpp"

#include <gtest/gtest.h>

using namespace mnemo;

namespace {

std::string wrap(const std::string& answer) {
    return "<Progress_Evaluation>p</Progress_Evaluation>\n<Decision_Rationale>d</Decision_Rationale>\n"
           "<History_Summary>h</History_Summary>\n<Answer>" +
           answer + "</Answer>";
}

ErrorCode parse_error(const std::string& text) {
    try {
        parse_agent_output(text);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "parsed: " << text;
    return ErrorCode::io_error;
}

} // namespace

TEST(Parser, WorkedExample) {
    const auto fx = load_fixture_as<AgentOutputFixture>("b3-answer");
    const auto p = parse_agent_output(fx.text);
    EXPECT_EQ(p, fx.expected);
    EXPECT_EQ(p.action.kind, ActionKind::click);
    EXPECT_EQ(p.action.value, "Apply");
    EXPECT_EQ(p.action.position, (Point{0.3, 0.66}));
    EXPECT_FALSE(p.action.region);
    EXPECT_TRUE(check_format(fx.text));
}

TEST(Parser, CorpusRoundTrip) {
    const auto corpus = load_fixture_as<ParserCorpus>("b3-parser-corpus");
    ASSERT_EQ(corpus.items.size(), 50u);
    for (const auto& item : corpus.items) {
        const auto text = serialize_agent_output(item);
        EXPECT_EQ(parse_agent_output(text), item) << text;
        EXPECT_EQ(serialize_agent_output(parse_agent_output(text)), text);
    }
}

TEST(Parser, MissingOrOutOfOrderTags) {
    EXPECT_EQ(parse_error("<Answer>{'action': 'wait'}</Answer>"), ErrorCode::missing_tag);
    EXPECT_EQ(parse_error("<Progress_Evaluation>p</Progress_Evaluation><Decision_Rationale>d</Decision_Rationale>"
                          "<History_Summary>h</History_Summary><Answer>{'action': 'wait'}"),
              ErrorCode::missing_tag);
    // Answer before History_Summary: the answer is skipped over while searching.
    EXPECT_EQ(parse_error("<Progress_Evaluation>p</Progress_Evaluation><Decision_Rationale>d</Decision_Rationale>"
                          "<Answer>{'action': 'wait'}</Answer><History_Summary>h</History_Summary>"),
              ErrorCode::missing_tag);
    EXPECT_EQ(parse_error(""), ErrorCode::missing_tag);
}

TEST(Parser, MalformedAnswers) {
    for (const char* bad : {"", "{", "{'action': 'click'", "{'action' 'click'}", "{'action': click}",
                            "{'action': 'click'} trailing", "{'action': 'wait', 'bogus': 1}",
                            "{'action': 'wait', 'action': 'wait'}", "{'value': 'x'}",
                            "{'action': 'click', 'position': [0.1]}", "{'action': 'click', 'position': 'x'}",
                            "{'action': 'wait', 'value': 3}", "{'action': 'type', 'value': 'a\\q'}",
                            "{'action': 'wait', 'value': '\\ud800'}", "{'action': 'click', 'position': [1e999, 0]}"}) {
        EXPECT_EQ(parse_error(wrap(bad)), ErrorCode::malformed_answer) << bad;
    }
}

TEST(Parser, InvalidActions) {
    EXPECT_EQ(parse_error(wrap("{'action': 'swipe'}")), ErrorCode::invalid_action);
    EXPECT_EQ(parse_error(wrap("{'action': 'click', 'value': 'OK'}")), ErrorCode::invalid_action);
    EXPECT_EQ(parse_error(wrap("{'action': 'click', 'position': [1.3, 0.2]}")), ErrorCode::invalid_action);
    EXPECT_EQ(parse_error(wrap("{'action': 'navigate_back', 'position': [0.1, 0.2]}")), ErrorCode::invalid_action);
    EXPECT_EQ(parse_error(wrap("{'action': 'type_text', 'value': ''}")), ErrorCode::invalid_action);
}

TEST(Parser, AcceptedVariants) {
    auto p = parse_agent_output(wrap(R"({"action": "TYPE", "value": "it's \"fine\"\n", "position": [],})"));
    EXPECT_EQ(p.action.kind, ActionKind::type_text);
    EXPECT_EQ(p.action.value, "it's \"fine\"\n");
    EXPECT_FALSE(p.action.position);

    p = parse_agent_output(wrap("{'action': 'scroll', 'value': 'Down', 'position': [0, 0.3, 1, 0.95]}"));
    EXPECT_EQ(p.action.region, (BoundingBox{0, 0.3, 1, 0.95}));

    p = parse_agent_output(wrap("{'action': 'open_app', 'value': 'Caf\\u00e9'}"));
    EXPECT_EQ(p.action.value, "Café");

    p = parse_agent_output(wrap("{'action': 'home', 'value': None, 'position': null}"));
    EXPECT_EQ(p.action.kind, ActionKind::navigate_home);
    EXPECT_FALSE(p.action.value);

    p = parse_agent_output(wrap("{'action': 'click', 'position': [+0.5, 5e-1]}"));
    EXPECT_EQ(p.action.position, (Point{0.5, 0.5}));

    p = parse_agent_output("noise <Progress_Evaluation>\n  spaced out \n</Progress_Evaluation>"
                           "<Decision_Rationale></Decision_Rationale><History_Summary>x</History_Summary>"
                           "<Answer>{'action': 'wait'}</Answer> tail");
    EXPECT_EQ(p.progress_evaluation, "spaced out");
    EXPECT_EQ(p.decision_rationale, "");
}

TEST(Parser, SerializeFormat) {
    ParsedAgentOutput p;
    p.progress_evaluation = "a";
    p.decision_rationale = "b";
    p.history_summary = "c";
    p.action.kind = ActionKind::click;
    p.action.value = "Apply";
    p.action.position = Point{0.3, 0.66};
    EXPECT_EQ(serialize_agent_output(p),
              "<Progress_Evaluation>\na\n</Progress_Evaluation>\n<Decision_Rationale>\nb\n</Decision_Rationale>\n"
              "<History_Summary>\nc\n</History_Summary>\n"
              "<Answer>\n{\"action\": \"click\", \"value\": \"Apply\", \"position\": [0.3, 0.66]}\n</Answer>\n");
    EXPECT_EQ(detail::format_coordinate(1.0), "1");
    EXPECT_EQ(detail::format_coordinate(0.1234567), "0.123457");
    EXPECT_EQ(detail::format_coordinate(-0.0), "0");
}

TEST(Parser, CheckFormatNeverThrows) {
    EXPECT_FALSE(check_format("garbage"));
    EXPECT_FALSE(check_format(wrap("{'action': 'click'}")));
    EXPECT_TRUE(check_format(wrap("{'action': 'complete', 'value': '42'}")));
}
