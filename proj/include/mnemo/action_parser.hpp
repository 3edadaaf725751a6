#pragma once

#include "mnemo/core.hpp"
#include "mnemo/error.hpp"
#include "mnemo/text.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

// Structured agent output:
//
//   <Progress_Evaluation> ... </Progress_Evaluation>
//   <Decision_Rationale> ... </Decision_Rationale>
//   <History_Summary> ... </History_Summary>
//   <Answer> {'action': 'click', 'value': 'Apply', 'position': [0.3, 0.66]} </Answer>
//
// Blocks must appear in this order with matching closing tags. The Answer
// payload is a flat record; keys and strings may use single or double quotes.
namespace mnemo {

struct ParsedAgentOutput {
    std::string progress_evaluation;
    std::string decision_rationale;
    std::string history_summary;
    Action action;

    bool operator==(const ParsedAgentOutput&) const = default;
};

inline constexpr std::array<std::string_view, 4> agent_output_tags{
    "Progress_Evaluation", "Decision_Rationale", "History_Summary", "Answer"};

namespace detail {

// Recursive-descent reader for the Answer record. Never reads past the end of
// its input and bounds nesting, so arbitrary bytes are safe.
class AnswerReader {
public:
    using List = std::vector<double>;
    using Value = std::variant<std::monostate, std::string, double, List>;

    explicit AnswerReader(std::string_view src) : src_(src) {}

    struct Field {
        std::string key;
        Value value;
    };

    std::vector<Field> read_record() {
        std::vector<Field> fields;
        skip_ws();
        expect('{');
        skip_ws();
        if (peek() == '}') {
            ++pos_;
        } else {
            while (true) {
                skip_ws();
                Field f;
                f.key = read_string();
                skip_ws();
                expect(':');
                skip_ws();
                f.value = read_value();
                fields.push_back(std::move(f));
                skip_ws();
                if (peek() == ',') {
                    ++pos_;
                    skip_ws();
                    if (peek() == '}') {
                        ++pos_;
                        break;
                    }
                    continue;
                }
                expect('}');
                break;
            }
        }
        skip_ws();
        if (pos_ != src_.size()) fail("trailing characters after record");
        return fields;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::malformed_answer, what + " at offset " + std::to_string(pos_));
    }

    char peek() const noexcept { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    bool at_end() const noexcept { return pos_ >= src_.size(); }

    void skip_ws() noexcept {
        while (!at_end() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
                             src_[pos_] == '\r')) {
            ++pos_;
        }
    }

    void expect(char c) {
        if (at_end() || src_[pos_] != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    unsigned hex_digit(char c) const {
        if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
        if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
        if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
        fail("bad \\u escape");
    }

    std::string read_string() {
        if (at_end() || (peek() != '\'' && peek() != '"')) fail("expected quoted string");
        const char quote = src_[pos_++];
        std::string out;
        while (true) {
            if (at_end()) fail("unterminated string");
            const char c = src_[pos_++];
            if (c == quote) break;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (at_end()) fail("unterminated escape");
            const char e = src_[pos_++];
            switch (e) {
                case '\\': out.push_back('\\'); break;
                case '\'': out.push_back('\''); break;
                case '"': out.push_back('"'); break;
                case '/': out.push_back('/'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case 'u': {
                    if (pos_ + 4 > src_.size()) fail("short \\u escape");
                    char32_t cp = 0;
                    for (int i = 0; i < 4; ++i) cp = (cp << 4) | hex_digit(src_[pos_++]);
                    if (cp >= 0xD800 && cp <= 0xDFFF) fail("surrogate in \\u escape");
                    utf8_append(out, cp);
                    break;
                }
                default: fail("unknown escape");
            }
        }
        return out;
    }

    double read_number() {
        const std::size_t start = pos_;
        if (peek() == '-' || peek() == '+') ++pos_;
        while (!at_end() && ((src_[pos_] >= '0' && src_[pos_] <= '9') || src_[pos_] == '.' ||
                             src_[pos_] == 'e' || src_[pos_] == 'E' ||
                             ((src_[pos_] == '-' || src_[pos_] == '+') && pos_ > start &&
                              (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E')))) {
            ++pos_;
        }
        std::string_view text = src_.substr(start, pos_ - start);
        if (!text.empty() && text.front() == '+') text.remove_prefix(1);
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() ||
            !std::isfinite(v)) {
            fail("bad number");
        }
        return v;
    }

    Value read_value() {
        const char c = peek();
        if (c == '\'' || c == '"') return read_string();
        if (c == '[') {
            ++pos_;
            List items;
            skip_ws();
            if (peek() == ']') {
                ++pos_;
                return items;
            }
            while (true) {
                skip_ws();
                items.push_back(read_number());
                if (items.size() > 16) fail("list too long");
                skip_ws();
                if (peek() == ',') {
                    ++pos_;
                    continue;
                }
                expect(']');
                break;
            }
            return items;
        }
        if (src_.substr(pos_, 4) == "null" || src_.substr(pos_, 4) == "None") {
            pos_ += 4;
            return std::monostate{};
        }
        if (c == '-' || c == '+' || c == '.' || (c >= '0' && c <= '9')) return read_number();
        fail("unexpected value");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

inline Action action_from_answer(std::string_view payload) {
    AnswerReader reader(payload);
    const auto fields = reader.read_record();

    std::optional<std::string> kind_name;
    Action a;
    bool seen_value = false, seen_position = false;
    for (const auto& f : fields) {
        if (f.key == "action") {
            if (kind_name) throw Error(ErrorCode::malformed_answer, "duplicate key action");
            const auto* s = std::get_if<std::string>(&f.value);
            if (!s) throw Error(ErrorCode::malformed_answer, "action must be a string");
            kind_name = *s;
        } else if (f.key == "value") {
            if (seen_value) throw Error(ErrorCode::malformed_answer, "duplicate key value");
            seen_value = true;
            if (const auto* s = std::get_if<std::string>(&f.value)) {
                if (!s->empty()) a.value = *s;
            } else if (!std::holds_alternative<std::monostate>(f.value)) {
                throw Error(ErrorCode::malformed_answer, "value must be a string");
            }
        } else if (f.key == "position") {
            if (seen_position) throw Error(ErrorCode::malformed_answer, "duplicate key position");
            seen_position = true;
            if (std::holds_alternative<std::monostate>(f.value)) continue;
            const auto* list = std::get_if<AnswerReader::List>(&f.value);
            if (!list) throw Error(ErrorCode::malformed_answer, "position must be a list");
            if (list->size() == 2) {
                a.position = Point{(*list)[0], (*list)[1]};
            } else if (list->size() == 4) {
                a.region = BoundingBox{(*list)[0], (*list)[1], (*list)[2], (*list)[3]};
            } else if (!list->empty()) {
                throw Error(ErrorCode::malformed_answer, "position must have 0, 2 or 4 numbers");
            }
        } else {
            throw Error(ErrorCode::malformed_answer, "unknown key " + f.key);
        }
    }
    if (!kind_name) throw Error(ErrorCode::malformed_answer, "missing key action");
    const auto kind = parse_action_kind(*kind_name);
    if (!kind) throw Error(ErrorCode::invalid_action, "unknown action kind '" + *kind_name + "'");
    a.kind = *kind;
    try {
        return validate_action(std::move(a));
    } catch (const Error& e) {
        throw Error(ErrorCode::invalid_action, e.what());
    }
}

// Up to 6 decimals, trailing zeros stripped: 0.3 -> "0.3", 1 -> "1".
inline std::string format_coordinate(double v) {
    std::array<char, 64> buf{};
    std::snprintf(buf.data(), buf.size(), "%.6f", v);
    std::string s(buf.data());
    if (s.find('.') != std::string::npos) {
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

inline std::string quote_string(std::string_view s) {
    std::string out = "\"";
    for (unsigned char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c < 0x20) {
                    std::array<char, 8> buf{};
                    std::snprintf(buf.data(), buf.size(), "\\u%04x", c);
                    out += buf.data();
                } else {
                    out.push_back(static_cast<char>(c));
                }
        }
    }
    out.push_back('"');
    return out;
}

} // namespace detail

inline ParsedAgentOutput parse_agent_output(std::string_view text) {
    std::array<std::string_view, 4> blocks{};
    std::size_t pos = 0;
    for (std::size_t i = 0; i < agent_output_tags.size(); ++i) {
        const std::string open = "<" + std::string(agent_output_tags[i]) + ">";
        const std::string close = "</" + std::string(agent_output_tags[i]) + ">";
        const auto o = text.find(open, pos);
        if (o == std::string_view::npos) {
            throw Error(ErrorCode::missing_tag, std::string(agent_output_tags[i]));
        }
        const auto body_start = o + open.size();
        const auto c = text.find(close, body_start);
        if (c == std::string_view::npos) {
            throw Error(ErrorCode::missing_tag, "/" + std::string(agent_output_tags[i]));
        }
        blocks[i] = trim(text.substr(body_start, c - body_start));
        pos = c + close.size();
    }
    ParsedAgentOutput out;
    out.progress_evaluation = std::string(blocks[0]);
    out.decision_rationale = std::string(blocks[1]);
    out.history_summary = std::string(blocks[2]);
    out.action = detail::action_from_answer(blocks[3]);
    return out;
}

inline std::string serialize_agent_output(const ParsedAgentOutput& p) {
    const auto& a = p.action;
    std::string answer = "{\"action\": \"" + std::string(to_string(a.kind)) + "\", \"value\": " +
                         detail::quote_string(a.value.value_or("")) + ", \"position\": [";
    if (a.position) {
        answer += detail::format_coordinate(a.position->x) + ", " +
                  detail::format_coordinate(a.position->y);
    } else if (a.region) {
        answer += detail::format_coordinate(a.region->x_min) + ", " +
                  detail::format_coordinate(a.region->y_min) + ", " +
                  detail::format_coordinate(a.region->x_max) + ", " +
                  detail::format_coordinate(a.region->y_max);
    }
    answer += "]}";

    const std::array<std::string_view, 4> bodies{p.progress_evaluation, p.decision_rationale,
                                                  p.history_summary, answer};
    std::string out;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        out += "<" + std::string(agent_output_tags[i]) + ">\n";
        out += bodies[i];
        if (!bodies[i].empty()) out.push_back('\n');
        out += "</" + std::string(agent_output_tags[i]) + ">\n";
    }
    return out;
}

// R_format: 1 iff the text parses.
inline bool check_format(std::string_view text) noexcept {
    try {
        parse_agent_output(text);
        return true;
    } catch (...) {
        return false;
    }
}

} // namespace mnemo
