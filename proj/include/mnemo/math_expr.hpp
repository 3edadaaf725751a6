#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string_view>
#include <system_error>

namespace mnemo {

// Minimal arithmetic grammar used by the answer verifier:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | primary
//   primary := decimal | '(' expr ')'
//   decimal := digits ['.' digits] | '.' digits
//
// Returns nullopt on any syntax error, division by zero or non-finite result.
class ArithmeticEvaluator {
public:
    static std::optional<double> evaluate(std::string_view src) {
        ArithmeticEvaluator p(src);
        auto v = p.expr(0);
        p.skip_ws();
        if (!v || p.pos_ != p.src_.size() || !std::isfinite(*v)) return std::nullopt;
        return v;
    }

private:
    static constexpr int max_depth = 64;

    explicit ArithmeticEvaluator(std::string_view src) : src_(src) {}

    void skip_ws() noexcept {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
    }

    bool accept(char c) noexcept {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    std::optional<double> expr(int depth) {
        if (depth > max_depth) return std::nullopt;
        auto lhs = term(depth);
        while (lhs) {
            if (accept('+')) {
                auto rhs = term(depth);
                if (!rhs) return std::nullopt;
                *lhs += *rhs;
            } else if (accept('-')) {
                auto rhs = term(depth);
                if (!rhs) return std::nullopt;
                *lhs -= *rhs;
            } else {
                break;
            }
        }
        return lhs;
    }

    std::optional<double> term(int depth) {
        auto lhs = unary(depth);
        while (lhs) {
            if (accept('*')) {
                auto rhs = unary(depth);
                if (!rhs) return std::nullopt;
                *lhs *= *rhs;
            } else if (accept('/')) {
                auto rhs = unary(depth);
                if (!rhs || *rhs == 0.0) return std::nullopt;
                *lhs /= *rhs;
            } else {
                break;
            }
        }
        return lhs;
    }

    std::optional<double> unary(int depth) {
        if (depth > max_depth) return std::nullopt;
        if (accept('-')) {
            auto v = unary(depth + 1);
            if (!v) return std::nullopt;
            return -*v;
        }
        return primary(depth);
    }

    std::optional<double> primary(int depth) {
        if (accept('(')) {
            auto v = expr(depth + 1);
            if (!v || !accept(')')) return std::nullopt;
            return v;
        }
        skip_ws();
        const std::size_t start = pos_;
        bool digits = false, dot = false;
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c >= '0' && c <= '9') {
                digits = true;
            } else if (c == '.' && !dot) {
                dot = true;
            } else {
                break;
            }
            ++pos_;
        }
        if (!digits) return std::nullopt;
        const auto text = src_.substr(start, pos_ - start);
        if (text.back() == '.') return std::nullopt;
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) return std::nullopt;
        return v;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

} // namespace mnemo
