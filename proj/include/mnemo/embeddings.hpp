#pragma once

#include "mnemo/core.hpp"
#include "mnemo/error.hpp"
#include "mnemo/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mnemo {

inline constexpr std::size_t default_embedding_dimension = 256;

// Fixed-dimension real vector. Vectors produced by providers are unit-normalized
// unless they are the zero vector (the degenerate embedding of empty input).
struct EmbeddingVector {
    std::vector<double> values;

    bool operator==(const EmbeddingVector&) const = default;

    std::size_t dimension() const noexcept { return values.size(); }

    bool is_zero() const noexcept {
        for (double v : values) {
            if (v != 0.0) return false;
        }
        return true;
    }

    double norm() const noexcept {
        double s = 0.0;
        for (double v : values) s += v * v;
        return std::sqrt(s);
    }

    EmbeddingVector scaled(double c) const {
        EmbeddingVector out = *this;
        for (double& v : out.values) v *= c;
        return out;
    }
};

inline EmbeddingVector normalized(EmbeddingVector v) {
    const double n = v.norm();
    if (n == 0.0 || !std::isfinite(n)) return v;
    for (double& x : v.values) x /= n;
    return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// (a.b) / (|a| |b|), or 0 when either side is the zero vector.
inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw Error(ErrorCode::dimension_mismatch,
                    std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()));
    }
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        ab += a.values[i] * b.values[i];
        aa += a.values[i] * a.values[i];
        bb += b.values[i] * b.values[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    const double c = ab / (std::sqrt(aa) * std::sqrt(bb));
    return std::clamp(c, -1.0, 1.0);
}

enum class ProviderKind { hashing, remote };

constexpr std::string_view to_string(ProviderKind k) {
    return k == ProviderKind::hashing ? "hashing" : "remote";
}

// phi (text) and psi (observation) behind one interface. Implementations are
// read-only after construction and safe to share between threads.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual ProviderKind kind() const noexcept = 0;
    virtual std::size_t dimension() const noexcept = 0;

    // Precondition: text non-empty (checked by the free function embed_text).
    virtual EmbeddingVector embed_text_impl(std::string_view text) const = 0;
    virtual EmbeddingVector embed_observation_impl(const Observation& o) const = 0;
};

// The widget-token text an observation is embedded through: one "role label"
// line per widget in tree order. screen_id is deliberately not a feature.
inline std::string observation_feature_text(const Observation& o) {
    std::string out;
    for (std::size_t i = 0; i < o.widgets.size(); ++i) {
        if (i > 0) out.push_back('\n');
        out += o.widgets[i].role;
        out.push_back(' ');
        out += o.widgets[i].label;
    }
    return out;
}

// Signed character-trigram feature hashing.
//
// The text is ASCII-lowercased, decoded to code points and wrapped in the
// boundary markers U+0002 / U+0003. Every window of three code points is
// UTF-8 encoded and hashed with FNV-1a 64; the low bits pick the bucket
// (h mod D) and the top bit picks the sign. Bucket counts are integers, so the
// normalization below is bit-reproducible on any IEEE-754 platform.
class HashingEmbedder final : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dimension = default_embedding_dimension)
        : dimension_(dimension) {
        if (dimension_ == 0) throw Error(ErrorCode::dimension_mismatch, "dimension must be > 0");
    }

    ProviderKind kind() const noexcept override { return ProviderKind::hashing; }
    std::size_t dimension() const noexcept override { return dimension_; }

    EmbeddingVector embed_text_impl(std::string_view text) const override {
        std::string lowered(text);
        for (char& c : lowered) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        std::vector<char32_t> cps;
        cps.push_back(0x02);
        for (char32_t cp : utf8_decode(lowered)) cps.push_back(cp);
        cps.push_back(0x03);

        std::vector<std::int64_t> counts(dimension_, 0);
        std::string gram;
        for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
            gram.clear();
            for (std::size_t k = 0; k < 3; ++k) utf8_append(gram, cps[i + k]);
            const std::uint64_t h = fnv1a64(gram);
            const std::size_t bucket = static_cast<std::size_t>(h % dimension_);
            counts[bucket] += (h >> 63) ? -1 : 1;
        }
        return from_counts(counts);
    }

    EmbeddingVector embed_observation_impl(const Observation& o) const override {
        if (o.widgets.empty()) return EmbeddingVector{std::vector<double>(dimension_, 0.0)};
        return embed_text_impl(observation_feature_text(o));
    }

private:
    static EmbeddingVector from_counts(const std::vector<std::int64_t>& counts) {
        std::int64_t sq = 0;
        for (auto c : counts) sq += c * c;
        EmbeddingVector v{std::vector<double>(counts.size(), 0.0)};
        if (sq == 0) return v;
        const double n = std::sqrt(static_cast<double>(sq));
        for (std::size_t i = 0; i < counts.size(); ++i) {
            v.values[i] = static_cast<double>(counts[i]) / n;
        }
        return v;
    }

    std::size_t dimension_;
};

inline EmbeddingVector embed_text(const EmbeddingProvider& p, std::string_view text) {
    if (text.empty()) throw Error(ErrorCode::empty_input, "text");
    return p.embed_text_impl(text);
}

inline EmbeddingVector embed_observation(const EmbeddingProvider& p, const Observation& o) {
    return p.embed_observation_impl(o);
}

} // namespace mnemo
