#pragma once

#include "mnemo/core.hpp"
#include "mnemo/embeddings.hpp"
#include "mnemo/error.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace mnemo {

struct EntryId {
    std::uint64_t value = 0;

    auto operator<=>(const EntryId&) const = default;
};

// Tunables for retrieval. All defaults are our own choice.
// Retrieval scores this close are treated as equal and ranked by id.
inline constexpr double score_tie_tolerance = 1e-12;

struct MemoryConfig {
    std::size_t horizon = 5; // H
    std::size_t top_k = 3;   // K
    double lambda = 0.5;     // intent vs. visual weight in hybrid retrieval
};

// ---------------------------------------------------------------------------
// Episodic memory: the current task's transitions, read through a sliding
// window of fixed horizon.
// ---------------------------------------------------------------------------
class EpisodicStore {
public:
    explicit EpisodicStore(std::size_t horizon = MemoryConfig{}.horizon) : horizon_(horizon) {}

    void append(Transition m) {
        if (!transitions_.empty() && m.step_index <= transitions_.back().step_index) {
            throw Error(ErrorCode::non_monotonic_step,
                        "step " + std::to_string(m.step_index) + " after " +
                            std::to_string(transitions_.back().step_index));
        }
        transitions_.push_back(std::move(m));
    }

    // m_k for k in [max(1, t - H), t - 1].
    std::vector<Transition> context(std::size_t t, std::size_t horizon) const {
        if (t < 1) throw Error(ErrorCode::out_of_range, "t must be >= 1");
        const std::size_t first = (t > horizon + 1) ? t - horizon : 1;
        std::vector<Transition> out;
        for (const auto& m : transitions_) {
            if (m.step_index >= first && m.step_index + 1 <= t) out.push_back(m);
        }
        return out;
    }

    std::vector<Transition> context(std::size_t t) const { return context(t, horizon_); }

    void clear() noexcept { transitions_.clear(); }
    std::size_t size() const noexcept { return transitions_.size(); }
    bool empty() const noexcept { return transitions_.empty(); }
    std::size_t horizon() const noexcept { return horizon_; }
    void set_horizon(std::size_t h) noexcept { horizon_ = h; }
    const std::vector<Transition>& transitions() const noexcept { return transitions_; }

private:
    std::size_t horizon_;
    std::vector<Transition> transitions_;
};

inline EpisodicStore& append_episodic(EpisodicStore& store, Transition m) {
    store.append(std::move(m));
    return store;
}

inline std::vector<Transition> episodic_context(const EpisodicStore& store, std::size_t t,
                                                std::size_t horizon) {
    return store.context(t, horizon);
}

// ---------------------------------------------------------------------------
// Long-term entries
// ---------------------------------------------------------------------------

struct SemanticEntry {
    EntryId id;
    std::string rule_text;          // d_i
    std::string source_instruction; // Q_hist: instruction of the task the rule came from
    EmbeddingVector key;            // phi(Q_hist)

    bool operator==(const SemanticEntry&) const = default;
};

struct ExperientialEntry {
    EntryId id;
    Trajectory trajectory;
    std::string summary;        // g(tau)
    EmbeddingVector intent_key; // phi(goal)
    EmbeddingVector task_key;   // psi(first observation)
    bool success = false;

    bool operator==(const ExperientialEntry&) const = default;
};

enum class RetrievalStrategy { top_k, mixed, success_only };

constexpr std::string_view to_string(RetrievalStrategy s) {
    switch (s) {
        case RetrievalStrategy::top_k: return "top_k";
        case RetrievalStrategy::mixed: return "mixed";
        case RetrievalStrategy::success_only: return "success_only";
    }
    return "top_k";
}

inline std::optional<RetrievalStrategy> parse_retrieval_strategy(std::string_view s) {
    if (s == "top_k" || s == "top-k" || s == "topk") return RetrievalStrategy::top_k;
    if (s == "mixed") return RetrievalStrategy::mixed;
    if (s == "success_only" || s == "success-only") return RetrievalStrategy::success_only;
    return std::nullopt;
}

struct ScoredItem {
    EntryId id;
    std::string text;
    double score = 0.0;

    bool operator==(const ScoredItem&) const = default;
};

// g(tau). The default is a fixed template; callers may plug in a model.
using Summarizer = std::function<std::string(const Trajectory&)>;

inline std::string template_summary(const Trajectory& t) {
    std::string steps;
    for (std::size_t i = 0; i < t.transitions.size(); ++i) {
        if (i > 0) steps += " → ";
        steps += to_string(t.transitions[i].action.kind);
    }
    return "Goal: " + t.goal.text + ". Steps: " + steps +
           ". Outcome: " + (t.success ? "success" : "failure") + ".";
}

// ---------------------------------------------------------------------------
// Retrieved context and its prompt rendering
// ---------------------------------------------------------------------------

struct RetrievedContext {
    std::vector<Transition> episodic;       // C^epi
    std::vector<std::string> semantic;      // C^sem
    std::vector<std::string> experiential;  // C^exp
    std::vector<ScoredItem> semantic_provenance;
    std::vector<ScoredItem> experiential_provenance;

    bool empty() const noexcept {
        return episodic.empty() && semantic.empty() && experiential.empty();
    }

    // "<EPI>- a\n- b</EPI><SEM>..</SEM><EXP>..</EXP>", or "" when nothing was retrieved.
    std::string render() const {
        if (empty()) return {};
        const auto block = [](std::string_view tag, const std::vector<std::string>& items) {
            std::string out = "<" + std::string(tag) + ">";
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (i > 0) out.push_back('\n');
                out += "- " + items[i];
            }
            out += "</" + std::string(tag) + ">";
            return out;
        };
        std::vector<std::string> epi;
        epi.reserve(episodic.size());
        for (const auto& m : episodic) epi.push_back(describe(m));
        return block("EPI", epi) + block("SEM", semantic) + block("EXP", experiential);
    }
};

inline RetrievedContext assemble_context(std::vector<Transition> episodic,
                                         std::vector<ScoredItem> semantic,
                                         std::vector<ScoredItem> experiential) {
    RetrievedContext ctx;
    ctx.episodic = std::move(episodic);
    for (const auto& s : semantic) ctx.semantic.push_back(s.text);
    for (const auto& e : experiential) ctx.experiential.push_back(e.text);
    ctx.semantic_provenance = std::move(semantic);
    ctx.experiential_provenance = std::move(experiential);
    return ctx;
}

// ---------------------------------------------------------------------------
// Repository: semantic + experiential stores with exact cosine retrieval.
//
// Keys are kept in contiguous row-major matrices; since stored keys are unit
// vectors, scoring is a dot product against the normalized query. Reads take a
// shared lock and writes an exclusive one, so a query sees an entry either
// fully or not at all.
// ---------------------------------------------------------------------------
class MemoryRepository {
public:
    struct Snapshot {
        std::uint64_t next_id = 1;
        std::vector<SemanticEntry> semantic;
        std::vector<ExperientialEntry> experiential;
    };

    explicit MemoryRepository(std::shared_ptr<const EmbeddingProvider> provider)
        : provider_(std::move(provider)) {
        if (!provider_) throw Error(ErrorCode::invalid_config, "null embedding provider");
    }

    MemoryRepository(const MemoryRepository&) = delete;
    MemoryRepository& operator=(const MemoryRepository&) = delete;

    const EmbeddingProvider& provider() const noexcept { return *provider_; }
    std::shared_ptr<const EmbeddingProvider> provider_ptr() const noexcept { return provider_; }
    std::size_t dimension() const noexcept { return provider_->dimension(); }

    // --- semantic ----------------------------------------------------------

    EntryId add_semantic_entry(std::string rule_text, std::string source_instruction) {
        if (rule_text.empty()) throw Error(ErrorCode::empty_input, "rule_text");
        if (source_instruction.empty()) throw Error(ErrorCode::empty_input, "source_instruction");
        auto key = embed_text(*provider_, source_instruction);
        check_dimension(key);

        std::unique_lock lock(mutex_);
        auto pair = std::make_pair(rule_text, source_instruction);
        if (semantic_pairs_.contains(pair)) {
            throw Error(ErrorCode::duplicate_entry, "semantic rule already stored");
        }
        SemanticEntry e{EntryId{next_id_++}, std::move(rule_text), std::move(source_instruction),
                        std::move(key)};
        insert_semantic(std::move(e));
        return semantic_.back().id;
    }

    std::vector<ScoredItem> retrieve_semantic(const Instruction& q, std::size_t k) const {
        return retrieve_semantic(embed_text(*provider_, q.text), k);
    }

    // S^sem = cos(query, k^sem_i); Top-K by score, ties by ascending id.
    std::vector<ScoredItem> retrieve_semantic(const EmbeddingVector& query, std::size_t k) const {
        check_dimension(query);
        const auto qn = normalized(query);
        std::shared_lock lock(mutex_);
        const std::size_t d = dimension();
        std::vector<Scored> scored;
        scored.reserve(semantic_.size());
        for (std::size_t i = 0; i < semantic_.size(); ++i) {
            scored.push_back({dot(qn.values, row(semantic_keys_, i, d)), semantic_[i].id.value, i});
        }
        std::vector<ScoredItem> out;
        for (const auto& s : select_top(std::move(scored), k)) {
            out.push_back({semantic_[s.index].id, semantic_[s.index].rule_text, s.score});
        }
        return out;
    }

    // --- experiential --------------------------------------------------------

    EntryId add_experiential_entry(const Trajectory& t, const Summarizer& summarizer) {
        if (t.transitions.empty()) throw Error(ErrorCode::empty_trajectory, t.id);
        validate_trajectory(t);
        return add_experiential_entry(t, summarizer(t));
    }

    EntryId add_experiential_entry(const Trajectory& t, std::string summary) {
        if (t.transitions.empty()) throw Error(ErrorCode::empty_trajectory, t.id);
        validate_trajectory(t);
        if (summary.empty()) throw Error(ErrorCode::empty_input, "summary");
        auto intent = embed_text(*provider_, t.goal.text);
        auto task = embed_observation(*provider_, t.transitions.front().pre);
        check_dimension(intent);
        check_dimension(task);
        const auto key = dedup_key(t);

        std::unique_lock lock(mutex_);
        if (experiential_keys_.contains(key)) {
            throw Error(ErrorCode::duplicate_entry, "experience already stored (" + t.id + ")");
        }
        if (trajectory_ids_.contains(t.id)) {
            throw Error(ErrorCode::duplicate_entry, "trajectory id " + t.id);
        }
        ExperientialEntry e{EntryId{next_id_++}, t, std::move(summary), std::move(intent),
                            std::move(task), t.success};
        insert_experiential(std::move(e));
        return experiential_.back().id;
    }

    bool contains_experience(const Trajectory& t) const {
        std::shared_lock lock(mutex_);
        return experiential_keys_.contains(dedup_key(t));
    }

    std::vector<ScoredItem> retrieve_experiential(const Instruction& q, const Observation& o,
                                                  std::size_t k, double lambda,
                                                  RetrievalStrategy strategy) const {
        check_lambda(lambda);
        return retrieve_experiential(embed_text(*provider_, q.text), embed_observation(*provider_, o),
                                     k, lambda, strategy);
    }

    // S^exp = lambda cos(phi(Q), k^intent) + (1 - lambda) cos(psi(o), k^task).
    std::vector<ScoredItem> retrieve_experiential(const EmbeddingVector& intent_query,
                                                  const EmbeddingVector& task_query, std::size_t k,
                                                  double lambda, RetrievalStrategy strategy) const {
        check_lambda(lambda);
        check_dimension(intent_query);
        check_dimension(task_query);
        const auto qi = normalized(intent_query);
        const auto qt = normalized(task_query);
        std::shared_lock lock(mutex_);
        const std::size_t d = dimension();
        std::vector<Scored> scored;
        scored.reserve(experiential_.size());
        for (std::size_t i = 0; i < experiential_.size(); ++i) {
            const auto& e = experiential_[i];
            if (strategy == RetrievalStrategy::success_only && !e.success) continue;
            const double s = lambda * dot(qi.values, row(intent_keys_, i, d)) +
                             (1.0 - lambda) * dot(qt.values, row(task_keys_, i, d));
            scored.push_back({s, e.id.value, i});
        }
        std::vector<ScoredItem> out;
        for (const auto& s : select_top(std::move(scored), k)) {
            out.push_back({experiential_[s.index].id, experiential_[s.index].summary, s.score});
        }
        return out;
    }

    // --- inspection / snapshots ---------------------------------------------

    std::size_t semantic_size() const {
        std::shared_lock lock(mutex_);
        return semantic_.size();
    }

    std::size_t experiential_size() const {
        std::shared_lock lock(mutex_);
        return experiential_.size();
    }

    std::vector<SemanticEntry> semantic_entries() const {
        std::shared_lock lock(mutex_);
        return semantic_;
    }

    std::vector<ExperientialEntry> experiential_entries() const {
        std::shared_lock lock(mutex_);
        return experiential_;
    }

    Snapshot snapshot() const {
        std::shared_lock lock(mutex_);
        return {next_id_, semantic_, experiential_};
    }

    // Rebuilds a repository from stored entries without re-embedding.
    static std::unique_ptr<MemoryRepository> from_snapshot(
        std::shared_ptr<const EmbeddingProvider> provider, Snapshot snap) {
        auto repo = std::make_unique<MemoryRepository>(std::move(provider));
        std::uint64_t max_id = 0;
        for (auto& e : snap.semantic) {
            repo->check_dimension(e.key);
            max_id = std::max(max_id, e.id.value);
            auto pair = std::make_pair(e.rule_text, e.source_instruction);
            if (!repo->semantic_pairs_.insert(pair).second) {
                throw Error(ErrorCode::corrupt_store, "duplicate semantic entry");
            }
            repo->insert_semantic(std::move(e), false);
        }
        for (auto& e : snap.experiential) {
            repo->check_dimension(e.intent_key);
            repo->check_dimension(e.task_key);
            max_id = std::max(max_id, e.id.value);
            if (!repo->experiential_keys_.insert(dedup_key(e.trajectory)).second ||
                !repo->trajectory_ids_.insert(e.trajectory.id).second) {
                throw Error(ErrorCode::corrupt_store, "duplicate experiential entry");
            }
            repo->insert_experiential(std::move(e), false);
        }
        repo->next_id_ = std::max(snap.next_id, max_id + 1);
        return repo;
    }

private:
    struct Scored {
        double score;
        std::uint64_t id;
        std::size_t index;
    };

    // Sorted scores closer than score_tie_tolerance to their neighbour form one
    // tie group, ordered by id. Rounding noise in the query then cannot reorder
    // mathematically equal scores.
    static std::vector<Scored> select_top(std::vector<Scored> scored, std::size_t k) {
        std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.id < b.id;
        });
        const std::size_t n = std::min(k, scored.size());
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i + 1;
            while (j < scored.size() && scored[j - 1].score - scored[j].score <= score_tie_tolerance) ++j;
            if (j - i > 1) {
                std::sort(scored.begin() + static_cast<std::ptrdiff_t>(i), scored.begin() + static_cast<std::ptrdiff_t>(j),
                          [](const Scored& a, const Scored& b) { return a.id < b.id; });
            }
            i = j;
        }
        scored.resize(n);
        return scored;
    }

    static std::span<const double> row(const std::vector<double>& m, std::size_t i, std::size_t d) {
        return std::span<const double>(m).subspan(i * d, d);
    }

    void check_dimension(const EmbeddingVector& v) const {
        if (v.dimension() != dimension()) {
            throw Error(ErrorCode::dimension_mismatch,
                        std::to_string(v.dimension()) + " vs " + std::to_string(dimension()));
        }
    }

    static void check_lambda(double lambda) {
        if (!(lambda >= 0.0 && lambda <= 1.0)) {
            throw Error(ErrorCode::invalid_lambda, format_real(lambda));
        }
    }

    // Callers hold the exclusive lock (or own the repository exclusively).
    void insert_semantic(SemanticEntry e, bool track = true) {
        if (track) semantic_pairs_.emplace(e.rule_text, e.source_instruction);
        semantic_keys_.insert(semantic_keys_.end(), e.key.values.begin(), e.key.values.end());
        semantic_.push_back(std::move(e));
    }

    void insert_experiential(ExperientialEntry e, bool track = true) {
        if (track) {
            experiential_keys_.insert(dedup_key(e.trajectory));
            trajectory_ids_.insert(e.trajectory.id);
        }
        intent_keys_.insert(intent_keys_.end(), e.intent_key.values.begin(), e.intent_key.values.end());
        task_keys_.insert(task_keys_.end(), e.task_key.values.begin(), e.task_key.values.end());
        experiential_.push_back(std::move(e));
    }

    std::shared_ptr<const EmbeddingProvider> provider_;
    mutable std::shared_mutex mutex_;
    std::uint64_t next_id_ = 1;

    std::vector<SemanticEntry> semantic_;
    std::vector<double> semantic_keys_;
    std::set<std::pair<std::string, std::string>> semantic_pairs_;

    std::vector<ExperientialEntry> experiential_;
    std::vector<double> intent_keys_;
    std::vector<double> task_keys_;
    std::set<DedupKey> experiential_keys_;
    std::unordered_set<std::string> trajectory_ids_;
};

// Builds the full retrieved context for step t of the current episode.
inline RetrievedContext retrieve_context(const MemoryRepository& repo, const EpisodicStore& episodic,
                                         std::size_t t, const Instruction& q, const Observation& o,
                                         const MemoryConfig& cfg, RetrievalStrategy strategy) {
    return assemble_context(episodic.context(t, cfg.horizon), repo.retrieve_semantic(q, cfg.top_k),
                            repo.retrieve_experiential(q, o, cfg.top_k, cfg.lambda, strategy));
}

} // namespace mnemo
