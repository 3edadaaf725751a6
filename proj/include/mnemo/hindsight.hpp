#pragma once

#include "mnemo/core.hpp"
#include "mnemo/error.hpp"
#include "mnemo/json_io.hpp"
#include "mnemo/records.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

// Data refinement for the two training stages: goal relabeling of failed
// trajectories, rule-based filtering, and seeded ground/evolve splits.
namespace mnemo {

// Supplies candidate goals for a trajectory and decides whether a prefix
// accomplishes one of them. Implementations must be deterministic.
class SubGoalVerifier {
public:
    virtual ~SubGoalVerifier() = default;
    virtual std::vector<std::string> candidates(const Trajectory& t) const = 0;
    virtual bool verify(const Trajectory& prefix, std::string_view goal) const = 0;
};

inline constexpr std::string_view hindsight_source = "hindsight";

// First k transitions of t, keeping id and goal.
inline Trajectory trajectory_prefix(const Trajectory& t, std::size_t k) {
    Trajectory p;
    p.id = t.id;
    p.goal = t.goal;
    p.success = t.success;
    p.transitions.assign(t.transitions.begin(),
                         t.transitions.begin() + static_cast<std::ptrdiff_t>(std::min(k, t.transitions.size())));
    return p;
}

// For every candidate goal, emits the shortest prefix the verifier accepts.
// Successful trajectories are kept whole elsewhere and yield nothing here.
inline std::vector<TrajectoryRecord> relabel_trajectory(const Trajectory& t, const SubGoalVerifier& verifier) {
    std::vector<TrajectoryRecord> out;
    if (t.success || t.transitions.empty()) return out;
    const auto goals = verifier.candidates(t);
    struct Hit {
        std::size_t k;
        std::size_t j;
    };
    std::vector<Hit> hits;
    for (std::size_t j = 0; j < goals.size(); ++j) {
        if (goals[j].empty() || goals[j] == t.goal.text) continue;
        for (std::size_t k = 1; k <= t.transitions.size(); ++k) {
            if (verifier.verify(trajectory_prefix(t, k), goals[j])) {
                hits.push_back({k, j});
                break;
            }
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.k < b.k; });
    for (const auto& h : hits) {
        TrajectoryRecord r;
        r.trajectory = trajectory_prefix(t, h.k);
        r.trajectory.id = t.id + "/hgs" + std::to_string(h.k) + "-" + std::to_string(h.j);
        r.trajectory.goal = Instruction{goals[h.j]};
        r.trajectory.success = true;
        r.source = std::string(hindsight_source);
        r.provenance = Provenance{t.id, h.k};
        out.push_back(std::move(r));
    }
    return out;
}

// Output is ordered by (origin trajectory id, prefix length).
inline std::vector<TrajectoryRecord> relabel_pool(const std::vector<Trajectory>& pool,
                                                  const SubGoalVerifier& verifier) {
    std::vector<TrajectoryRecord> out;
    for (const auto& t : pool) {
        auto rs = relabel_trajectory(t, verifier);
        out.insert(out.end(), std::make_move_iterator(rs.begin()), std::make_move_iterator(rs.end()));
    }
    std::stable_sort(out.begin(), out.end(), [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
        if (a.provenance->origin_id != b.provenance->origin_id) {
            return a.provenance->origin_id < b.provenance->origin_id;
        }
        return a.provenance->prefix_length < b.provenance->prefix_length;
    });
    return out;
}

// --- filtering ---------------------------------------------------------------

struct FilterConfig {
    std::size_t min_steps = 2;
};

template <class T>
const Trajectory& as_trajectory(const T& x) {
    if constexpr (std::is_same_v<T, TrajectoryRecord>) {
        return x.trajectory;
    } else {
        return x;
    }
}

// Drops short trajectories, empty goals, and repeats of an earlier
// (goal, action sequence) pair. Order is preserved.
template <class T>
std::vector<T> filter_trajectories(const std::vector<T>& pool, const FilterConfig& cfg = {}) {
    std::vector<T> out;
    std::set<DedupKey> seen;
    for (const auto& item : pool) {
        const auto& t = as_trajectory(item);
        if (t.transitions.size() < cfg.min_steps) continue;
        if (trim(t.goal.text).empty()) continue;
        if (!seen.insert(dedup_key(t)).second) continue;
        out.push_back(item);
    }
    return out;
}

// --- splits ------------------------------------------------------------------

namespace detail {

// Uniform draw in [0, bound) that does not depend on the standard library's
// distribution implementation.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

} // namespace detail

template <class T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(detail::bounded_draw(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

struct DatasetSplit {
    std::vector<TrajectoryRecord> ground;
    std::vector<TrajectoryRecord> evolve;
    std::vector<std::string> unassigned;
    std::uint64_t seed = 0;
};

inline constexpr std::string_view original_source = "original";

inline DatasetSplit build_splits(std::vector<TrajectoryRecord> pool, std::size_t n_ground, std::size_t n_evolve,
                                 std::uint64_t seed) {
    if (pool.size() < n_ground + n_evolve) {
        throw Error(ErrorCode::insufficient_pool, "pool " + std::to_string(pool.size()) + " < " +
                                                      std::to_string(n_ground) + " + " + std::to_string(n_evolve));
    }
    std::unordered_set<std::string> ids;
    for (auto& r : pool) {
        if (!ids.insert(r.trajectory.id).second) {
            throw Error(ErrorCode::duplicate_entry, "sample id " + r.trajectory.id);
        }
        if (!r.source) r.source = std::string(r.provenance ? hindsight_source : original_source);
        if (!r.provenance) r.provenance = Provenance{r.trajectory.id, r.trajectory.transitions.size()};
    }
    seeded_shuffle(pool, seed);
    DatasetSplit s;
    s.seed = seed;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i < n_ground) {
            s.ground.push_back(std::move(pool[i]));
        } else if (i < n_ground + n_evolve) {
            s.evolve.push_back(std::move(pool[i]));
        } else {
            s.unassigned.push_back(pool[i].trajectory.id);
        }
    }
    return s;
}

inline Json split_manifest(const DatasetSplit& s) {
    const auto list = [](const std::vector<TrajectoryRecord>& rs) {
        Json a = Json::array();
        for (const auto& r : rs) {
            Json j = Json::object();
            j["id"] = r.trajectory.id;
            j["origin"] = r.provenance ? r.provenance->origin_id : r.trajectory.id;
            j["prefix_length"] = r.provenance ? r.provenance->prefix_length : r.trajectory.transitions.size();
            j["goal"] = r.trajectory.goal.text;
            j["source"] = r.source.value_or(std::string(original_source));
            a.push_back(std::move(j));
        }
        return a;
    };
    Json m = Json::object();
    m["format_version"] = record_format_version;
    m["seed"] = s.seed;
    m["ground"] = list(s.ground);
    m["evolve"] = list(s.evolve);
    m["unassigned"] = s.unassigned;
    return m;
}

// Writes ground.records, evolve.records and split_manifest.json into dir.
inline void write_splits(const DatasetSplit& s, const fs::path& dir) {
    fs::create_directories(dir);
    write_trajectory_records(dir / "ground.records", s.ground);
    write_trajectory_records(dir / "evolve.records", s.evolve);
    write_file_atomic(dir / "split_manifest.json", dump_record(split_manifest(s)) + "\n");
}

} // namespace mnemo
