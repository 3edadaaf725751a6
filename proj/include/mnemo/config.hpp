#pragma once

#include "mnemo/embeddings.hpp"
#include "mnemo/error.hpp"
#include "mnemo/json_io.hpp"
#include "mnemo/memory.hpp"
#include "mnemo/optimizer.hpp"
#include "mnemo/rewards.hpp"

#include <cstdlib>
#include <optional>
#include <string>

// Every tunable in one place. Loaded from a JSON object whose keys are the
// field names below; unknown keys are rejected. MNEMO_CONFIG names the file
// used when no --config flag is given.
namespace mnemo {

struct Config {
    std::size_t dimension = default_embedding_dimension;
    MemoryConfig memory;
    RetrievalStrategy strategy = RetrievalStrategy::top_k;
    RewardWeights weights;
    ClipSchedule clip;
    double beta = 0.04;
    std::size_t n_ground = 0;
    std::size_t n_evolve = 0;
    std::uint64_t seed = 0;
    ProviderKind provider = ProviderKind::hashing;
    std::string endpoint;
    double timeout_s = 10.0;
    std::size_t min_steps = 2;
    std::size_t failure_cap = 3;
    bool jitter = true;
};

namespace detail {

[[noreturn]] inline void bad_config(const std::string& what) { throw Error(ErrorCode::invalid_config, what); }

inline double config_real(const Json& v, const std::string& key) {
    if (!v.is_number()) bad_config(key + " must be a number");
    return v.get<double>();
}

inline std::size_t config_count(const Json& v, const std::string& key) {
    if (!v.is_number_unsigned()) bad_config(key + " must be a non-negative integer");
    return v.get<std::size_t>();
}

} // namespace detail

inline const Config& validate_config(const Config& c) {
    if (c.dimension == 0) detail::bad_config("dimension must be > 0");
    if (!(c.memory.lambda >= 0.0 && c.memory.lambda <= 1.0)) detail::bad_config("lambda outside [0,1]");
    try {
        validate_weights(c.weights);
    } catch (const Error& e) {
        detail::bad_config(e.what());
    }
    if (!(c.clip.eps_low > 0.0)) detail::bad_config("eps_low must be > 0");
    if (!(c.clip.eps_end > 0.0 && c.clip.eps_init >= c.clip.eps_end)) detail::bad_config("need eps_init >= eps_end > 0");
    if (!(c.beta >= 0.0)) detail::bad_config("beta must be >= 0");
    if (!(c.timeout_s > 0.0)) detail::bad_config("timeout_s must be > 0");
    if (c.provider == ProviderKind::remote && c.endpoint.empty()) detail::bad_config("remote provider needs endpoint");
    if (c.failure_cap == 0) detail::bad_config("failure_cap must be > 0");
    return c;
}

inline Config config_from_json(const Json& j) {
    using detail::bad_config;
    using detail::config_count;
    using detail::config_real;
    if (!j.is_object()) bad_config("config must be an object");
    Config c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const Json& v = *it;
        if (k == "dimension") c.dimension = config_count(v, k);
        else if (k == "horizon") c.memory.horizon = config_count(v, k);
        else if (k == "top_k") c.memory.top_k = config_count(v, k);
        else if (k == "lambda") c.memory.lambda = config_real(v, k);
        else if (k == "strategy") {
            if (!v.is_string()) bad_config("strategy must be a string");
            auto s = parse_retrieval_strategy(v.get<std::string>());
            if (!s) bad_config("unknown strategy " + v.get<std::string>());
            c.strategy = *s;
        }
        else if (k == "w_f") c.weights.w_f = config_real(v, k);
        else if (k == "w_a") c.weights.w_a = config_real(v, k);
        else if (k == "w_t") c.weights.w_t = config_real(v, k);
        else if (k == "w_p") c.weights.w_p = config_real(v, k);
        else if (k == "tau_iou") c.weights.tau_iou = config_real(v, k);
        else if (k == "math_tol") c.weights.math_tolerance = config_real(v, k);
        else if (k == "eps_low") c.clip.eps_low = config_real(v, k);
        else if (k == "eps_init") c.clip.eps_init = config_real(v, k);
        else if (k == "eps_end") c.clip.eps_end = config_real(v, k);
        else if (k == "total_steps") c.clip.total_steps = config_real(v, k);
        else if (k == "beta") c.beta = config_real(v, k);
        else if (k == "n_ground") c.n_ground = config_count(v, k);
        else if (k == "n_evolve") c.n_evolve = config_count(v, k);
        else if (k == "seed") c.seed = config_count(v, k);
        else if (k == "provider") {
            if (v == "hashing") c.provider = ProviderKind::hashing;
            else if (v == "remote") c.provider = ProviderKind::remote;
            else bad_config("provider must be hashing or remote");
        }
        else if (k == "endpoint") {
            if (!v.is_string()) bad_config("endpoint must be a string");
            c.endpoint = v.get<std::string>();
        }
        else if (k == "timeout_s") c.timeout_s = config_real(v, k);
        else if (k == "min_steps") c.min_steps = config_count(v, k);
        else if (k == "failure_cap") c.failure_cap = config_count(v, k);
        else if (k == "jitter") {
            if (!v.is_boolean()) bad_config("jitter must be a boolean");
            c.jitter = v.get<bool>();
        }
        else bad_config("unknown key " + k);
    }
    validate_config(c);
    return c;
}

// Explicit path, else $MNEMO_CONFIG, else defaults.
inline Config load_config(const std::optional<fs::path>& path = std::nullopt) {
    std::optional<fs::path> p = path;
    if (!p) {
        if (const char* env = std::getenv("MNEMO_CONFIG"); env && *env) p = fs::path(env);
    }
    if (!p) return Config{};
    std::string body;
    try {
        body = read_file(*p);
    } catch (const Error& e) {
        throw Error(ErrorCode::invalid_config, e.what());
    }
    Json j;
    try {
        j = Json::parse(body);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::invalid_config, p->string() + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace mnemo
