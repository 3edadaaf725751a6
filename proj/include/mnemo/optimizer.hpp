#pragma once

#include "mnemo/error.hpp"
#include "mnemo/text.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

// Numerical kernel for the two training stages. Everything here consumes
// per-token log-probabilities; no model weights are involved.
//
//   SFT:   L = mean_i ( -1/|y_i| sum_t log pi(y_it) )
//   RL:    J = 1/sum_i |y_i| * sum_i sum_t [ min(rho A_i, clip(rho) A_i) - beta KL_it ]
//          rho_it = exp(logp_cur - logp_old)
//          A_i    = (r_i - mean r) / std r          (population std; 0 if std < 1e-8)
//          clip   = clip(rho, 1 - eps_low, 1 + eps_cur)
//          eps_cur(k) = eps_end + (eps_init - eps_end)(1 + cos(pi k / K)) / 2
//          KL_it  = r - log r - 1,  r = exp(logp_ref - logp_cur)
//
// A batch holds several groups; its objective is the mean of the per-group J.
// All reductions are pairwise so results depend only on the data.
namespace mnemo {

inline constexpr double advantage_std_floor = 1e-8;

struct SequenceLogProbs {
    std::vector<double> current;   // log pi_theta
    std::vector<double> old;       // log pi_theta_old
    std::vector<double> reference; // log pi_ref

    std::size_t size() const noexcept { return current.size(); }
};

struct ClipSchedule {
    double eps_low = 0.2;
    double eps_init = 0.4;
    double eps_end = 0.2;
    double total_steps = 100.0; // K
};

struct SequenceSample {
    SequenceLogProbs logp;
    double reward = 0.0;
};

using SampleGroup = std::vector<SequenceSample>;

struct OptimizationBatch {
    std::vector<SampleGroup> groups;
    double beta = 0.04;
    ClipSchedule clip;
    double step = 0.0; // k
};

inline void validate_sequence(const SequenceLogProbs& s) {
    if (s.old.size() != s.current.size() || s.reference.size() != s.current.size()) {
        throw Error(ErrorCode::length_mismatch,
                    "current/old/reference lengths " + std::to_string(s.current.size()) + "/" +
                        std::to_string(s.old.size()) + "/" + std::to_string(s.reference.size()));
    }
    for (const auto* seq : {&s.current, &s.old, &s.reference}) {
        for (double v : *seq) {
            if (!std::isfinite(v) || v > 0.0) {
                throw Error(ErrorCode::invalid_log_prob, format_real(v));
            }
        }
    }
}

// --- SFT ---------------------------------------------------------------------

inline double sft_loss(std::span<const std::vector<double>> sequences) {
    if (sequences.empty()) throw Error(ErrorCode::empty_sequence, "empty batch");
    std::vector<double> per_seq;
    per_seq.reserve(sequences.size());
    for (const auto& seq : sequences) {
        if (seq.empty()) throw Error(ErrorCode::empty_sequence, "zero-length sequence");
        for (double v : seq) {
            if (!std::isfinite(v) || v > 0.0) throw Error(ErrorCode::invalid_log_prob, format_real(v));
        }
        per_seq.push_back(-pairwise_sum(seq) / static_cast<double>(seq.size()));
    }
    return pairwise_sum(per_seq) / static_cast<double>(per_seq.size());
}

// dL/dlogp for every token, same shape as the input.
inline std::vector<std::vector<double>> sft_loss_gradient(std::span<const std::vector<double>> sequences) {
    if (sequences.empty()) throw Error(ErrorCode::empty_sequence, "empty batch");
    std::vector<std::vector<double>> grad;
    const double n = static_cast<double>(sequences.size());
    for (const auto& seq : sequences) {
        if (seq.empty()) throw Error(ErrorCode::empty_sequence, "zero-length sequence");
        grad.emplace_back(seq.size(), -1.0 / (n * static_cast<double>(seq.size())));
    }
    return grad;
}

// --- RL pieces ---------------------------------------------------------------

inline std::vector<double> group_advantages(std::span<const double> rewards) {
    if (rewards.empty()) throw Error(ErrorCode::empty_sequence, "empty group");
    const double g = static_cast<double>(rewards.size());
    const double mean = pairwise_sum(rewards) / g;
    std::vector<double> sq(rewards.size());
    for (std::size_t i = 0; i < rewards.size(); ++i) sq[i] = (rewards[i] - mean) * (rewards[i] - mean);
    const double sd = std::sqrt(pairwise_sum(sq) / g);
    std::vector<double> adv(rewards.size(), 0.0);
    if (!(sd >= advantage_std_floor)) return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

inline double adaptive_epsilon(double k, double total, double eps_init, double eps_end) {
    if (!(total > 0.0)) throw Error(ErrorCode::out_of_range, "K must be > 0");
    if (!(k >= 0.0 && k <= total)) {
        throw Error(ErrorCode::out_of_range, "k=" + format_real(k) + " outside [0, " + format_real(total) + "]");
    }
    return eps_end + 0.5 * (eps_init - eps_end) * (1.0 + std::cos(std::numbers::pi * k / total));
}

inline double clipped_ratio(double rho, double eps_low, double eps_cur) noexcept {
    return std::clamp(rho, 1.0 - eps_low, 1.0 + eps_cur);
}

inline double kl_per_token(double logp_cur, double logp_ref) noexcept {
    const double log_r = logp_ref - logp_cur;
    // r - log r - 1, written with expm1 to keep precision near r = 1.
    return std::expm1(log_r) - log_r;
}

// --- full objective ----------------------------------------------------------

struct TokenTerm {
    double ratio = 1.0;
    double clipped = 1.0;
    double surrogate = 0.0; // min(rho A, clip(rho) A)
    double kl = 0.0;
    double value = 0.0;     // surrogate - beta kl
};

struct SequenceResult {
    double advantage = 0.0;
    std::vector<TokenTerm> tokens;
};

struct GroupResult {
    double objective = 0.0;
    std::vector<double> advantages;
    std::vector<SequenceResult> sequences;
};

struct ObjectiveResult {
    double objective = 0.0; // J; the loss to minimize is -J
    double eps_cur = 0.0;
    std::vector<GroupResult> groups;
};

inline ObjectiveResult grpo_objective(const OptimizationBatch& batch) {
    if (batch.groups.empty()) throw Error(ErrorCode::empty_sequence, "batch has no groups");
    ObjectiveResult out;
    out.eps_cur = adaptive_epsilon(batch.step, batch.clip.total_steps, batch.clip.eps_init, batch.clip.eps_end);

    std::vector<double> group_values;
    for (const auto& group : batch.groups) {
        if (group.empty()) throw Error(ErrorCode::empty_sequence, "empty group");
        std::vector<double> rewards;
        std::size_t tokens = 0;
        for (const auto& s : group) {
            validate_sequence(s.logp);
            if (!std::isfinite(s.reward)) throw Error(ErrorCode::out_of_range, "non-finite reward");
            rewards.push_back(s.reward);
            tokens += s.logp.size();
        }
        if (tokens == 0) throw Error(ErrorCode::empty_sequence, "group has no tokens");

        GroupResult gr;
        gr.advantages = group_advantages(rewards);
        std::vector<double> values;
        values.reserve(tokens);
        for (std::size_t i = 0; i < group.size(); ++i) {
            const auto& lp = group[i].logp;
            const double adv = gr.advantages[i];
            SequenceResult sr;
            sr.advantage = adv;
            for (std::size_t t = 0; t < lp.size(); ++t) {
                TokenTerm term;
                term.ratio = std::exp(lp.current[t] - lp.old[t]);
                term.clipped = clipped_ratio(term.ratio, batch.clip.eps_low, out.eps_cur);
                term.surrogate = std::min(term.ratio * adv, term.clipped * adv);
                term.kl = kl_per_token(lp.current[t], lp.reference[t]);
                term.value = term.surrogate - batch.beta * term.kl;
                values.push_back(term.value);
                sr.tokens.push_back(term);
            }
            gr.sequences.push_back(std::move(sr));
        }
        gr.objective = pairwise_sum(values) / static_cast<double>(tokens);
        group_values.push_back(gr.objective);
        out.groups.push_back(std::move(gr));
    }
    out.objective = pairwise_sum(group_values) / static_cast<double>(group_values.size());
    return out;
}

// d(-J)/d logp_cur per token, indexed [group][sequence][token]. Advantages and
// the old/reference policies are constants. Where the clipped branch of the min
// is active the surrogate is locally constant, so only the KL term contributes.
inline std::vector<std::vector<std::vector<double>>> grpo_loss_gradient(const OptimizationBatch& batch) {
    const auto result = grpo_objective(batch);
    const double n_groups = static_cast<double>(batch.groups.size());
    std::vector<std::vector<std::vector<double>>> grad;
    for (std::size_t g = 0; g < batch.groups.size(); ++g) {
        const auto& group = batch.groups[g];
        std::size_t tokens = 0;
        for (const auto& s : group) tokens += s.logp.size();
        const double scale = 1.0 / (n_groups * static_cast<double>(tokens));
        auto& gg = grad.emplace_back();
        for (std::size_t i = 0; i < group.size(); ++i) {
            const auto& lp = group[i].logp;
            const auto& sr = result.groups[g].sequences[i];
            auto& gs = gg.emplace_back(lp.size(), 0.0);
            for (std::size_t t = 0; t < lp.size(); ++t) {
                const auto& term = sr.tokens[t];
                const double unclipped = term.ratio * sr.advantage;
                const double d_surrogate = unclipped <= term.clipped * sr.advantage ? unclipped : 0.0;
                const double r = std::exp(lp.reference[t] - lp.current[t]);
                const double d_kl = 1.0 - r;
                gs[t] = -scale * (d_surrogate - batch.beta * d_kl);
            }
        }
    }
    return grad;
}

} // namespace mnemo
