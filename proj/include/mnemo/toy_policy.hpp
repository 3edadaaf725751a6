#pragma once

#include "mnemo/error.hpp"
#include "mnemo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

// A tiny differentiable policy: one logit vector per (state, position), tokens
// drawn by softmax. It lets the optimizer kernel's gradients be checked end to
// end against finite differences.
namespace mnemo {

struct ToySequence {
    std::size_t state = 0;
    std::vector<std::size_t> tokens;
};

class ToySoftmaxPolicy {
public:
    static constexpr std::size_t max_vocab = 8;

    ToySoftmaxPolicy(std::size_t states, std::size_t positions, std::size_t vocab)
        : states_(states), positions_(positions), vocab_(vocab), logits_(states * positions * vocab, 0.0) {
        if (vocab == 0 || vocab > max_vocab) throw Error(ErrorCode::out_of_range, "vocab must be in [1, 8]");
        if (states == 0 || positions == 0) throw Error(ErrorCode::out_of_range, "empty logits table");
    }

    std::size_t states() const noexcept { return states_; }
    std::size_t positions() const noexcept { return positions_; }
    std::size_t vocab() const noexcept { return vocab_; }

    std::vector<double>& parameters() noexcept { return logits_; }
    const std::vector<double>& parameters() const noexcept { return logits_; }

    std::size_t offset(std::size_t state, std::size_t pos) const {
        if (state >= states_ || pos >= positions_) throw Error(ErrorCode::out_of_range, "logit row");
        return (state * positions_ + pos) * vocab_;
    }

    std::vector<double> probabilities(std::size_t state, std::size_t pos) const {
        const auto* row = &logits_[offset(state, pos)];
        const double m = *std::max_element(row, row + vocab_);
        std::vector<double> p(vocab_);
        double z = 0.0;
        for (std::size_t v = 0; v < vocab_; ++v) z += (p[v] = std::exp(row[v] - m));
        for (double& x : p) x /= z;
        return p;
    }

    double log_prob(std::size_t state, std::size_t pos, std::size_t token) const {
        if (token >= vocab_) throw Error(ErrorCode::out_of_range, "token");
        const auto* row = &logits_[offset(state, pos)];
        const double m = *std::max_element(row, row + vocab_);
        double z = 0.0;
        for (std::size_t v = 0; v < vocab_; ++v) z += std::exp(row[v] - m);
        return row[token] - m - std::log(z);
    }

    std::vector<double> sequence_log_probs(const ToySequence& s) const {
        std::vector<double> out;
        out.reserve(s.tokens.size());
        for (std::size_t t = 0; t < s.tokens.size(); ++t) out.push_back(log_prob(s.state, t, s.tokens[t]));
        return out;
    }

    // Chains d(loss)/d(logp) per token through d(logp)/d(logits) = onehot - softmax.
    std::vector<double> backprop(const std::vector<ToySequence>& seqs,
                                 const std::vector<std::vector<double>>& dlogp) const {
        if (seqs.size() != dlogp.size()) throw Error(ErrorCode::length_mismatch, "sequences vs gradients");
        std::vector<double> grad(logits_.size(), 0.0);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            const auto& s = seqs[i];
            if (s.tokens.size() != dlogp[i].size()) throw Error(ErrorCode::length_mismatch, "tokens vs gradients");
            for (std::size_t t = 0; t < s.tokens.size(); ++t) {
                const auto p = probabilities(s.state, t);
                const std::size_t base = offset(s.state, t);
                for (std::size_t v = 0; v < vocab_; ++v) {
                    grad[base + v] += dlogp[i][t] * ((v == s.tokens[t] ? 1.0 : 0.0) - p[v]);
                }
            }
        }
        return grad;
    }

private:
    std::size_t states_, positions_, vocab_;
    std::vector<double> logits_;
};

// One sampled output in a toy group: the tokens drawn, the old and reference
// policies' log-probs for them, and its reward.
struct ToySample {
    ToySequence sequence;
    std::vector<double> logp_old;
    std::vector<double> logp_ref;
    double reward = 0.0;
};

struct ToyBatch {
    std::vector<std::vector<ToySample>> groups;
    double beta = 0.04;
    ClipSchedule clip;
    double step = 0.0;
};

inline OptimizationBatch materialize(const ToySoftmaxPolicy& policy, const ToyBatch& tb) {
    OptimizationBatch b;
    b.beta = tb.beta;
    b.clip = tb.clip;
    b.step = tb.step;
    for (const auto& g : tb.groups) {
        SampleGroup group;
        for (const auto& s : g) {
            group.push_back({{policy.sequence_log_probs(s.sequence), s.logp_old, s.logp_ref}, s.reward});
        }
        b.groups.push_back(std::move(group));
    }
    return b;
}

inline double toy_sft_loss(const ToySoftmaxPolicy& policy, const std::vector<ToySequence>& seqs) {
    std::vector<std::vector<double>> lp;
    for (const auto& s : seqs) lp.push_back(policy.sequence_log_probs(s));
    return sft_loss(lp);
}

inline std::vector<double> toy_sft_gradient(const ToySoftmaxPolicy& policy, const std::vector<ToySequence>& seqs) {
    std::vector<std::vector<double>> lp;
    for (const auto& s : seqs) lp.push_back(policy.sequence_log_probs(s));
    return policy.backprop(seqs, sft_loss_gradient(lp));
}

inline double toy_grpo_loss(const ToySoftmaxPolicy& policy, const ToyBatch& tb) {
    return -grpo_objective(materialize(policy, tb)).objective;
}

inline std::vector<double> toy_grpo_gradient(const ToySoftmaxPolicy& policy, const ToyBatch& tb) {
    const auto g = grpo_loss_gradient(materialize(policy, tb));
    std::vector<ToySequence> seqs;
    std::vector<std::vector<double>> dlogp;
    for (std::size_t i = 0; i < tb.groups.size(); ++i) {
        for (std::size_t j = 0; j < tb.groups[i].size(); ++j) {
            seqs.push_back(tb.groups[i][j].sequence);
            dlogp.push_back(g[i][j]);
        }
    }
    return policy.backprop(seqs, dlogp);
}

// Smallest distance of any token ratio to a clip bound.
inline double clip_margin(const ToySoftmaxPolicy& policy, const ToyBatch& tb) {
    const auto b = materialize(policy, tb);
    const double eps_cur = adaptive_epsilon(b.step, b.clip.total_steps, b.clip.eps_init, b.clip.eps_end);
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& g : b.groups) {
        for (const auto& s : g) {
            for (std::size_t t = 0; t < s.logp.size(); ++t) {
                const double rho = std::exp(s.logp.current[t] - s.logp.old[t]);
                margin = std::min({margin, std::abs(rho - (1.0 - b.clip.eps_low)), std::abs(rho - (1.0 + eps_cur))});
            }
        }
    }
    return margin;
}

// Max over all logits of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6),
// with central differences of step h.
inline double toy_policy_gradient_check(ToySoftmaxPolicy policy,
                                        const std::function<double(const ToySoftmaxPolicy&)>& loss,
                                        const std::vector<double>& analytic, double h = 1e-5) {
    auto& theta = policy.parameters();
    if (analytic.size() != theta.size()) throw Error(ErrorCode::length_mismatch, "gradient size");
    double worst = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        const double up = loss(policy);
        theta[i] = keep - h;
        const double down = loss(policy);
        theta[i] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

} // namespace mnemo
