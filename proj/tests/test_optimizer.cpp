#include "support.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mnemo;

namespace {

ErrorCode error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::io_error;
}

SequenceSample sample(std::vector<double> cur, std::vector<double> old, std::vector<double> ref, double reward) {
    return SequenceSample{{std::move(cur), std::move(old), std::move(ref)}, reward};
}

} // namespace

TEST(Sft, LossAndGradient) {
    const std::vector<std::vector<double>> seqs{{std::log(0.5), std::log(0.25)}, {std::log(0.125)}};
    const double expect = 0.5 * ((std::log(2.0) + std::log(4.0)) / 2.0 + std::log(8.0));
    EXPECT_NEAR(sft_loss(seqs), expect, 1e-15);
    const auto g = sft_loss_gradient(seqs);
    EXPECT_EQ(g[0], (std::vector<double>{-0.25, -0.25}));
    EXPECT_EQ(g[1], (std::vector<double>{-0.5}));
    EXPECT_EQ(error_of([] { sft_loss(std::vector<std::vector<double>>{}); }), ErrorCode::empty_sequence);
    EXPECT_EQ(error_of([] { sft_loss(std::vector<std::vector<double>>{{}}); }), ErrorCode::empty_sequence);
    EXPECT_EQ(error_of([] { sft_loss(std::vector<std::vector<double>>{{0.1}}); }), ErrorCode::invalid_log_prob);
    EXPECT_EQ(error_of([] { sft_loss(std::vector<std::vector<double>>{{std::nan("")}}); }),
              ErrorCode::invalid_log_prob);
}

TEST(Advantages, ZeroMeanUnitStd) {
    const auto a = group_advantages(std::vector<double>{1, 0, 0, 1});
    EXPECT_EQ(a, (std::vector<double>{1, -1, -1, 1}));
    EXPECT_EQ(group_advantages(std::vector<double>{0.3, 0.3, 0.3}), (std::vector<double>{0, 0, 0}));
    EXPECT_EQ(group_advantages(std::vector<double>{5}), (std::vector<double>{0}));
    // Spread below the floor counts as uniform.
    EXPECT_EQ(group_advantages(std::vector<double>{1.0, 1.0 + 1e-9}), (std::vector<double>{0, 0}));
    EXPECT_EQ(error_of([] { group_advantages(std::vector<double>{}); }), ErrorCode::empty_sequence);
}

TEST(ClipSchedule, CosineDecay) {
    EXPECT_DOUBLE_EQ(adaptive_epsilon(0, 100, 0.4, 0.2), 0.4);
    EXPECT_DOUBLE_EQ(adaptive_epsilon(100, 100, 0.4, 0.2), 0.2);
    EXPECT_NEAR(adaptive_epsilon(50, 100, 0.4, 0.2), 0.3, 1e-15);
    EXPECT_NEAR(adaptive_epsilon(25, 100, 0.4, 0.2), 0.2 + 0.1 * (1 + std::sqrt(0.5)), 1e-15);
    EXPECT_EQ(error_of([] { adaptive_epsilon(101, 100, 0.4, 0.2); }), ErrorCode::out_of_range);
    EXPECT_EQ(error_of([] { adaptive_epsilon(-1, 100, 0.4, 0.2); }), ErrorCode::out_of_range);
    EXPECT_EQ(error_of([] { adaptive_epsilon(0, 0, 0.4, 0.2); }), ErrorCode::out_of_range);
    EXPECT_EQ(clipped_ratio(2.0, 0.2, 0.4), 1.4);
    EXPECT_EQ(clipped_ratio(0.1, 0.2, 0.4), 0.8);
    EXPECT_EQ(clipped_ratio(1.1, 0.2, 0.4), 1.1);
}

TEST(Kl, EstimatorProperties) {
    EXPECT_EQ(kl_per_token(-1.0, -1.0), 0.0);
    const double r = std::exp(-0.5 - -1.0);
    EXPECT_NEAR(kl_per_token(-1.0, -0.5), r - std::log(r) - 1, 1e-15);
    // Tiny differences stay accurate and non-negative.
    EXPECT_NEAR(kl_per_token(-1e-9, 0.0), 0.5e-18, 1e-24);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-10, 0);
    for (int i = 0; i < 1000; ++i) EXPECT_GE(kl_per_token(u(rng), u(rng)), 0.0);
}

TEST(Objective, HandComputedGroup) {
    // Two sequences, rewards 1 and 0 -> advantages +1 and -1.
    OptimizationBatch b;
    b.beta = 0.1;
    b.step = 0;
    b.clip = ClipSchedule{0.2, 0.4, 0.2, 10};
    const double lr = std::log(0.5);
    b.groups.push_back({sample({lr + std::log(1.1), lr + std::log(1.6)}, {lr, lr}, {lr, lr}, 1.0),
                        sample({lr + std::log(0.5)}, {lr}, {lr}, 0.0)});
    const auto res = grpo_objective(b);
    EXPECT_DOUBLE_EQ(res.eps_cur, 0.4);
    // Token terms: min(1.1, 1.1) , min(1.6, 1.4), min(-0.5, -0.8).
    const double kl1 = std::expm1(-std::log(1.1)) + std::log(1.1);
    const double kl2 = std::expm1(-std::log(1.6)) + std::log(1.6);
    const double kl3 = std::expm1(-std::log(0.5)) + std::log(0.5);
    const double expect = ((1.1 - 0.1 * kl1) + (1.4 - 0.1 * kl2) + (-0.8 - 0.1 * kl3)) / 3.0;
    EXPECT_NEAR(res.objective, expect, 1e-14);
    ASSERT_EQ(res.groups.size(), 1u);
    EXPECT_EQ(res.groups[0].advantages, (std::vector<double>{1, -1}));
    EXPECT_NEAR(res.groups[0].sequences[0].tokens[1].clipped, 1.4, 1e-15);
    EXPECT_NEAR(res.groups[0].sequences[1].tokens[0].surrogate, -0.8, 1e-15);
}

TEST(Objective, MatchesOracleBatches) {
    const auto fx = load_fixture_as<GrpoCases>("optimizer-grpo-batches");
    ASSERT_EQ(fx.cases.size(), 20u);
    for (std::size_t i = 0; i < fx.cases.size(); ++i) {
        EXPECT_NEAR(grpo_objective(fx.cases[i].batch).objective, fx.cases[i].expected_objective, 1e-9) << "case " << i;
    }
}

TEST(Objective, BatchIsMeanOfGroups) {
    const auto fx = load_fixture_as<GrpoCases>("optimizer-grpo-batches");
    for (const auto& c : fx.cases) {
        const auto whole = grpo_objective(c.batch);
        double sum = 0.0;
        for (const auto& g : c.batch.groups) {
            auto single = c.batch;
            single.groups = {g};
            sum += grpo_objective(single).objective;
        }
        EXPECT_NEAR(whole.objective, sum / static_cast<double>(c.batch.groups.size()), 1e-12);
    }
}

TEST(Objective, OnPolicyIdenticalReferenceIsMeanAdvantageWeighted) {
    // current == old == reference: every ratio is 1, KL is 0, J = sum |y_i| A_i / sum |y_i|.
    OptimizationBatch b;
    b.groups.push_back({sample({-1, -1, -1}, {-1, -1, -1}, {-1, -1, -1}, 1.0), sample({-2}, {-2}, {-2}, 0.0)});
    EXPECT_NEAR(grpo_objective(b).objective, (3.0 * 1 + 1.0 * -1) / 4.0, 1e-15);
}

TEST(Objective, InputErrors) {
    OptimizationBatch b;
    EXPECT_EQ(error_of([&] { grpo_objective(b); }), ErrorCode::empty_sequence);
    b.groups.push_back({});
    EXPECT_EQ(error_of([&] { grpo_objective(b); }), ErrorCode::empty_sequence);
    b.groups[0] = {sample({-1, -1}, {-1}, {-1, -1}, 1)};
    EXPECT_EQ(error_of([&] { grpo_objective(b); }), ErrorCode::length_mismatch);
    b.groups[0] = {sample({-1}, {0.5}, {-1}, 1)};
    EXPECT_EQ(error_of([&] { grpo_objective(b); }), ErrorCode::invalid_log_prob);
    b.groups[0] = {sample({}, {}, {}, 1)};
    EXPECT_EQ(error_of([&] { grpo_objective(b); }), ErrorCode::empty_sequence);
    b.groups[0] = {sample({-1}, {-1}, {-1}, 1)};
    b.step = 200;
    EXPECT_EQ(error_of([&] { grpo_objective(b); }), ErrorCode::out_of_range);
}

TEST(Gradient, ToyPolicyMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01(0.0, 1.0);
    ToySoftmaxPolicy policy(2, 4, 5);
    for (double& x : policy.parameters()) x = n01(rng);
    ToySoftmaxPolicy old = policy, ref = policy;
    for (double& x : old.parameters()) x += 0.1 * n01(rng);
    for (double& x : ref.parameters()) x += 0.3 * n01(rng);

    ToyBatch tb;
    tb.beta = 0.04;
    tb.step = 30;
    for (int g = 0; g < 2; ++g) {
        std::vector<ToySample> group;
        for (int i = 0; i < 3; ++i) {
            ToySequence s{static_cast<std::size_t>(g), {}};
            const std::size_t len = 1 + rng() % 4;
            for (std::size_t t = 0; t < len; ++t) s.tokens.push_back(rng() % 5);
            group.push_back({s, old.sequence_log_probs(s), ref.sequence_log_probs(s), static_cast<double>(rng() % 3)});
        }
        tb.groups.push_back(std::move(group));
    }
    ASSERT_GT(clip_margin(policy, tb), 1e-3);
    const auto analytic = toy_grpo_gradient(policy, tb);
    EXPECT_LT(toy_policy_gradient_check(policy, [&](const ToySoftmaxPolicy& p) { return toy_grpo_loss(p, tb); },
                                        analytic),
              1e-4);

    std::vector<ToySequence> seqs;
    for (const auto& g : tb.groups) {
        for (const auto& s : g) seqs.push_back(s.sequence);
    }
    EXPECT_LT(toy_policy_gradient_check(policy, [&](const ToySoftmaxPolicy& p) { return toy_sft_loss(p, seqs); },
                                        toy_sft_gradient(policy, seqs)),
              1e-4);
}

TEST(Gradient, ClippedTokensOnlyCarryKl) {
    OptimizationBatch b;
    b.beta = 0.0;
    b.clip.total_steps = 10;
    b.step = 10; // eps_cur = 0.2
    const double lr = std::log(0.4);
    // Positive advantage with rho = 2 sits in the clipped branch.
    b.groups.push_back({sample({lr + std::log(2.0)}, {lr}, {lr}, 1.0), sample({lr}, {lr}, {lr}, 0.0)});
    const auto g = grpo_loss_gradient(b);
    EXPECT_EQ(g[0][0][0], 0.0);
    // Unclipped negative-advantage token: d(-J)/dlogp = -(rho A)/tokens = 0.5.
    EXPECT_NEAR(g[0][1][0], 0.5, 1e-15);
}

TEST(ToyPolicy, Basics) {
    EXPECT_THROW(ToySoftmaxPolicy(1, 1, 9), Error);
    EXPECT_THROW(ToySoftmaxPolicy(0, 1, 2), Error);
    ToySoftmaxPolicy p(1, 2, 4);
    const auto probs = p.probabilities(0, 1);
    for (double x : probs) EXPECT_DOUBLE_EQ(x, 0.25);
    EXPECT_DOUBLE_EQ(p.log_prob(0, 0, 3), std::log(0.25));
    EXPECT_THROW(p.log_prob(0, 0, 4), Error);
    EXPECT_THROW(p.offset(1, 0), Error);
}
