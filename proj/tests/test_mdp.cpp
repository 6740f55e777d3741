#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hubl/hubl.hpp"
#include "support/instances.hpp"
#include "support/oracles.hpp"

using namespace hubl;
using hubl::testing::self_loop;

namespace {

/// Two states: action 0 stays at 0 with r=0, action 1 moves to the absorbing
/// state 1, which pays 1 forever.
TabularMdp chain(double gamma) {
    std::vector<double> p = {1, 0, 0, 1, 0, 1, 0, 1};
    std::vector<double> r = {0, 1, 1, 1};
    return TabularMdp(2, 2, gamma, p, r, {1.0, 0.0});
}

TabularMdp two_cycle(double gamma) { return TabularMdp(2, 1, gamma, {0, 1, 1, 0}, {0.5, 0.5}, {1.0, 0.0}); }

} // namespace

TEST(TabularMdp, RejectsBadRowsNamingTheField) {
    try {
        TabularMdp(1, 1, 0.9, {0.5}, {0.0}, {1.0});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("transition[0][0]"), std::string::npos);
    }
    EXPECT_THROW(TabularMdp(1, 1, 0.9, {1.0}, {1.5}, {1.0}), ValidationError);
    EXPECT_THROW(TabularMdp(1, 1, 0.9, {1.0}, {-0.1}, {1.0}), ValidationError);
    EXPECT_THROW(TabularMdp(1, 1, 0.9, {1.0}, {0.0}, {0.9}), ValidationError);
    EXPECT_THROW(TabularMdp(1, 1, 0.9, {1.0, 0.0}, {0.0}, {1.0}), ValidationError);
    try {
        TabularMdp(1, 1, 1.0, {1.0}, {0.0}, {1.0});
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
    }
}

TEST(TabularMdp, AcceptsRowsWithinTolerance) {
    EXPECT_NO_THROW(TabularMdp(1, 2, 0.0, {1.0 + 5e-13, 1.0}, {0.0, 1.0}, {1.0}));
}

TEST(Policy, ValidatesShapeAndRows) {
    EXPECT_THROW(Policy::deterministic({0, 2}, 2), ValidationError);
    EXPECT_THROW(Policy::stochastic({0.5, 0.6}, 1, 2), ValidationError);
    auto p = Policy::deterministic({1, 0}, 2);
    EXPECT_EQ(p.prob(0, 1), 1.0);
    EXPECT_EQ(p.prob(1, 1), 0.0);
    EXPECT_THROW(Policy::uniform(2, 2).actions(), std::logic_error);
}

TEST(PolicyEvaluation, SelfLoopIsGeometricSeries) {
    auto mdp = self_loop(1.0, 0.5);
    auto v = policy_evaluation(mdp, Policy::deterministic({0}, 1));
    EXPECT_NEAR(v[0], 2.0, 1e-10);
}

TEST(PolicyEvaluation, ZeroRewardsGiveZero) {
    Rng rng(3);
    auto base = random_mdp(rng, 4, 2, 0.9);
    TabularMdp mdp(4, 2, 0.9, base.transition_data(), std::vector<double>(8, 0.0),
                   {base.initial_dist().begin(), base.initial_dist().end()});
    auto v = policy_evaluation(mdp, Policy::uniform(4, 2));
    for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(PolicyEvaluation, MatchesLinearSolve) {
    Rng rng(11);
    auto mdp = random_mdp(rng, 5, 2, 0.9);
    auto pi = random_stochastic_policy(rng, 5, 2);
    auto v = policy_evaluation(mdp, pi);
    auto oracle = hubl::testing::linear_solve_value(mdp, pi);
    for (std::size_t s = 0; s < 5; ++s) EXPECT_NEAR(v[s], oracle[s], 1e-8);
}

TEST(PolicyEvaluation, RejectsNonPositiveTolerance) {
    auto mdp = self_loop(1.0, 0.5);
    EXPECT_THROW(policy_evaluation(mdp, Policy::deterministic({0}, 1), 0.0), ValidationError);
    EXPECT_THROW(value_iteration(mdp, -1.0), ValidationError);
}

TEST(PolicyEvaluation, ResidualWithinToleranceProperty) {
    Rng rng(21);
    for (int i = 0; i < 50; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        for (double tol : {1e-6, 1e-10}) {
            auto v = policy_evaluation(inst.mdp, inst.pi, tol);
            EXPECT_LE(evaluation_residual(inst.mdp, inst.pi, v), tol);
        }
    }
}

TEST(PolicyEvaluation, SweepsContractAtRateGamma) {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        const std::size_t ns = inst.mdp.n_states();
        std::vector<double> v(ns, 0.0), next(ns), prev_delta;
        double last = -1.0;
        for (int k = 0; k < 30; ++k) {
            detail::evaluation_sweep(inst.mdp, inst.pi, v, next);
            double delta = sup_distance(v, next);
            if (last > 1e-13) {
                EXPECT_LE(delta, inst.mdp.gamma() * last * (1 + 1e-9) + 1e-15);
            }
            last = delta;
            v.swap(next);
        }
    }
}

TEST(ValueIteration, ChainPicksDominantAction) {
    auto sol = value_iteration(chain(0.5));
    EXPECT_EQ(sol.policy.actions()[0], 1u);
    EXPECT_NEAR(sol.values[1], 2.0, 1e-9);
    EXPECT_NEAR(sol.values[0], 2.0, 1e-9);
}

TEST(ValueIteration, TiesBreakTowardActionZero) {
    Rng rng(8);
    auto base = random_mdp(rng, 3, 3, 0.8);
    std::vector<double> p, r;
    for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t a = 0; a < 3; ++a) {
            auto row = base.transition(s, 0);
            p.insert(p.end(), row.begin(), row.end());
            r.push_back(0.3);
        }
    TabularMdp mdp(3, 3, 0.8, p, r, {1.0, 0.0, 0.0});
    auto sol = value_iteration(mdp);
    for (auto a : sol.policy.actions()) EXPECT_EQ(a, 0u);
}

TEST(ValueIteration, MatchesBruteForceEnumeration) {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        auto mdp = random_mdp(rng, 4, 2, 0.5 + 0.4 * rng.uniform());
        auto sol = value_iteration(mdp);
        std::vector<double> best(4, -1.0);
        for (const auto& pi : hubl::testing::all_deterministic_policies(4, 2)) {
            auto v = hubl::testing::linear_solve_value(mdp, pi);
            for (std::size_t s = 0; s < 4; ++s) best[s] = std::max(best[s], v[s]);
        }
        auto greedy = hubl::testing::linear_solve_value(mdp, sol.policy);
        for (std::size_t s = 0; s < 4; ++s) {
            EXPECT_NEAR(sol.values[s], best[s], 1e-8);
            EXPECT_NEAR(greedy[s], best[s], 1e-8);
        }
    }
}

TEST(ValueIteration, QConsistentWithValues) {
    Rng rng(4);
    auto mdp = random_mdp(rng, 6, 3, 0.9);
    auto sol = value_iteration(mdp);
    for (std::size_t s = 0; s < 6; ++s) {
        EXPECT_EQ(sol.values[s], sol.q(s, sol.policy.actions()[s]));
        for (std::size_t a = 0; a < 3; ++a) EXPECT_LE(sol.q(s, a), sol.values[s]);
    }
}

TEST(Occupancy, SelfLoopHasAllMass) {
    auto occ = discounted_occupancy(self_loop(0.2, 0.7), Policy::deterministic({0}, 1));
    EXPECT_NEAR(occ(0, 0), 1.0, 1e-12);
}

TEST(Occupancy, TwoStateCycle) {
    auto mdp = two_cycle(0.5);
    auto occ = discounted_occupancy(mdp, Policy::deterministic({0, 0}, 1));
    auto m = occ.state_marginal();
    EXPECT_NEAR(m[0], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(m[1], 1.0 / 3.0, 1e-12);
    auto oracle = hubl::testing::truncated_occupancy(mdp, Policy::deterministic({0, 0}, 1), 101);
    EXPECT_NEAR(m[0], oracle(0, 0), 1e-12);
}

TEST(Occupancy, MatchesTruncatedSeriesAndFlowIdentity) {
    Rng rng(77);
    for (int i = 0; i < 30; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        const auto& mdp = inst.mdp;
        auto occ = discounted_occupancy(mdp, inst.pi);
        auto oracle = hubl::testing::truncated_occupancy(mdp, inst.pi, 2000);
        EXPECT_NEAR(occ.total(), 1.0, 1e-9);
        for (std::size_t k = 0; k < occ.weights.values.size(); ++k) {
            EXPECT_GE(occ.weights.values[k], 0.0);
            EXPECT_NEAR(occ.weights.values[k], oracle.values[k], 1e-9);
        }
        // d(s') = (1-gamma) d0(s') + gamma sum d(s,a) P(s'|s,a)
        const std::size_t ns = mdp.n_states();
        auto marg = occ.state_marginal();
        for (std::size_t s2 = 0; s2 < ns; ++s2) {
            double rhs = (1 - mdp.gamma()) * mdp.initial_dist()[s2];
            for (std::size_t s = 0; s < ns; ++s)
                for (std::size_t a = 0; a < mdp.n_actions(); ++a)
                    rhs += mdp.gamma() * occ(s, a) * mdp.transition(s, a, s2);
            EXPECT_NEAR(marg[s2], rhs, 1e-9);
        }
    }
}

TEST(Occupancy, VisitationIsOccupancyOverOneMinusGamma) {
    Rng rng(9);
    auto mdp = random_mdp(rng, 5, 2, 0.8);
    auto pi = random_stochastic_policy(rng, 5, 2);
    auto w = discounted_visitation(mdp, pi, mdp.initial_dist());
    auto d = discounted_occupancy(mdp, pi);
    EXPECT_NEAR(w.total(), 5.0, 1e-9);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(d.weights.values[k] / 0.2, w.weights.values[k], 1e-9);
}

TEST(Reshape, ZeroLambdaIsIdentity) {
    Rng rng(2);
    auto mdp = random_mdp(rng, 4, 3, 0.9);
    ValueTable h(4, 3.0);
    std::vector<double> lam(4, 0.0);
    auto m = reshape_mdp(mdp, h, lam, SupportSet::full(4, 3));
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t a = 0; a < 3; ++a) EXPECT_EQ(m.reshaped_reward(s, a), mdp.reward(s, a));
        for (std::size_t s2 = 0; s2 < 4; ++s2) EXPECT_EQ(m.discount(s, s2), 0.9);
    }
}

TEST(Reshape, UnitLambdaRemovesBootstrapping) {
    Rng rng(12);
    auto mdp = random_mdp(rng, 4, 2, 0.9);
    ValueTable h(std::vector<double>{1.0, 2.0, 3.0, 4.0});
    std::vector<double> lam(4, 1.0);
    auto m = reshape_mdp(mdp, h, lam, SupportSet::full(4, 2));
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t a = 0; a < 2; ++a) {
            double eh = 0.0;
            for (std::size_t s2 = 0; s2 < 4; ++s2) eh += mdp.transition(s, a, s2) * h[s2];
            EXPECT_NEAR(m.reshaped_reward(s, a), mdp.reward(s, a) + 0.9 * eh, 1e-15);
            for (std::size_t s2 = 0; s2 < 4; ++s2) EXPECT_EQ(m.discount(s, s2), 0.0);
        }
    auto pi = random_stochastic_policy(rng, 4, 2);
    auto vt = reshaped_policy_evaluation(m, pi);
    for (std::size_t s = 0; s < 4; ++s) {
        double one_step = 0.0;
        for (std::size_t a = 0; a < 2; ++a) one_step += pi.prob(s, a) * m.reshaped_reward(s, a);
        EXPECT_NEAR(vt[s], one_step, 1e-12);
    }
}

TEST(Reshape, SpotValue) {
    // r = 1, gamma = 0.9, deterministic move to s' with lambda(s') = 0.5, h(s') = 2.
    TabularMdp mdp(2, 1, 0.9, {0, 1, 0, 1}, {1.0, 0.0}, {1.0, 0.0});
    auto m = reshape_mdp(mdp, ValueTable(std::vector<double>{0.0, 2.0}), std::vector<double>{0.5, 0.5},
                         SupportSet::full(2, 1));
    EXPECT_NEAR(m.reshaped_reward(0, 0), 1.9, 1e-15);
    EXPECT_NEAR(m.discount(0, 1), 0.45, 1e-15);
}

TEST(Reshape, ExtensionZeroesOffSupport) {
    TabularMdp mdp(2, 1, 0.9, {0, 1, 0, 1}, {1.0, 0.0}, {1.0, 0.0});
    SupportSet sup(2, 1);
    sup.set(0, 0);
    auto m = reshape_mdp(mdp, ValueTable(std::vector<double>{5.0, 2.0}), std::vector<double>{0.5, 0.5}, sup);
    EXPECT_EQ(m.lambda(0, 1), 0.0);
    EXPECT_EQ(m.lambda(0, 0), 0.5);
    EXPECT_EQ(m.heuristic[1], 0.0);
    EXPECT_EQ(m.heuristic[0], 5.0);
    EXPECT_EQ(m.reshaped_reward(0, 0), 1.0);
    EXPECT_EQ(m.discount(0, 1), 0.9);
}

TEST(Reshape, RejectsLambdaOutsideUnitInterval) {
    auto mdp = self_loop(0.5, 0.9);
    EXPECT_THROW(reshape_mdp(mdp, ValueTable(1), std::vector<double>{1.5}, SupportSet::full(1, 1)), ValidationError);
    EXPECT_THROW(reshape_mdp(mdp, ValueTable(1), std::vector<double>{-0.1}, SupportSet::full(1, 1)), ValidationError);
    EXPECT_THROW(reshape_mdp(mdp, ValueTable(std::vector<double>{NAN}), std::vector<double>{0.1}, SupportSet::full(1, 1)),
                 ValidationError);
}

TEST(ReshapedEvaluation, ZeroLambdaMatchesBaseEvaluation) {
    Rng rng(31);
    for (int i = 0; i < 20; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        const std::size_t ns = inst.mdp.n_states();
        auto m = reshape_mdp(inst.mdp, inst.h, std::vector<double>(ns, 0.0), inst.support);
        const double tol = 1e-10;
        auto vt = reshaped_policy_evaluation(m, inst.pi, tol);
        auto v = policy_evaluation(inst.mdp, inst.pi, tol);
        for (std::size_t s = 0; s < ns; ++s) EXPECT_NEAR(vt[s], v[s], 2 * tol);
    }
}

TEST(ReshapedEvaluation, MatchesLinearSolveAndContracts) {
    Rng rng(41);
    for (int i = 0; i < 30; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        auto m = reshape_mdp(inst.mdp, inst.h, inst.lambda, inst.support);
        EXPECT_LE(m.max_discount(), inst.mdp.gamma());
        auto vt = reshaped_policy_evaluation(m, inst.pi, 1e-12);
        auto oracle = hubl::testing::linear_solve_reshaped(m, inst.pi);
        for (std::size_t s = 0; s < vt.size(); ++s) EXPECT_NEAR(vt[s], oracle[s], 1e-8);
        EXPECT_LE(reshaped_residual(m, inst.pi, vt), 1e-12);
    }
}

TEST(ReshapedEvaluation, BehaviorValueIsPreservedWithExactHeuristic) {
    Rng rng(51);
    for (int i = 0; i < 30; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        const auto& mu = inst.pi;
        auto v_mu = policy_evaluation(inst.mdp, mu, 1e-12);
        auto sup = SupportSet::of_policy(mu);
        auto m = reshape_mdp(inst.mdp, v_mu, inst.lambda, sup);
        auto vt = reshaped_policy_evaluation(m, mu, 1e-12);
        for (std::size_t s = 0; s < vt.size(); ++s) EXPECT_NEAR(vt[s], v_mu[s], 1e-8);
    }
}

TEST(ReshapedEvaluation, OptimalPolicyValueDominatedWhenHeuristicBelowOptimal) {
    Rng rng(61);
    for (int i = 0; i < 30; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        auto opt = value_iteration(inst.mdp, 1e-12);
        ValueTable h(inst.mdp.n_states());
        for (std::size_t s = 0; s < h.size(); ++s) h[s] = rng.uniform() * opt.values[s];
        auto m = reshape_mdp(inst.mdp, h, inst.lambda, inst.support);
        auto vt = reshaped_policy_evaluation(m, opt.policy, 1e-12);
        for (std::size_t s = 0; s < h.size(); ++s) EXPECT_LE(vt[s], opt.values[s] + 1e-8);
    }
}

TEST(ReshapedOccupancy, VisitationShrinksUnderBlending) {
    Rng rng(71);
    for (int i = 0; i < 30; ++i) {
        auto inst = hubl::testing::random_instance(rng);
        auto m = reshape_mdp(inst.mdp, inst.h, inst.lambda, inst.support);
        auto w = discounted_visitation(inst.mdp, inst.pi, inst.mdp.initial_dist());
        auto wt = reshaped_visitation(m, inst.pi, inst.mdp.initial_dist());
        for (std::size_t k = 0; k < w.weights.values.size(); ++k)
            EXPECT_LE(wt.weights.values[k], w.weights.values[k] + 1e-12);
    }
}
