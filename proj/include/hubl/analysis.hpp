#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hubl/dynamic_programming.hpp"
#include "hubl/mdp.hpp"
#include "hubl/reshaped.hpp"

namespace hubl {

/// Fixed-point tolerance for every exact quantity in this header. The
/// gamma/(1-gamma) prefactors amplify solver error, so it sits below the
/// generic default.
inline constexpr double kAnalysisTolerance = 1e-12;

struct DecompositionReport {
    double total_gap = 0.0;  // V*(d0) - V^pi(d0)
    double bias = 0.0;
    double regret = 0.0;
    double residual = 0.0;  // total_gap - bias - regret
    double lemma_residual = 0.0;  // (V^pi - V~^pi)(d0) minus its occupancy form
};

struct BoundReport {
    double bias_bound = 0.0;
    double regret_bound = 0.0;
    double measured_bias = 0.0;
    double measured_regret = 0.0;
    double concentrability = 0.0;
    double mu_min = 0.0;
    bool bias_hypothesis = false;  // h == V^mu on the support states
    bool bias_holds = false;
};

struct LemmaResult {
    std::string name;
    bool hypothesis = false;
    std::string hypothesis_note;
    double max_violation = 0.0;
    double tolerance = 0.0;

    bool passed() const { return hypothesis && max_violation <= tolerance; }
};

struct LemmaReport {
    LemmaResult behavior_value;   // V~^mu == V^mu
    LemmaResult optimal_dominance;  // V~^{pi*} <= V*
    LemmaResult occupancy;        // reshaped occupancy inequality

    bool passed() const { return behavior_value.passed() && optimal_dominance.passed() && occupancy.passed(); }
};

namespace detail {

/// sum_{s,a,s'} d(s,a) P(s'|s,a) lambda(s,s') f(s').
inline double blended_expectation(const ReshapedMdp& m, const OccupancyMeasure& d, std::span<const double> f) {
    const auto& mdp = m.base;
    const std::size_t ns = mdp.n_states();
    double acc = 0.0;
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double w = d(s, a);
            if (w == 0.0) continue;
            auto row = mdp.transition(s, a);
            for (std::size_t s2 = 0; s2 < ns; ++s2) acc += w * row[s2] * m.lambda(s, s2) * f[s2];
        }
    return acc;
}

inline std::vector<double> difference(const ValueTable& x, const ValueTable& y) {
    std::vector<double> out(x.size());
    for (std::size_t s = 0; s < x.size(); ++s) out[s] = x[s] - y[s];
    return out;
}

inline double prefactor(double gamma) { return gamma / (1.0 - gamma); }

} // namespace detail

/**
 * Bias = gamma/(1-gamma) E_{d^{pi*}, P}[lambda(s,s') (V~^{pi*}(s') - h(s'))],
 * an unconditional expectation with lambda and h extended by zero off the
 * support.
 */
inline double bias_term(const TabularMdp& mdp, const ValueTable& h, std::span<const double> lambda_state,
                        const SupportSet& support, const Policy& pi_star, double tol = kAnalysisTolerance) {
    auto m = reshape_mdp(mdp, h, lambda_state, support);
    auto vt = reshaped_policy_evaluation(m, pi_star, tol);
    auto d = discounted_occupancy(mdp, pi_star);
    return detail::prefactor(mdp.gamma()) * detail::blended_expectation(m, d, detail::difference(vt, m.heuristic));
}

/// Regret = V~^{pi*}(d0) - V~^pi(d0) + gamma/(1-gamma) E_{d^pi, P}[lambda (h - V~^pi)].
inline double regret_term(const TabularMdp& mdp, const ValueTable& h, std::span<const double> lambda_state,
                          const SupportSet& support, const Policy& pi, const Policy& pi_star,
                          double tol = kAnalysisTolerance) {
    auto m = reshape_mdp(mdp, h, lambda_state, support);
    auto vt_star = reshaped_policy_evaluation(m, pi_star, tol);
    auto vt_pi = reshaped_policy_evaluation(m, pi, tol);
    auto d = discounted_occupancy(mdp, pi);
    const auto d0 = mdp.initial_dist();
    return vt_star.dot(d0) - vt_pi.dot(d0) +
           detail::prefactor(mdp.gamma()) * detail::blended_expectation(m, d, detail::difference(m.heuristic, vt_pi));
}

/// Evaluates both terms against the exact gap; pi_star comes from value iteration.
inline DecompositionReport decomposition_check(const TabularMdp& mdp, const ValueTable& h,
                                               std::span<const double> lambda_state, const SupportSet& support,
                                               const Policy& pi, double tol = kAnalysisTolerance) {
    const auto opt = value_iteration(mdp, tol);
    const auto d0 = mdp.initial_dist();
    const double g = detail::prefactor(mdp.gamma());
    auto m = reshape_mdp(mdp, h, lambda_state, support);

    auto v_star = policy_evaluation(mdp, opt.policy, tol);
    auto v_pi = policy_evaluation(mdp, pi, tol);
    auto vt_star = reshaped_policy_evaluation(m, opt.policy, tol);
    auto vt_pi = reshaped_policy_evaluation(m, pi, tol);
    auto d_star = discounted_occupancy(mdp, opt.policy);
    auto d_pi = discounted_occupancy(mdp, pi);

    DecompositionReport rep;
    rep.total_gap = v_star.dot(d0) - v_pi.dot(d0);
    rep.bias = g * detail::blended_expectation(m, d_star, detail::difference(vt_star, m.heuristic));
    const double correction = g * detail::blended_expectation(m, d_pi, detail::difference(m.heuristic, vt_pi));
    rep.regret = vt_star.dot(d0) - vt_pi.dot(d0) + correction;
    rep.residual = rep.total_gap - rep.bias - rep.regret;
    rep.lemma_residual = (v_pi.dot(d0) - vt_pi.dot(d0)) + correction;
    return rep;
}

/**
 * gamma alpha/(1-gamma) E_{d^{pi*}, P}[1{s, s' supported} (V*(s') - V^mu(s'))].
 * Valid for h = V^mu on the support states and lambda = alpha there.
 */
inline double bias_bound(const TabularMdp& mdp, double alpha, const Policy& mu, const SupportSet& support,
                         double tol = kAnalysisTolerance) {
    detail::require(alpha >= 0.0 && alpha <= 1.0, "alpha: must lie in [0, 1]");
    const auto opt = value_iteration(mdp, tol);
    const auto v_mu = policy_evaluation(mdp, mu, tol);
    const auto d_star = discounted_occupancy(mdp, opt.policy);
    const auto in = support.state_projection();
    const std::size_t ns = mdp.n_states();
    double acc = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
        if (!in[s]) continue;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            const double w = d_star(s, a);
            if (w == 0.0) continue;
            auto row = mdp.transition(s, a);
            for (std::size_t s2 = 0; s2 < ns; ++s2)
                if (in[s2]) acc += w * row[s2] * (opt.values[s2] - v_mu[s2]);
        }
    }
    return alpha * detail::prefactor(mdp.gamma()) * acc;
}

/**
 * min(v_max, sqrt(v_max^2 (1-gamma) |S| / (N (1-gamma(1-lambda))^4))
 *            * (sqrt(C) + gamma lambda/(1-gamma) sqrt(1/mu_min))).
 * An infinite concentrability C returns v_max.
 */
inline double regret_bound(std::size_t n_tuples, double gamma, double lambda_const, std::size_t n_states,
                           double concentrability, double mu_min, double v_max) {
    detail::require(n_tuples >= 1, "n_tuples: must be at least 1");
    detail::require(gamma >= 0.0 && gamma < 1.0, "gamma: must lie in [0, 1)");
    detail::require(lambda_const >= 0.0 && lambda_const <= 1.0, "alpha: must lie in [0, 1]");
    detail::require(v_max > 0.0, "v_max: must be positive");
    detail::require(concentrability >= 0.0, "concentrability: must be nonnegative");
    if (std::isinf(concentrability)) return v_max;
    const double shrink = 1.0 - gamma * (1.0 - lambda_const);
    const double scale = std::sqrt(v_max * v_max * (1.0 - gamma) * static_cast<double>(n_states) /
                                   (static_cast<double>(n_tuples) * std::pow(shrink, 4)));
    double second = 0.0;
    if (lambda_const > 0.0) {
        detail::require(mu_min > 0.0, "mu_min: must be positive");
        second = gamma * lambda_const / (1.0 - gamma) * std::sqrt(1.0 / mu_min);
    }
    return std::min(v_max, scale * (std::sqrt(concentrability) + second));
}

/// max_{s,a} d^{pi*}(s,a) / mu(s,a); +inf when pi* puts mass where mu has none.
inline double concentrability(const OccupancyMeasure& d_star, const QTable& mu) {
    double c = 0.0;
    for (std::size_t i = 0; i < mu.values.size(); ++i) {
        const double w = d_star.weights.values[i];
        if (w <= 0.0) continue;
        if (mu.values[i] <= 0.0) return std::numeric_limits<double>::infinity();
        c = std::max(c, w / mu.values[i]);
    }
    return c;
}

/// Smallest data probability over supported pairs.
inline double mu_min(const QTable& mu, const SupportSet& support) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < mu.n_states; ++s)
        for (std::size_t a = 0; a < mu.n_actions; ++a)
            if (support.contains(s, a)) m = std::min(m, mu(s, a));
    return m;
}

/// True when h matches V^mu on every supported state within tol.
inline bool matches_behavior_value(const TabularMdp& mdp, const Policy& mu, const ValueTable& h,
                                   const SupportSet& support, double tol = 1e-8) {
    const auto v_mu = policy_evaluation(mdp, mu, kAnalysisTolerance);
    const auto in = support.state_projection();
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        if (in[s] && std::abs(h[s] - v_mu[s]) > tol) return false;
    return true;
}

/**
 * Measured terms of the decomposition next to the bound expressions, with
 * lambda = alpha on the support. data_dist is the data distribution mu(s,a);
 * mu_min ranges over the pairs it covers.
 */
inline BoundReport evaluate_bounds(const TabularMdp& mdp, const Policy& mu, const ValueTable& h, double alpha,
                                   const SupportSet& support, const Policy& pi, const QTable& data_dist,
                                   std::size_t n_tuples, double v_max) {
    const std::vector<double> lam(mdp.n_states(), alpha);
    const auto rep = decomposition_check(mdp, h, lam, support, pi);
    const auto opt = value_iteration(mdp, kAnalysisTolerance);
    BoundReport out;
    out.measured_bias = rep.bias;
    out.measured_regret = rep.regret;
    out.bias_bound = bias_bound(mdp, alpha, mu, support);
    out.concentrability = concentrability(discounted_occupancy(mdp, opt.policy), data_dist);
    SupportSet observed(mdp.n_states(), mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) observed.set(s, a, data_dist(s, a) > 0.0);
    out.mu_min = mu_min(data_dist, observed);
    out.regret_bound = regret_bound(n_tuples, mdp.gamma(), alpha, mdp.n_states(), out.concentrability,
                                    out.mu_min, v_max);
    out.bias_hypothesis = matches_behavior_value(mdp, mu, h, support);
    out.bias_holds = out.measured_bias <= out.bias_bound + 1e-8;
    return out;
}

/**
 * Checks the three supporting lemmas on one instance with lambda = alpha on
 * the support:
 *
 *   behavior_value     V~^mu(s) = V^mu(s) on support states, given h = V^mu there
 *   optimal_dominance  V~^{pi*} <= V* pointwise, given h <= V*
 *   occupancy          d~^pi <= (1-gamma)/(1-gamma(1-alpha)) d^pi for pi inside the support
 *
 * The occupancy lemma uses d^pi = w/(1-gamma) and d~^pi = w~/(1-gamma(1-alpha))
 * with w, w~ the unnormalized discounted visitations; pi defaults to mu.
 */
inline LemmaReport lemma_suite(const TabularMdp& mdp, const Policy& mu, const ValueTable& h, double alpha,
                               const SupportSet& support, const Policy* pi = nullptr,
                               double tol = kAnalysisTolerance) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    const std::vector<double> lam(ns, alpha);
    const auto m = reshape_mdp(mdp, h, lam, support);
    const auto in = support.state_projection();
    LemmaReport rep;

    {
        auto& r = rep.behavior_value;
        r.name = "behavior_value";
        r.tolerance = 1e-8;
        const auto v_mu = policy_evaluation(mdp, mu, tol);
        const auto vt_mu = reshaped_policy_evaluation(m, mu, tol);
        r.hypothesis = true;
        for (std::size_t s = 0; s < ns; ++s)
            if (in[s]) {
                if (std::abs(h[s] - v_mu[s]) > 1e-8) r.hypothesis = false;
                r.max_violation = std::max(r.max_violation, std::abs(vt_mu[s] - v_mu[s]));
            }
        if (!r.hypothesis) r.hypothesis_note = "h differs from V^mu on a supported state";
    }
    {
        auto& r = rep.optimal_dominance;
        r.name = "optimal_dominance";
        r.tolerance = 1e-8;
        const auto opt = value_iteration(mdp, tol);
        const auto vt_star = reshaped_policy_evaluation(m, opt.policy, tol);
        r.hypothesis = true;
        for (std::size_t s = 0; s < ns; ++s) {
            if (m.heuristic[s] > opt.values[s] + 1e-8) r.hypothesis = false;
            r.max_violation = std::max(r.max_violation, vt_star[s] - opt.values[s]);
        }
        if (!r.hypothesis) r.hypothesis_note = "h exceeds V* on a supported state";
    }
    {
        auto& r = rep.occupancy;
        r.name = "occupancy";
        r.tolerance = 1e-9;
        const Policy& p = pi ? *pi : mu;
        r.hypothesis = true;
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t a = 0; a < na; ++a)
                if (p.prob(s, a) > 0.0 && !support.contains(s, a)) r.hypothesis = false;
        if (!r.hypothesis) r.hypothesis_note = "policy leaves the support";
        const double gamma = mdp.gamma();
        const double shrink = 1.0 - gamma * (1.0 - alpha);
        const double factor = (1.0 - gamma) / shrink;
        const auto w = discounted_visitation(mdp, p, mdp.initial_dist());
        const auto wt = reshaped_visitation(m, p, mdp.initial_dist());
        for (std::size_t s = 0; s < ns; ++s)
            for (std::size_t a = 0; a < na; ++a) {
                const double lhs = wt(s, a) / shrink;
                const double rhs = factor * w(s, a) / (1.0 - gamma);
                r.max_violation = std::max(r.max_violation, lhs - rhs);
            }
    }
    return rep;
}

} // namespace hubl
