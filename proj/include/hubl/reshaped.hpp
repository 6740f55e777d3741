#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hubl/dynamic_programming.hpp"
#include "hubl/mdp.hpp"

namespace hubl {

/// Membership set over state-action pairs (the data support).
class SupportSet {
public:
    SupportSet() = default;
    SupportSet(std::size_t n_states, std::size_t n_actions, bool fill = false)
        : n_states_(n_states), n_actions_(n_actions), member_(n_states * n_actions, fill) {}

    static SupportSet full(std::size_t n_states, std::size_t n_actions) {
        return SupportSet(n_states, n_actions, true);
    }

    /// Pairs with positive probability under a policy.
    static SupportSet of_policy(const Policy& pi) {
        SupportSet out(pi.n_states(), pi.n_actions());
        for (std::size_t s = 0; s < pi.n_states(); ++s)
            for (std::size_t a = 0; a < pi.n_actions(); ++a) out.set(s, a, pi.prob(s, a) > 0.0);
        return out;
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }

    bool contains(std::size_t s, std::size_t a) const { return member_[s * n_actions_ + a]; }
    void set(std::size_t s, std::size_t a, bool in = true) { member_[s * n_actions_ + a] = in; }

    /// True for every state that has at least one supported action.
    std::vector<bool> state_projection() const {
        std::vector<bool> out(n_states_, false);
        for (std::size_t s = 0; s < n_states_; ++s)
            for (std::size_t a = 0; a < n_actions_; ++a)
                if (contains(s, a)) out[s] = true;
        return out;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (bool b : member_) n += b ? 1 : 0;
        return n;
    }

    friend bool operator==(const SupportSet&, const SupportSet&) = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<bool> member_;
};

/**
 * MDP with blended reward r~(s,a) = r(s,a) + gamma * E[lambda(s,s') h(s')]
 * and transition-dependent discount gamma~(s,s') = gamma * (1 - lambda(s,s')).
 *
 * lambda(s,s') and h are the support-extended versions: lambda(s,s') equals
 * lambda(s') when both s and s' are supported states and 0 otherwise, and h
 * is zeroed off the supported states.
 */
struct ReshapedMdp {
    TabularMdp base;
    QTable reshaped_reward;
    std::vector<double> discount_matrix;  // [s][s'] row-major
    std::vector<double> lambda_matrix;    // [s][s'] row-major
    ValueTable heuristic;                 // extended h

    double discount(std::size_t s, std::size_t next) const {
        return discount_matrix[s * base.n_states() + next];
    }
    double lambda(std::size_t s, std::size_t next) const {
        return lambda_matrix[s * base.n_states() + next];
    }
    double max_discount() const {
        double m = 0.0;
        for (double g : discount_matrix) m = std::max(m, g);
        return m;
    }
};

inline ReshapedMdp reshape_mdp(const TabularMdp& mdp, const ValueTable& h, std::span<const double> lambda_state,
                               const SupportSet& support) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    detail::require(h.size() == ns, "h: expected n_states entries");
    detail::require(lambda_state.size() == ns, "lambda: expected n_states entries");
    detail::require(support.n_states() == ns && support.n_actions() == na, "support: shape mismatch");
    for (std::size_t s = 0; s < ns; ++s) {
        detail::require(lambda_state[s] >= 0.0 && lambda_state[s] <= 1.0,
                        "lambda[" + std::to_string(s) + "]: must lie in [0, 1]");
        detail::require(std::isfinite(h[s]), "h[" + std::to_string(s) + "]: must be finite");
    }

    const auto in_support = support.state_projection();
    const double gamma = mdp.gamma();

    ValueTable h_ext(ns);
    for (std::size_t s = 0; s < ns; ++s) h_ext[s] = in_support[s] ? h[s] : 0.0;

    std::vector<double> lam(ns * ns, 0.0), disc(ns * ns, gamma);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t s2 = 0; s2 < ns; ++s2) {
            if (in_support[s] && in_support[s2]) lam[s * ns + s2] = lambda_state[s2];
            disc[s * ns + s2] = gamma * (1.0 - lam[s * ns + s2]);
        }

    QTable r_tilde(ns, na);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) {
            double blend = 0.0;
            auto row = mdp.transition(s, a);
            for (std::size_t s2 = 0; s2 < ns; ++s2) blend += row[s2] * lam[s * ns + s2] * h_ext[s2];
            r_tilde(s, a) = mdp.reward(s, a) + gamma * blend;
        }

    return {mdp, std::move(r_tilde), std::move(disc), std::move(lam), std::move(h_ext)};
}

namespace detail {

inline void reshaped_sweep(const ReshapedMdp& m, const Policy& pi, std::span<const double> v,
                           std::span<double> out) {
    const auto& mdp = m.base;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        double acc = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            double p = pi.prob(s, a);
            if (p == 0.0) continue;
            double next = 0.0;
            auto row = mdp.transition(s, a);
            for (std::size_t s2 = 0; s2 < row.size(); ++s2) next += row[s2] * m.discount(s, s2) * v[s2];
            acc += p * (m.reshaped_reward(s, a) + next);
        }
        out[s] = acc;
    }
}

} // namespace detail

inline double reshaped_residual(const ReshapedMdp& m, const Policy& pi, const ValueTable& v) {
    std::vector<double> tv(v.size());
    detail::reshaped_sweep(m, pi, v.values, tv);
    return sup_distance(v.values, tv);
}

/// Fixed point of Q~(s,a) = r~(s,a) + sum_s' P(s'|s,a) gamma~(s,s') V~(s').
inline ValueTable reshaped_policy_evaluation(const ReshapedMdp& m, const Policy& pi,
                                             double tol = kDefaultTolerance) {
    detail::check_tol(tol);
    check_policy_shape(m.base, pi);
    const std::size_t ns = m.base.n_states();
    std::vector<double> v(ns, 0.0), next(ns);
    for (std::size_t it = 0; it < kMaxSweeps; ++it) {
        detail::reshaped_sweep(m, pi, v, next);
        double delta = sup_distance(v, next);
        v.swap(next);
        if (delta <= tol) return ValueTable(std::move(v));
    }
    throw ConvergenceError("reshaped_policy_evaluation: no convergence");
}

inline QTable reshaped_q(const ReshapedMdp& m, const ValueTable& v) {
    const auto& mdp = m.base;
    QTable q(mdp.n_states(), mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            double next = 0.0;
            auto row = mdp.transition(s, a);
            for (std::size_t s2 = 0; s2 < row.size(); ++s2) next += row[s2] * m.discount(s, s2) * v[s2];
            q(s, a) = m.reshaped_reward(s, a) + next;
        }
    return q;
}

/**
 * Unnormalized visitation under the reshaped discounts:
 * sum_t E[prod_{k<t} gamma~(s_k, s_{k+1}) 1{s_t = s, a_t = a}].
 */
inline OccupancyMeasure reshaped_visitation(const ReshapedMdp& m, const Policy& pi,
                                            std::span<const double> init_dist) {
    check_policy_shape(m.base, pi);
    detail::check_distribution(init_dist, "init_dist");
    return {detail::discounted_flow(
        m.base, pi, init_dist, [&m](std::size_t s, std::size_t s2) { return m.discount(s, s2); },
        m.base.gamma())};
}

} // namespace hubl
