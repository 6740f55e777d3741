#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hubl/mdp.hpp"

namespace hubl {

/// Raised when a fixed-point iteration fails to reach its tolerance within
/// the iteration cap (only possible when tol is below floating-point noise).
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxSweeps = 2'000'000;

namespace detail {

inline void check_tol(double tol) {
    require(tol > 0.0 && std::isfinite(tol), "tol: must be positive");
}

/// One application of the evaluation operator T^pi.
inline void evaluation_sweep(const TabularMdp& mdp, const Policy& pi, std::span<const double> v,
                             std::span<double> out) {
    const double gamma = mdp.gamma();
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        double acc = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            double p = pi.prob(s, a);
            if (p == 0.0) continue;
            double next = 0.0;
            auto row = mdp.transition(s, a);
            for (std::size_t s2 = 0; s2 < row.size(); ++s2) next += row[s2] * v[s2];
            acc += p * (mdp.reward(s, a) + gamma * next);
        }
        out[s] = acc;
    }
}

inline void q_backup(const TabularMdp& mdp, std::span<const double> v, QTable& q) {
    for (std::size_t s = 0; s < mdp.n_states(); ++s)
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
            double next = 0.0;
            auto row = mdp.transition(s, a);
            for (std::size_t s2 = 0; s2 < row.size(); ++s2) next += row[s2] * v[s2];
            q(s, a) = mdp.reward(s, a) + mdp.gamma() * next;
        }
}

} // namespace detail

/// Sup-norm Bellman residual ||V - T^pi V||.
inline double evaluation_residual(const TabularMdp& mdp, const Policy& pi, const ValueTable& v) {
    std::vector<double> tv(mdp.n_states());
    detail::evaluation_sweep(mdp, pi, v.values, tv);
    return sup_distance(v.values, tv);
}

/**
 * Iterative policy evaluation with synchronous sweeps.
 *
 * Stops once two successive iterates are within tol; the returned table then
 * has Bellman residual at most gamma * tol.
 */
inline ValueTable policy_evaluation(const TabularMdp& mdp, const Policy& pi, double tol = kDefaultTolerance) {
    detail::check_tol(tol);
    check_policy_shape(mdp, pi);
    std::vector<double> v(mdp.n_states(), 0.0), next(mdp.n_states());
    for (std::size_t it = 0; it < kMaxSweeps; ++it) {
        detail::evaluation_sweep(mdp, pi, v, next);
        double delta = sup_distance(v, next);
        v.swap(next);
        if (delta <= tol) return ValueTable(std::move(v));
    }
    throw ConvergenceError("policy_evaluation: no convergence at tol " + std::to_string(tol));
}

struct OptimalSolution {
    QTable q;
    Policy policy;
    ValueTable values;
};

/// Value iteration for V*, Q* and a greedy deterministic policy.
inline OptimalSolution value_iteration(const TabularMdp& mdp, double tol = kDefaultTolerance) {
    detail::check_tol(tol);
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    std::vector<double> v(ns, 0.0), next(ns);
    QTable q(ns, na);
    for (std::size_t it = 0; it < kMaxSweeps; ++it) {
        detail::q_backup(mdp, v, q);
        for (std::size_t s = 0; s < ns; ++s) next[s] = q.row(s)[argmax(q.row(s))];
        double delta = sup_distance(v, next);
        v.swap(next);
        if (delta <= tol) {
            detail::q_backup(mdp, v, q);
            std::vector<std::size_t> actions(ns);
            for (std::size_t s = 0; s < ns; ++s) {
                actions[s] = argmax(q.row(s));
                v[s] = q(s, actions[s]);
            }
            return {std::move(q), Policy::deterministic(std::move(actions), na), ValueTable(std::move(v))};
        }
    }
    throw ConvergenceError("value_iteration: no convergence at tol " + std::to_string(tol));
}

/// State-action occupancy weights d[s][a], stored like a QTable.
struct OccupancyMeasure {
    QTable weights;

    double operator()(std::size_t s, std::size_t a) const { return weights(s, a); }
    double total() const {
        double t = 0.0;
        for (double w : weights.values) t += w;
        return t;
    }
    std::vector<double> state_marginal() const {
        std::vector<double> out(weights.n_states, 0.0);
        for (std::size_t s = 0; s < weights.n_states; ++s)
            for (double w : weights.row(s)) out[s] += w;
        return out;
    }
};

namespace detail {

/**
 * Solves rho = init + sum_{s,a} rho(s) pi(a|s) P(s'|s,a) w(s,s') by fixed
 * point iteration, where w is a per-transition discount bounded by
 * max_discount < 1. Returns the state-action weights rho(s) pi(a|s).
 */
template <typename Discount>
QTable discounted_flow(const TabularMdp& mdp, const Policy& pi, std::span<const double> init,
                       Discount&& discount, double max_discount) {
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    std::vector<double> rho(init.begin(), init.end()), next(ns);
    double scale = 1.0;
    for (double x : init) scale = std::max(scale, std::abs(x));
    scale /= (1.0 - max_discount);
    const double tol = 1e-14 * scale;
    for (std::size_t it = 0;; ++it) {
        if (it == kMaxSweeps) throw ConvergenceError("occupancy: no convergence");
        std::copy(init.begin(), init.end(), next.begin());
        for (std::size_t s = 0; s < ns; ++s) {
            if (rho[s] == 0.0) continue;
            for (std::size_t a = 0; a < na; ++a) {
                double mass = rho[s] * pi.prob(s, a);
                if (mass == 0.0) continue;
                auto row = mdp.transition(s, a);
                for (std::size_t s2 = 0; s2 < ns; ++s2)
                    if (row[s2] != 0.0) next[s2] += mass * row[s2] * discount(s, s2);
            }
        }
        double delta = sup_distance(rho, next);
        rho.swap(next);
        if (delta <= tol) break;
    }
    QTable out(ns, na);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) out(s, a) = rho[s] * pi.prob(s, a);
    return out;
}

} // namespace detail

/**
 * Unnormalized discounted visitation sum_t gamma^t Pr(s_t = s, a_t = a).
 * Total mass is 1 / (1 - gamma).
 */
inline OccupancyMeasure discounted_visitation(const TabularMdp& mdp, const Policy& pi,
                                              std::span<const double> init_dist) {
    check_policy_shape(mdp, pi);
    detail::check_distribution(init_dist, "init_dist");
    const double gamma = mdp.gamma();
    return {detail::discounted_flow(mdp, pi, init_dist, [gamma](std::size_t, std::size_t) { return gamma; },
                                    gamma)};
}

/// Normalized discounted occupancy (1 - gamma) sum_t gamma^t Pr(s_t, a_t); total mass 1.
inline OccupancyMeasure discounted_occupancy(const TabularMdp& mdp, const Policy& pi,
                                             std::span<const double> init_dist) {
    auto occ = discounted_visitation(mdp, pi, init_dist);
    for (double& w : occ.weights.values) w *= (1.0 - mdp.gamma());
    return occ;
}

inline OccupancyMeasure discounted_occupancy(const TabularMdp& mdp, const Policy& pi) {
    return discounted_occupancy(mdp, pi, mdp.initial_dist());
}

} // namespace hubl
