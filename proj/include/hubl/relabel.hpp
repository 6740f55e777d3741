#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hubl/dataset.hpp"

namespace hubl {

struct AnnotatedStep {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;
    double h = 0.0;
    double lambda = 0.0;
};

struct AnnotatedTrajectory {
    std::vector<AnnotatedStep> steps;
    EndKind end = EndKind::timeout;
    std::size_t final_state = 0;
    bool has_heuristics = false;
    bool has_lambda = false;
    bool missing_bootstrap = false;

    /// Mean of the per-step heuristics.
    double mean_h() const {
        double acc = 0.0;
        for (const auto& st : steps) acc += st.h;
        return acc / static_cast<double>(steps.size());
    }
};

enum class BlendKind { constant, sigmoid, rank };

inline const char* to_string(BlendKind k) {
    switch (k) {
    case BlendKind::constant: return "constant";
    case BlendKind::sigmoid: return "sigmoid";
    case BlendKind::rank: return "rank";
    }
    return "?";
}

inline BlendKind parse_blend_kind(const std::string& name) {
    if (name == "constant") return BlendKind::constant;
    if (name == "sigmoid") return BlendKind::sigmoid;
    if (name == "rank") return BlendKind::rank;
    throw ValidationError("strategy: expected constant|sigmoid|rank, got '" + name + "'");
}

struct BlendingStrategy {
    BlendKind kind = BlendKind::constant;
    double alpha = 0.0;

    void validate() const {
        detail::require(alpha >= 0.0 && alpha <= 1.0, "alpha: must lie in [0, 1]");
    }
};

/// Step 1: attach Monte-Carlo return-to-go heuristics to every step.
inline AnnotatedTrajectory compute_heuristics(const Trajectory& tr, double gamma,
                                              const PartialValueTable& timeout_values) {
    validate(tr);
    detail::require(gamma >= 0.0 && gamma < 1.0, "gamma: must lie in [0, 1)");
    auto h = returns_to_go(tr, gamma, timeout_values);
    AnnotatedTrajectory out;
    out.end = tr.end;
    out.final_state = tr.final_state;
    out.has_heuristics = true;
    out.missing_bootstrap = h.missing_bootstrap;
    out.steps.reserve(tr.length());
    for (std::size_t t = 0; t < tr.length(); ++t)
        out.steps.push_back({tr.steps[t].state, tr.steps[t].action, tr.steps[t].reward, h.values[t], 0.0});
    return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/**
 * Step 2: trajectory-level blending factors.
 *
 *   constant  lambda = alpha
 *   sigmoid   lambda = alpha * sigmoid(mean_t h_t)
 *   rank      lambda = alpha * #{tau' : hbar(tau') <= hbar(tau)} / n
 *
 * Sigmoid and rank need heuristics on every trajectory.
 */
inline std::vector<double> blending_factors(const BlendingStrategy& strategy,
                                            std::span<const AnnotatedTrajectory> trajs) {
    strategy.validate();
    std::vector<double> out(trajs.size(), strategy.alpha);
    if (strategy.kind == BlendKind::constant) return out;

    std::vector<double> means(trajs.size());
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        detail::require(trajs[i].has_heuristics && !trajs[i].steps.empty(),
                        std::string(to_string(strategy.kind)) + " blending: heuristics missing on trajectory " +
                            std::to_string(i));
        means[i] = trajs[i].mean_h();
    }

    if (strategy.kind == BlendKind::sigmoid) {
        for (std::size_t i = 0; i < trajs.size(); ++i) out[i] = strategy.alpha * sigmoid(means[i]);
        return out;
    }

    std::vector<double> sorted = means;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(trajs.size());
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        auto rank = std::upper_bound(sorted.begin(), sorted.end(), means[i]) - sorted.begin();
        out[i] = strategy.alpha * (static_cast<double>(rank) / n);
    }
    return out;
}

/// Hand-off tuple (s, a, s', r~, gamma~, done).
struct RelabeledTuple {
    std::size_t state = 0;
    std::size_t action = 0;
    std::size_t next_state = 0;
    double r_tilde = 0.0;
    double gamma_tilde = 0.0;
    bool done = false;

    friend bool operator==(const RelabeledTuple&, const RelabeledTuple&) = default;
};

struct RelabelResult {
    std::vector<RelabeledTuple> tuples;
    std::vector<AnnotatedTrajectory> trajectories;
    std::size_t missing_bootstrap = 0;
};

namespace detail {

inline RelabelResult relabel_impl(const Dataset& data, const BlendingStrategy& strategy,
                                  const PartialValueTable& timeout_values, bool blend_reward) {
    strategy.validate();
    const double gamma = data.gamma;
    RelabelResult out;
    out.trajectories.reserve(data.trajectories.size());
    for (const auto& tr : data.trajectories) {
        out.trajectories.push_back(compute_heuristics(tr, gamma, timeout_values));
        if (out.trajectories.back().missing_bootstrap) ++out.missing_bootstrap;
    }
    auto lambdas = blending_factors(strategy, out.trajectories);

    out.tuples.reserve(data.n_transitions());
    for (std::size_t i = 0; i < out.trajectories.size(); ++i) {
        auto& at = out.trajectories[i];
        at.has_lambda = true;
        for (auto& st : at.steps) st.lambda = lambdas[i];
        const double lam = lambdas[i];
        const std::size_t len = at.steps.size();
        for (std::size_t t = 0; t < len; ++t) {
            const auto& st = at.steps[t];
            RelabeledTuple rt;
            rt.state = st.state;
            rt.action = st.action;
            const bool last = t + 1 == len;
            rt.next_state = last ? at.final_state : at.steps[t + 1].state;
            double h_next = 0.0;
            if (!last)
                h_next = at.steps[t + 1].h;
            else if (at.end == EndKind::timeout)
                h_next = timeout_values.get(at.final_state).value_or(0.0);
            rt.done = last && at.end == EndKind::terminal;
            rt.r_tilde = blend_reward ? st.reward + gamma * lam * h_next : st.reward;
            rt.gamma_tilde = rt.done ? 0.0 : gamma * (1.0 - lam);
            out.tuples.push_back(rt);
        }
    }
    return out;
}

} // namespace detail

/**
 * Steps 0-3: heuristics, blending factors, then r~ = r + gamma lambda' h'
 * and gamma~ = gamma (1 - lambda'). Final tuples of terminal trajectories
 * use h' = 0 and carry done = true with gamma~ = 0.
 */
inline RelabelResult relabel(const Dataset& data, const BlendingStrategy& strategy,
                             const PartialValueTable& timeout_values) {
    return detail::relabel_impl(data, strategy, timeout_values, true);
}

/// Same as relabel but keeps r~ = r; only the discount shrinks.
inline RelabelResult relabel_discount_only(const Dataset& data, const BlendingStrategy& strategy,
                                           const PartialValueTable& timeout_values) {
    return detail::relabel_impl(data, strategy, timeout_values, false);
}

} // namespace hubl
