#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hubl/dynamic_programming.hpp"
#include "hubl/mdp.hpp"
#include "hubl/random.hpp"
#include "hubl/reshaped.hpp"

namespace hubl {

/// Dense random MDP: Dirichlet(1) transition rows and initial distribution,
/// uniform rewards in [0,1].
inline TabularMdp random_mdp(Rng& rng, std::size_t ns, std::size_t na, double gamma) {
    std::vector<double> p;
    p.reserve(ns * na * ns);
    for (std::size_t sa = 0; sa < ns * na; ++sa) {
        auto row = rng.dirichlet1(ns);
        p.insert(p.end(), row.begin(), row.end());
    }
    std::vector<double> r(ns * na);
    for (auto& x : r) x = rng.uniform();
    return TabularMdp(ns, na, gamma, std::move(p), std::move(r), rng.dirichlet1(ns));
}

inline Policy random_stochastic_policy(Rng& rng, std::size_t ns, std::size_t na) {
    std::vector<double> probs;
    probs.reserve(ns * na);
    for (std::size_t s = 0; s < ns; ++s) {
        auto row = rng.dirichlet1(na);
        probs.insert(probs.end(), row.begin(), row.end());
    }
    return Policy::stochastic(std::move(probs), ns, na);
}

inline Policy random_deterministic_policy(Rng& rng, std::size_t ns, std::size_t na) {
    std::vector<std::size_t> actions(ns);
    for (auto& a : actions) a = static_cast<std::size_t>(rng.below(na));
    return Policy::deterministic(std::move(actions), na);
}

/// Random support set; every pair is kept with probability keep.
inline SupportSet random_support(Rng& rng, std::size_t ns, std::size_t na, double keep) {
    SupportSet out(ns, na);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) out.set(s, a, rng.uniform() < keep);
    return out;
}

/// Optimal deterministic policy of the MDP.
inline Policy expert_policy(const TabularMdp& mdp) { return value_iteration(mdp).policy; }

/// (1 - epsilon) expert + epsilon uniform.
inline Policy noisy_expert_policy(const TabularMdp& mdp, double epsilon) {
    detail::require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon: must lie in [0, 1]");
    const auto expert = expert_policy(mdp);
    const std::size_t ns = mdp.n_states(), na = mdp.n_actions();
    std::vector<double> probs(ns * na, epsilon / static_cast<double>(na));
    for (std::size_t s = 0; s < ns; ++s) probs[s * na + expert.actions()[s]] += 1.0 - epsilon;
    // Renormalize each row so it sums to one to within a couple of ulps.
    for (std::size_t s = 0; s < ns; ++s) {
        double total = 0.0;
        for (std::size_t a = 0; a < na; ++a) total += probs[s * na + a];
        for (std::size_t a = 0; a < na; ++a) probs[s * na + a] /= total;
    }
    return Policy::stochastic(std::move(probs), ns, na);
}

/**
 * Five-state benchmark, gamma = 0.9, two actions.
 *
 * State 0 is an absorbing hub: action 0 pays 0.6, action 1 pays 0.25.
 * States 1-4 are islands that only appear as start states: action 1 pays 1,
 * action 0 pays 0, and both lead to the hub. Island start probabilities
 * shrink by 4x each, so larger datasets keep resolving rarer islands.
 */
inline TabularMdp benchmark_mdp() {
    constexpr std::size_t ns = 5, na = 2;
    std::vector<double> p(ns * na * ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t a = 0; a < na; ++a) p[(s * na + a) * ns + 0] = 1.0;
    std::vector<double> r = {0.6, 0.25, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0};
    std::vector<double> d0 = {0.0, 0.02, 0.005, 0.00125, 0.0003125};
    d0[0] = 1.0 - (d0[1] + d0[2] + d0[3] + d0[4]);
    return TabularMdp(ns, na, 0.9, std::move(p), std::move(r), std::move(d0));
}

enum class BehaviorKind { expert, noisy_expert, uniform };

inline BehaviorKind parse_behavior_kind(const std::string& name) {
    if (name == "expert") return BehaviorKind::expert;
    if (name == "noisy_expert") return BehaviorKind::noisy_expert;
    if (name == "uniform") return BehaviorKind::uniform;
    throw ValidationError("behavior.kind: expected expert|noisy_expert|uniform, got '" + name + "'");
}

inline const char* to_string(BehaviorKind k) {
    switch (k) {
    case BehaviorKind::expert: return "expert";
    case BehaviorKind::noisy_expert: return "noisy_expert";
    case BehaviorKind::uniform: return "uniform";
    }
    return "?";
}

inline Policy make_behavior(const TabularMdp& mdp, BehaviorKind kind, double epsilon) {
    switch (kind) {
    case BehaviorKind::expert: return expert_policy(mdp);
    case BehaviorKind::noisy_expert: return noisy_expert_policy(mdp, epsilon);
    case BehaviorKind::uniform: return Policy::uniform(mdp.n_states(), mdp.n_actions());
    }
    throw ValidationError("behavior.kind: unknown");
}

} // namespace hubl
