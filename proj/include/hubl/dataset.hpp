#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hubl/mdp.hpp"
#include "hubl/random.hpp"
#include "hubl/reshaped.hpp"

namespace hubl {

enum class EndKind { terminal, timeout };

inline const char* to_string(EndKind k) { return k == EndKind::terminal ? "terminal" : "timeout"; }

struct Step {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;

    friend bool operator==(const Step&, const Step&) = default;
};

struct Trajectory {
    std::vector<Step> steps;
    EndKind end = EndKind::timeout;
    std::size_t final_state = 0;

    std::size_t length() const noexcept { return steps.size(); }
    /// State reached after step t.
    std::size_t next_state(std::size_t t) const {
        return t + 1 < steps.size() ? steps[t + 1].state : final_state;
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline void validate(const Trajectory& tr) {
    detail::require(!tr.steps.empty(), "trajectory: must contain at least one step");
    for (const auto& st : tr.steps)
        detail::require(std::isfinite(st.reward) && st.reward >= 0.0 && st.reward <= 1.0,
                        "trajectory: reward outside [0, 1]");
}

struct Dataset {
    std::vector<Trajectory> trajectories;
    double gamma = 0.0;
    std::uint64_t rng_seed = 0;

    std::size_t n_transitions() const {
        std::size_t n = 0;
        for (const auto& t : trajectories) n += t.length();
        return n;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// A single (s, a, r, s') sample with its end-of-episode flag.
struct Transition {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t next_state = 0;
    bool done = false;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Flattens trajectories into transitions in trajectory order, then step order.
inline std::vector<Transition> flatten(const Dataset& data) {
    std::vector<Transition> out;
    out.reserve(data.n_transitions());
    for (const auto& tr : data.trajectories)
        for (std::size_t t = 0; t < tr.length(); ++t) {
            bool last = t + 1 == tr.length();
            out.push_back({tr.steps[t].state, tr.steps[t].action, tr.steps[t].reward, tr.next_state(t),
                           last && tr.end == EndKind::terminal});
        }
    return out;
}

namespace detail {

inline Trajectory sample_trajectory(const TabularMdp& mdp, const Policy& behavior, std::size_t max_len,
                                    const std::vector<bool>& terminal, Rng& rng) {
    Trajectory tr;
    std::size_t s = rng.categorical(mdp.initial_dist());
    for (std::size_t t = 0; t < max_len; ++t) {
        std::size_t a = rng.categorical(behavior.row(s));
        std::size_t s2 = rng.categorical(mdp.transition(s, a));
        tr.steps.push_back({s, a, mdp.reward(s, a)});
        s = s2;
        if (terminal[s]) {
            tr.end = EndKind::terminal;
            tr.final_state = s;
            return tr;
        }
    }
    tr.end = EndKind::timeout;
    tr.final_state = s;
    return tr;
}

inline std::vector<bool> terminal_mask(const TabularMdp& mdp, std::span<const std::size_t> terminal_states) {
    std::vector<bool> mask(mdp.n_states(), false);
    for (auto s : terminal_states) {
        require(s < mdp.n_states(), "terminal_states: index out of range");
        mask[s] = true;
    }
    return mask;
}

} // namespace detail

/**
 * Samples n_traj behavior-policy trajectories. Trajectory i draws from its
 * own stream Rng(seed + i), so the output is a pure function of the inputs.
 */
inline Dataset rollout(const TabularMdp& mdp, const Policy& behavior, std::size_t max_len, std::size_t n_traj,
                       std::span<const std::size_t> terminal_states, std::uint64_t seed) {
    check_policy_shape(mdp, behavior);
    detail::require(max_len >= 1, "max_len: must be at least 1");
    detail::require(n_traj >= 1, "n_traj: must be at least 1");
    const auto terminal = detail::terminal_mask(mdp, terminal_states);
    Dataset out;
    out.gamma = mdp.gamma();
    out.rng_seed = seed;
    out.trajectories.reserve(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
        Rng rng(seed + i);
        out.trajectories.push_back(detail::sample_trajectory(mdp, behavior, max_len, terminal, rng));
    }
    return out;
}

/**
 * Samples trajectories until exactly n_transitions steps are collected; the
 * last trajectory is cut short (as a timeout) when it would overshoot.
 */
inline Dataset rollout_transitions(const TabularMdp& mdp, const Policy& behavior, std::size_t max_len,
                                   std::size_t n_transitions, std::span<const std::size_t> terminal_states,
                                   std::uint64_t seed) {
    check_policy_shape(mdp, behavior);
    detail::require(max_len >= 1, "max_len: must be at least 1");
    detail::require(n_transitions >= 1, "n_transitions: must be at least 1");
    const auto terminal = detail::terminal_mask(mdp, terminal_states);
    Dataset out;
    out.gamma = mdp.gamma();
    out.rng_seed = seed;
    std::size_t total = 0;
    for (std::uint64_t i = 0; total < n_transitions; ++i) {
        Rng rng(seed + i);
        auto tr = detail::sample_trajectory(mdp, behavior, max_len, terminal, rng);
        if (total + tr.length() > n_transitions) {
            std::size_t keep = n_transitions - total;
            std::size_t cut_state = tr.next_state(keep - 1);
            tr.steps.resize(keep);
            tr.end = EndKind::timeout;
            tr.final_state = cut_state;
        }
        total += tr.length();
        out.trajectories.push_back(std::move(tr));
    }
    return out;
}

/// Appends the trajectories of b to a; gammas must match.
inline Dataset concatenate(const Dataset& a, const Dataset& b) {
    detail::require(a.gamma == b.gamma, "dataset: cannot concatenate datasets with different gamma");
    Dataset out = a;
    out.trajectories.insert(out.trajectories.end(), b.trajectories.begin(), b.trajectories.end());
    return out;
}

struct DataStats {
    QTable counts;  // integral values stored as double for arithmetic convenience
    SupportSet support;
    QTable empirical_mu;
    std::size_t n_transitions = 0;

    std::size_t count(std::size_t s, std::size_t a) const { return static_cast<std::size_t>(counts(s, a)); }
};

inline DataStats stats(std::span<const Transition> tuples, std::size_t n_states, std::size_t n_actions) {
    detail::require(!tuples.empty(), "dataset: no transitions");
    DataStats out{QTable(n_states, n_actions), SupportSet(n_states, n_actions), QTable(n_states, n_actions),
                  tuples.size()};
    for (const auto& t : tuples) {
        detail::require(t.state < n_states && t.action < n_actions && t.next_state < n_states,
                        "dataset: state or action index out of range");
        out.counts(t.state, t.action) += 1.0;
    }
    const double n = static_cast<double>(tuples.size());
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) {
            out.support.set(s, a, out.counts(s, a) > 0.0);
            out.empirical_mu(s, a) = out.counts(s, a) / n;
        }
    return out;
}

inline DataStats stats(const Dataset& data, std::size_t n_states, std::size_t n_actions) {
    auto tuples = flatten(data);
    return stats(tuples, n_states, n_actions);
}

/// Value estimates defined only on some states. Lookups of absent states
/// return std::nullopt rather than a default value.
class PartialValueTable {
public:
    PartialValueTable() = default;
    explicit PartialValueTable(std::size_t n_states) : values_(n_states) {}

    static PartialValueTable from(const ValueTable& v) {
        PartialValueTable out(v.size());
        for (std::size_t s = 0; s < v.size(); ++s) out.set(s, v[s]);
        return out;
    }

    std::size_t n_states() const noexcept { return values_.size(); }
    std::optional<double> get(std::size_t s) const { return s < values_.size() ? values_[s] : std::nullopt; }
    bool has(std::size_t s) const { return get(s).has_value(); }
    void set(std::size_t s, double v) { values_.at(s) = v; }

    /// Dense table with absent entries replaced by fill.
    ValueTable dense(double fill = 0.0) const {
        ValueTable out(values_.size(), fill);
        for (std::size_t s = 0; s < values_.size(); ++s)
            if (values_[s]) out[s] = *values_[s];
        return out;
    }

    friend bool operator==(const PartialValueTable&, const PartialValueTable&) = default;

private:
    std::vector<std::optional<double>> values_;
};

struct ReturnsToGo {
    std::vector<double> values;
    bool missing_bootstrap = false;
};

/**
 * Discounted return-to-go h_t = r_t + gamma h_{t+1} by one backward pass.
 * Terminal trajectories start from 0; timeouts start from the bootstrap
 * value of final_state (0 and flagged when absent).
 */
inline ReturnsToGo returns_to_go(const Trajectory& tr, double gamma, const PartialValueTable& timeout_values) {
    ReturnsToGo out;
    out.values.resize(tr.length());
    double tail = 0.0;
    if (tr.end == EndKind::timeout) {
        if (auto v = timeout_values.get(tr.final_state))
            tail = *v;
        else
            out.missing_bootstrap = true;
    }
    for (std::size_t t = tr.length(); t-- > 0;) {
        tail = tr.steps[t].reward + gamma * tail;
        out.values[t] = tail;
    }
    return out;
}

struct MonteCarloEstimate {
    PartialValueTable values;
    std::vector<std::size_t> visits;  // trajectories contributing to each state
    std::size_t missing_bootstrap = 0;
};

/// First-visit Monte-Carlo state values; unvisited states stay absent.
inline MonteCarloEstimate mc_state_values(const Dataset& data, std::size_t n_states, double gamma,
                                          const PartialValueTable& timeout_values = {}) {
    detail::require(gamma >= 0.0 && gamma < 1.0, "gamma: must lie in [0, 1)");
    std::vector<double> sums(n_states, 0.0);
    std::vector<std::size_t> visits(n_states, 0);
    std::vector<bool> seen(n_states);
    std::size_t missing = 0;
    for (const auto& tr : data.trajectories) {
        auto h = returns_to_go(tr, gamma, timeout_values);
        if (h.missing_bootstrap) ++missing;
        std::fill(seen.begin(), seen.end(), false);
        for (std::size_t t = 0; t < tr.length(); ++t) {
            std::size_t s = tr.steps[t].state;
            detail::require(s < n_states, "dataset: state index out of range");
            if (seen[s]) continue;
            seen[s] = true;
            sums[s] += h.values[t];
            ++visits[s];
        }
    }
    MonteCarloEstimate out{PartialValueTable(n_states), std::move(visits), missing};
    for (std::size_t s = 0; s < n_states; ++s)
        if (out.visits[s] > 0) out.values.set(s, sums[s] / static_cast<double>(out.visits[s]));
    return out;
}

/**
 * Monte-Carlo values for data with timeouts: starts without bootstrap values
 * and re-estimates `rounds` times, each round bootstrapping timeout tails
 * from the previous round's estimate.
 */
inline MonteCarloEstimate mc_state_values_bootstrapped(const Dataset& data, std::size_t n_states, double gamma,
                                                       std::size_t rounds = 20) {
    auto est = mc_state_values(data, n_states, gamma);
    for (std::size_t i = 0; i < rounds; ++i) est = mc_state_values(data, n_states, gamma, est.values);
    return est;
}

} // namespace hubl
