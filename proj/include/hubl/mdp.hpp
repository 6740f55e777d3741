#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hubl {

/// Raised for malformed inputs (probabilities that do not sum to one,
/// out-of-range indices, bad discount factors, ...). The message names
/// the offending field.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kProbabilityTolerance = 1e-12;
inline constexpr double kDefaultTolerance = 1e-10;

namespace detail {

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

inline void check_distribution(std::span<const double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        require(std::isfinite(p) && p >= 0.0, what + ": negative or non-finite probability");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= kProbabilityTolerance,
            what + ": probabilities sum to " + std::to_string(sum) + ", expected 1");
}

} // namespace detail

/**
 * Finite discounted MDP with rewards in [0,1].
 *
 * Storage is dense and row-major: transition(s, a) is a contiguous span over
 * next states. Construction validates every invariant, so a TabularMdp value
 * is always well formed.
 */
class TabularMdp {
public:
    TabularMdp(std::size_t n_states, std::size_t n_actions, double gamma,
               std::vector<double> transition_data, std::vector<double> reward_data,
               std::vector<double> initial)
        : n_states_(n_states), n_actions_(n_actions), gamma_(gamma),
          transition_(std::move(transition_data)), reward_(std::move(reward_data)),
          initial_dist_(std::move(initial)) {
        using detail::require;
        require(n_states_ > 0, "n_states: must be positive");
        require(n_actions_ > 0, "n_actions: must be positive");
        require(std::isfinite(gamma_) && gamma_ >= 0.0 && gamma_ < 1.0,
                "gamma: must lie in [0, 1), got " + std::to_string(gamma_));
        require(transition_.size() == n_states_ * n_actions_ * n_states_,
                "transition: expected shape [n_states][n_actions][n_states]");
        require(reward_.size() == n_states_ * n_actions_,
                "reward: expected shape [n_states][n_actions]");
        require(initial_dist_.size() == n_states_, "initial_dist: expected n_states entries");
        for (std::size_t s = 0; s < n_states_; ++s)
            for (std::size_t a = 0; a < n_actions_; ++a) {
                detail::check_distribution(
                    transition(s, a), "transition[" + std::to_string(s) + "][" + std::to_string(a) + "]");
                double r = reward(s, a);
                require(std::isfinite(r) && r >= 0.0 && r <= 1.0,
                        "reward[" + std::to_string(s) + "][" + std::to_string(a) + "]: must lie in [0, 1]");
            }
        detail::check_distribution(initial_dist_, "initial_dist");
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    double gamma() const noexcept { return gamma_; }

    /// Next-state distribution P(.|s,a).
    std::span<const double> transition(std::size_t s, std::size_t a) const {
        return {transition_.data() + (s * n_actions_ + a) * n_states_, n_states_};
    }
    double transition(std::size_t s, std::size_t a, std::size_t next) const {
        return transition_[(s * n_actions_ + a) * n_states_ + next];
    }
    double reward(std::size_t s, std::size_t a) const { return reward_[s * n_actions_ + a]; }
    std::span<const double> initial_dist() const noexcept { return initial_dist_; }

    const std::vector<double>& transition_data() const noexcept { return transition_; }
    const std::vector<double>& reward_data() const noexcept { return reward_; }

    /// Generic value bound for rewards in [0,1].
    double v_max() const noexcept { return 1.0 / (1.0 - gamma_); }

    friend bool operator==(const TabularMdp&, const TabularMdp&) = default;

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    double gamma_;
    std::vector<double> transition_;
    std::vector<double> reward_;
    std::vector<double> initial_dist_;
};

/// Per-state action distribution. Deterministic policies keep their action
/// indices so callers can recover them without thresholding probabilities.
class Policy {
public:
    Policy() = default;

    static Policy deterministic(std::vector<std::size_t> actions, std::size_t n_actions) {
        detail::require(n_actions > 0, "policy: n_actions must be positive");
        Policy p;
        p.n_states_ = actions.size();
        p.n_actions_ = n_actions;
        p.probs_.assign(p.n_states_ * n_actions, 0.0);
        for (std::size_t s = 0; s < actions.size(); ++s) {
            detail::require(actions[s] < n_actions,
                            "policy: action index out of range at state " + std::to_string(s));
            p.probs_[s * n_actions + actions[s]] = 1.0;
        }
        p.actions_ = std::move(actions);
        return p;
    }

    static Policy stochastic(std::vector<double> probs, std::size_t n_states, std::size_t n_actions) {
        detail::require(n_actions > 0 && probs.size() == n_states * n_actions,
                        "policy: expected shape [n_states][n_actions]");
        Policy p;
        p.n_states_ = n_states;
        p.n_actions_ = n_actions;
        p.probs_ = std::move(probs);
        for (std::size_t s = 0; s < n_states; ++s)
            detail::check_distribution(p.row(s), "policy[" + std::to_string(s) + "]");
        return p;
    }

    static Policy uniform(std::size_t n_states, std::size_t n_actions) {
        return stochastic(std::vector<double>(n_states * n_actions, 1.0 / static_cast<double>(n_actions)),
                          n_states, n_actions);
    }

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return n_actions_; }
    bool is_deterministic() const noexcept { return !actions_.empty(); }

    std::span<const double> row(std::size_t s) const { return {probs_.data() + s * n_actions_, n_actions_}; }
    double prob(std::size_t s, std::size_t a) const { return probs_[s * n_actions_ + a]; }

    /// Action indices; only meaningful for deterministic policies.
    const std::vector<std::size_t>& actions() const {
        if (actions_.empty()) throw std::logic_error("policy: not deterministic");
        return actions_;
    }

    friend bool operator==(const Policy&, const Policy&) = default;

private:
    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    std::vector<double> probs_;
    std::vector<std::size_t> actions_;
};

struct ValueTable {
    std::vector<double> values;

    ValueTable() = default;
    explicit ValueTable(std::vector<double> v) : values(std::move(v)) {}
    explicit ValueTable(std::size_t n, double fill = 0.0) : values(n, fill) {}

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t s) const { return values[s]; }
    double& operator[](std::size_t s) { return values[s]; }

    /// Expectation under a state distribution.
    double dot(std::span<const double> dist) const {
        double acc = 0.0;
        for (std::size_t s = 0; s < values.size(); ++s) acc += dist[s] * values[s];
        return acc;
    }

    friend bool operator==(const ValueTable&, const ValueTable&) = default;
};

struct QTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> values;

    QTable() = default;
    QTable(std::size_t ns, std::size_t na, double fill = 0.0)
        : n_states(ns), n_actions(na), values(ns * na, fill) {}

    double operator()(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }
    double& operator()(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
    std::span<const double> row(std::size_t s) const { return {values.data() + s * n_actions, n_actions}; }

    friend bool operator==(const QTable&, const QTable&) = default;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> xs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] > xs[best]) best = i;
    return best;
}

inline double sup_distance(std::span<const double> x, std::span<const double> y) {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d = std::max(d, std::abs(x[i] - y[i]));
    return d;
}

inline void check_policy_shape(const TabularMdp& mdp, const Policy& pi) {
    detail::require(pi.n_states() == mdp.n_states() && pi.n_actions() == mdp.n_actions(),
                    "policy: shape does not match the MDP");
}

} // namespace hubl
