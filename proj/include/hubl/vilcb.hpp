#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hubl/dataset.hpp"
#include "hubl/random.hpp"
#include "hubl/relabel.hpp"

namespace hubl {

struct VilcbConfig {
    double gamma = 0.9;
    double v_max = 10.0;
    double lambda_const = 0.0;  // alpha
    std::uint64_t seed = 0;
    std::optional<std::size_t> t_override;
    bool record_trace = false;

    void validate() const {
        detail::require(gamma >= 0.0 && gamma < 1.0, "gamma: must lie in [0, 1)");
        detail::require(v_max > 0.0 && std::isfinite(v_max), "v_max: must be positive");
        detail::require(lambda_const >= 0.0 && lambda_const <= 1.0, "alpha: must lie in [0, 1]");
        detail::require(!t_override || *t_override >= 1, "t_override: must be at least 1");
    }
};

/// Number of iterations: max(1, ceil(ln N / (1 - gamma))).
inline std::size_t horizon_T(std::size_t n_tuples, double gamma) {
    detail::require(n_tuples >= 1, "n_tuples: must be at least 1");
    double t = std::ceil(std::log(static_cast<double>(n_tuples)) / (1.0 - gamma));
    return t < 1.0 ? 1 : static_cast<std::size_t>(t);
}

/// Confidence constant L = 2000 ln(2 (T+1) |S| |A| N).
inline double confidence_L(std::size_t T, std::size_t n_states, std::size_t n_actions, std::size_t n_tuples) {
    return 2000.0 * std::log(2.0 * static_cast<double>(T + 1) * static_cast<double>(n_states) *
                             static_cast<double>(n_actions) * static_cast<double>(n_tuples));
}

/// Count-based penalty b = V_max sqrt(L / max(m, 1)).
inline double penalty(std::size_t m, double big_l, double v_max) {
    return v_max * std::sqrt(big_l / static_cast<double>(m > 0 ? m : 1));
}

/// Index partition D_0, ..., D_T of a tuple sequence plus per-split counts.
struct SplitDataset {
    std::vector<std::vector<std::size_t>> splits;
    std::vector<QTable> counts;
};

/**
 * Shuffles tuple indices with the seed, puts the first ceil(N/2) into D_0
 * and deals the rest round-robin over D_1..D_T.
 */
template <typename Tuple>
SplitDataset split_dataset(std::span<const Tuple> tuples, std::size_t T, std::uint64_t seed,
                           std::size_t n_states, std::size_t n_actions) {
    detail::require(T >= 1, "T: must be at least 1");
    std::vector<std::size_t> order(tuples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = Rng::derive(seed, 0);
    rng.shuffle(order);

    SplitDataset out;
    out.splits.resize(T + 1);
    const std::size_t head = (tuples.size() + 1) / 2;
    for (std::size_t i = 0; i < order.size(); ++i) {
        std::size_t k = i < head ? 0 : 1 + (i - head) % T;
        out.splits[k].push_back(order[i]);
    }
    out.counts.assign(T + 1, QTable(n_states, n_actions));
    for (std::size_t k = 0; k <= T; ++k)
        for (auto i : out.splits[k]) {
            const auto& tp = tuples[i];
            detail::require(tp.state < n_states && tp.action < n_actions && tp.next_state < n_states,
                            "tuples: state or action index out of range");
            out.counts[k](tp.state, tp.action) += 1.0;
        }
    return out;
}

struct VilcbResult {
    Policy policy;
    ValueTable values;  // V_T
    QTable q;           // Q_T
    std::size_t T = 0;
    double L = 0.0;
    double v_max = 0.0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    bool monotone = true;
    std::vector<ValueTable> trace;  // V_0..V_T when record_trace is set
};

namespace detail {

inline double tuple_reward(const Transition& t) { return t.reward; }
inline double tuple_reward(const RelabeledTuple& t) { return t.r_tilde; }
inline bool tuple_done(const Transition& t) { return t.done; }
inline bool tuple_done(const RelabeledTuple& t) { return t.done; }

/// Shared loop of the solver; `backup` fills Q_t for one iteration.
template <typename Tuple, typename Backup>
VilcbResult vilcb_loop(std::span<const Tuple> tuples, std::size_t ns, std::size_t na, const VilcbConfig& cfg,
                       Backup&& backup) {
    cfg.validate();
    require(!tuples.empty(), "tuples: must be nonempty");
    const std::size_t N = tuples.size();
    const std::size_t T = cfg.t_override ? *cfg.t_override : horizon_T(N, cfg.gamma);
    const double L = confidence_L(T, ns, na, N);
    auto split = split_dataset(tuples, T, cfg.seed, ns, na);

    VilcbResult res;
    res.T = T;
    res.L = L;
    res.v_max = cfg.v_max;
    res.alpha = cfg.lambda_const;
    res.seed = cfg.seed;

    std::vector<std::size_t> pi(ns);
    for (std::size_t s = 0; s < ns; ++s) pi[s] = argmax(split.counts[0].row(s));
    std::vector<double> v(ns, 0.0);
    QTable q(ns, na);
    if (cfg.record_trace) res.trace.emplace_back(v);

    Rng row_rng = Rng::derive(cfg.seed, 1);
    std::vector<double> model(ns * na * ns);
    std::vector<double> reward(ns * na);
    for (std::size_t t = 1; t <= T; ++t) {
        const QTable& m = split.counts[t];
        for (std::size_t sa = 0; sa < ns * na; ++sa) {
            auto row = row_rng.dirichlet1(ns);
            std::copy(row.begin(), row.end(), model.begin() + static_cast<std::ptrdiff_t>(sa * ns));
        }
        std::fill(reward.begin(), reward.end(), 0.0);
        // Empirical rows overwrite the random ones where m_t >= 1.
        for (std::size_t sa = 0; sa < ns * na; ++sa)
            if (m.values[sa] > 0.0)
                std::fill(model.begin() + static_cast<std::ptrdiff_t>(sa * ns),
                          model.begin() + static_cast<std::ptrdiff_t>((sa + 1) * ns), 0.0);
        for (auto i : split.splits[t]) {
            const auto& tp = tuples[i];
            std::size_t sa = tp.state * na + tp.action;
            if (!tuple_done(tp)) model[sa * ns + tp.next_state] += 1.0;
            reward[sa] += tuple_reward(tp);
        }
        for (std::size_t sa = 0; sa < ns * na; ++sa)
            if (m.values[sa] > 0.0) {
                for (std::size_t s2 = 0; s2 < ns; ++s2) model[sa * ns + s2] /= m.values[sa];
                reward[sa] /= m.values[sa];
            }

        backup(t, split.splits[t], m, std::span<const double>(model), std::span<const double>(reward),
               std::span<const double>(v), L, q);

        for (std::size_t s = 0; s < ns; ++s) {
            const double prev = v[s];
            std::size_t a_mid = argmax(q.row(s));
            double v_mid = q(s, a_mid);
            if (v_mid > prev) {
                v[s] = v_mid;
                pi[s] = a_mid;
            }
            if (v[s] < prev) res.monotone = false;
        }
        if (cfg.record_trace) res.trace.emplace_back(v);
    }
    res.policy = Policy::deterministic(std::move(pi), na);
    res.values = ValueTable(std::move(v));
    res.q = std::move(q);
    return res;
}

inline std::vector<double> lambda_matrix(const SupportSet& support, double alpha) {
    const std::size_t ns = support.n_states();
    auto in = support.state_projection();
    std::vector<double> lam(ns * ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t s2 = 0; s2 < ns; ++s2)
            if (in[s] && in[s2]) lam[s * ns + s2] = alpha;
    return lam;
}

} // namespace detail

/**
 * Offline value iteration with lower confidence bounds and heuristic
 * blending. Each iteration uses its own split D_t:
 *
 *   Q_t(s,a) = r_t(s,a) - b_t(s,a)
 *            + gamma sum_s' P_t(s'|s,a) (1 - Lambda[s][s']) V_{t-1}(s')
 *            + gamma sum_s' P_t(s'|s,a) Lambda[s][s'] h(s')
 *
 * with Lambda[s][s'] = alpha on supported state pairs. Terminal tuples add
 * no next-state mass, so P_t rows may sum to less than one. Pairs absent from
 * D_t get a Dirichlet(1) transition row and zero reward. V and the policy
 * only change where the new maximum strictly improves on V_{t-1}.
 */
inline VilcbResult vi_lcb_hubl(std::span<const Transition> tuples, std::size_t ns, std::size_t na,
                               const VilcbConfig& cfg, const PartialValueTable& h, const SupportSet& support) {
    detail::require(support.n_states() == ns && support.n_actions() == na, "support: shape mismatch");
    detail::require(h.n_states() == ns, "h: expected n_states entries");
    const auto in = support.state_projection();
    for (std::size_t s = 0; s < ns; ++s)
        detail::require(!in[s] || h.has(s), "h: missing value on supported state " + std::to_string(s));
    const ValueTable hd = h.dense(0.0);
    const auto lam = detail::lambda_matrix(support, cfg.lambda_const);
    const double gamma = cfg.gamma;

    return detail::vilcb_loop(tuples, ns, na, cfg,
                              [&](std::size_t, const std::vector<std::size_t>&, const QTable& m,
                                  std::span<const double> model, std::span<const double> reward,
                                  std::span<const double> v, double L, QTable& q) {
                                  for (std::size_t s = 0; s < ns; ++s)
                                      for (std::size_t a = 0; a < na; ++a) {
                                          const std::size_t sa = s * na + a;
                                          const double b = penalty(static_cast<std::size_t>(m(s, a)), L, cfg.v_max);
                                          double boot = 0.0, heur = 0.0;
                                          for (std::size_t s2 = 0; s2 < ns; ++s2) {
                                              const double p = model[sa * ns + s2];
                                              const double l = lam[s * ns + s2];
                                              boot += p * (1.0 - l) * v[s2];
                                              heur += p * l * hd[s2];
                                          }
                                          q(s, a) = reward[sa] - b + gamma * boot + gamma * heur;
                                      }
                              });
}

/// Plain VI-LCB (no blending); the alpha field of cfg is ignored.
inline VilcbResult vi_lcb(std::span<const Transition> tuples, std::size_t ns, std::size_t na,
                          const VilcbConfig& cfg) {
    VilcbConfig plain = cfg;
    plain.lambda_const = 0.0;
    const double gamma = cfg.gamma;
    return detail::vilcb_loop(tuples, ns, na, plain,
                              [&](std::size_t, const std::vector<std::size_t>&, const QTable& m,
                                  std::span<const double> model, std::span<const double> reward,
                                  std::span<const double> v, double L, QTable& q) {
                                  for (std::size_t s = 0; s < ns; ++s)
                                      for (std::size_t a = 0; a < na; ++a) {
                                          const std::size_t sa = s * na + a;
                                          const double b = penalty(static_cast<std::size_t>(m(s, a)), L, cfg.v_max);
                                          double boot = 0.0;
                                          for (std::size_t s2 = 0; s2 < ns; ++s2) boot += model[sa * ns + s2] * v[s2];
                                          q(s, a) = reward[sa] - b + gamma * boot;
                                      }
                              });
}

/**
 * The same solver driven by relabeled tuples: the bootstrap term is the
 * sample mean of gamma~ V(s') over D_t, rewards are r~. Unseen pairs keep
 * the random-row model with the raw discount. cfg.lambda_const is only
 * recorded; blending already lives in the tuples.
 */
inline VilcbResult vi_lcb_relabeled(std::span<const RelabeledTuple> tuples, std::size_t ns, std::size_t na,
                                    const VilcbConfig& cfg) {
    const double gamma = cfg.gamma;
    std::vector<double> boot(ns * na);
    return detail::vilcb_loop(tuples, ns, na, cfg,
                              [&](std::size_t, const std::vector<std::size_t>& split, const QTable& m,
                                  std::span<const double> model, std::span<const double> reward,
                                  std::span<const double> v, double L, QTable& q) {
                                  std::fill(boot.begin(), boot.end(), 0.0);
                                  for (auto i : split) {
                                      const auto& tp = tuples[i];
                                      boot[tp.state * na + tp.action] += tp.gamma_tilde * v[tp.next_state];
                                  }
                                  for (std::size_t s = 0; s < ns; ++s)
                                      for (std::size_t a = 0; a < na; ++a) {
                                          const std::size_t sa = s * na + a;
                                          const double count = m(s, a);
                                          const double b = penalty(static_cast<std::size_t>(count), L, cfg.v_max);
                                          double next = 0.0;
                                          if (count > 0.0) {
                                              next = boot[sa] / count;
                                          } else {
                                              for (std::size_t s2 = 0; s2 < ns; ++s2)
                                                  next += model[sa * ns + s2] * v[s2];
                                              next *= gamma;
                                          }
                                          q(s, a) = reward[sa] - b + next;
                                      }
                              });
}

} // namespace hubl
