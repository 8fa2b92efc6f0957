// Test-side oracles, written independently of the library's evaluation
// paths: a brute-force trajectory enumerator working straight off the
// transition tables, and small fixture builders.
#pragma once

#include "pmean/envs.hpp"
#include "pmean/mdp.hpp"
#include "pmean/policy.hpp"
#include "pmean/rng.hpp"
#include "pmean/welfare.hpp"

#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace testo {

using namespace pmean;

/// All positive-probability (probability, return-vector) outcomes, by direct
/// recursion over action and successor branches of the dense tables.
struct BruteOutcome {
    double prob;
    std::vector<double> g;
};

inline void brute_rec(const FiniteMDP& m, const Policy& pol, int h, std::uint32_t s,
                      double prob, std::vector<double>& g, std::vector<BruteOutcome>& out) {
    for (std::uint32_t a = 0; a < m.n_actions; ++a) {
        const double pa = pol.prob(s, h, a);
        if (pa <= 0.0) continue;
        std::vector<double> g2 = g;
        for (std::uint32_t i = 0; i < m.n_rewards; ++i) g2[i] += m.reward(i, s, a);
        if (h == m.horizon) {
            out.push_back({prob * pa, g2});
        } else {
            for (std::uint32_t s2 = 0; s2 < m.n_states; ++s2) {
                const double pt = m.trans(s, a, s2);
                if (pt > 0.0) brute_rec(m, pol, h + 1, s2, prob * pa * pt, g2, out);
            }
        }
    }
}

inline std::vector<BruteOutcome> brute_outcomes(const FiniteMDP& m, const Policy& pol) {
    std::vector<BruteOutcome> out;
    std::vector<double> g(m.n_rewards, 0.0);
    brute_rec(m, pol, 1, m.initial_state, 1.0, g, out);
    return out;
}

inline std::vector<double> brute_expected_return(const FiniteMDP& m, const Policy& pol) {
    std::vector<double> e(m.n_rewards, 0.0);
    for (const BruteOutcome& o : brute_outcomes(m, pol))
        for (std::uint32_t i = 0; i < m.n_rewards; ++i) e[i] += o.prob * o.g[i];
    return e;
}

inline double brute_esr(const FiniteMDP& m, const Policy& pol, PValue p) {
    double acc = 0.0;
    for (const BruteOutcome& o : brute_outcomes(m, pol)) acc += o.prob * p_mean(o.g, p);
    return acc;
}

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

/// Random deterministic or stochastic policy over the MDP's shape.
inline Policy random_policy(const FiniteMDP& m, std::uint64_t seed, bool stochastic,
                            const std::string& id) {
    Rng rng(derive_seed(seed, fnv1a64(id)));
    const std::size_t cells = static_cast<std::size_t>(m.n_states) * m.horizon;
    if (!stochastic) {
        std::vector<std::uint32_t> table(cells);
        for (auto& a : table) a = static_cast<std::uint32_t>(rng.below(m.n_actions));
        return Policy::deterministic(id, m.n_states, m.n_actions, m.horizon, std::move(table));
    }
    std::vector<double> dist(cells * m.n_actions);
    for (std::size_t c = 0; c < cells; ++c) {
        double sum = 0.0;
        for (std::uint32_t a = 0; a < m.n_actions; ++a) {
            dist[c * m.n_actions + a] = 0.05 + rng.uniform();
            sum += dist[c * m.n_actions + a];
        }
        for (std::uint32_t a = 0; a < m.n_actions; ++a) dist[c * m.n_actions + a] /= sum;
    }
    return Policy::stochastic(id, m.n_states, m.n_actions, m.horizon, std::move(dist));
}

inline PolicySet random_policy_set(const FiniteMDP& m, std::size_t count, std::uint64_t seed) {
    PolicySet set;
    set.generator = "test-random";
    set.seed = seed;
    set.mdp_ref = m.content_hash();
    for (std::size_t i = 0; i < count; ++i) {
        const bool stochastic = i % 3 == 2;
        set.policies.push_back(
            random_policy(m, derive_seed(seed, i), stochastic, "rp-" + std::to_string(i)));
    }
    return set;
}

/// One state, n_actions actions, horizon 1; action a yields rewards[i][a].
/// The smallest rig for hand-computed oracle cases.
inline FiniteMDP bandit_mdp(const std::vector<std::vector<double>>& reward_by_stakeholder,
                            double lower = 0.0, double upper = 0.0) {
    FiniteMDP m;
    m.n_states = 1;
    m.n_rewards = static_cast<std::uint32_t>(reward_by_stakeholder.size());
    m.n_actions = static_cast<std::uint32_t>(reward_by_stakeholder.front().size());
    m.horizon = 1;
    m.initial_state = 0;
    m.reward_lower = lower;
    m.reward_upper = upper;
    m.transition.assign(static_cast<std::size_t>(m.n_actions) * 1 * 1, 1.0);
    for (const auto& row : reward_by_stakeholder)
        m.rewards.insert(m.rewards.end(), row.begin(), row.end());
    m.finalize();
    return m;
}

inline Policy single_action_policy(const FiniteMDP& m, std::uint32_t action,
                                   const std::string& id) {
    std::vector<std::uint32_t> table(static_cast<std::size_t>(m.n_states) * m.horizon, action);
    return Policy::deterministic(id, m.n_states, m.n_actions, m.horizon, std::move(table));
}

/// Constant-reward MDP (kappa = 1), 2 states, 2 actions.
inline FiniteMDP constant_mdp(double c, std::uint32_t n_rewards, int horizon) {
    FiniteMDP m;
    m.n_states = 2;
    m.n_actions = 2;
    m.n_rewards = n_rewards;
    m.horizon = horizon;
    m.initial_state = 0;
    m.reward_lower = c;
    m.reward_upper = c;
    m.transition = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
    m.rewards.assign(static_cast<std::size_t>(n_rewards) * 4, c);
    m.finalize();
    return m;
}

} // namespace testo
