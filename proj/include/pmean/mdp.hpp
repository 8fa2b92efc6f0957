#pragma once

#include "pmean/policy.hpp"
#include "pmean/welfare.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pmean {

/// Finite-horizon MDP with N stakeholder reward functions and declared
/// reward bounds [L, U], L > 0. Immutable after finalize(); safe to share
/// across threads.
struct FiniteMDP {
    std::uint32_t n_states = 0;
    std::uint32_t n_actions = 0;
    std::uint32_t n_rewards = 0;
    int horizon = 0;
    std::uint32_t initial_state = 0;
    double reward_lower = 0.0;
    double reward_upper = 0.0;

    /// Dense transition kernel, [s][a][s'] flattened.
    std::vector<double> transition;
    /// Reward tables, [i][s][a] flattened.
    std::vector<double> rewards;

    std::vector<std::string> state_names;  // generated "s<i>" when absent
    std::vector<std::string> action_names; // generated "a<i>" when absent

    /// Sparse positive-probability successors, built by finalize().
    std::vector<std::size_t> succ_offsets;
    std::vector<std::pair<std::uint32_t, double>> succ_list;

    double trans(std::uint32_t s, std::uint32_t a, std::uint32_t s2) const {
        return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2];
    }
    double reward(std::uint32_t i, std::uint32_t s, std::uint32_t a) const {
        return rewards[(static_cast<std::size_t>(i) * n_states + s) * n_actions + a];
    }

    /// Positive-probability successors of (s, a); available after finalize().
    std::span<const std::pair<std::uint32_t, double>> successors(std::uint32_t s,
                                                                 std::uint32_t a) const;

    /// Validates shapes, transition rows (sum 1 within 1e-9, no negative
    /// mass) and reward bounds. Rewards above U are an error; rewards below L
    /// are clamped up to L and reported as warnings. When both bounds are 0
    /// (unspecified), U is set to the observed maximum and L to 1e-3 * U.
    /// Also builds the sparse successor lists. Returns the warnings.
    std::vector<std::string> finalize();

    std::uint64_t content_hash() const;

    void save(const std::filesystem::path& path) const;
    static FiniteMDP load(const std::filesystem::path& path,
                          std::vector<std::string>* warnings = nullptr);
};

/// kappa = U / L from the declared bounds.
double condition_number(const FiniteMDP& mdp);

/// One sampled episode: (s_h, a_h) for h = 1..H plus the seed that produced
/// it.
struct Trajectory {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> steps;
    std::uint64_t seed = 0;
};

/// Per-stakeholder total reward, entries in [H*L, H*U].
using ReturnVector = std::vector<double>;

/// Samples a trajectory; deterministic given (mdp, policy, seed). Actions are
/// drawn before successor states, from independent sub-streams. Throws
/// EvaluationError naming the pair if the policy is undefined at a reached
/// (state, step).
Trajectory simulate(const FiniteMDP& mdp, const Policy& policy, std::uint64_t seed);

/// G_i(tau) = sum_h R_i(s_h, a_h).
ReturnVector return_vector(const FiniteMDP& mdp, const Trajectory& trajectory);

/// Exact E_{tau~pi}[G(tau)] by forward propagation of the state-occupancy
/// distribution over steps 1..H.
ReturnVector expected_return_vector(const FiniteMDP& mdp, const Policy& policy);

/// Scalarized expected returns: f(E[G], p). Exact, never sampled.
double ser_value(const FiniteMDP& mdp, const Policy& policy, PValue p);

/// The full outcome distribution of a policy: path probabilities and return
/// vectors (flattened n_paths x N). Test oracle and exact-ESR workhorse.
struct TrajectoryDistribution {
    std::vector<double> probs;
    std::vector<double> returns; // [k * n_rewards + i]
    std::size_t n_paths = 0;
    std::uint32_t n_rewards = 0;

    std::span<const double> return_of(std::size_t k) const {
        return {returns.data() + k * n_rewards, n_rewards};
    }
};

/// Number of positive-probability trajectories under the policy, as a double
/// (the count can overflow 64-bit integers long before it matters).
double count_trajectories(const FiniteMDP& mdp, const Policy& policy);

/// Enumerates every positive-probability trajectory. Throws SizeCapError
/// with the count estimate when the path count exceeds path_cap.
TrajectoryDistribution enumerate_trajectories(const FiniteMDP& mdp, const Policy& policy,
                                              double path_cap = 1e6);

/// Exact expected scalarized returns: sum over trajectories of
/// Pr(tau) * f(G(tau), p). Subject to the same path cap.
double esr_value_exact(const FiniteMDP& mdp, const Policy& policy, PValue p,
                       double path_cap = 1e6);

struct McEstimate {
    double estimate = 0.0;
    double stderr_est = 0.0;
    std::size_t n_samples = 0;
};

/// Monte-Carlo expected scalarized returns. Per-sample seeds derive from
/// (master_seed, policy id, canonical p, sample index), so estimates are
/// reproducible and unaffected by other policies or p values being added.
McEstimate esr_value_mc(const FiniteMDP& mdp, const Policy& policy, PValue p,
                        std::size_t n_samples, std::uint64_t master_seed);

} // namespace pmean
