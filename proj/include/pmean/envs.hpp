#pragma once

#include "pmean/mdp.hpp"
#include "pmean/oracle.hpp"
#include "pmean/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace pmean::envs {

enum class Density { High, Low };
enum class Proximity { Near, Far };
enum class Income { Low, Middle, High };

/// One post-disaster neighborhood cluster.
struct ClusterSpec {
    int id = 0;
    Density density = Density::High;
    Proximity proximity = Proximity::Near;
    Income income = Income::Middle;
    std::int64_t population = 1;
    std::int64_t initial_need = 0; // resource units
};

/// How per-step stakeholder rewards account for need coverage.
enum class NeedAccounting {
    PerStepMet,       // fraction of the initial need met by this step's allocation
    RemainingDeficit, // fraction of the (clipped) initial need currently covered
};

struct DisasterConfig {
    std::vector<ClusterSpec> clusters;
    int increment = 50; // b: allocation granularity
    int budget = 150;   // B: per-step allocation budget
    int horizon = 4;
    double success_prob = 0.7;
    double balloon_prob = 0.3;
    int need_cap = 150; // per-cluster tracked-need ceiling
    NeedAccounting accounting = NeedAccounting::PerStepMet;

    // construction caps for the tabular build
    std::size_t max_states = 100000;
    std::size_t max_table_doubles = 20000000;

    void validate() const;
};

/// The 12-cluster dataset (population, need, density, proximity, income).
/// Also shipped as data/natural_disaster_clusters.json.
std::vector<ClusterSpec> table3_clusters();

/// Full 12-cluster configuration; tabular construction refuses it, use the
/// Monte-Carlo oracle below.
DisasterConfig disaster_full_config();

/// Desk-scale default: clusters {1, 3, 7, 11} of the dataset, b = 50,
/// B = 150, cap 150, H = 4. Small enough for exact SER work.
DisasterConfig disaster_reduced_config();

std::vector<ClusterSpec> load_clusters(const std::filesystem::path& path);
DisasterConfig load_disaster_config(const std::filesystem::path& path);
void save_disaster_config(const DisasterConfig& config, const std::filesystem::path& path);

/// Tabular disaster MDP: product state space over per-cluster needs in steps
/// of b clipped to [0, need_cap]; actions are all allocations in multiples of
/// b with total <= B; per-cluster independent transitions (full allocation
/// clears the need, partial reduces it w.p. success_prob and balloons by b
/// w.p. balloon_prob); one reward function per cluster. Refuses with counts
/// when the state/action space exceeds the configured caps.
FiniteMDP build_disaster_mdp(const DisasterConfig& config);

/// Allocation rules a decision-maker might follow: one of six pure
/// priorities, a convex weighting of the six priority scores, or a
/// lexicographic pass over a random priority order. Rules never allocate to
/// a cluster without remaining need.
struct PriorityRule {
    enum class Kind { Pure, Weighted, Lexicographic };
    Kind kind = Kind::Pure;
    std::string id;
    int pure_priority = 0;          // Pure: index into the six priorities
    std::vector<double> weights;    // Weighted: six nonnegative weights, sum 1
    std::vector<int> order;         // Lexicographic: permutation of 0..5
};

std::vector<PriorityRule> generate_disaster_rules(const DisasterConfig& config,
                                                  std::size_t count, std::uint64_t seed);

/// Greedy b-sized-chunk allocation for a rule given current cluster needs
/// (in resource units). Returns per-cluster allocations in units of b.
std::vector<int> rule_allocation(const PriorityRule& rule, const DisasterConfig& config,
                                 const std::vector<int>& needs);

/// Tabularizes count rules (the 6 pure priorities first) against the
/// config's state space. Deterministic given seed.
PolicySet generate_disaster_policies(const DisasterConfig& config, std::size_t count,
                                     std::uint64_t seed);

/// Monte-Carlo oracle over the generative disaster model; the route for
/// instances too large to tabulate (ESR rule only).
Oracle make_disaster_mc_oracle(const DisasterConfig& config,
                               std::vector<PriorityRule> rules, OracleOptions options);

struct RandomMdpSpec {
    std::uint32_t n_states = 2;
    std::uint32_t n_actions = 2;
    std::uint32_t n_rewards = 2;
    int horizon = 2;
    double kappa = 2.0;
    std::uint64_t seed = 0;
};

/// Dense random MDP with rewards uniform on [1, kappa]; the property-test
/// fixture. Deterministic given seed.
FiniteMDP random_mdp(const RandomMdpSpec& spec);

} // namespace pmean::envs
