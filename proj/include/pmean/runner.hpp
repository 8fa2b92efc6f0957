#pragma once

#include "pmean/envs.hpp"
#include "pmean/mdp.hpp"
#include "pmean/oracle.hpp"
#include "pmean/policy.hpp"
#include "pmean/portfolio.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pmean {

inline constexpr const char* kToolVersion = "0.1.0";

/// Experiment-driver configuration; parsed from JSON, overridable by CLI
/// flags. Exactly one algorithm block per run.
struct RunConfig {
    enum class EnvKind { DisasterReduced, DisasterFull, Random, MdpFile };
    enum class PolicySource { File, Generator, Exhaustive };
    enum class Algo { PMean, Budget, Baseline, Sweep, Evaluate };

    EnvKind env_kind = EnvKind::DisasterReduced;
    envs::DisasterConfig disaster = envs::disaster_reduced_config();
    envs::RandomMdpSpec random_spec;
    std::filesystem::path mdp_file;

    PolicySource policy_source = PolicySource::Generator;
    std::filesystem::path policy_file;
    std::size_t generator_count = 10000;
    bool exhaustive_stationary = false;
    double exhaustive_max_count = 1e6;

    Rule rule = Rule::Ser;
    EsrMode esr_mode = EsrMode::Auto;
    std::size_t mc_samples = 10000;
    double stderr_margin_k = 0.0;

    Algo algo = Algo::PMean;
    double alpha = 0.9;                     // PMean
    int budget_k = 3;                       // Budget and baselines
    double budget_p0 = -100.0;              // Budget and random-p baseline
    std::string baseline_kind = "random-p"; // or "random-policy"
    int baseline_trials = 10;
    std::vector<double> alphas;             // Sweep; empty -> standard grid
    std::filesystem::path portfolio_file;   // Evaluate

    int grid_points = 1000;
    std::optional<double> grid_low; // default: min(p_floor(N, alpha_min), -100)

    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "out";
};

/// Parses the JSON config format described in the README. algo_hint, when
/// set, must match the config's algorithm block (the CLI subcommand selects
/// it).
RunConfig parse_run_config(const std::filesystem::path& path,
                           std::optional<RunConfig::Algo> algo_hint = std::nullopt);

struct ManifestEntry {
    std::string name;
    std::string hash; // fnv1a-64 of the file bytes, hex
};

struct RunManifest {
    std::string config_hash;
    std::string tool_version;
    double wall_seconds = 0.0;
    bool degraded = false;
    std::vector<ManifestEntry> outputs;
};

/// Executes the configured experiment: builds the environment and policy
/// set, constructs the portfolio(s), evaluates approximation factors over the
/// grid, and writes portfolio JSON, EvalReport CSV, ledger JSON, a
/// Table-1/2-style comparison CSV and manifest.json into out_dir. All result
/// files are byte-stable for a fixed (config, seed), independent of
/// PMEAN_THREADS.
RunManifest run(const RunConfig& config);

struct GroupSpec {
    std::string name;
    std::vector<std::uint32_t> members;
};

/// Builtin stakeholder groupings of a disaster instance: "income",
/// "density", "proximity", or "cluster" (singletons). Throws for other names.
std::vector<GroupSpec> disaster_groups(const envs::DisasterConfig& config,
                                       const std::string& which);

/// Parses {"groups": {"name": [indices...]}}.
std::vector<GroupSpec> load_groups(const std::filesystem::path& path);

/// Per-(policy, group) mean expected stakeholder return for each portfolio
/// entry, optionally normalized by a named baseline policy. Groups must
/// partition [N]. Writes CSV and, when svg_path is set, a static bar chart.
void write_breakdown(const Portfolio& portfolio, const FiniteMDP& mdp,
                     const PolicySet& policies, const std::vector<GroupSpec>& groups,
                     const std::string& baseline_policy,
                     const std::filesystem::path& csv_path,
                     const std::optional<std::filesystem::path>& svg_path = std::nullopt);

/// fnv1a-64 of a file's bytes, hex-encoded; the manifest hash.
std::string file_hash_hex(const std::filesystem::path& path);

} // namespace pmean
