#include "pmean/envs.hpp"
#include "pmean/errors.hpp"
#include "pmean/mdp.hpp"
#include "pmean/policy.hpp"
#include "pmean/portfolio.hpp"
#include "pmean/runner.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace pmean;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> rule;
    std::optional<std::size_t> mc_samples;
    std::optional<int> grid_points;
    std::optional<double> grid_low;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "run configuration JSON");
    cmd->add_option("--seed", f.seed, "master seed (overrides config)");
    cmd->add_option("--out", f.out, "output directory (overrides config)");
    cmd->add_option("--rule", f.rule, "aggregation rule: esr or ser")
        ->check(CLI::IsMember({"esr", "ser"}));
    cmd->add_option("--mc-samples", f.mc_samples, "Monte-Carlo samples per estimate");
    cmd->add_option("--grid-points", f.grid_points, "evaluation grid size");
    cmd->add_option("--grid-low", f.grid_low, "evaluation grid left endpoint");
}

RunConfig make_config(const CommonFlags& f, RunConfig::Algo algo) {
    RunConfig cfg;
    if (!f.config_path.empty()) {
        cfg = parse_run_config(f.config_path, algo);
    } else {
        cfg.algo = algo;
    }
    if (f.seed) cfg.seed = *f.seed;
    if (f.out) cfg.out_dir = *f.out;
    if (f.rule) cfg.rule = *f.rule == "esr" ? Rule::Esr : Rule::Ser;
    if (f.mc_samples) cfg.mc_samples = *f.mc_samples;
    if (f.grid_points) cfg.grid_points = *f.grid_points;
    if (f.grid_low) cfg.grid_low = *f.grid_low;
    return cfg;
}

int run_and_report(const RunConfig& cfg) {
    const RunManifest manifest = run(cfg);
    std::printf("wrote %zu files to %s (config %s)\n", manifest.outputs.size() + 1,
                cfg.out_dir.string().c_str(), manifest.config_hash.c_str());
    if (manifest.degraded) {
        std::fprintf(stderr, "warning: degraded-guarantee flag present\n");
        return 4;
    }
    return 0;
}

envs::DisasterConfig env_config_from_name(const std::string& name,
                                          const std::string& env_config_path) {
    if (!env_config_path.empty()) return envs::load_disaster_config(env_config_path);
    if (name == "disaster-reduced") return envs::disaster_reduced_config();
    if (name == "disaster-full") return envs::disaster_full_config();
    throw ValidationError("env: unknown builtin environment '" + name + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"portfolios of MDP policies covering every p-mean welfare objective, p <= 1"};
    app.require_subcommand(1);

    CommonFlags pm_flags, bu_flags, ba_flags, sw_flags, ev_flags;

    auto* pm = app.add_subcommand("portfolio", "build an alpha-approximate portfolio");
    add_common(pm, pm_flags);
    std::optional<double> pm_alpha;
    pm->add_option("--alpha", pm_alpha, "approximation factor in (0, 1)");

    auto* bu = app.add_subcommand("budget", "budget-constrained portfolio (K oracle calls)");
    add_common(bu, bu_flags);
    std::optional<int> bu_k;
    std::optional<double> bu_p0;
    bu->add_option("-K,--budget", bu_k, "oracle-call budget");
    bu->add_option("--p0", bu_p0, "initial p value");

    auto* ba = app.add_subcommand("baseline", "random-p or random-policy baseline portfolios");
    add_common(ba, ba_flags);
    std::optional<std::string> ba_kind;
    std::optional<int> ba_k, ba_trials;
    ba->add_option("--kind", ba_kind, "random-p or random-policy")
        ->check(CLI::IsMember({"random-p", "random-policy"}));
    ba->add_option("-K,--size", ba_k, "portfolio size");
    ba->add_option("--trials", ba_trials, "independent baseline portfolios");

    auto* sw = app.add_subcommand("sweep", "alpha sweep: smallest alpha per portfolio size");
    add_common(sw, sw_flags);
    std::vector<double> sw_alphas;
    sw->add_option("--alphas", sw_alphas, "alpha grid (default 0.05..0.95, 0.99)");

    auto* ev = app.add_subcommand("evaluate", "grid-evaluate an existing portfolio file");
    add_common(ev, ev_flags);
    std::string ev_portfolio;
    ev->add_option("--portfolio", ev_portfolio, "portfolio JSON to evaluate");

    auto* env = app.add_subcommand("env", "environment utilities");
    env->require_subcommand(1);
    auto* envb = env->add_subcommand("build", "build an environment MDP and write it as JSON");
    std::string envb_name = "disaster-reduced", envb_config, envb_out = "mdp.json";
    envb->add_option("--env", envb_name, "builtin name: disaster-reduced or disaster-full");
    envb->add_option("--env-config", envb_config, "disaster config JSON");
    envb->add_option("--out", envb_out, "output MDP path");

    auto* envg = env->add_subcommand("gen-policies", "generate priority policies for a "
                                                     "disaster environment");
    std::string envg_name = "disaster-reduced", envg_config, envg_out = "policies.json";
    std::size_t envg_count = 10000;
    std::uint64_t envg_seed = 1;
    envg->add_option("--env", envg_name, "builtin name");
    envg->add_option("--env-config", envg_config, "disaster config JSON");
    envg->add_option("--count", envg_count, "number of policies (>= 6)");
    envg->add_option("--seed", envg_seed, "generator seed");
    envg->add_option("--out", envg_out, "output policy-set path");

    auto* br = app.add_subcommand("breakdown", "per-group expected-return table for a "
                                               "portfolio");
    std::string br_portfolio, br_policies, br_groups = "income", br_baseline;
    std::string br_env = "disaster-reduced", br_env_config, br_out = "breakdown.csv";
    bool br_svg = false;
    br->add_option("--portfolio", br_portfolio, "portfolio JSON")->required();
    br->add_option("--policies", br_policies, "policy-set JSON")->required();
    br->add_option("--env", br_env, "builtin environment name");
    br->add_option("--env-config", br_env_config, "disaster config JSON");
    br->add_option("--groups", br_groups,
                   "builtin grouping (income/density/proximity/cluster) or a groups JSON path");
    br->add_option("--baseline-policy", br_baseline, "policy id used as score 1.0");
    br->add_option("--out", br_out, "output CSV path");
    br->add_flag("--svg", br_svg, "also emit a bar-chart SVG next to the CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pm->parsed()) {
            RunConfig cfg = make_config(pm_flags, RunConfig::Algo::PMean);
            if (pm_alpha) cfg.alpha = *pm_alpha;
            return run_and_report(cfg);
        }
        if (bu->parsed()) {
            RunConfig cfg = make_config(bu_flags, RunConfig::Algo::Budget);
            if (bu_k) cfg.budget_k = *bu_k;
            if (bu_p0) cfg.budget_p0 = *bu_p0;
            return run_and_report(cfg);
        }
        if (ba->parsed()) {
            RunConfig cfg = make_config(ba_flags, RunConfig::Algo::Baseline);
            if (ba_kind) cfg.baseline_kind = *ba_kind;
            if (ba_k) cfg.budget_k = *ba_k;
            if (ba_trials) cfg.baseline_trials = *ba_trials;
            return run_and_report(cfg);
        }
        if (sw->parsed()) {
            RunConfig cfg = make_config(sw_flags, RunConfig::Algo::Sweep);
            if (!sw_alphas.empty()) cfg.alphas = sw_alphas;
            return run_and_report(cfg);
        }
        if (ev->parsed()) {
            RunConfig cfg = make_config(ev_flags, RunConfig::Algo::Evaluate);
            if (!ev_portfolio.empty()) cfg.portfolio_file = ev_portfolio;
            if (cfg.portfolio_file.empty())
                throw ValidationError("evaluate: --portfolio (or the config block) is required");
            return run_and_report(cfg);
        }
        if (envb->parsed()) {
            const envs::DisasterConfig cfg = env_config_from_name(envb_name, envb_config);
            const FiniteMDP mdp = envs::build_disaster_mdp(cfg);
            mdp.save(envb_out);
            std::printf("wrote %s (%u states, %u actions, %u stakeholders)\n",
                        envb_out.c_str(), mdp.n_states, mdp.n_actions, mdp.n_rewards);
            return 0;
        }
        if (envg->parsed()) {
            const envs::DisasterConfig cfg = env_config_from_name(envg_name, envg_config);
            PolicySet set = envs::generate_disaster_policies(cfg, envg_count, envg_seed);
            set.mdp_ref = envs::build_disaster_mdp(cfg).content_hash();
            save_policy_set(set, envg_out);
            std::printf("wrote %s (%zu policies)\n", envg_out.c_str(), set.size());
            return 0;
        }
        if (br->parsed()) {
            const envs::DisasterConfig ecfg = env_config_from_name(br_env, br_env_config);
            const FiniteMDP mdp = envs::build_disaster_mdp(ecfg);
            const PolicySet policies = load_policy_set(br_policies);
            const Portfolio portfolio = load_portfolio(br_portfolio);
            std::vector<GroupSpec> groups;
            if (br_groups == "income" || br_groups == "density" || br_groups == "proximity" ||
                br_groups == "cluster")
                groups = disaster_groups(ecfg, br_groups);
            else
                groups = load_groups(br_groups);
            std::optional<std::filesystem::path> svg;
            if (br_svg) svg = std::filesystem::path(br_out).replace_extension(".svg");
            write_breakdown(portfolio, mdp, policies, groups, br_baseline, br_out, svg);
            std::printf("wrote %s\n", br_out.c_str());
            return 0;
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const SizeCapError& e) {
        std::fprintf(stderr, "size-cap refusal: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
