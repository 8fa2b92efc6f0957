#include "pmean/runner.hpp"

#include "pmean/errors.hpp"
#include "pmean/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace pmean {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string hex64(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

envs::DisasterConfig disaster_base(const std::string& base) {
    if (base == "reduced") return envs::disaster_reduced_config();
    if (base == "full") return envs::disaster_full_config();
    throw ValidationError("config /environment/disaster/base: expected 'reduced' or 'full'");
}

void apply_disaster_overrides(envs::DisasterConfig& cfg, const ordered_json& j) {
    if (j.contains("clusters_file"))
        cfg.clusters = envs::load_clusters(j["clusters_file"].get<std::string>());
    if (j.contains("subset")) {
        std::vector<envs::ClusterSpec> chosen;
        for (int id : j["subset"].get<std::vector<int>>()) {
            bool found = false;
            for (const envs::ClusterSpec& c : envs::table3_clusters()) {
                if (c.id == id) {
                    chosen.push_back(c);
                    found = true;
                }
            }
            if (!found)
                throw ValidationError("config /environment/disaster/subset: unknown cluster id " +
                                      std::to_string(id));
        }
        cfg.clusters = std::move(chosen);
    }
    if (j.contains("increment")) cfg.increment = j["increment"].get<int>();
    if (j.contains("budget")) cfg.budget = j["budget"].get<int>();
    if (j.contains("horizon")) cfg.horizon = j["horizon"].get<int>();
    if (j.contains("need_cap")) cfg.need_cap = j["need_cap"].get<int>();
    if (j.contains("accounting")) {
        const std::string acc = j["accounting"].get<std::string>();
        if (acc == "per-step-met") cfg.accounting = envs::NeedAccounting::PerStepMet;
        else if (acc == "remaining-deficit")
            cfg.accounting = envs::NeedAccounting::RemainingDeficit;
        else
            throw ValidationError("config /environment/disaster/accounting: unknown mode '" +
                                  acc + "'");
    }
    if (j.contains("max_states")) cfg.max_states = j["max_states"].get<std::size_t>();
    if (j.contains("max_table_doubles"))
        cfg.max_table_doubles = j["max_table_doubles"].get<std::size_t>();
}

RunConfig::Algo parse_algo_name(const std::string& name) {
    if (name == "pmean") return RunConfig::Algo::PMean;
    if (name == "budget") return RunConfig::Algo::Budget;
    if (name == "baseline") return RunConfig::Algo::Baseline;
    if (name == "sweep") return RunConfig::Algo::Sweep;
    if (name == "evaluate") return RunConfig::Algo::Evaluate;
    throw ValidationError("config /algorithm/name: unknown algorithm '" + name + "'");
}

std::string algo_name(RunConfig::Algo a) {
    switch (a) {
    case RunConfig::Algo::PMean: return "pmean";
    case RunConfig::Algo::Budget: return "budget";
    case RunConfig::Algo::Baseline: return "baseline";
    case RunConfig::Algo::Sweep: return "sweep";
    case RunConfig::Algo::Evaluate: return "evaluate";
    }
    return "?";
}

/// Canonical rendering of the parsed config; hashing this makes semantically
/// equal configs hash equal regardless of JSON formatting.
ordered_json render_config(const RunConfig& c) {
    ordered_json j;
    switch (c.env_kind) {
    case RunConfig::EnvKind::DisasterReduced:
    case RunConfig::EnvKind::DisasterFull: {
        ordered_json d;
        d["kind"] = c.env_kind == RunConfig::EnvKind::DisasterFull ? "disaster-full"
                                                                   : "disaster-reduced";
        ordered_json cl = ordered_json::array();
        for (const envs::ClusterSpec& s : c.disaster.clusters) cl.push_back(s.id);
        d["cluster_ids"] = std::move(cl);
        d["increment"] = c.disaster.increment;
        d["budget"] = c.disaster.budget;
        d["horizon"] = c.disaster.horizon;
        d["need_cap"] = c.disaster.need_cap;
        d["accounting"] =
            c.disaster.accounting == envs::NeedAccounting::PerStepMet ? "per-step-met"
                                                                      : "remaining-deficit";
        j["environment"] = std::move(d);
        break;
    }
    case RunConfig::EnvKind::Random: {
        ordered_json r;
        r["kind"] = "random";
        r["states"] = c.random_spec.n_states;
        r["actions"] = c.random_spec.n_actions;
        r["rewards"] = c.random_spec.n_rewards;
        r["horizon"] = c.random_spec.horizon;
        r["kappa"] = c.random_spec.kappa;
        r["seed"] = c.random_spec.seed;
        j["environment"] = std::move(r);
        break;
    }
    case RunConfig::EnvKind::MdpFile:
        j["environment"] = ordered_json{{"kind", "file"}, {"path", c.mdp_file.string()}};
        break;
    }
    switch (c.policy_source) {
    case RunConfig::PolicySource::File:
        j["policies"] = ordered_json{{"source", "file"}, {"path", c.policy_file.string()}};
        break;
    case RunConfig::PolicySource::Generator:
        j["policies"] = ordered_json{{"source", "generate"}, {"count", c.generator_count}};
        break;
    case RunConfig::PolicySource::Exhaustive:
        j["policies"] = ordered_json{{"source", "exhaustive"},
                                     {"stationary", c.exhaustive_stationary},
                                     {"max_count", c.exhaustive_max_count}};
        break;
    }
    j["rule"] = c.rule == Rule::Esr ? "esr" : "ser";
    j["esr"] = ordered_json{
        {"mode", c.esr_mode == EsrMode::Auto
                     ? "auto"
                     : (c.esr_mode == EsrMode::Exact ? "exact" : "mc")},
        {"samples", c.mc_samples},
        {"stderr_margin_k", c.stderr_margin_k}};
    ordered_json a;
    a["name"] = algo_name(c.algo);
    switch (c.algo) {
    case RunConfig::Algo::PMean: a["alpha"] = c.alpha; break;
    case RunConfig::Algo::Budget:
        a["K"] = c.budget_k;
        a["p0"] = c.budget_p0;
        break;
    case RunConfig::Algo::Baseline:
        a["kind"] = c.baseline_kind;
        a["K"] = c.budget_k;
        a["p0"] = c.budget_p0;
        a["trials"] = c.baseline_trials;
        break;
    case RunConfig::Algo::Sweep: a["alphas"] = c.alphas; break;
    case RunConfig::Algo::Evaluate: a["portfolio"] = c.portfolio_file.string(); break;
    }
    j["algorithm"] = std::move(a);
    j["grid"] = ordered_json{{"points", c.grid_points},
                             {"low", c.grid_low ? ordered_json(*c.grid_low)
                                                : ordered_json(nullptr)}};
    j["seed"] = c.seed;
    return j;
}

} // namespace

RunConfig parse_run_config(const std::filesystem::path& path,
                           std::optional<RunConfig::Algo> algo_hint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("config: cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("config: " + path.string() + ": " + e.what());
    }

    RunConfig c;
    try {
        if (j.contains("environment")) {
            const auto& e = j["environment"];
            if (e.is_string()) {
                const std::string name = e.get<std::string>();
                if (name == "disaster-reduced") {
                    c.env_kind = RunConfig::EnvKind::DisasterReduced;
                    c.disaster = envs::disaster_reduced_config();
                } else if (name == "disaster-full") {
                    c.env_kind = RunConfig::EnvKind::DisasterFull;
                    c.disaster = envs::disaster_full_config();
                } else {
                    throw ValidationError("config /environment: unknown builtin '" + name + "'");
                }
            } else if (e.contains("disaster")) {
                const auto& d = e["disaster"];
                const std::string base = d.value("base", std::string("reduced"));
                c.env_kind = base == "full" ? RunConfig::EnvKind::DisasterFull
                                            : RunConfig::EnvKind::DisasterReduced;
                c.disaster = disaster_base(base);
                apply_disaster_overrides(c.disaster, d);
            } else if (e.contains("random")) {
                c.env_kind = RunConfig::EnvKind::Random;
                const auto& r = e["random"];
                c.random_spec.n_states = r.value("states", 4u);
                c.random_spec.n_actions = r.value("actions", 3u);
                c.random_spec.n_rewards = r.value("rewards", 4u);
                c.random_spec.horizon = r.value("horizon", 3);
                c.random_spec.kappa = r.value("kappa", 4.0);
                c.random_spec.seed = r.value("seed", std::uint64_t{0});
            } else if (e.contains("file")) {
                c.env_kind = RunConfig::EnvKind::MdpFile;
                c.mdp_file = e["file"].get<std::string>();
            } else {
                throw ValidationError("config /environment: unrecognized block");
            }
        }
        if (j.contains("policies")) {
            const auto& p = j["policies"];
            if (p.is_string() && p.get<std::string>() == "generate") {
                c.policy_source = RunConfig::PolicySource::Generator;
            } else if (p.contains("file")) {
                c.policy_source = RunConfig::PolicySource::File;
                c.policy_file = p["file"].get<std::string>();
            } else if (p.contains("generate")) {
                c.policy_source = RunConfig::PolicySource::Generator;
                c.generator_count = p["generate"].value("count", std::size_t{10000});
            } else if (p.contains("exhaustive")) {
                c.policy_source = RunConfig::PolicySource::Exhaustive;
                c.exhaustive_stationary = p["exhaustive"].value("stationary", false);
                c.exhaustive_max_count = p["exhaustive"].value("max_count", 1e6);
            } else {
                throw ValidationError("config /policies: unrecognized block");
            }
        }
        if (j.contains("rule")) {
            const std::string r = j["rule"].get<std::string>();
            if (r == "ser") c.rule = Rule::Ser;
            else if (r == "esr") c.rule = Rule::Esr;
            else throw ValidationError("config /rule: expected 'ser' or 'esr'");
        }
        if (j.contains("esr")) {
            const auto& e = j["esr"];
            const std::string mode = e.value("mode", std::string("auto"));
            if (mode == "auto") c.esr_mode = EsrMode::Auto;
            else if (mode == "exact") c.esr_mode = EsrMode::Exact;
            else if (mode == "mc") c.esr_mode = EsrMode::MonteCarlo;
            else throw ValidationError("config /esr/mode: unknown mode '" + mode + "'");
            c.mc_samples = e.value("samples", std::size_t{10000});
            c.stderr_margin_k = e.value("stderr_margin_k", 0.0);
        }
        if (j.contains("algorithm")) {
            const auto& a = j["algorithm"];
            c.algo = parse_algo_name(a.at("name").get<std::string>());
            if (algo_hint && *algo_hint != c.algo)
                throw ValidationError("config /algorithm/name: '" + algo_name(c.algo) +
                                      "' does not match the subcommand '" +
                                      algo_name(*algo_hint) + "'");
            switch (c.algo) {
            case RunConfig::Algo::PMean: c.alpha = a.value("alpha", 0.9); break;
            case RunConfig::Algo::Budget:
                c.budget_k = a.value("K", 3);
                c.budget_p0 = a.value("p0", -100.0);
                break;
            case RunConfig::Algo::Baseline:
                c.baseline_kind = a.value("kind", std::string("random-p"));
                if (c.baseline_kind != "random-p" && c.baseline_kind != "random-policy")
                    throw ValidationError("config /algorithm/kind: expected 'random-p' or "
                                          "'random-policy'");
                c.budget_k = a.value("K", 3);
                c.budget_p0 = a.value("p0", -100.0);
                c.baseline_trials = a.value("trials", 10);
                break;
            case RunConfig::Algo::Sweep:
                if (a.contains("alphas")) c.alphas = a["alphas"].get<std::vector<double>>();
                break;
            case RunConfig::Algo::Evaluate:
                c.portfolio_file = a.at("portfolio").get<std::string>();
                break;
            }
        } else if (algo_hint) {
            c.algo = *algo_hint;
        }
        if (j.contains("grid")) {
            c.grid_points = j["grid"].value("points", 1000);
            if (j["grid"].contains("low") && !j["grid"]["low"].is_null())
                c.grid_low = j["grid"]["low"].get<double>();
        }
        c.seed = j.value("seed", std::uint64_t{1});
        if (j.contains("out")) c.out_dir = j["out"].get<std::string>();
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError("config: " + path.string() + ": " + e.what());
    }
    return c;
}

std::string file_hash_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("hash: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex64(fnv1a64(ss.str()));
}

namespace {

struct OutputCollector {
    std::filesystem::path dir;
    std::vector<ManifestEntry> entries;

    std::filesystem::path reserve(const std::string& name) { return dir / name; }
    void record(const std::string& name) {
        entries.push_back({name, file_hash_hex(dir / name)});
    }
};

struct ComparisonRow {
    std::size_t size = 0;
    std::string method;
    std::string alpha; // parameter column: alpha for pmean rows, blank else
    double actual = 0.0;
    std::uint64_t oracle_calls = 0;
};

void write_comparison_csv(const std::vector<ComparisonRow>& rows,
                          const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("comparison: cannot open " + path.string());
    out << "size,method,alpha,actual_approximation,oracle_calls\n";
    for (const ComparisonRow& r : rows)
        out << r.size << "," << r.method << "," << r.alpha << "," << fmt_double(r.actual) << ","
            << r.oracle_calls << "\n";
}

void write_ledger_json(const Oracle& oracle, const std::filesystem::path& path) {
    const CallLedger& led = oracle.ledger();
    ordered_json j;
    j["oracle_calls"] = led.oracle_calls;
    j["point_evaluations"] = led.point_evaluations;
    j["values_computed"] = led.values_computed;
    ordered_json calls = ordered_json::array();
    for (const OracleCallRecord& rec : led.calls) {
        ordered_json cj;
        cj["call"] = rec.call_no;
        cj["p"] = rec.p.is_neg_inf() ? ordered_json("-inf") : ordered_json(rec.p.value());
        cj["best_policy_id"] = rec.best_policy_id;
        cj["best_value"] = rec.best_value;
        calls.push_back(std::move(cj));
    }
    j["calls"] = std::move(calls);
    std::map<std::string, std::size_t> route_counts;
    for (const std::string& r : oracle.provenance()) ++route_counts[r];
    ordered_json prov;
    for (const auto& [route, count] : route_counts) prov[route] = count;
    j["provenance"] = std::move(prov);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("ledger: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace

RunManifest run(const RunConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(config.out_dir);

    const ordered_json canonical = render_config(config);
    RunManifest manifest;
    manifest.config_hash = hex64(fnv1a64(canonical.dump()));
    manifest.tool_version = kToolVersion;

    OracleOptions opts;
    opts.rule = config.rule;
    opts.esr_mode = config.esr_mode;
    opts.mc_samples = config.mc_samples;
    opts.seed = config.seed;
    opts.stderr_margin_k = config.stderr_margin_k;

    std::shared_ptr<const FiniteMDP> mdp;
    std::shared_ptr<const PolicySet> policies;
    std::optional<Oracle> oracle;

    const bool disaster_env = config.env_kind == RunConfig::EnvKind::DisasterReduced ||
                              config.env_kind == RunConfig::EnvKind::DisasterFull;
    const bool generative = config.env_kind == RunConfig::EnvKind::DisasterFull &&
                            config.rule == Rule::Esr &&
                            config.esr_mode == EsrMode::MonteCarlo &&
                            config.policy_source == RunConfig::PolicySource::Generator;

    if (generative) {
        oracle.emplace(envs::make_disaster_mc_oracle(
            config.disaster,
            envs::generate_disaster_rules(config.disaster, config.generator_count, config.seed),
            opts));
    } else {
        switch (config.env_kind) {
        case RunConfig::EnvKind::DisasterReduced:
        case RunConfig::EnvKind::DisasterFull:
            mdp = std::make_shared<const FiniteMDP>(envs::build_disaster_mdp(config.disaster));
            break;
        case RunConfig::EnvKind::Random:
            mdp = std::make_shared<const FiniteMDP>(envs::random_mdp(config.random_spec));
            break;
        case RunConfig::EnvKind::MdpFile:
            mdp = std::make_shared<const FiniteMDP>(FiniteMDP::load(config.mdp_file));
            break;
        }
        PolicySet set;
        switch (config.policy_source) {
        case RunConfig::PolicySource::File: {
            set = load_policy_set(config.policy_file);
            if (!set.policies.empty() &&
                (set.policies.front().n_states() != mdp->n_states ||
                 set.policies.front().n_actions() != mdp->n_actions ||
                 set.policies.front().horizon() != mdp->horizon))
                throw ValidationError("config /policies/file: policy dimensions do not match "
                                      "the environment");
            break;
        }
        case RunConfig::PolicySource::Generator:
            if (!disaster_env)
                throw ValidationError(
                    "config /policies: the priority generator requires a disaster environment");
            set = envs::generate_disaster_policies(config.disaster, config.generator_count,
                                                   config.seed);
            set.mdp_ref = mdp->content_hash();
            break;
        case RunConfig::PolicySource::Exhaustive:
            set = enumerate_deterministic_policies(*mdp, config.exhaustive_max_count,
                                                   config.exhaustive_stationary);
            break;
        }
        policies = std::make_shared<const PolicySet>(std::move(set));
        oracle.emplace(mdp, policies, opts);
    }

    const std::size_t N = oracle->n_stakeholders();
    OutputCollector out{config.out_dir, {}};
    std::vector<ComparisonRow> comparison;
    bool degraded = false;

    GridSpec grid;
    grid.points = config.grid_points;

    auto evaluate_and_save = [&](const Portfolio& pf, const std::string& stem) {
        const EvalReport report = approximation_factor(pf, *oracle, grid);
        save_portfolio(pf, out.reserve(stem + ".json"));
        out.record(stem + ".json");
        save_eval_report_csv(report, out.reserve("eval_" + stem + ".csv"));
        out.record("eval_" + stem + ".csv");
        degraded = degraded || pf.degraded;
        return report;
    };

    switch (config.algo) {
    case RunConfig::Algo::PMean: {
        grid.low = config.grid_low.value_or(default_grid_low(N, config.alpha));
        const Portfolio pf = p_mean_portfolio(*oracle, config.alpha);
        const EvalReport report = evaluate_and_save(pf, "portfolio");
        comparison.push_back({pf.size(), "pmean", fmt_double(config.alpha), report.q_min,
                              pf.oracle_calls});
        break;
    }
    case RunConfig::Algo::Budget: {
        grid.low = config.grid_low.value_or(std::min(config.budget_p0, -100.0));
        const Portfolio pf =
            budget_constrained_portfolio(*oracle, config.budget_k, config.budget_p0);
        const EvalReport report = evaluate_and_save(pf, "portfolio");
        comparison.push_back({pf.size(), "budget", "", report.q_min, pf.oracle_calls});
        break;
    }
    case RunConfig::Algo::Baseline: {
        grid.low = config.grid_low.value_or(std::min(config.budget_p0, -100.0));
        std::vector<Portfolio> trials;
        if (config.baseline_kind == "random-p") {
            trials = random_p_baseline(*oracle, config.budget_k, config.budget_p0, config.seed,
                                       config.baseline_trials);
        } else {
            if (!policies)
                throw ValidationError("config /algorithm: the random-policy baseline needs a "
                                      "materialized policy set");
            trials = random_policy_baseline(*policies, config.budget_k, config.seed,
                                            config.baseline_trials);
        }
        double q_sum = 0.0;
        std::uint64_t call_sum = 0;
        for (std::size_t t = 0; t < trials.size(); ++t) {
            char stem[48];
            std::snprintf(stem, sizeof(stem), "baseline_trial_%02zu", t);
            const EvalReport report = evaluate_and_save(trials[t], stem);
            q_sum += report.q_min;
            call_sum += trials[t].oracle_calls;
        }
        comparison.push_back({static_cast<std::size_t>(config.budget_k), config.baseline_kind,
                              "", q_sum / static_cast<double>(trials.size()),
                              call_sum / trials.size()});
        break;
    }
    case RunConfig::Algo::Sweep: {
        std::vector<double> alphas = config.alphas.empty() ? standard_alpha_grid()
                                                           : config.alphas;
        grid.low = config.grid_low.value_or(default_grid_low(N, alphas.front()));
        const auto by_size = alpha_sweep(*oracle, alphas);
        for (const auto& [size, entry] : by_size) {
            char stem[48];
            std::snprintf(stem, sizeof(stem), "portfolio_size_%zu", size);
            const EvalReport report = evaluate_and_save(entry.second, stem);
            comparison.push_back({size, "pmean", fmt_double(entry.first), report.q_min,
                                  entry.second.oracle_calls});
        }
        break;
    }
    case RunConfig::Algo::Evaluate: {
        const Portfolio pf = load_portfolio(config.portfolio_file);
        double low = default_grid_low(N, pf.alpha.value_or(0.05));
        for (const PortfolioEntry& e : pf.entries)
            if (e.p && e.p->is_finite()) low = std::min(low, e.p->value());
        grid.low = config.grid_low.value_or(low);
        const EvalReport report = evaluate_and_save(pf, "portfolio");
        comparison.push_back({pf.size(), to_string(pf.algorithm),
                              pf.alpha ? fmt_double(*pf.alpha) : std::string{}, report.q_min,
                              pf.oracle_calls});
        break;
    }
    }

    write_comparison_csv(comparison, out.reserve("comparison.csv"));
    out.record("comparison.csv");
    write_ledger_json(*oracle, out.reserve("ledger.json"));
    out.record("ledger.json");

    manifest.degraded = degraded;
    manifest.outputs = out.entries;
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ordered_json mj;
    mj["config_hash"] = manifest.config_hash;
    mj["tool_version"] = manifest.tool_version;
    mj["wall_seconds"] = manifest.wall_seconds;
    mj["degraded"] = manifest.degraded;
    mj["config"] = canonical;
    ordered_json outputs = ordered_json::array();
    for (const ManifestEntry& e : manifest.outputs)
        outputs.push_back(ordered_json{{"name", e.name}, {"hash", e.hash}});
    mj["outputs"] = std::move(outputs);
    {
        std::ofstream mo(config.out_dir / "manifest.json", std::ios::binary);
        if (!mo) throw ValidationError("manifest: cannot open manifest.json for writing");
        mo << mj.dump(2) << "\n";
    }
    return manifest;
}

std::vector<GroupSpec> disaster_groups(const envs::DisasterConfig& config,
                                       const std::string& which) {
    std::vector<GroupSpec> groups;
    auto add = [&](const std::string& name, std::uint32_t idx) {
        for (GroupSpec& g : groups) {
            if (g.name == name) {
                g.members.push_back(idx);
                return;
            }
        }
        groups.push_back({name, {idx}});
    };
    for (std::uint32_t i = 0; i < config.clusters.size(); ++i) {
        const envs::ClusterSpec& c = config.clusters[i];
        if (which == "income") {
            add(c.income == envs::Income::Low
                    ? "low-income"
                    : (c.income == envs::Income::Middle ? "middle-income" : "high-income"),
                i);
        } else if (which == "density") {
            add(c.density == envs::Density::High ? "high-density" : "low-density", i);
        } else if (which == "proximity") {
            add(c.proximity == envs::Proximity::Near ? "near" : "far", i);
        } else if (which == "cluster") {
            add("cluster-" + std::to_string(c.id), i);
        } else {
            throw ValidationError("breakdown: unknown builtin grouping '" + which + "'");
        }
    }
    return groups;
}

std::vector<GroupSpec> load_groups(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("groups: cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("groups: " + path.string() + ": " + e.what());
    }
    if (!j.contains("groups") || !j["groups"].is_object())
        throw ValidationError("groups: /groups: expected object of name -> index list");
    std::vector<GroupSpec> out;
    for (const auto& [name, members] : j["groups"].items())
        out.push_back({name, members.get<std::vector<std::uint32_t>>()});
    return out;
}

void write_breakdown(const Portfolio& portfolio, const FiniteMDP& mdp,
                     const PolicySet& policies, const std::vector<GroupSpec>& groups,
                     const std::string& baseline_policy, const std::filesystem::path& csv_path,
                     const std::optional<std::filesystem::path>& svg_path) {
    if (groups.empty()) throw ValidationError("breakdown: no groups");
    std::vector<int> seen(mdp.n_rewards, 0);
    for (const GroupSpec& g : groups) {
        for (std::uint32_t i : g.members) {
            if (i >= mdp.n_rewards)
                throw ValidationError("breakdown: group '" + g.name +
                                      "' references stakeholder " + std::to_string(i) +
                                      " out of range");
            seen[i] += 1;
        }
    }
    for (std::uint32_t i = 0; i < mdp.n_rewards; ++i)
        if (seen[i] != 1)
            throw ValidationError("breakdown: groups must partition the stakeholders; index " +
                                  std::to_string(i) + " appears " + std::to_string(seen[i]) +
                                  " times");

    auto group_values = [&](const Policy& pol) {
        const ReturnVector g = expected_return_vector(mdp, pol);
        std::vector<double> vals;
        vals.reserve(groups.size());
        for (const GroupSpec& grp : groups) {
            double sum = 0.0;
            for (std::uint32_t i : grp.members) sum += g[i];
            vals.push_back(sum / static_cast<double>(grp.members.size()));
        }
        return vals;
    };

    std::vector<double> base;
    if (!baseline_policy.empty())
        base = group_values(policies[policies.index_of(baseline_policy)]);

    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (const PortfolioEntry& e : portfolio.entries) {
        std::vector<double> vals = group_values(policies[policies.index_of(e.policy_id)]);
        if (!base.empty())
            for (std::size_t k = 0; k < vals.size(); ++k) vals[k] /= base[k];
        rows.emplace_back(e.policy_id, std::move(vals));
    }

    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw ValidationError("breakdown: cannot open " + csv_path.string());
    out << "policy_id";
    for (const GroupSpec& g : groups) out << "," << g.name;
    out << "\n";
    for (const auto& [id, vals] : rows) {
        out << id;
        for (double v : vals) out << "," << fmt_double(v);
        out << "\n";
    }
    out.close();

    if (!svg_path) return;
    // minimal static grouped bar chart
    const double width = 900, height = 420, margin = 60;
    const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
    double vmax = 0.0;
    for (const auto& [id, vals] : rows)
        for (double v : vals) vmax = std::max(vmax, v);
    if (vmax <= 0.0) vmax = 1.0;
    const char* palette[] = {"#4c78a8", "#f58518", "#54a24b", "#e45756",
                             "#72b7b2", "#eeca3b", "#b279a2", "#9d755d"};
    std::ofstream svg(*svg_path, std::ios::binary);
    if (!svg) throw ValidationError("breakdown: cannot open " + svg_path->string());
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const std::size_t n_groups = groups.size(), n_pols = rows.size();
    const double group_w = plot_w / static_cast<double>(n_groups);
    const double bar_w = group_w / static_cast<double>(n_pols + 1);
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
        for (std::size_t pi = 0; pi < n_pols; ++pi) {
            const double v = rows[pi].second[gi];
            const double h = plot_h * v / vmax;
            const double x = margin + group_w * gi + bar_w * (pi + 0.5);
            const double y = margin + plot_h - h;
            svg << "<rect x=\"" << fmt_double(x) << "\" y=\"" << fmt_double(y) << "\" width=\""
                << fmt_double(bar_w * 0.9) << "\" height=\"" << fmt_double(h) << "\" fill=\""
                << palette[pi % 8] << "\"/>\n";
        }
        svg << "<text x=\"" << fmt_double(margin + group_w * (gi + 0.5)) << "\" y=\""
            << fmt_double(height - margin / 2.0)
            << "\" text-anchor=\"middle\" font-size=\"12\">" << groups[gi].name << "</text>\n";
    }
    for (std::size_t pi = 0; pi < n_pols; ++pi) {
        const double y = margin / 2.0 + 14.0 * pi;
        svg << "<rect x=\"" << fmt_double(width - margin - 150) << "\" y=\"" << fmt_double(y - 9)
            << "\" width=\"10\" height=\"10\" fill=\"" << palette[pi % 8] << "\"/>\n";
        svg << "<text x=\"" << fmt_double(width - margin - 135) << "\" y=\"" << fmt_double(y)
            << "\" font-size=\"11\">" << rows[pi].first << "</text>\n";
    }
    svg << "<line x1=\"" << fmt_double(margin) << "\" y1=\"" << fmt_double(margin + plot_h)
        << "\" x2=\"" << fmt_double(margin + plot_w) << "\" y2=\"" << fmt_double(margin + plot_h)
        << "\" stroke=\"black\"/>\n";
    svg << "</svg>\n";
}

} // namespace pmean
