#include "pmean/envs.hpp"

#include "pmean/errors.hpp"
#include "pmean/kernels.hpp"
#include "pmean/parallel.hpp"
#include "pmean/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>

namespace pmean::envs {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string density_str(Density d) { return d == Density::High ? "High" : "Low"; }
std::string proximity_str(Proximity p) { return p == Proximity::Near ? "Near" : "Far"; }
std::string income_str(Income i) {
    switch (i) {
    case Income::Low: return "Low-Income";
    case Income::Middle: return "Middle-Income";
    case Income::High: return "High-Income";
    }
    return "Middle-Income";
}

Density parse_density(const std::string& s) {
    if (s == "High") return Density::High;
    if (s == "Low") return Density::Low;
    throw ValidationError("clusters: bad density '" + s + "'");
}
Proximity parse_proximity(const std::string& s) {
    if (s == "Near") return Proximity::Near;
    if (s == "Far") return Proximity::Far;
    throw ValidationError("clusters: bad proximity '" + s + "'");
}
Income parse_income(const std::string& s) {
    if (s == "Low-Income") return Income::Low;
    if (s == "Middle-Income") return Income::Middle;
    if (s == "High-Income") return Income::High;
    throw ValidationError("clusters: bad income_level '" + s + "'");
}

/// Shared state/action bookkeeping of a disaster instance. States are
/// mixed-radix encodings of per-cluster need levels (cluster 0 least
/// significant); the full product is never materialized here.
struct DisasterSpace {
    const DisasterConfig* config = nullptr;
    int n_levels = 0;  // need levels per cluster: 0..need_cap/b
    int max_units = 0; // B / b
    std::size_t n_clusters = 0;
    double n_states = 0.0; // as double; can exceed 2^32
    std::vector<std::vector<int>> actions; // unit allocations per cluster
    std::unordered_map<std::uint64_t, std::uint32_t> action_index;
    std::vector<int> initial_levels;

    explicit DisasterSpace(const DisasterConfig& cfg) : config(&cfg) {
        cfg.validate();
        n_clusters = cfg.clusters.size();
        n_levels = cfg.need_cap / cfg.increment + 1;
        max_units = cfg.budget / cfg.increment;
        n_states = std::pow(static_cast<double>(n_levels), static_cast<double>(n_clusters));
        std::vector<int> cur(n_clusters, 0);
        enumerate_actions(0, max_units, cur);
        for (std::size_t a = 0; a < actions.size(); ++a)
            action_index.emplace(encode_units(actions[a]), static_cast<std::uint32_t>(a));
        for (const ClusterSpec& c : cfg.clusters)
            initial_levels.push_back(
                static_cast<int>(std::min<std::int64_t>(c.initial_need, cfg.need_cap)) /
                cfg.increment);
    }

    void enumerate_actions(std::size_t c, int remaining, std::vector<int>& cur) {
        if (c == n_clusters) {
            actions.push_back(cur);
            return;
        }
        for (int u = 0; u <= remaining; ++u) {
            cur[c] = u;
            enumerate_actions(c + 1, remaining - u, cur);
        }
        cur[c] = 0;
    }

    std::uint64_t encode_units(const std::vector<int>& units) const {
        std::uint64_t code = 0;
        for (std::size_t c = units.size(); c-- > 0;)
            code = code * static_cast<std::uint64_t>(max_units + 1) + units[c];
        return code;
    }

    std::uint64_t encode_levels(const std::vector<int>& levels) const {
        std::uint64_t code = 0;
        for (std::size_t c = levels.size(); c-- > 0;)
            code = code * static_cast<std::uint64_t>(n_levels) + levels[c];
        return code;
    }

    void decode_levels(std::uint64_t state, std::vector<int>& levels) const {
        for (std::size_t c = 0; c < n_clusters; ++c) {
            levels[c] = static_cast<int>(state % n_levels);
            state /= n_levels;
        }
    }

    /// Per-cluster next-level distribution under allocation of u units.
    void cluster_outcomes(int level, int units,
                          std::pair<int, double> out[2], int& n_out) const {
        if (units >= level) {
            out[0] = {0, 1.0};
            n_out = 1;
            return;
        }
        out[0] = {level - units, config->success_prob};
        out[1] = {std::min(level + 1, n_levels - 1), config->balloon_prob};
        n_out = 2;
    }

    /// Stakeholder rewards for (levels, allocation); needs and allocations in
    /// resource units.
    void rewards_into(const std::vector<int>& levels, const std::vector<int>& units,
                      double* out) const {
        const double b = config->increment;
        double total_alloc = 0.0;
        for (std::size_t c = 0; c < n_clusters; ++c) total_alloc += units[c] * b;
        for (std::size_t c = 0; c < n_clusters; ++c) {
            const ClusterSpec& cl = config->clusters[c];
            const double alloc = units[c] * b;
            const double need = levels[c] * b;
            double covered;
            if (config->accounting == NeedAccounting::PerStepMet) {
                const double met = std::min(alloc, need);
                covered = cl.initial_need > 0
                              ? met / static_cast<double>(cl.initial_need)
                              : 0.0;
            } else {
                const double init_clipped =
                    std::max<double>(std::min<std::int64_t>(cl.initial_need, config->need_cap),
                                     config->increment);
                covered = 1.0 - need / init_clipped;
            }
            const double share = total_alloc > 0.0 ? alloc / total_alloc : 0.0;
            out[c] = 0.5 * covered + 0.5 * share;
        }
    }
};

const char* kPurePriorityIds[6] = {
    "pure-lowest-income",      "pure-highest-population", "pure-highest-need",
    "pure-need-per-capita",    "pure-high-density",       "pure-far-infra",
};

/// Normalized priority score of cluster c given its remaining need (resource
/// units). All six scores live in [0, 1].
double priority_score(int which, const DisasterConfig& cfg, std::size_t c, double remaining,
                      double max_population, double min_population) {
    const ClusterSpec& cl = cfg.clusters[c];
    switch (which) {
    case 0: // lowest income first
        return cl.income == Income::Low ? 1.0 : (cl.income == Income::Middle ? 0.5 : 0.0);
    case 1: // highest population
        return static_cast<double>(cl.population) / max_population;
    case 2: // highest unmet need
        return remaining / static_cast<double>(cfg.need_cap);
    case 3: // highest unmet need per capita
        return (remaining / static_cast<double>(cl.population)) /
               (static_cast<double>(cfg.need_cap) / min_population);
    case 4: // high population density
        return cl.density == Density::High ? 1.0 : 0.0;
    case 5: // far from critical infrastructure
        return cl.proximity == Proximity::Far ? 1.0 : 0.0;
    default: return 0.0;
    }
}

} // namespace

void DisasterConfig::validate() const {
    if (clusters.empty()) throw ValidationError("disaster config: no clusters");
    if (increment <= 0) throw ValidationError("disaster config: increment must be positive");
    if (budget % increment != 0)
        throw ValidationError("disaster config: increment must divide the budget");
    if (need_cap % increment != 0)
        throw ValidationError("disaster config: increment must divide need_cap");
    if (horizon < 1) throw ValidationError("disaster config: horizon must be >= 1");
    if (std::abs(success_prob + balloon_prob - 1.0) > 1e-12)
        throw ValidationError("disaster config: success_prob + balloon_prob must equal 1");
    for (const ClusterSpec& c : clusters) {
        if (c.population <= 0) throw ValidationError("disaster config: population must be > 0");
        if (c.initial_need < 0)
            throw ValidationError("disaster config: initial_need must be >= 0");
        if (c.initial_need % increment != 0)
            throw ValidationError("disaster config: initial_need must be a multiple of b");
    }
}

std::vector<ClusterSpec> table3_clusters() {
    using D = Density;
    using P = Proximity;
    using I = Income;
    return {
        {1, D::High, P::Far, I::High, 148, 150},    {2, D::High, P::Far, I::Low, 307, 500},
        {3, D::High, P::Far, I::Middle, 616, 650},  {4, D::High, P::Near, I::High, 816, 300},
        {5, D::High, P::Near, I::Low, 1405, 1000},  {6, D::High, P::Near, I::Middle, 2782, 950},
        {7, D::Low, P::Far, I::High, 74, 1000},     {8, D::Low, P::Far, I::Low, 203, 350},
        {9, D::Low, P::Far, I::Middle, 396, 300},   {10, D::Low, P::Near, I::High, 36, 50},
        {11, D::Low, P::Near, I::Low, 113, 100},    {12, D::Low, P::Near, I::Middle, 230, 100},
    };
}

DisasterConfig disaster_full_config() {
    DisasterConfig cfg;
    cfg.clusters = table3_clusters();
    return cfg;
}

DisasterConfig disaster_reduced_config() {
    // clusters 1, 3, 7, 11: all three income levels, both densities, needs
    // spanning 100..1000 and populations 74..616, so the priority rules
    // genuinely disagree
    DisasterConfig cfg;
    for (const ClusterSpec& c : table3_clusters())
        if (c.id == 1 || c.id == 3 || c.id == 7 || c.id == 11) cfg.clusters.push_back(c);
    return cfg;
}

std::vector<ClusterSpec> load_clusters(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("clusters: cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("clusters: " + path.string() + ": " + e.what());
    }
    const auto& arr = j.is_array() ? j : j.at("clusters");
    std::vector<ClusterSpec> out;
    for (const auto& cj : arr) {
        ClusterSpec c;
        c.id = cj.at("cluster_id").get<int>();
        c.density = parse_density(cj.at("density").get<std::string>());
        c.proximity = parse_proximity(cj.at("proximity").get<std::string>());
        c.income = parse_income(cj.at("income_level").get<std::string>());
        c.population = cj.at("total_population").get<std::int64_t>();
        c.initial_need = cj.at("initial_need").get<std::int64_t>();
        out.push_back(c);
    }
    return out;
}

namespace {

ordered_json clusters_to_json(const std::vector<ClusterSpec>& clusters) {
    ordered_json arr = ordered_json::array();
    for (const ClusterSpec& c : clusters) {
        ordered_json cj;
        cj["cluster_id"] = c.id;
        cj["density"] = density_str(c.density);
        cj["proximity"] = proximity_str(c.proximity);
        cj["income_level"] = income_str(c.income);
        cj["total_population"] = c.population;
        cj["initial_need"] = c.initial_need;
        arr.push_back(std::move(cj));
    }
    return arr;
}

} // namespace

DisasterConfig load_disaster_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("disaster config: cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("disaster config: " + path.string() + ": " + e.what());
    }
    DisasterConfig cfg;
    if (!j.contains("clusters"))
        throw ValidationError("disaster config: /clusters: required");
    for (const auto& cj : j["clusters"]) {
        ClusterSpec c;
        c.id = cj.at("cluster_id").get<int>();
        c.density = parse_density(cj.at("density").get<std::string>());
        c.proximity = parse_proximity(cj.at("proximity").get<std::string>());
        c.income = parse_income(cj.at("income_level").get<std::string>());
        c.population = cj.at("total_population").get<std::int64_t>();
        c.initial_need = cj.at("initial_need").get<std::int64_t>();
        cfg.clusters.push_back(c);
    }
    cfg.increment = j.value("increment", 50);
    cfg.budget = j.value("budget", 150);
    cfg.horizon = j.value("horizon", 4);
    cfg.success_prob = j.value("success_prob", 0.7);
    cfg.balloon_prob = j.value("balloon_prob", 0.3);
    cfg.need_cap = j.value("need_cap", 150);
    const std::string acc = j.value("accounting", std::string("per-step-met"));
    if (acc == "per-step-met") cfg.accounting = NeedAccounting::PerStepMet;
    else if (acc == "remaining-deficit") cfg.accounting = NeedAccounting::RemainingDeficit;
    else throw ValidationError("disaster config: /accounting: unknown mode '" + acc + "'");
    cfg.validate();
    return cfg;
}

void save_disaster_config(const DisasterConfig& config, const std::filesystem::path& path) {
    ordered_json j;
    j["clusters"] = clusters_to_json(config.clusters);
    j["increment"] = config.increment;
    j["budget"] = config.budget;
    j["horizon"] = config.horizon;
    j["success_prob"] = config.success_prob;
    j["balloon_prob"] = config.balloon_prob;
    j["need_cap"] = config.need_cap;
    j["accounting"] = config.accounting == NeedAccounting::PerStepMet ? "per-step-met"
                                                                      : "remaining-deficit";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("disaster config: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

FiniteMDP build_disaster_mdp(const DisasterConfig& config) {
    const DisasterSpace space(config);
    const double table_doubles = space.n_states * space.n_states *
                                 static_cast<double>(space.actions.size());
    if (space.n_states > static_cast<double>(config.max_states) ||
        table_doubles > static_cast<double>(config.max_table_doubles)) {
        char buf[200];
        std::snprintf(buf, sizeof(buf),
                      "disaster mdp: %.4g states x %zu actions (%.4g transition entries) "
                      "exceed caps (max_states=%zu, max_table_doubles=%zu)",
                      space.n_states, space.actions.size(), table_doubles, config.max_states,
                      config.max_table_doubles);
        throw SizeCapError(buf);
    }

    const auto S = static_cast<std::uint32_t>(space.n_states);
    const auto A = static_cast<std::uint32_t>(space.actions.size());
    const auto C = static_cast<std::uint32_t>(space.n_clusters);

    FiniteMDP mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.n_rewards = C;
    mdp.horizon = config.horizon;
    mdp.initial_state = static_cast<std::uint32_t>(space.encode_levels(space.initial_levels));
    mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    mdp.rewards.assign(static_cast<std::size_t>(C) * S * A, 0.0);

    std::vector<int> levels(C);
    std::vector<double> reward_row(C);
    for (std::uint32_t s = 0; s < S; ++s) {
        space.decode_levels(s, levels);
        for (std::uint32_t a = 0; a < A; ++a) {
            const std::vector<int>& units = space.actions[a];
            // product of per-cluster outcome distributions
            double* row = mdp.transition.data() + (static_cast<std::size_t>(s) * A + a) * S;
            struct Branch { std::uint64_t state; double prob; };
            std::vector<Branch> frontier{{0, 1.0}};
            std::uint64_t radix = 1;
            for (std::uint32_t c = 0; c < C; ++c) {
                std::pair<int, double> outs[2];
                int n_out = 0;
                space.cluster_outcomes(levels[c], units[c], outs, n_out);
                std::vector<Branch> next;
                next.reserve(frontier.size() * n_out);
                for (const Branch& br : frontier)
                    for (int o = 0; o < n_out; ++o)
                        next.push_back({br.state + radix * outs[o].first,
                                        br.prob * outs[o].second});
                frontier = std::move(next);
                radix *= static_cast<std::uint64_t>(space.n_levels);
            }
            for (const Branch& br : frontier) row[br.state] += br.prob;

            space.rewards_into(levels, units, reward_row.data());
            for (std::uint32_t c = 0; c < C; ++c)
                mdp.rewards[(static_cast<std::size_t>(c) * S + s) * A + a] = reward_row[c];
        }
    }

    // readable names: needs per cluster / allocation per cluster
    mdp.state_names.reserve(S);
    for (std::uint32_t s = 0; s < S; ++s) {
        space.decode_levels(s, levels);
        std::string name = "need";
        for (std::uint32_t c = 0; c < C; ++c)
            name += "_" + std::to_string(levels[c] * config.increment);
        mdp.state_names.push_back(std::move(name));
    }
    mdp.action_names.reserve(A);
    for (std::uint32_t a = 0; a < A; ++a) {
        std::string name = "alloc";
        for (std::uint32_t c = 0; c < C; ++c)
            name += "_" + std::to_string(space.actions[a][c] * config.increment);
        mdp.action_names.push_back(std::move(name));
    }

    mdp.finalize(); // derives U from the tables and clamps zeros up to L
    return mdp;
}

std::vector<PriorityRule> generate_disaster_rules(const DisasterConfig& config,
                                                  std::size_t count, std::uint64_t seed) {
    config.validate();
    if (count < 6)
        throw ValidationError("generate_disaster_rules: count must be >= 6 "
                              "(the six pure priorities come first)");
    std::vector<PriorityRule> rules;
    rules.reserve(count);
    for (int k = 0; k < 6; ++k) {
        PriorityRule r;
        r.kind = PriorityRule::Kind::Pure;
        r.id = kPurePriorityIds[k];
        r.pure_priority = k;
        rules.push_back(std::move(r));
    }
    const int width = std::max(5, static_cast<int>(std::to_string(count).size()));
    for (std::size_t j = 6; j < count; ++j) {
        Rng rng(derive_seed(seed, 0x64697361ull, j)); // per-rule sub-stream
        PriorityRule r;
        char idbuf[48];
        if (j % 8 == 0) {
            r.kind = PriorityRule::Kind::Weighted;
            std::snprintf(idbuf, sizeof(idbuf), "mix-%0*zu", width, j);
            r.weights.assign(6, 0.0);
            // blend over a random subset of 1-3 criteria: the population
            // spans specialists and pairwise/ternary trade-offs
            const std::size_t active = 1 + rng.below(3);
            int chosen[3] = {-1, -1, -1};
            double total = 0.0;
            for (std::size_t k = 0; k < active; ++k) {
                int c;
                do {
                    c = static_cast<int>(rng.below(6));
                } while (c == chosen[0] || c == chosen[1] || c == chosen[2]);
                chosen[k] = c;
                r.weights[c] = -std::log(1.0 - rng.uniform());
                total += r.weights[c];
            }
            for (double& w : r.weights) w /= total;
        } else {
            r.kind = PriorityRule::Kind::Lexicographic;
            std::snprintf(idbuf, sizeof(idbuf), "perm-%0*zu", width, j);
            r.order = {0, 1, 2, 3, 4, 5};
            for (std::size_t i = 0; i < 5; ++i) {
                const std::size_t pick = i + rng.below(6 - i);
                std::swap(r.order[i], r.order[pick]);
            }
        }
        r.id = idbuf;
        rules.push_back(std::move(r));
    }
    return rules;
}

std::vector<int> rule_allocation(const PriorityRule& rule, const DisasterConfig& config,
                                 const std::vector<int>& needs) {
    const std::size_t C = config.clusters.size();
    double max_pop = 1.0, min_pop = std::numeric_limits<double>::max();
    for (const ClusterSpec& c : config.clusters) {
        max_pop = std::max(max_pop, static_cast<double>(c.population));
        min_pop = std::min(min_pop, static_cast<double>(c.population));
    }

    std::vector<int> alloc(C, 0);
    std::vector<double> remaining(C);
    for (std::size_t c = 0; c < C; ++c) remaining[c] = needs[c];

    const int chunks = config.budget / config.increment;
    for (int chunk = 0; chunk < chunks; ++chunk) {
        // eligible: clusters whose need is not yet covered by this step's plan
        long best = -1;
        double best_score = 0.0;
        double best_lex[6] = {0, 0, 0, 0, 0, 0};
        for (std::size_t c = 0; c < C; ++c) {
            if (remaining[c] <= 0.0) continue;
            if (rule.kind == PriorityRule::Kind::Lexicographic) {
                double lex[6];
                for (int k = 0; k < 6; ++k)
                    lex[k] = priority_score(rule.order[k], config, c, remaining[c], max_pop,
                                            min_pop);
                bool better = best < 0;
                if (!better) {
                    for (int k = 0; k < 6; ++k) {
                        if (lex[k] > best_lex[k]) { better = true; break; }
                        if (lex[k] < best_lex[k]) break;
                    }
                }
                if (better) {
                    best = static_cast<long>(c);
                    std::copy(lex, lex + 6, best_lex);
                }
            } else {
                double score = 0.0;
                if (rule.kind == PriorityRule::Kind::Pure) {
                    score = priority_score(rule.pure_priority, config, c, remaining[c], max_pop,
                                           min_pop);
                } else {
                    for (int k = 0; k < 6; ++k)
                        score += rule.weights[k] *
                                 priority_score(k, config, c, remaining[c], max_pop, min_pop);
                }
                if (best < 0 || score > best_score) { // ties: lowest cluster index
                    best = static_cast<long>(c);
                    best_score = score;
                }
            }
        }
        if (best < 0) break; // every need covered; leave the rest unallocated
        alloc[best] += 1;
        remaining[best] -= config.increment;
    }
    return alloc;
}

PolicySet generate_disaster_policies(const DisasterConfig& config, std::size_t count,
                                     std::uint64_t seed) {
    const std::vector<PriorityRule> rules = generate_disaster_rules(config, count, seed);
    const DisasterSpace space(config);
    if (space.n_states > static_cast<double>(config.max_states)) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "generate_disaster_policies: %.4g states exceed max_states=%zu; "
                      "use the rule-based Monte-Carlo oracle for this instance",
                      space.n_states, config.max_states);
        throw SizeCapError(buf);
    }
    const auto S = static_cast<std::uint32_t>(space.n_states);
    const auto C = space.n_clusters;
    const int H = config.horizon;

    PolicySet set;
    set.generator = "disaster-priority";
    set.seed = seed;

    std::vector<Policy> built(rules.size());
    parallel_for(rules.size(), [&](std::size_t r) {
        std::vector<std::uint32_t> table(static_cast<std::size_t>(S) * H);
        std::vector<int> levels(C), needs(C);
        for (std::uint32_t s = 0; s < S; ++s) {
            space.decode_levels(s, levels);
            for (std::size_t c = 0; c < C; ++c) needs[c] = levels[c] * config.increment;
            const std::vector<int> alloc = rule_allocation(rules[r], config, needs);
            const std::uint32_t a = space.action_index.at(space.encode_units(alloc));
            for (int h = 1; h <= H; ++h)
                table[static_cast<std::size_t>(h - 1) * S + s] = a;
        }
        built[r] = Policy::deterministic(rules[r].id, S,
                                         static_cast<std::uint32_t>(space.actions.size()), H,
                                         std::move(table));
    });
    set.policies = std::move(built);
    return set;
}

namespace {

/// Generative full-size disaster backend: rules are priced by Monte-Carlo
/// rollouts of the per-cluster dynamics; no tables are materialized.
class DisasterMcBackend final : public ValueBackend {
public:
    DisasterMcBackend(DisasterConfig config, std::vector<PriorityRule> rules,
                      const OracleOptions& opt)
        : config_(std::move(config)), space_(config_), rules_(std::move(rules)), opt_(opt) {
        if (rules_.empty()) throw ValidationError("disaster mc oracle: no rules");
        for (std::size_t i = 0; i < rules_.size(); ++i) index_.emplace(rules_[i].id, i);
        if (index_.size() != rules_.size())
            throw ValidationError("disaster mc oracle: duplicate rule ids");
        // same positivity rule as the tabular build: per-step rewards below
        // 1e-3 * U are lifted to that floor
        double u = 0.0;
        for (const ClusterSpec& c : config_.clusters) {
            double cover_max;
            if (config_.accounting == NeedAccounting::PerStepMet) {
                const double met_max = std::min<double>(config_.budget, config_.need_cap);
                cover_max = c.initial_need > 0
                                ? met_max / static_cast<double>(c.initial_need)
                                : 0.0;
            } else {
                cover_max = 1.0;
            }
            u = std::max(u, 0.5 * cover_max + 0.5);
        }
        reward_floor_ = 1e-3 * u;
    }

    std::size_t n_policies() const override { return rules_.size(); }
    const std::string& policy_id(std::size_t i) const override { return rules_[i].id; }
    std::size_t index_of(const std::string& id) const override {
        auto it = index_.find(id);
        if (it == index_.end())
            throw ValidationError("disaster mc oracle: unknown rule id '" + id + "'");
        return it->second;
    }
    std::size_t n_stakeholders() const override { return config_.clusters.size(); }
    void prepare(std::size_t) override {}
    void prepare_all() override {}

    double value(std::size_t i, PValue p, double* stderr_out) override {
        const std::uint64_t tag = fnv1a64(rules_[i].id);
        std::vector<double> samples(opt_.mc_samples);
        parallel_for(opt_.mc_samples, [&](std::size_t k) {
            samples[k] = rollout(i, p, derive_seed(opt_.seed, tag, p.key(), k));
        });
        const McEstimate est = reduce_mc(samples);
        *stderr_out = est.stderr_est;
        return est.estimate;
    }

    const char* route(std::size_t) const override { return "esr-mc"; }

private:
    double rollout(std::size_t rule_idx, PValue p, std::uint64_t seed) const {
        Rng state_rng(derive_seed(seed, 0x535441ull));
        const std::size_t C = space_.n_clusters;
        std::vector<int> levels = space_.initial_levels;
        std::vector<int> needs(C);
        std::vector<double> g(C, 0.0), reward(C);
        for (int h = 1; h <= config_.horizon; ++h) {
            for (std::size_t c = 0; c < C; ++c) needs[c] = levels[c] * config_.increment;
            const std::vector<int> units = rule_allocation(rules_[rule_idx], config_, needs);
            space_.rewards_into(levels, units, reward.data());
            for (std::size_t c = 0; c < C; ++c) g[c] += std::max(reward[c], reward_floor_);
            if (h < config_.horizon) {
                for (std::size_t c = 0; c < C; ++c) {
                    std::pair<int, double> outs[2];
                    int n_out = 0;
                    space_.cluster_outcomes(levels[c], units[c], outs, n_out);
                    if (n_out == 1) {
                        levels[c] = outs[0].first;
                    } else {
                        levels[c] = state_rng.uniform() < outs[0].second ? outs[0].first
                                                                         : outs[1].first;
                    }
                }
            }
        }
        return p_mean(g, p);
    }

    DisasterConfig config_;
    DisasterSpace space_;
    std::vector<PriorityRule> rules_;
    OracleOptions opt_;
    std::map<std::string, std::size_t, std::less<>> index_;
    double reward_floor_ = 1e-3;
};

} // namespace

Oracle make_disaster_mc_oracle(const DisasterConfig& config, std::vector<PriorityRule> rules,
                               OracleOptions options) {
    options.rule = Rule::Esr;
    options.esr_mode = EsrMode::MonteCarlo;
    return Oracle(std::make_unique<DisasterMcBackend>(config, std::move(rules), options),
                  options);
}

FiniteMDP random_mdp(const RandomMdpSpec& spec) {
    if (spec.n_states < 1 || spec.n_actions < 1 || spec.n_rewards < 1 || spec.horizon < 1)
        throw ValidationError("random_mdp: sizes must be >= 1");
    if (!(spec.kappa >= 1.0)) throw ValidationError("random_mdp: kappa must be >= 1");
    Rng rng(derive_seed(spec.seed, 0x726d6470ull)); // "rmdp"

    FiniteMDP mdp;
    mdp.n_states = spec.n_states;
    mdp.n_actions = spec.n_actions;
    mdp.n_rewards = spec.n_rewards;
    mdp.horizon = spec.horizon;
    mdp.initial_state = 0;
    mdp.reward_lower = 1.0;
    mdp.reward_upper = spec.kappa;

    const std::size_t S = spec.n_states, A = spec.n_actions, N = spec.n_rewards;
    mdp.transition.resize(S * A * S);
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            double* row = mdp.transition.data() + (s * A + a) * S;
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                row[s2] = 0.05 + rng.uniform(); // dense rows, bounded away from 0
                sum += row[s2];
            }
            for (std::size_t s2 = 0; s2 < S; ++s2) row[s2] /= sum;
        }
    }
    mdp.rewards.resize(N * S * A);
    for (double& r : mdp.rewards) r = rng.uniform(1.0, spec.kappa);
    mdp.finalize();
    return mdp;
}

} // namespace pmean::envs
