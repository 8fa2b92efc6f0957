#include "pmean/portfolio.hpp"

#include "pmean/errors.hpp"
#include "pmean/parallel.hpp"
#include "pmean/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pmean {

namespace {

using ordered_json = nlohmann::ordered_json;

/// lhs >= c * rhs, optionally shifted by k standard errors on both sides so
/// that noisy estimates must clear the bar with confidence.
bool geq_scaled(double lhs, double se_lhs, double c, double rhs, double se_rhs, double k) {
    return lhs >= c * rhs + k * (se_lhs + c * se_rhs);
}

ordered_json pvalue_to_json(const PValue& p) {
    if (p.is_neg_inf()) return "-inf";
    return p.value();
}

PValue pvalue_from_json(const ordered_json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "-inf") return PValue::neg_inf();
        throw ValidationError("portfolio: bad p value '" + j.get<std::string>() + "'");
    }
    return PValue::finite(j.get<double>());
}

} // namespace

std::string to_string(PortfolioAlgorithm a) {
    switch (a) {
    case PortfolioAlgorithm::PMean: return "pmean";
    case PortfolioAlgorithm::Budget: return "budget";
    case PortfolioAlgorithm::RandomP: return "random-p";
    case PortfolioAlgorithm::RandomPolicy: return "random-policy";
    }
    return "unknown";
}

LineSearchResult line_search(Oracle& oracle, double p, double alpha, RunCallCounter* counter,
                             const LineSearchOptions& options) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("line_search: alpha must lie in (0, 1)");
    if (!(p < 1.0)) throw std::domain_error("line_search: requires p < 1");

    RunCallCounter local;
    RunCallCounter& calls = counter ? *counter : local;
    const double sqrt_alpha = std::sqrt(alpha);
    const double margin_k = oracle.options().stderr_margin_k;

    const PValue pv = PValue::finite(p);
    const OracleResult at_p = calls.solve(oracle, pv);
    const std::size_t pi = at_p.best_index;

    LineSearchResult out;
    LineSearchTrace& trace = out.trace;
    trace.p = p;
    trace.policy_id = at_p.best_policy_id;
    trace.alpha = alpha;
    trace.v_star_p = at_p.best_value;

    double a = p;
    double b = 1.0;
    double v_pi_a = at_p.best_value; // v(pi_p, p) = v*(p)
    double se_pi_a = oracle.stderr_at(pi, pv);
    double v_star_a = at_p.best_value;
    int bisections = 0;

    for (;;) {
        const PValue bv = PValue::finite(b);
        const OracleResult at_b = calls.solve(oracle, bv);
        const double se_b = oracle.stderr_at(at_b.best_index, bv);
        const bool ok = geq_scaled(v_pi_a, se_pi_a, alpha, at_b.best_value, se_b, margin_k);
        trace.guards.push_back({a, b, v_pi_a, at_b.best_value, ok});
        if (ok) {
            trace.v_star_b_star = at_b.best_value;
            break;
        }
        if (b - a < options.min_width || bisections >= options.max_bisections) {
            out.degraded = true;
            trace.v_star_b_star = at_b.best_value;
            break;
        }
        const double q = 0.5 * (a + b);
        const PValue qv = PValue::finite(q);
        const OracleResult at_q = calls.solve(oracle, qv);
        const double se_q = oracle.stderr_at(at_q.best_index, qv);
        LineSearchStep step;
        step.q = q;
        step.v_star_q = at_q.best_value;
        if (geq_scaled(v_pi_a, se_pi_a, sqrt_alpha, at_q.best_value, se_q, margin_k)) {
            a = q;
            v_pi_a = oracle.evaluate_index(pi, qv);
            se_pi_a = oracle.stderr_at(pi, qv);
            v_star_a = at_q.best_value;
            step.accepted = true;
        } else {
            b = q;
            step.accepted = false;
        }
        step.a = a;
        step.b = b;
        step.v_pi_a = v_pi_a;
        step.v_star_a = v_star_a;
        trace.steps.push_back(step);
        ++bisections;
    }

    out.b_star = b;
    trace.b_star = b;
    trace.degraded = out.degraded;
    return out;
}

Portfolio p_mean_portfolio(Oracle& oracle, double alpha, const LineSearchOptions& options) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("p_mean_portfolio: alpha must lie in (0, 1)");

    Portfolio pf;
    pf.algorithm = PortfolioAlgorithm::PMean;
    pf.alpha = alpha;
    pf.seed = oracle.options().seed;

    RunCallCounter calls;
    double pt = p_floor(static_cast<std::int64_t>(oracle.n_stakeholders()), alpha);
    while (pt < 1.0) {
        const PValue pv = PValue::finite(pt);
        const OracleResult res = calls.solve(oracle, pv);
        pf.entries.push_back({pv, res.best_policy_id, res.best_value});
        LineSearchResult ls = line_search(oracle, pt, alpha, &calls, options);
        pf.degraded = pf.degraded || ls.degraded;
        pf.traces.push_back(std::move(ls.trace));
        if (!(ls.b_star > pt)) { // stalled bracket; the safeguard already flagged it
            pf.degraded = true;
            break;
        }
        pt = ls.b_star;
    }
    pf.final_p = pt;
    pf.oracle_calls = calls.count();
    return pf;
}

Portfolio budget_constrained_portfolio(Oracle& oracle, int K, double p0) {
    if (K < 1) throw std::domain_error("budget_constrained_portfolio: K must be >= 1");
    if (!(p0 < 1.0))
        throw std::domain_error("budget_constrained_portfolio: p0 must be finite and < 1");

    Portfolio pf;
    pf.algorithm = PortfolioAlgorithm::Budget;
    pf.budget = K;
    pf.seed = oracle.options().seed;

    RunCallCounter calls;
    std::vector<double> chosen;             // in choice order
    std::set<double> chosen_set;
    std::map<double, OracleResult> results; // keyed by p, i.e. sorted

    for (int t = 1; t <= K; ++t) {
        double pt = 0.0;
        if (t == 1) {
            pt = p0;
        } else if (t == 2) {
            pt = 1.0;
        } else {
            // coverage estimate per interval between sorted chosen values
            std::vector<IntervalFactor> factors;
            std::vector<double> sorted(chosen_set.begin(), chosen_set.end());
            for (std::size_t l = 0; l + 1 < sorted.size(); ++l) {
                const PValue left = PValue::finite(sorted[l]);
                const PValue right = PValue::finite(sorted[l + 1]);
                const OracleResult& left_res = results.at(sorted[l]);
                const double v_left_at_right = oracle.evaluate_index(left_res.best_index, right);
                const double u = v_left_at_right / results.at(sorted[l + 1]).best_value;
                factors.push_back({left, right, u, false});
            }
            // worst interval first; skip degenerate midpoints that collide
            // with an already-chosen p
            std::vector<std::size_t> order(factors.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
                return factors[x].u < factors[y].u;
            });
            bool found = false;
            for (std::size_t idx : order) {
                const double mid = 0.5 * (factors[idx].left_p.value() +
                                          factors[idx].right_p.value());
                if (chosen_set.count(mid)) continue;
                factors[idx].chosen = true;
                pt = mid;
                found = true;
                break;
            }
            pf.interval_history.push_back(std::move(factors));
            if (!found) { // every interval collapsed; cannot spend the budget
                pf.degraded = true;
                break;
            }
        }
        const OracleResult res = calls.solve(oracle, PValue::finite(pt));
        chosen.push_back(pt);
        chosen_set.insert(pt);
        results[pt] = res;
    }

    for (const auto& [p, res] : results)
        pf.entries.push_back({PValue::finite(p), res.best_policy_id, res.best_value});
    pf.oracle_calls = calls.count();
    return pf;
}

EvalReport approximation_factor(const Portfolio& portfolio, Oracle& oracle,
                                const GridSpec& grid) {
    if (portfolio.entries.empty())
        throw ValidationError("approximation_factor: empty portfolio");
    if (grid.points < 3) throw ValidationError("approximation_factor: grid needs >= 3 points");
    if (!(grid.low < 1.0)) throw ValidationError("approximation_factor: grid low must be < 1");

    std::vector<std::size_t> indices;
    indices.reserve(portfolio.entries.size());
    for (const PortfolioEntry& e : portfolio.entries)
        indices.push_back(oracle.index_of(e.policy_id));

    std::vector<PValue> points;
    points.reserve(grid.points);
    points.push_back(PValue::neg_inf());
    const int finite_points = grid.points - 1;
    for (int i = 0; i < finite_points; ++i) {
        double v = i + 1 == finite_points
                       ? 1.0
                       : grid.low + (1.0 - grid.low) * (static_cast<double>(i) /
                                                        static_cast<double>(finite_points - 1));
        points.push_back(PValue::finite(v));
    }

    for (const PValue& pv : points) oracle.solve(pv); // sequential solve pass

    EvalReport report;
    report.grid.resize(points.size());
    parallel_for(points.size(), [&](std::size_t g) {
        const PValue pv = points[g];
        const std::span<const double> row = oracle.values_row(pv);
        double best = row[indices[0]];
        for (std::size_t j = 1; j < indices.size(); ++j) best = std::max(best, row[indices[j]]);
        const double v_star = oracle.solved_result(pv).best_value;
        report.grid[g] = {pv, best, v_star, best / v_star};
    });

    report.q_min = report.grid.front().ratio;
    report.argmin_p = report.grid.front().p;
    for (const GridRow& row : report.grid) {
        if (row.ratio < report.q_min) {
            report.q_min = row.ratio;
            report.argmin_p = row.p;
        }
    }
    return report;
}

std::vector<Portfolio> random_p_baseline(Oracle& oracle, int K, double p0, std::uint64_t seed,
                                         int trials) {
    if (K < 1) throw std::domain_error("random_p_baseline: K must be >= 1");
    if (trials < 1) throw std::domain_error("random_p_baseline: trials must be >= 1");
    if (!(p0 < 1.0)) throw std::domain_error("random_p_baseline: p0 must be < 1");

    std::vector<Portfolio> out;
    out.reserve(trials);
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(seed, 0x7261646Eull, trial); // "radn"
        Rng rng(trial_seed);
        std::set<double> ps;
        while (ps.size() < static_cast<std::size_t>(K))
            ps.insert(p0 + (1.0 - p0) * (1.0 - rng.uniform())); // (p0, 1]
        Portfolio pf;
        pf.algorithm = PortfolioAlgorithm::RandomP;
        pf.budget = K;
        pf.seed = trial_seed;
        RunCallCounter calls;
        for (double p : ps) {
            const PValue pv = PValue::finite(p);
            const OracleResult res = calls.solve(oracle, pv);
            pf.entries.push_back({pv, res.best_policy_id, res.best_value});
        }
        pf.oracle_calls = calls.count();
        out.push_back(std::move(pf));
    }
    return out;
}

std::vector<Portfolio> random_policy_baseline(const PolicySet& policies, int K,
                                              std::uint64_t seed, int trials) {
    if (K < 1) throw std::domain_error("random_policy_baseline: K must be >= 1");
    if (trials < 1) throw std::domain_error("random_policy_baseline: trials must be >= 1");
    if (static_cast<std::size_t>(K) > policies.size())
        throw ValidationError("random_policy_baseline: K exceeds the policy-set size");

    std::vector<Portfolio> out;
    out.reserve(trials);
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(seed, 0x706f6c72ull, trial); // "polr"
        Rng rng(trial_seed);
        std::vector<std::size_t> idx(policies.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (int j = 0; j < K; ++j) { // partial Fisher-Yates
            const std::size_t pick = j + rng.below(idx.size() - j);
            std::swap(idx[j], idx[pick]);
        }
        Portfolio pf;
        pf.algorithm = PortfolioAlgorithm::RandomPolicy;
        pf.budget = K;
        pf.seed = trial_seed;
        pf.oracle_calls = 0;
        for (int j = 0; j < K; ++j)
            pf.entries.push_back({std::nullopt, policies[idx[j]].id(), std::nullopt});
        out.push_back(std::move(pf));
    }
    return out;
}

std::map<std::size_t, std::pair<double, Portfolio>> alpha_sweep(Oracle& oracle,
                                                                std::vector<double> alphas) {
    for (std::size_t i = 0; i + 1 < alphas.size(); ++i)
        if (!(alphas[i] < alphas[i + 1]))
            throw ValidationError("alpha_sweep: alphas must be sorted ascending");
    std::map<std::size_t, std::pair<double, Portfolio>> by_size;
    for (double alpha : alphas) {
        Portfolio pf = p_mean_portfolio(oracle, alpha);
        const std::size_t size = pf.size();
        if (!by_size.count(size)) by_size.emplace(size, std::make_pair(alpha, std::move(pf)));
    }
    return by_size;
}

double portfolio_size_bound(double kappa, double alpha) {
    return 2.0 * std::log(kappa) / std::log(1.0 / alpha) + 2.0;
}

double default_grid_low(std::size_t n_stakeholders, double smallest_alpha) {
    return std::min(-100.0,
                    p_floor(static_cast<std::int64_t>(n_stakeholders), smallest_alpha));
}

std::vector<double> standard_alpha_grid() {
    std::vector<double> alphas;
    for (int i = 1; i <= 19; ++i) alphas.push_back(0.05 * i);
    alphas.push_back(0.99);
    return alphas;
}

void save_portfolio(const Portfolio& portfolio, const std::filesystem::path& path) {
    ordered_json j;
    j["algorithm"] = to_string(portfolio.algorithm);
    if (portfolio.alpha) j["alpha"] = *portfolio.alpha;
    if (portfolio.budget) j["K"] = *portfolio.budget;
    ordered_json entries = ordered_json::array();
    for (const PortfolioEntry& e : portfolio.entries) {
        ordered_json ej;
        ej["p"] = e.p ? pvalue_to_json(*e.p) : ordered_json(nullptr);
        ej["policy_id"] = e.policy_id;
        ej["v_star"] = e.v_star ? ordered_json(*e.v_star) : ordered_json(nullptr);
        entries.push_back(std::move(ej));
    }
    j["entries"] = std::move(entries);
    j["oracle_calls"] = portfolio.oracle_calls;
    j["seed"] = portfolio.seed;
    ordered_json flags = ordered_json::array();
    if (portfolio.degraded) flags.push_back("degraded");
    j["flags"] = std::move(flags);
    if (portfolio.algorithm == PortfolioAlgorithm::PMean) j["final_p"] = portfolio.final_p;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("portfolio: cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

Portfolio load_portfolio(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("portfolio: cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("portfolio: " + path.string() + ": " + e.what());
    }
    Portfolio pf;
    const std::string algo = j.value("algorithm", std::string("pmean"));
    if (algo == "pmean") pf.algorithm = PortfolioAlgorithm::PMean;
    else if (algo == "budget") pf.algorithm = PortfolioAlgorithm::Budget;
    else if (algo == "random-p") pf.algorithm = PortfolioAlgorithm::RandomP;
    else if (algo == "random-policy") pf.algorithm = PortfolioAlgorithm::RandomPolicy;
    else throw ValidationError("portfolio: /algorithm: unknown value '" + algo + "'");
    if (j.contains("alpha")) pf.alpha = j["alpha"].get<double>();
    if (j.contains("K")) pf.budget = j["K"].get<int>();
    if (!j.contains("entries") || !j["entries"].is_array())
        throw ValidationError("portfolio: /entries: expected array");
    for (const auto& ej : j["entries"]) {
        PortfolioEntry e;
        if (ej.contains("p") && !ej["p"].is_null()) e.p = pvalue_from_json(ej["p"]);
        e.policy_id = ej.at("policy_id").get<std::string>();
        if (ej.contains("v_star") && !ej["v_star"].is_null())
            e.v_star = ej["v_star"].get<double>();
        pf.entries.push_back(std::move(e));
    }
    pf.oracle_calls = j.value("oracle_calls", std::uint64_t{0});
    pf.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("flags"))
        for (const auto& f : j["flags"])
            if (f.get<std::string>() == "degraded") pf.degraded = true;
    pf.final_p = j.value("final_p", 1.0);
    return pf;
}

void save_eval_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("eval report: cannot open " + path.string() + " for writing");
    out << "p,best_in_portfolio,v_star,ratio\n";
    char buf[160];
    for (const GridRow& row : report.grid) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n", row.p.to_string().c_str(),
                      row.best_in_portfolio, row.v_star, row.ratio);
        out << buf;
    }
}

} // namespace pmean
