#pragma once

#include "pmean/oracle.hpp"
#include "pmean/welfare.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pmean {

enum class PortfolioAlgorithm { PMean, Budget, RandomP, RandomPolicy };

std::string to_string(PortfolioAlgorithm a);

struct PortfolioEntry {
    /// Absent for the random-policy baseline, which picks policies without
    /// reference p values.
    std::optional<PValue> p;
    std::string policy_id;
    std::optional<double> v_star;
};

/// One guard evaluation v(pi, a) >= alpha * v*(b) of the line search.
struct GuardCheck {
    double a = 0.0, b = 0.0;
    double v_pi_a = 0.0, v_star_b = 0.0;
    bool satisfied = false;
};

/// One bisection step; fields reflect the state after the a/b update.
struct LineSearchStep {
    double a = 0.0, b = 0.0, q = 0.0;
    double v_pi_a = 0.0;   // value of pi_p at the current a
    double v_star_a = 0.0; // optimum at the current a
    double v_star_q = 0.0;
    bool accepted = false; // true: a <- q, false: b <- q
};

struct LineSearchTrace {
    double p = 0.0;
    std::string policy_id;
    double alpha = 0.0;
    double v_star_p = 0.0;
    double b_star = 1.0;
    double v_star_b_star = 0.0;
    bool degraded = false;
    std::vector<GuardCheck> guards;
    std::vector<LineSearchStep> steps;
};

struct LineSearchOptions {
    double min_width = 1e-9; // stop and flag degraded below this bracket width
    int max_bisections = 200;
};

struct LineSearchResult {
    double b_star = 1.0;
    bool degraded = false;
    LineSearchTrace trace;
};

/// Coverage estimate u(l) for the interval between two previously chosen p
/// values: value of the left-endpoint policy at the right endpoint, relative
/// to the optimum there.
struct IntervalFactor {
    PValue left_p = PValue::neg_inf();
    PValue right_p = PValue::neg_inf();
    double u = 1.0;
    bool chosen = false; // split target of this round
};

struct Portfolio {
    std::vector<PortfolioEntry> entries;
    PortfolioAlgorithm algorithm = PortfolioAlgorithm::PMean;
    std::optional<double> alpha; // PMean
    std::optional<int> budget;   // Budget and baselines
    std::uint64_t oracle_calls = 0;
    std::uint64_t seed = 0;
    bool degraded = false;
    double final_p = 1.0; // PMean: the p value that ended the loop
    std::vector<LineSearchTrace> traces;
    std::vector<std::vector<IntervalFactor>> interval_history;

    std::size_t size() const { return entries.size(); }
};

struct GridRow {
    PValue p = PValue::neg_inf();
    double best_in_portfolio = 0.0;
    double v_star = 0.0;
    double ratio = 0.0;
};

/// Grid estimate of the worst-case approximation factor Q(portfolio).
struct EvalReport {
    std::vector<GridRow> grid;
    double q_min = 1.0;
    PValue argmin_p = PValue::neg_inf();
};

struct GridSpec {
    int points = 1000;  // total, including the -inf point
    double low = -100.0; // left endpoint of the finite part
};

/// Distinct-p accounting for one algorithm run. The oracle's value cache may
/// persist across runs; a run's oracle-call count is the number of distinct p
/// values it asked to have solved.
class RunCallCounter {
public:
    OracleResult solve(Oracle& oracle, PValue p) {
        keys_.insert(p.key());
        return oracle.solve(p);
    }
    std::uint64_t count() const { return keys_.size(); }

private:
    std::set<std::uint64_t> keys_;
};

/// Bisection search for the largest b such that the optimal policy at p stays
/// an alpha-approximation on [p, b]. Trips the safeguard (degraded result)
/// when the bracket collapses or the bisection budget runs out, which exact
/// oracles never reach.
LineSearchResult line_search(Oracle& oracle, double p, double alpha,
                             RunCallCounter* counter = nullptr,
                             const LineSearchOptions& options = {});

/// Builds an alpha-approximate portfolio for all p <= 1 by walking p from
/// p_floor(N, alpha) to 1 via line searches.
Portfolio p_mean_portfolio(Oracle& oracle, double alpha,
                           const LineSearchOptions& options = {});

/// Greedy heuristic under a hard budget of exactly K oracle calls: p0 first,
/// then 1, then midpoints of the interval with the worst coverage estimate.
Portfolio budget_constrained_portfolio(Oracle& oracle, int K, double p0);

/// Grid search for Q(portfolio): {-inf} plus points - 1 evenly spaced values
/// on [low, 1]. Solves the oracle at every grid point, then fans out
/// read-only over the cached rows.
EvalReport approximation_factor(const Portfolio& portfolio, Oracle& oracle,
                                const GridSpec& grid);

/// Baselines: K p values drawn uniformly from [p0, 1] and solved, or K
/// policies sampled without replacement (no oracle calls). One portfolio per
/// trial.
std::vector<Portfolio> random_p_baseline(Oracle& oracle, int K, double p0, std::uint64_t seed,
                                         int trials);
std::vector<Portfolio> random_policy_baseline(const PolicySet& policies, int K,
                                              std::uint64_t seed, int trials);

/// Runs p_mean_portfolio for each alpha (ascending) and keeps, per resulting
/// portfolio size, the smallest alpha that produced it.
std::map<std::size_t, std::pair<double, Portfolio>> alpha_sweep(Oracle& oracle,
                                                                std::vector<double> alphas);

/// Theorem bound 2 ln(kappa) / ln(1/alpha) + 2 on the p-mean portfolio size.
double portfolio_size_bound(double kappa, double alpha);

/// Default evaluation-grid left endpoint: min(p_floor(N, alpha_min), -100).
double default_grid_low(std::size_t n_stakeholders, double smallest_alpha);

/// The alpha grid of the size-vs-alpha sweep protocol:
/// {0.05, 0.10, ..., 0.95, 0.99}.
std::vector<double> standard_alpha_grid();

void save_portfolio(const Portfolio& portfolio, const std::filesystem::path& path);
Portfolio load_portfolio(const std::filesystem::path& path);

void save_eval_report_csv(const EvalReport& report, const std::filesystem::path& path);

} // namespace pmean
