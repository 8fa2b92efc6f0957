#pragma once

#include "pmean/mdp.hpp"
#include "pmean/policy.hpp"
#include "pmean/welfare.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace pmean {

enum class Rule { Esr = 1, Ser = 2 };

enum class EsrMode {
    Auto,       // exact enumeration when the path count fits, MC otherwise
    Exact,      // exact enumeration or refuse
    MonteCarlo, // sampled estimates
};

struct OracleOptions {
    Rule rule = Rule::Ser;
    EsrMode esr_mode = EsrMode::Auto;
    std::size_t mc_samples = 10000;
    std::uint64_t seed = 0;
    double path_cap = 1e6;
    /// When > 0, algorithm comparisons subtract this many standard errors
    /// from both sides conservatively. Off by default: point estimates are
    /// compared directly.
    double stderr_margin_k = 0.0;
};

struct OracleResult {
    PValue p = PValue::neg_inf();
    std::string best_policy_id;
    std::uint32_t best_index = 0;
    double best_value = 0.0;
    std::uint64_t evaluations_performed = 0;
};

struct OracleCallRecord {
    std::uint64_t call_no = 0;
    PValue p = PValue::neg_inf();
    std::string best_policy_id;
    double best_value = 0.0;
};

/// Oracle-call accounting. oracle_calls increments exactly once per solved p;
/// replays from cache do not increment. point_evaluations counts evaluate()
/// queries (cache hits included); values_computed counts fresh per-(policy, p)
/// computations and is the recompute detector.
struct CallLedger {
    std::uint64_t oracle_calls = 0;
    std::uint64_t point_evaluations = 0;
    std::uint64_t values_computed = 0;
    std::vector<OracleCallRecord> calls;
};

/// Pricing backend for one (model, policy set, aggregation rule) triple.
/// value() must be a pure function of (policy index, p) so parallel and
/// repeated evaluation agree bit-for-bit.
class ValueBackend {
public:
    virtual ~ValueBackend() = default;
    virtual std::size_t n_policies() const = 0;
    virtual const std::string& policy_id(std::size_t i) const = 0;
    virtual std::size_t index_of(const std::string& id) const = 0;
    virtual std::size_t n_stakeholders() const = 0;
    /// Builds the per-policy summary (expected returns or the trajectory
    /// distribution) if the backend caches one.
    virtual void prepare(std::size_t i) = 0;
    /// Parallel prefill of all summaries.
    virtual void prepare_all() = 0;
    /// v(policy i, p); writes the standard error (0 for exact backends).
    virtual double value(std::size_t i, PValue p, double* stderr_out) = 0;
    /// Provenance: "ser-exact", "esr-exact" or "esr-mc" for policy i.
    virtual const char* route(std::size_t i) const = 0;
};

/// The welfare-maximization oracle: solve(p) prices every policy in the set
/// and returns the lowest-index argmax. Values are cached per (policy, p);
/// solve() results are cached per p. One orchestrator at a time; solve() may
/// fan out internally.
class Oracle {
public:
    /// Finite-set oracle over pre-built policies.
    Oracle(std::shared_ptr<const FiniteMDP> mdp, std::shared_ptr<const PolicySet> policies,
           OracleOptions options);

    /// Exhaustive oracle over all deterministic policies of the MDP.
    static Oracle exhaustive(std::shared_ptr<const FiniteMDP> mdp, OracleOptions options,
                             double max_count = 1e6, bool stationary = false);

    /// Custom backend (e.g. a generative environment priced by MC).
    Oracle(std::unique_ptr<ValueBackend> backend, OracleOptions options);

    OracleResult solve(PValue p);
    double evaluate(const std::string& policy_id, PValue p);
    double evaluate_index(std::size_t index, PValue p);

    /// Standard error of the cached value, 0 for exact backends or unknown
    /// points.
    double stderr_at(std::size_t index, PValue p) const;

    bool has_solved(PValue p) const;
    const OracleResult& solved_result(PValue p) const;

    /// All-policy value row for a solved p; enables read-only fan-out.
    std::span<const double> values_row(PValue p) const;

    std::size_t n_policies() const { return backend_->n_policies(); }
    std::size_t n_stakeholders() const { return backend_->n_stakeholders(); }
    const std::string& policy_id(std::size_t i) const { return backend_->policy_id(i); }
    std::size_t index_of(const std::string& id) const { return backend_->index_of(id); }

    const CallLedger& ledger() const { return ledger_; }
    const OracleOptions& options() const { return options_; }

    /// The tabular MDP behind the backend, when there is one.
    const FiniteMDP* mdp() const { return mdp_.get(); }
    const PolicySet* policy_set() const { return policies_.get(); }

    /// Evaluation route per policy ("ser-exact" / "esr-exact" / "esr-mc").
    std::vector<std::string> provenance() const;

private:
    std::shared_ptr<const FiniteMDP> mdp_;
    std::shared_ptr<const PolicySet> policies_;
    std::unique_ptr<ValueBackend> backend_;
    OracleOptions options_;
    CallLedger ledger_;

    std::unordered_map<std::uint64_t, std::vector<double>> rows_;
    std::unordered_map<std::uint64_t, std::vector<double>> stderr_rows_;
    std::unordered_map<std::uint64_t, OracleResult> solved_;
    std::unordered_map<std::uint64_t, std::unordered_map<std::size_t, std::pair<double, double>>>
        sparse_;
};

/// Proposition-4.2 bound (q - p) * U * H * kappa * ln(kappa) on the optimum
/// gap when warm-starting the solve at q from the optimal policy at p.
/// Requires finite p < q <= 1.
double warm_start_gap_bound(PValue p, PValue q, const FiniteMDP& mdp);

} // namespace pmean
