#include "pmean/oracle.hpp"

#include "pmean/errors.hpp"
#include "pmean/kernels.hpp"
#include "pmean/parallel.hpp"
#include "pmean/rng.hpp"

#include <algorithm>
#include <cmath>

namespace pmean {

namespace {

/// Tabular backend: SER priced from cached expected-return vectors, ESR from
/// cached trajectory distributions or Monte-Carlo sampling per the mode.
class TabularBackend final : public ValueBackend {
public:
    TabularBackend(std::shared_ptr<const FiniteMDP> mdp,
                   std::shared_ptr<const PolicySet> policies, const OracleOptions& opt)
        : mdp_(std::move(mdp)), policies_(std::move(policies)), opt_(opt) {
        const std::size_t n = policies_->size();
        if (n == 0) throw ValidationError("oracle: policy set is empty");
        policies_->validate();
        prepared_.assign(n, 0);
        route_.assign(n, Route::Unset);
        if (opt_.rule == Rule::Ser) {
            log_returns_.assign(n * mdp_->n_rewards, 0.0);
        } else {
            dists_.resize(n);
        }
    }

    std::size_t n_policies() const override { return policies_->size(); }
    const std::string& policy_id(std::size_t i) const override {
        return (*policies_)[i].id();
    }
    std::size_t index_of(const std::string& id) const override {
        return policies_->index_of(id);
    }
    std::size_t n_stakeholders() const override { return mdp_->n_rewards; }

    void prepare(std::size_t i) override {
        if (prepared_[i]) return;
        if (opt_.rule == Rule::Ser) {
            const ReturnVector g = expected_return_vector(*mdp_, (*policies_)[i]);
            for (std::uint32_t r = 0; r < mdp_->n_rewards; ++r)
                log_returns_[i * mdp_->n_rewards + r] = std::log(g[r]);
            route_[i] = Route::SerExact;
        } else {
            prepare_esr(i);
        }
        prepared_[i] = 1;
    }

    void prepare_all() override {
        parallel_for(policies_->size(), [&](std::size_t i) { prepare(i); });
    }

    double value(std::size_t i, PValue p, double* stderr_out) override {
        prepare(i);
        *stderr_out = 0.0;
        switch (route_[i]) {
        case Route::SerExact:
            return std::exp(log_p_mean_from_logs(
                {log_returns_.data() + i * mdp_->n_rewards, mdp_->n_rewards}, p));
        case Route::EsrExact: {
            const PathDist& d = dists_[i];
            const std::size_t N = mdp_->n_rewards;
            double acc = 0.0;
            for (std::size_t k = 0; k < d.probs.size(); ++k)
                acc += d.probs[k] *
                       std::exp(log_p_mean_from_logs({d.log_returns.data() + k * N, N}, p));
            return acc;
        }
        case Route::EsrMc: {
            const std::vector<double> samples = mc_scalarized_samples(
                *mdp_, (*policies_)[i], p, opt_.mc_samples, opt_.seed);
            const McEstimate est = reduce_mc(samples);
            *stderr_out = est.stderr_est;
            return est.estimate;
        }
        case Route::Unset: break;
        }
        throw EvaluationError("oracle: policy summary missing");
    }

    const char* route(std::size_t i) const override {
        switch (route_[i]) {
        case Route::SerExact: return "ser-exact";
        case Route::EsrExact: return "esr-exact";
        case Route::EsrMc: return "esr-mc";
        case Route::Unset: break;
        }
        return "unset";
    }

private:
    enum class Route : std::uint8_t { Unset, SerExact, EsrExact, EsrMc };

    struct PathDist {
        std::vector<double> probs;
        std::vector<double> log_returns; // [k * N + r]
    };

    void prepare_esr(std::size_t i) {
        const Policy& pol = (*policies_)[i];
        const bool allow_mc = opt_.esr_mode != EsrMode::Exact;
        const bool force_mc = opt_.esr_mode == EsrMode::MonteCarlo;
        if (!force_mc) {
            const double count = count_trajectories(*mdp_, pol);
            if (count <= opt_.path_cap) {
                const TrajectoryDistribution dist =
                    enumerate_trajectories(*mdp_, pol, opt_.path_cap);
                PathDist d;
                d.probs = dist.probs;
                d.log_returns.resize(dist.returns.size());
                for (std::size_t k = 0; k < dist.returns.size(); ++k)
                    d.log_returns[k] = std::log(dist.returns[k]);
                dists_[i] = std::move(d);
                route_[i] = Route::EsrExact;
                return;
            }
            if (!allow_mc) {
                char buf[160];
                std::snprintf(buf, sizeof(buf),
                              "oracle: exact ESR for policy '%s' needs %.3g paths, cap is %.3g",
                              pol.id().c_str(), count, opt_.path_cap);
                throw SizeCapError(buf);
            }
        }
        route_[i] = Route::EsrMc;
    }

    std::shared_ptr<const FiniteMDP> mdp_;
    std::shared_ptr<const PolicySet> policies_;
    OracleOptions opt_;
    std::vector<std::uint8_t> prepared_;
    std::vector<Route> route_;
    std::vector<double> log_returns_; // SER: [i * N + r]
    std::vector<PathDist> dists_;     // ESR exact
};

} // namespace

Oracle::Oracle(std::shared_ptr<const FiniteMDP> mdp, std::shared_ptr<const PolicySet> policies,
               OracleOptions options)
    : mdp_(std::move(mdp)), policies_(std::move(policies)), options_(options) {
    backend_ = std::make_unique<TabularBackend>(mdp_, policies_, options_);
}

Oracle Oracle::exhaustive(std::shared_ptr<const FiniteMDP> mdp, OracleOptions options,
                          double max_count, bool stationary) {
    auto set = std::make_shared<PolicySet>(
        enumerate_deterministic_policies(*mdp, max_count, stationary));
    return Oracle(std::move(mdp), std::move(set), options);
}

Oracle::Oracle(std::unique_ptr<ValueBackend> backend, OracleOptions options)
    : backend_(std::move(backend)), options_(options) {
    if (backend_->n_policies() == 0) throw ValidationError("oracle: policy set is empty");
}

OracleResult Oracle::solve(PValue p) {
    const std::uint64_t key = p.key();
    if (auto it = solved_.find(key); it != solved_.end()) return it->second;

    backend_->prepare_all();
    const std::size_t n = backend_->n_policies();
    std::vector<double> row(n), errs(n);
    parallel_for(n, [&](std::size_t i) { row[i] = backend_->value(i, p, &errs[i]); });
    ledger_.values_computed += n;

    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (row[i] > row[best]) best = i; // lowest-index argmax on ties

    OracleResult res;
    res.p = p;
    res.best_index = static_cast<std::uint32_t>(best);
    res.best_policy_id = backend_->policy_id(best);
    res.best_value = row[best];
    res.evaluations_performed = n;

    ledger_.oracle_calls += 1;
    ledger_.calls.push_back({ledger_.oracle_calls, p, res.best_policy_id, res.best_value});

    rows_[key] = std::move(row);
    stderr_rows_[key] = std::move(errs);
    sparse_.erase(key); // the full row supersedes point entries
    solved_[key] = res;
    return res;
}

double Oracle::evaluate(const std::string& policy_id, PValue p) {
    return evaluate_index(backend_->index_of(policy_id), p);
}

double Oracle::evaluate_index(std::size_t index, PValue p) {
    if (index >= backend_->n_policies())
        throw ValidationError("oracle: policy index out of range");
    ledger_.point_evaluations += 1;
    const std::uint64_t key = p.key();
    if (auto it = rows_.find(key); it != rows_.end()) return it->second[index];
    auto& bucket = sparse_[key];
    if (auto it = bucket.find(index); it != bucket.end()) return it->second.first;
    backend_->prepare(index);
    double se = 0.0;
    const double v = backend_->value(index, p, &se);
    ledger_.values_computed += 1;
    bucket.emplace(index, std::make_pair(v, se));
    return v;
}

double Oracle::stderr_at(std::size_t index, PValue p) const {
    const std::uint64_t key = p.key();
    if (auto it = stderr_rows_.find(key); it != stderr_rows_.end()) return it->second[index];
    if (auto it = sparse_.find(key); it != sparse_.end())
        if (auto jt = it->second.find(index); jt != it->second.end()) return jt->second.second;
    return 0.0;
}

bool Oracle::has_solved(PValue p) const { return solved_.count(p.key()) > 0; }

const OracleResult& Oracle::solved_result(PValue p) const {
    auto it = solved_.find(p.key());
    if (it == solved_.end())
        throw EvaluationError("oracle: p = " + p.to_string() + " has not been solved");
    return it->second;
}

std::span<const double> Oracle::values_row(PValue p) const {
    auto it = rows_.find(p.key());
    if (it == rows_.end())
        throw EvaluationError("oracle: p = " + p.to_string() + " has not been solved");
    return it->second;
}

std::vector<std::string> Oracle::provenance() const {
    std::vector<std::string> out;
    out.reserve(backend_->n_policies());
    for (std::size_t i = 0; i < backend_->n_policies(); ++i) out.emplace_back(backend_->route(i));
    return out;
}

double warm_start_gap_bound(PValue p, PValue q, const FiniteMDP& mdp) {
    if (!p.is_finite() || !q.is_finite())
        throw std::domain_error("warm_start_gap_bound: p and q must be finite");
    if (!(p.value() < q.value()))
        throw std::domain_error("warm_start_gap_bound: requires p < q");
    const double kappa = condition_number(mdp);
    return (q.value() - p.value()) * mdp.reward_upper * mdp.horizon * kappa * std::log(kappa);
}

} // namespace pmean
