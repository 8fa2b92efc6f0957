#include "pmean/kernels.hpp"

#include "pmean/parallel.hpp"
#include "pmean/rng.hpp"

#include <cmath>

namespace pmean {

namespace {

void expected_return_into(const FiniteMDP& mdp, const Policy& policy, double* out) {
    const ReturnVector g = expected_return_vector(mdp, policy);
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i];
}

void mc_sample_into(const FiniteMDP& mdp, const Policy& policy, PValue p,
                    std::uint64_t master_seed, std::uint64_t policy_tag, std::size_t k,
                    double* out) {
    const std::uint64_t seed_k = derive_seed(master_seed, policy_tag, p.key(), k);
    const Trajectory tau = simulate(mdp, policy, seed_k);
    *out = p_mean(return_vector(mdp, tau), p);
}

} // namespace

std::vector<double> batch_expected_returns(const FiniteMDP& mdp, const PolicySet& policies) {
    std::vector<double> out(policies.size() * mdp.n_rewards);
    parallel_for(policies.size(), [&](std::size_t i) {
        expected_return_into(mdp, policies[i], out.data() + i * mdp.n_rewards);
    });
    return out;
}

std::vector<double> batch_expected_returns_serial(const FiniteMDP& mdp,
                                                  const PolicySet& policies) {
    std::vector<double> out(policies.size() * mdp.n_rewards);
    for (std::size_t i = 0; i < policies.size(); ++i)
        expected_return_into(mdp, policies[i], out.data() + i * mdp.n_rewards);
    return out;
}

std::vector<double> batch_log_mean_values(const std::vector<double>& log_rows, std::size_t n,
                                          PValue p) {
    const std::size_t rows = n == 0 ? 0 : log_rows.size() / n;
    std::vector<double> out(rows);
    parallel_for(rows, [&](std::size_t i) {
        out[i] = std::exp(log_p_mean_from_logs({log_rows.data() + i * n, n}, p));
    });
    return out;
}

std::vector<double> batch_log_mean_values_serial(const std::vector<double>& log_rows,
                                                 std::size_t n, PValue p) {
    const std::size_t rows = n == 0 ? 0 : log_rows.size() / n;
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i)
        out[i] = std::exp(log_p_mean_from_logs({log_rows.data() + i * n, n}, p));
    return out;
}

std::vector<double> mc_scalarized_samples(const FiniteMDP& mdp, const Policy& policy, PValue p,
                                          std::size_t n_samples, std::uint64_t master_seed) {
    std::vector<double> values(n_samples);
    const std::uint64_t tag = fnv1a64(policy.id());
    parallel_for(n_samples, [&](std::size_t k) {
        mc_sample_into(mdp, policy, p, master_seed, tag, k, &values[k]);
    });
    return values;
}

std::vector<double> mc_scalarized_samples_serial(const FiniteMDP& mdp, const Policy& policy,
                                                 PValue p, std::size_t n_samples,
                                                 std::uint64_t master_seed) {
    std::vector<double> values(n_samples);
    const std::uint64_t tag = fnv1a64(policy.id());
    for (std::size_t k = 0; k < n_samples; ++k)
        mc_sample_into(mdp, policy, p, master_seed, tag, k, &values[k]);
    return values;
}

McEstimate reduce_mc(std::span<const double> values) {
    McEstimate est;
    est.n_samples = values.size();
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    est.estimate = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double m2 = 0.0;
        for (double v : values) m2 += (v - est.estimate) * (v - est.estimate);
        est.stderr_est = std::sqrt(m2 / static_cast<double>(values.size() - 1) /
                                   static_cast<double>(values.size()));
    }
    return est;
}

} // namespace pmean
