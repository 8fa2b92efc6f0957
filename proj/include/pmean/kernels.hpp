#pragma once

#include "pmean/mdp.hpp"
#include "pmean/policy.hpp"
#include "pmean/welfare.hpp"

#include <cstdint>
#include <vector>

namespace pmean {

// The data-parallel kernels behind the oracle and evaluator, each with a
// serial reference twin. The parallel variants map each policy / grid slot to
// its own output and reduce nowhere, so they are bit-identical to the serial
// ones for every thread count; the tests assert this and tools/bench_eval
// compares their throughput.

/// Expected return vectors for every policy, flattened [policy * N + i].
std::vector<double> batch_expected_returns(const FiniteMDP& mdp, const PolicySet& policies);
std::vector<double> batch_expected_returns_serial(const FiniteMDP& mdp,
                                                  const PolicySet& policies);

/// p-mean of each row of a [n_rows x n] matrix of logged utilities.
/// The oracle feeds per-policy log return vectors through this to price a
/// whole policy set at one p.
std::vector<double> batch_log_mean_values(const std::vector<double>& log_rows, std::size_t n,
                                          PValue p);
std::vector<double> batch_log_mean_values_serial(const std::vector<double>& log_rows,
                                                 std::size_t n, PValue p);

/// Per-sample scalarized returns for a Monte-Carlo estimate; slot k holds
/// f(G(tau_k), p) under the per-sample seed scheme of esr_value_mc.
std::vector<double> mc_scalarized_samples(const FiniteMDP& mdp, const Policy& policy, PValue p,
                                          std::size_t n_samples, std::uint64_t master_seed);
std::vector<double> mc_scalarized_samples_serial(const FiniteMDP& mdp, const Policy& policy,
                                                 PValue p, std::size_t n_samples,
                                                 std::uint64_t master_seed);

/// Fixed-order mean and standard error over sample slots; the single
/// reduction point shared by esr_value_mc and the oracle's MC backend.
McEstimate reduce_mc(std::span<const double> values);

} // namespace pmean
