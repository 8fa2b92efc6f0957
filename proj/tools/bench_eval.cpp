// Benchmark of the OpenMP kernels against their serial reference twins:
// batch policy evaluation, per-p value rows, and Monte-Carlo sampling.

#include "pmean/envs.hpp"
#include "pmean/kernels.hpp"
#include "pmean/parallel.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

using namespace pmean;

namespace {

template <class F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms,
                identical ? "bit-identical" : "MISMATCH");
}

} // namespace

int main() {
    std::printf("threads: %d (set PMEAN_THREADS to change)\n\n", max_threads());

    const envs::DisasterConfig cfg = envs::disaster_reduced_config();
    const FiniteMDP mdp = envs::build_disaster_mdp(cfg);
    const PolicySet policies = envs::generate_disaster_policies(cfg, 4000, 7);

    std::vector<double> ser_out, par_out;
    const double t_ser =
        time_ms([&] { ser_out = batch_expected_returns_serial(mdp, policies); });
    const double t_par = time_ms([&] { par_out = batch_expected_returns(mdp, policies); });
    report("batch_expected_returns", t_ser, t_par, ser_out == par_out);

    std::vector<double> logs(ser_out.size());
    for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(ser_out[i]);
    double t_row_ser = 0.0, t_row_par = 0.0;
    bool rows_equal = true;
    for (double p : {-50.0, -5.0, -0.5, 0.0, 0.5, 1.0}) {
        const PValue pv = PValue::finite(p);
        std::vector<double> a, b;
        t_row_ser +=
            time_ms([&] { a = batch_log_mean_values_serial(logs, mdp.n_rewards, pv); });
        t_row_par += time_ms([&] { b = batch_log_mean_values(logs, mdp.n_rewards, pv); });
        rows_equal = rows_equal && a == b;
    }
    report("batch_log_mean_values x6", t_row_ser, t_row_par, rows_equal);

    const PValue p0 = PValue::finite(-2.0);
    std::vector<double> mc_ser, mc_par;
    const double t_mc_ser = time_ms(
        [&] { mc_ser = mc_scalarized_samples_serial(mdp, policies[0], p0, 200000, 42); });
    const double t_mc_par =
        time_ms([&] { mc_par = mc_scalarized_samples(mdp, policies[0], p0, 200000, 42); });
    report("mc_scalarized_samples", t_mc_ser, t_mc_par, mc_ser == mc_par);

    return 0;
}
