// The welfare property pack, shared by the unit suite (small case counts)
// and the acceptance suite (10^4 cases per property at the final
// tolerances).
#pragma once

#include "pmean/rng.hpp"
#include "pmean/welfare.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace testw {

using namespace pmean;

struct PropertyResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
};

inline std::vector<double> random_vector(Rng& rng, std::size_t max_n, double log10_lo,
                                         double log10_hi) {
    const std::size_t n = 1 + rng.below(max_n);
    std::vector<double> x(n);
    for (double& v : x) v = std::pow(10.0, rng.uniform(log10_lo, log10_hi));
    return x;
}

inline PValue random_p(Rng& rng, double lo = -30.0) {
    const double u = rng.uniform();
    if (u < 0.1) return PValue::neg_inf();
    if (u < 0.2) return PValue::finite(0.0);
    return PValue::finite(rng.uniform(lo, 1.0));
}

inline std::vector<PropertyResult> run_welfare_properties(std::size_t cases,
                                                          std::uint64_t seed) {
    std::vector<PropertyResult> results;

    { // monotonicity in p, including p = -inf
        PropertyResult r{"monotonicity", cases, 0};
        Rng rng(derive_seed(seed, 1));
        for (std::size_t i = 0; i < cases; ++i) {
            const std::vector<double> x = random_vector(rng, 12, -3.0, 3.0);
            PValue p = random_p(rng);
            PValue q = random_p(rng);
            if (q < p) std::swap(p, q);
            if (p == q) continue;
            const double fp = p_mean(x, p);
            const double fq = p_mean(x, q);
            if (!(fp <= fq + 1e-12 * fq)) ++r.failures;
        }
        results.push_back(r);
    }

    { // min(x) <= f(x, p) <= max(x)
        PropertyResult r{"bounds", cases, 0};
        Rng rng(derive_seed(seed, 2));
        for (std::size_t i = 0; i < cases; ++i) {
            const std::vector<double> x = random_vector(rng, 12, -6.0, 6.0);
            double lo = x[0], hi = x[0];
            for (double v : x) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const double f = p_mean(x, random_p(rng, -100.0));
            if (!(lo <= f && f <= hi)) ++r.failures;
        }
        results.push_back(r);
    }

    { // continuity across the p = 0 branch switch
        PropertyResult r{"continuity-at-0", cases, 0};
        Rng rng(derive_seed(seed, 3));
        for (std::size_t i = 0; i < cases; ++i) {
            const std::vector<double> x = random_vector(rng, 12, -3.0, 3.0);
            const double eps = rng.uniform() < 0.5 ? 1e-9 : -1e-9;
            const double f0 = p_mean(x, PValue::finite(0.0));
            const double fe = p_mean(x, PValue::finite(eps));
            if (!(std::abs(fe - f0) / f0 <= 1e-6)) ++r.failures;
        }
        results.push_back(r);
    }

    { // f(x, -inf) >= alpha * f(x, p) for all p <= p_floor(N, alpha)
        PropertyResult r{"p0-cutoff", cases, 0};
        Rng rng(derive_seed(seed, 4));
        for (std::size_t i = 0; i < cases; ++i) {
            const std::vector<double> x = random_vector(rng, 12, -3.0, 3.0);
            const double alpha = rng.uniform(0.05, 0.99);
            const double p0 = p_floor(static_cast<std::int64_t>(x.size()), alpha);
            const double p = p0 - rng.uniform(0.0, 50.0);
            const double fmin = p_mean(x, PValue::neg_inf());
            const double fp = p_mean(x, PValue::finite(p));
            if (!(fmin >= alpha * fp - 1e-12)) ++r.failures;
        }
        results.push_back(r);
    }

    { // finite-difference slope of ln f bounded by kappa ln kappa
        PropertyResult r{"slope-bound", cases, 0};
        Rng rng(derive_seed(seed, 5));
        for (std::size_t i = 0; i < cases; ++i) {
            const std::vector<double> x = random_vector(rng, 12, -2.0, 2.0);
            double lo = x[0], hi = x[0];
            for (double v : x) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            const double kappa = hi / lo;
            double p = rng.uniform(-30.0, 1.0);
            double q = rng.uniform(-30.0, 1.0);
            if (q < p) std::swap(p, q);
            if (p == q) continue;
            const double gp = log_p_mean(x, PValue::finite(p));
            const double gq = log_p_mean(x, PValue::finite(q));
            if (!((gq - gp) / (q - p) <= slope_bound(kappa) + 1e-9)) ++r.failures;
        }
        results.push_back(r);
    }

    { // f(beta x, p) = beta f(x, p)
        PropertyResult r{"scale-equivariance", cases, 0};
        Rng rng(derive_seed(seed, 6));
        for (std::size_t i = 0; i < cases; ++i) {
            const std::vector<double> x = random_vector(rng, 12, -3.0, 3.0);
            const double beta = std::pow(10.0, rng.uniform(-3.0, 3.0));
            const PValue p = random_p(rng);
            std::vector<double> bx = x;
            for (double& v : bx) v *= beta;
            const double lhs = p_mean(bx, p);
            const double rhs = beta * p_mean(x, p);
            if (!(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), std::abs(rhs))))
                ++r.failures;
        }
        results.push_back(r);
    }

    return results;
}

} // namespace testw
