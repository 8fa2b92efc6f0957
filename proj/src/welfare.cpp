#include "pmean/welfare.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

namespace pmean {

namespace {

// Below this magnitude the 1/p factor amplifies round-off beyond what the
// power branch gains; the geometric mean is the correct limit.
constexpr double kGeometricSwitch = 1e-8;

void check_positive(std::span<const double> x) {
    if (x.empty()) throw std::domain_error("p_mean: empty utility vector");
    for (double v : x)
        if (!(v > 0.0) || !std::isfinite(v))
            throw std::domain_error("p_mean: utility entries must be strictly positive");
}

} // namespace

PValue PValue::finite(double value) {
    if (!std::isfinite(value) || value > 1.0)
        throw std::domain_error("PValue: finite p must satisfy p <= 1");
    return PValue(false, value);
}

double PValue::value() const {
    if (neg_inf_) throw std::domain_error("PValue: -inf has no finite value");
    return value_;
}

std::uint64_t PValue::key() const {
    if (neg_inf_) return std::bit_cast<std::uint64_t>(-std::numeric_limits<double>::infinity());
    double v = value_ == 0.0 ? 0.0 : value_; // -0.0 -> +0.0
    return std::bit_cast<std::uint64_t>(v);
}

std::string PValue::to_string() const {
    if (neg_inf_) return "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value_);
    return buf;
}

bool PValue::operator<(const PValue& o) const {
    if (neg_inf_) return !o.neg_inf_;
    if (o.neg_inf_) return false;
    return value_ < o.value_;
}

double log_p_mean_from_logs(std::span<const double> log_x, PValue p) {
    const std::size_t n = log_x.size();
    if (n == 0) throw std::domain_error("p_mean: empty utility vector");
    double min_log = log_x[0], max_log = log_x[0];
    for (double lv : log_x) {
        min_log = std::min(min_log, lv);
        max_log = std::max(max_log, lv);
    }

    double result;
    if (p.is_neg_inf()) {
        result = min_log;
    } else {
        const double pv = p.value();
        if (std::abs(pv) < kGeometricSwitch) {
            double acc = 0.0;
            for (double lv : log_x) acc += lv;
            result = acc / static_cast<double>(n);
        } else {
            // (1/p) * (logsumexp(p * ln x_i) - ln n)
            const double shift = pv >= 0.0 ? pv * max_log : pv * min_log;
            double acc = 0.0;
            for (double lv : log_x) acc += std::exp(pv * lv - shift);
            result = (shift + std::log(acc) - std::log(static_cast<double>(n))) / pv;
        }
    }
    return std::clamp(result, min_log, max_log);
}

double log_p_mean(std::span<const double> x, PValue p) {
    check_positive(x);
    constexpr std::size_t kStack = 64;
    double buf[kStack];
    if (x.size() <= kStack) {
        for (std::size_t i = 0; i < x.size(); ++i) buf[i] = std::log(x[i]);
        return log_p_mean_from_logs({buf, x.size()}, p);
    }
    std::vector<double> logs(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) logs[i] = std::log(x[i]);
    return log_p_mean_from_logs(logs, p);
}

double p_mean(std::span<const double> x, PValue p) {
    check_positive(x);
    double lo = x[0], hi = x[0];
    for (double v : x) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double val = std::exp(log_p_mean(x, p));
    // the true mean lies in [min, max]; exp/log round-off may not
    return std::clamp(val, lo, hi);
}

double p_floor(std::int64_t n, double alpha) {
    if (n < 1) throw std::domain_error("p_floor: n must be >= 1");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::domain_error("p_floor: alpha must lie in (0, 1)");
    return 0.0 - std::log(static_cast<double>(n)) / std::log(1.0 / alpha);
}

double slope_bound(double kappa) {
    if (!(kappa >= 1.0)) throw std::domain_error("slope_bound: kappa must be >= 1");
    return kappa * std::log(kappa);
}

} // namespace pmean
