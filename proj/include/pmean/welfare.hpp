#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace pmean {

/// A point on the extended parameter line [-inf, 1] indexing a generalized
/// p-mean. Negative infinity is an explicit tag, never a sentinel float;
/// serialized as the JSON string "-inf".
class PValue {
public:
    static PValue neg_inf() { return PValue(true, 0.0); }

    /// Finite parameter; throws std::domain_error unless value is finite
    /// and <= 1.
    static PValue finite(double value);

    bool is_neg_inf() const { return neg_inf_; }
    bool is_finite() const { return !neg_inf_; }

    /// The finite value; requires is_finite().
    double value() const;

    /// Canonical cache/serialization key: finite values by bit pattern with
    /// -0.0 normalized to +0.0, negative infinity as its own key.
    std::uint64_t key() const;

    /// "-inf" or shortest round-trip decimal.
    std::string to_string() const;

    bool operator==(const PValue& o) const { return key() == o.key(); }
    bool operator!=(const PValue& o) const { return !(*this == o); }
    bool operator<(const PValue& o) const;
    bool operator<=(const PValue& o) const { return *this < o || *this == o; }

private:
    PValue(bool neg_inf, double v) : neg_inf_(neg_inf), value_(v) {}
    bool neg_inf_;
    double value_;
};

/// Generalized p-mean f(x, p) of a strictly positive vector:
/// min for p = -inf, geometric mean for p = 0, ((1/N) sum x_i^p)^(1/p)
/// otherwise. Internally evaluated in log space; the result is clamped to
/// [min x, max x], which the exact mean always satisfies.
///
/// Throws std::domain_error on empty input or a non-positive entry.
double p_mean(std::span<const double> x, PValue p);

/// ln f(x, p), stable for entries whose ratio spans hundreds of orders of
/// magnitude.
double log_p_mean(std::span<const double> x, PValue p);

/// Same as log_p_mean but over precomputed ln x_i; the hot path for callers
/// that evaluate one vector at many p values.
double log_p_mean_from_logs(std::span<const double> log_x, PValue p);

/// The cutoff p0 = -ln(n) / ln(1/alpha): the p0-optimal policy is an
/// alpha-approximation for every p <= p0, including p = -inf.
double p_floor(std::int64_t n, double alpha);

/// Upper bound kappa * ln(kappa) on d(ln f(x, p))/dp for vectors with
/// max/min ratio kappa.
double slope_bound(double kappa);

} // namespace pmean
