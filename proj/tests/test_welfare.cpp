#include "pmean/welfare.hpp"

#include "welfare_props.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

using namespace pmean;

TEST_SUITE("welfare") {

TEST_CASE("p_mean of a constant vector is the constant") {
    const std::vector<double> x(7, 3.25);
    for (PValue p : {PValue::neg_inf(), PValue::finite(-5.0), PValue::finite(0.0),
                     PValue::finite(0.5), PValue::finite(1.0)})
        CHECK(p_mean(x, p) == doctest::Approx(3.25).epsilon(1e-14));
}

TEST_CASE("known means") {
    CHECK(p_mean(std::vector<double>{1, 4}, PValue::finite(0.0)) ==
          doctest::Approx(2.0).epsilon(1e-13));
    CHECK(p_mean(std::vector<double>{1, 2, 3, 4}, PValue::finite(1.0)) ==
          doctest::Approx(2.5).epsilon(1e-13));
    CHECK(p_mean(std::vector<double>{1, 4}, PValue::neg_inf()) == doctest::Approx(1.0));
}

TEST_CASE("log_p_mean basics") {
    const double e = std::exp(1.0);
    CHECK(log_p_mean(std::vector<double>{e, e}, PValue::finite(-3.0)) ==
          doctest::Approx(1.0).epsilon(1e-13));
    CHECK(log_p_mean(std::vector<double>{1, 4}, PValue::finite(0.0)) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-13));
}

TEST_CASE("log_p_mean survives 300 orders of magnitude") {
    // arithmetic mean of {1e-150, 1e150} is 0.5e150 up to 1e-300 relative
    const std::vector<double> x{1e-150, 1e150};
    const double expected = std::log(0.5) + 150.0 * std::log(10.0);
    CHECK(log_p_mean(x, PValue::finite(1.0)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("p_mean rejects bad input") {
    CHECK_THROWS_AS(p_mean(std::vector<double>{1.0, 0.0}, PValue::finite(0.5)),
                    std::domain_error);
    CHECK_THROWS_AS(p_mean(std::vector<double>{1.0, -2.0}, PValue::finite(0.5)),
                    std::domain_error);
    CHECK_THROWS_AS(p_mean(std::vector<double>{}, PValue::finite(0.5)), std::domain_error);
    CHECK_THROWS_AS(PValue::finite(1.5), std::domain_error);
    CHECK_THROWS_AS(PValue::finite(std::numeric_limits<double>::quiet_NaN()),
                    std::domain_error);
}

TEST_CASE("p_floor") {
    CHECK(p_floor(4, 0.5) == doctest::Approx(-2.0).epsilon(1e-13));
    CHECK(p_floor(1, 0.37) == 0.0);
    CHECK(p_floor(12, 0.9) == doctest::Approx(-std::log(12.0) / std::log(1.0 / 0.9)));
    CHECK(p_floor(12, 0.9) == doctest::Approx(-23.5848).epsilon(1e-4));
    CHECK(p_floor(2, 0.5) < 0.0);
    CHECK_THROWS_AS(p_floor(4, 0.0), std::domain_error);
    CHECK_THROWS_AS(p_floor(4, 1.0), std::domain_error);
    CHECK_THROWS_AS(p_floor(0, 0.5), std::domain_error);
}

TEST_CASE("slope_bound") {
    CHECK(slope_bound(1.0) == 0.0);
    const double e = std::exp(1.0);
    CHECK(slope_bound(e) == doctest::Approx(e).epsilon(1e-14));
    CHECK(slope_bound(10.0) == doctest::Approx(23.0259).epsilon(1e-5));
    CHECK_THROWS_AS(slope_bound(0.5), std::domain_error);
}

TEST_CASE("PValue ordering and keys") {
    CHECK(PValue::neg_inf() < PValue::finite(-1e308));
    CHECK(PValue::finite(-2.0) < PValue::finite(1.0));
    CHECK(PValue::finite(0.0) == PValue::finite(-0.0));
    CHECK(PValue::finite(0.0).key() == PValue::finite(-0.0).key());
    CHECK(PValue::neg_inf().to_string() == "-inf");
    CHECK_FALSE(PValue::neg_inf() == PValue::finite(-1e300));
}

TEST_CASE("property pack holds on 2000 random cases per property") {
    for (const auto& r : testw::run_welfare_properties(2000, 20240809)) {
        INFO(r.name);
        CHECK(r.failures == 0);
    }
}

} // TEST_SUITE
