#include "pmean/mdp.hpp"

#include "pmean/envs.hpp"
#include "pmean/errors.hpp"
#include "test_oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace pmean;
using namespace testo;

namespace {

FiniteMDP coin_mdp() {
    // two states, one action, symmetric 0.5/0.5 transitions
    FiniteMDP m;
    m.n_states = 2;
    m.n_actions = 1;
    m.n_rewards = 1;
    m.horizon = 2;
    m.initial_state = 0;
    m.reward_lower = 1.0;
    m.reward_upper = 2.0;
    m.transition = {0.5, 0.5, 0.5, 0.5};
    m.rewards = {1.0, 2.0};
    m.finalize();
    return m;
}

FiniteMDP chain_mdp() {
    // deterministic 3-state cycle, 2 actions (advance / stay)
    FiniteMDP m;
    m.n_states = 3;
    m.n_actions = 2;
    m.n_rewards = 2;
    m.horizon = 3;
    m.initial_state = 0;
    m.reward_lower = 1.0;
    m.reward_upper = 9.0;
    m.transition.assign(3 * 2 * 3, 0.0);
    for (std::uint32_t s = 0; s < 3; ++s) {
        m.transition[(s * 2 + 0) * 3 + (s + 1) % 3] = 1.0; // advance
        m.transition[(s * 2 + 1) * 3 + s] = 1.0;           // stay
    }
    m.rewards.assign(2 * 3 * 2, 1.0);
    for (std::uint32_t s = 0; s < 3; ++s) {
        m.rewards[0 * 6 + s * 2 + 0] = 1.0 + s;
        m.rewards[0 * 6 + s * 2 + 1] = 2.0;
        m.rewards[1 * 6 + s * 2 + 0] = 9.0 - s;
        m.rewards[1 * 6 + s * 2 + 1] = 3.0;
    }
    m.finalize();
    return m;
}

} // namespace

TEST_SUITE("mdp") {

TEST_CASE("simulate is deterministic and follows deterministic dynamics") {
    const FiniteMDP m = chain_mdp();
    const Policy advance = single_action_policy(m, 0, "advance");
    const Trajectory t1 = simulate(m, advance, 99);
    const Trajectory t2 = simulate(m, advance, 99);
    CHECK(t1.steps == t2.steps);
    REQUIRE(t1.steps.size() == 3);
    CHECK(t1.steps[0] == std::pair<std::uint32_t, std::uint32_t>{0, 0});
    CHECK(t1.steps[1] == std::pair<std::uint32_t, std::uint32_t>{1, 0});
    CHECK(t1.steps[2] == std::pair<std::uint32_t, std::uint32_t>{2, 0});
}

TEST_CASE("simulate matches the binomial oracle on the coin MDP") {
    const FiniteMDP m = coin_mdp();
    const Policy pol = single_action_policy(m, 0, "only");
    std::size_t hits = 0;
    const std::size_t n = 100000;
    for (std::size_t k = 0; k < n; ++k)
        if (simulate(m, pol, k).steps[1].first == 1) ++hits;
    const double freq = static_cast<double>(hits) / static_cast<double>(n);
    CHECK(freq == doctest::Approx(0.5).epsilon(0.02)); // 0.5 +- 0.01
    CHECK(std::abs(freq - 0.5) < 0.01);
}

TEST_CASE("simulate reports undefined policy cells") {
    const FiniteMDP m = chain_mdp();
    std::vector<std::uint32_t> table(3 * 3, 0);
    table[3 + 1] = Policy::kUndefined; // (state 1, step 2)
    const Policy partial = Policy::deterministic("partial", 3, 2, 3, std::move(table));
    CHECK_THROWS_WITH_AS(simulate(m, partial, 1),
                         doctest::Contains("undefined at (state 1, step 2)"), EvaluationError);
}

TEST_CASE("return_vector sums rewards along the trajectory") {
    const FiniteMDP c = constant_mdp(2.5, 3, 4);
    const Policy pol = single_action_policy(c, 0, "p");
    const Trajectory tau = simulate(c, pol, 7);
    for (double v : return_vector(c, tau)) CHECK(v == doctest::Approx(10.0));

    const FiniteMDP m = chain_mdp();
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const Policy pol2 = random_policy(m, derive_seed(11, rep), rep % 2 == 0, "rv");
        const Trajectory tau2 = simulate(m, pol2, rep);
        ReturnVector expect(m.n_rewards, 0.0);
        for (auto [s, a] : tau2.steps)
            for (std::uint32_t i = 0; i < m.n_rewards; ++i) expect[i] += m.reward(i, s, a);
        CHECK(return_vector(m, tau2) == expect);
    }
}

TEST_CASE("horizon-1 return is the single-step reward") {
    const FiniteMDP m = bandit_mdp({{1.0, 3.0}, {4.0, 2.0}});
    const Trajectory tau = simulate(m, single_action_policy(m, 1, "a1"), 0);
    const ReturnVector g = return_vector(m, tau);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 2.0);
}

TEST_CASE("expected_return_vector matches the brute-force enumerator") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        envs::RandomMdpSpec spec;
        spec.n_states = 4;
        spec.n_actions = 2 + seed % 2;
        spec.n_rewards = 3;
        spec.horizon = 3;
        spec.kappa = 5.0;
        spec.seed = seed;
        const FiniteMDP m = envs::random_mdp(spec);
        const Policy pol = random_policy(m, seed, seed % 3 == 0, "erv");
        const ReturnVector fast = expected_return_vector(m, pol);
        const std::vector<double> slow = brute_expected_return(m, pol);
        for (std::uint32_t i = 0; i < m.n_rewards; ++i)
            CHECK(rel_diff(fast[i], slow[i]) < 1e-12);
    }
}

TEST_CASE("expected return of a deterministic system equals the unique rollout") {
    const FiniteMDP m = chain_mdp();
    const Policy advance = single_action_policy(m, 0, "advance");
    const ReturnVector e = expected_return_vector(m, advance);
    const ReturnVector g = return_vector(m, simulate(m, advance, 3));
    for (std::uint32_t i = 0; i < m.n_rewards; ++i) CHECK(e[i] == doctest::Approx(g[i]));
}

TEST_CASE("ser_value on constant rewards is c * H for every p") {
    const FiniteMDP c = constant_mdp(1.5, 4, 3);
    const Policy pol = single_action_policy(c, 1, "p");
    for (PValue p : {PValue::neg_inf(), PValue::finite(-7.0), PValue::finite(1.0)})
        CHECK(ser_value(c, pol, p) == doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("single-stakeholder ser_value ignores p") {
    const FiniteMDP m = bandit_mdp({{2.0, 5.0}});
    const Policy pol = single_action_policy(m, 1, "a1");
    CHECK(ser_value(m, pol, PValue::neg_inf()) == doctest::Approx(5.0));
    CHECK(ser_value(m, pol, PValue::finite(-3.0)) == doctest::Approx(5.0));
    CHECK(ser_value(m, pol, PValue::finite(1.0)) == doctest::Approx(5.0));
}

TEST_CASE("ser and esr are monotone in p along a grid") {
    envs::RandomMdpSpec spec;
    spec.n_states = 3;
    spec.n_actions = 2;
    spec.n_rewards = 4;
    spec.horizon = 3;
    spec.kappa = 8.0;
    spec.seed = 77;
    const FiniteMDP m = envs::random_mdp(spec);
    const Policy pol = random_policy(m, 8, true, "mono");
    double prev_ser = 0.0, prev_esr = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const PValue p = i == 0 ? PValue::neg_inf()
                                : PValue::finite(-20.0 + 21.0 * (i - 1) / 99.0);
        const double vs = ser_value(m, pol, p);
        const double ve = esr_value_exact(m, pol, p);
        if (i > 0) {
            CHECK(vs >= prev_ser * (1.0 - 1e-9));
            CHECK(ve >= prev_esr * (1.0 - 1e-9));
        }
        prev_ser = vs;
        prev_esr = ve;
        CHECK(vs >= m.horizon * m.reward_lower * (1.0 - 1e-12));
        CHECK(vs <= m.horizon * m.reward_upper * (1.0 + 1e-12));
    }
}

TEST_CASE("esr equals ser at p = 1") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        envs::RandomMdpSpec spec;
        spec.n_states = 3;
        spec.n_actions = 3;
        spec.n_rewards = 3;
        spec.horizon = 3;
        spec.kappa = 4.0;
        spec.seed = seed + 100;
        const FiniteMDP m = envs::random_mdp(spec);
        const Policy pol = random_policy(m, seed, true, "p1");
        CHECK(rel_diff(esr_value_exact(m, pol, PValue::finite(1.0)),
                       ser_value(m, pol, PValue::finite(1.0))) < 1e-12);
    }
}

TEST_CASE("two-path ESR hand computation") {
    // one state, two equally likely actions; G = (1,3) or (3,1)
    const FiniteMDP m = bandit_mdp({{1.0, 3.0}, {3.0, 1.0}});
    const Policy pol = Policy::stochastic("mix", 1, 2, 1, {0.5, 0.5});
    CHECK(esr_value_exact(m, pol, PValue::neg_inf()) == doctest::Approx(1.0).epsilon(1e-12));
    // SER of the same policy is f((2,2)) = 2: the two rules genuinely differ
    CHECK(ser_value(m, pol, PValue::neg_inf()) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("esr_value_exact refuses beyond the path cap") {
    const FiniteMDP m = coin_mdp();
    const Policy pol = single_action_policy(m, 0, "p");
    CHECK_THROWS_AS(esr_value_exact(m, pol, PValue::finite(0.5), 1.0), SizeCapError);
}

TEST_CASE("esr_value_mc: determinism, exactness on deterministic systems") {
    const FiniteMDP m = chain_mdp();
    const Policy advance = single_action_policy(m, 0, "advance");
    const McEstimate a = esr_value_mc(m, advance, PValue::finite(-2.0), 500, 42);
    const McEstimate b = esr_value_mc(m, advance, PValue::finite(-2.0), 500, 42);
    CHECK(a.estimate == b.estimate);
    CHECK(a.stderr_est == 0.0);
    CHECK(a.estimate ==
          doctest::Approx(esr_value_exact(m, advance, PValue::finite(-2.0))).epsilon(1e-12));
}

TEST_CASE("esr_value_mc lands within 4 standard errors of exact") {
    envs::RandomMdpSpec spec;
    spec.n_states = 3;
    spec.n_actions = 2;
    spec.n_rewards = 3;
    spec.horizon = 3;
    spec.kappa = 6.0;
    spec.seed = 4242;
    const FiniteMDP m = envs::random_mdp(spec);
    const Policy pol = random_policy(m, 17, true, "mc");
    const PValue p = PValue::finite(-1.5);
    const double exact = esr_value_exact(m, pol, p);
    const McEstimate est = esr_value_mc(m, pol, p, 100000, 7);
    CHECK(std::abs(est.estimate - exact) <= 4.0 * est.stderr_est);
}

TEST_CASE("condition_number and bound validation") {
    const FiniteMDP c = constant_mdp(2.0, 2, 2);
    CHECK(condition_number(c) == 1.0);
    FiniteMDP m = bandit_mdp({{0.5, 5.0}}, 0.5, 5.0);
    CHECK(condition_number(m) == doctest::Approx(10.0));

    // an entry above the declared upper bound is an error
    FiniteMDP bad = bandit_mdp({{1.0, 2.0}});
    bad.rewards[1] = 7.0;
    bad.reward_lower = 1.0;
    bad.reward_upper = 2.0;
    CHECK_THROWS_AS(bad.finalize(), ValidationError);

    // entries below L are clamped up, with a warning
    FiniteMDP clamp = bandit_mdp({{1.0, 2.0}});
    clamp.rewards[0] = 0.0;
    clamp.reward_lower = 0.5;
    clamp.reward_upper = 2.0;
    const auto warnings = clamp.finalize();
    REQUIRE(warnings.size() == 1);
    CHECK(clamp.reward(0, 0, 0) == 0.5);

    // unspecified bounds: U from the tables, L = 1e-3 U
    FiniteMDP derive = bandit_mdp({{1.0, 8.0}});
    CHECK(derive.reward_upper == 8.0);
    CHECK(derive.reward_lower == doctest::Approx(8e-3));
}

TEST_CASE("log-slope of both aggregation values is bounded by kappa ln kappa") {
    envs::RandomMdpSpec spec;
    spec.n_states = 3;
    spec.n_actions = 2;
    spec.n_rewards = 3;
    spec.horizon = 2;
    spec.kappa = 3.0;
    spec.seed = 5150;
    const FiniteMDP m = envs::random_mdp(spec);
    const Policy pol = random_policy(m, 3, true, "slope");
    const double bound = slope_bound(condition_number(m)) + 1e-6;
    double prev_p = -10.0;
    double prev_ser = std::log(ser_value(m, pol, PValue::finite(prev_p)));
    double prev_esr = std::log(esr_value_exact(m, pol, PValue::finite(prev_p)));
    for (int i = 1; i <= 60; ++i) {
        const double p = -10.0 + 11.0 * i / 60.0;
        const double ls = std::log(ser_value(m, pol, PValue::finite(p)));
        const double le = std::log(esr_value_exact(m, pol, PValue::finite(p)));
        CHECK((ls - prev_ser) / (p - prev_p) <= bound);
        CHECK((le - prev_esr) / (p - prev_p) <= bound);
        prev_p = p;
        prev_ser = ls;
        prev_esr = le;
    }
}

TEST_CASE("MDP JSON round-trip and validation") {
    const std::filesystem::path path =
        std::filesystem::temp_directory_path() / "pmean_test_mdp.json";
    const FiniteMDP m = chain_mdp();
    m.save(path);
    const FiniteMDP loaded = FiniteMDP::load(path);
    CHECK(loaded.content_hash() == m.content_hash());
    CHECK(loaded.state_names == m.state_names);

    FiniteMDP broken = chain_mdp();
    broken.transition[0] += 1e-6; // row off by more than 1e-9
    CHECK_THROWS_AS(broken.finalize(), ValidationError);
    std::filesystem::remove(path);
}

} // TEST_SUITE
