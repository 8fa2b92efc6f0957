#include "pmean/mdp.hpp"

#include "pmean/errors.hpp"
#include "pmean/kernels.hpp"
#include "pmean/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace pmean {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kRowSumTol = 1e-9;

std::string format_pair(std::uint32_t s, int h) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(state %u, step %d)", s, h);
    return buf;
}

} // namespace

std::span<const std::pair<std::uint32_t, double>> FiniteMDP::successors(std::uint32_t s,
                                                                        std::uint32_t a) const {
    const std::size_t row = static_cast<std::size_t>(s) * n_actions + a;
    return {succ_list.data() + succ_offsets[row], succ_offsets[row + 1] - succ_offsets[row]};
}

std::vector<std::string> FiniteMDP::finalize() {
    std::vector<std::string> warnings;
    if (n_states < 1 || n_actions < 1 || n_rewards < 1)
        throw ValidationError("mdp: states, actions and reward functions must be nonempty");
    if (horizon < 1) throw ValidationError("mdp: horizon must be >= 1");
    if (initial_state >= n_states) throw ValidationError("mdp: initial_state out of range");
    const std::size_t S = n_states, A = n_actions, N = n_rewards;
    if (transition.size() != S * A * S)
        throw ValidationError("mdp: transition table has wrong shape");
    if (rewards.size() != N * S * A) throw ValidationError("mdp: reward tables have wrong shape");

    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                const double pr = transition[(s * A + a) * S + s2];
                if (pr < 0.0)
                    throw ValidationError("mdp: negative transition mass at /transition/" +
                                          std::to_string(s) + "/" + std::to_string(a));
                sum += pr;
            }
            if (std::abs(sum - 1.0) > kRowSumTol)
                throw ValidationError("mdp: transition row /transition/" + std::to_string(s) +
                                      "/" + std::to_string(a) + " sums to " +
                                      std::to_string(sum));
        }
    }

    double observed_max = -std::numeric_limits<double>::infinity();
    for (double r : rewards) observed_max = std::max(observed_max, r);
    if (reward_upper == 0.0 && reward_lower == 0.0) {
        if (!(observed_max > 0.0))
            throw ValidationError("mdp: cannot derive reward bounds, no positive reward entry");
        reward_upper = observed_max;
        reward_lower = 1e-3 * reward_upper;
    }
    if (!(reward_lower > 0.0)) throw ValidationError("mdp: reward_lower must be > 0");
    if (reward_upper < reward_lower)
        throw ValidationError("mdp: reward_upper must be >= reward_lower");
    if (observed_max > reward_upper * (1.0 + 1e-12))
        throw ValidationError("mdp: reward entry " + std::to_string(observed_max) +
                              " exceeds declared upper bound " + std::to_string(reward_upper));
    std::size_t clamped = 0;
    for (double& r : rewards) {
        if (r < reward_lower) {
            r = reward_lower;
            ++clamped;
        }
    }
    if (clamped > 0)
        warnings.push_back("mdp: clamped " + std::to_string(clamped) +
                           " reward entries up to L=" + std::to_string(reward_lower));

    if (state_names.empty())
        for (std::size_t s = 0; s < S; ++s) state_names.push_back("s" + std::to_string(s));
    if (action_names.empty())
        for (std::size_t a = 0; a < A; ++a) action_names.push_back("a" + std::to_string(a));
    if (state_names.size() != S || action_names.size() != A)
        throw ValidationError("mdp: name lists do not match table dimensions");

    succ_offsets.assign(S * A + 1, 0);
    succ_list.clear();
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            for (std::size_t s2 = 0; s2 < S; ++s2) {
                const double pr = transition[(s * A + a) * S + s2];
                if (pr > 0.0) succ_list.emplace_back(static_cast<std::uint32_t>(s2), pr);
            }
            succ_offsets[s * A + a + 1] = succ_list.size();
        }
    }
    return warnings;
}

std::uint64_t FiniteMDP::content_hash() const {
    std::uint64_t h = fnv1a64("pmean.mdp.v1");
    h = fnv1a64_accum(h, n_states);
    h = fnv1a64_accum(h, n_actions);
    h = fnv1a64_accum(h, n_rewards);
    h = fnv1a64_accum(h, static_cast<std::uint64_t>(horizon));
    h = fnv1a64_accum(h, initial_state);
    h = fnv1a64_accum(h, std::bit_cast<std::uint64_t>(reward_lower));
    h = fnv1a64_accum(h, std::bit_cast<std::uint64_t>(reward_upper));
    for (double v : transition) h = fnv1a64_accum(h, std::bit_cast<std::uint64_t>(v));
    for (double v : rewards) h = fnv1a64_accum(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

double condition_number(const FiniteMDP& mdp) { return mdp.reward_upper / mdp.reward_lower; }

void FiniteMDP::save(const std::filesystem::path& path) const {
    ordered_json j;
    j["states"] = state_names;
    j["actions"] = action_names;
    ordered_json trans_json = ordered_json::array();
    for (std::uint32_t s = 0; s < n_states; ++s) {
        ordered_json per_s = ordered_json::array();
        for (std::uint32_t a = 0; a < n_actions; ++a) {
            ordered_json row = ordered_json::array();
            for (std::uint32_t s2 = 0; s2 < n_states; ++s2) row.push_back(trans(s, a, s2));
            per_s.push_back(std::move(row));
        }
        trans_json.push_back(std::move(per_s));
    }
    j["transition"] = std::move(trans_json);
    ordered_json rews = ordered_json::array();
    for (std::uint32_t i = 0; i < n_rewards; ++i) {
        ordered_json table = ordered_json::array();
        for (std::uint32_t s = 0; s < n_states; ++s) {
            ordered_json row = ordered_json::array();
            for (std::uint32_t a = 0; a < n_actions; ++a) row.push_back(reward(i, s, a));
            table.push_back(std::move(row));
        }
        rews.push_back(std::move(table));
    }
    j["rewards"] = std::move(rews);
    j["horizon"] = horizon;
    j["initial_state"] = initial_state;
    j["reward_bounds"] = {reward_lower, reward_upper};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("mdp: cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

FiniteMDP FiniteMDP::load(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("mdp: cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("mdp: " + path.string() + ": " + e.what());
    }

    FiniteMDP mdp;
    try {
        mdp.state_names = j.at("states").get<std::vector<std::string>>();
        mdp.action_names = j.at("actions").get<std::vector<std::string>>();
        mdp.n_states = static_cast<std::uint32_t>(mdp.state_names.size());
        mdp.n_actions = static_cast<std::uint32_t>(mdp.action_names.size());
        mdp.horizon = j.at("horizon").get<int>();
        mdp.initial_state = j.at("initial_state").get<std::uint32_t>();
        const auto& trans = j.at("transition");
        if (trans.size() != mdp.n_states) throw ValidationError("/transition: wrong outer size");
        for (std::size_t s = 0; s < trans.size(); ++s) {
            if (trans[s].size() != mdp.n_actions)
                throw ValidationError("/transition/" + std::to_string(s) + ": wrong size");
            for (std::size_t a = 0; a < trans[s].size(); ++a) {
                const auto& row = trans[s][a];
                if (row.size() != mdp.n_states)
                    throw ValidationError("/transition/" + std::to_string(s) + "/" +
                                          std::to_string(a) + ": wrong row length");
                for (const auto& v : row) mdp.transition.push_back(v.get<double>());
            }
        }
        const auto& rews = j.at("rewards");
        mdp.n_rewards = static_cast<std::uint32_t>(rews.size());
        for (std::size_t i = 0; i < rews.size(); ++i) {
            if (rews[i].size() != mdp.n_states)
                throw ValidationError("/rewards/" + std::to_string(i) + ": wrong size");
            for (std::size_t s = 0; s < rews[i].size(); ++s) {
                const auto& row = rews[i][s];
                if (row.size() != mdp.n_actions)
                    throw ValidationError("/rewards/" + std::to_string(i) + "/" +
                                          std::to_string(s) + ": wrong row length");
                for (const auto& v : row) mdp.rewards.push_back(v.get<double>());
            }
        }
        if (j.contains("reward_bounds")) {
            mdp.reward_lower = j["reward_bounds"].at(0).get<double>();
            mdp.reward_upper = j["reward_bounds"].at(1).get<double>();
        }
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError("mdp: " + path.string() + ": " + e.what());
    }
    auto w = mdp.finalize();
    if (warnings) *warnings = std::move(w);
    return mdp;
}

Trajectory simulate(const FiniteMDP& mdp, const Policy& policy, std::uint64_t seed) {
    Rng action_rng(derive_seed(seed, 0x414354ULL)); // action sub-stream
    Rng state_rng(derive_seed(seed, 0x535441ULL));  // successor sub-stream
    Trajectory tau;
    tau.seed = seed;
    tau.steps.reserve(mdp.horizon);
    std::uint32_t s = mdp.initial_state;
    for (int h = 1; h <= mdp.horizon; ++h) {
        if (!policy.defined_at(s, h))
            throw EvaluationError("simulate: policy '" + policy.id() + "' undefined at " +
                                  format_pair(s, h));
        const std::uint32_t a = policy.sample_action(s, h, action_rng.uniform());
        tau.steps.emplace_back(s, a);
        if (h < mdp.horizon) {
            const double u = state_rng.uniform();
            auto succ = mdp.successors(s, a);
            double acc = 0.0;
            std::uint32_t next = succ.empty() ? s : succ.back().first;
            for (const auto& [s2, pr] : succ) {
                acc += pr;
                if (u < acc) {
                    next = s2;
                    break;
                }
            }
            s = next;
        }
    }
    return tau;
}

ReturnVector return_vector(const FiniteMDP& mdp, const Trajectory& trajectory) {
    if (trajectory.steps.size() != static_cast<std::size_t>(mdp.horizon))
        throw EvaluationError("return_vector: trajectory length does not match horizon");
    ReturnVector g(mdp.n_rewards, 0.0);
    for (const auto& [s, a] : trajectory.steps)
        for (std::uint32_t i = 0; i < mdp.n_rewards; ++i) g[i] += mdp.reward(i, s, a);
    return g;
}

ReturnVector expected_return_vector(const FiniteMDP& mdp, const Policy& policy) {
    const std::uint32_t S = mdp.n_states;
    ReturnVector ret(mdp.n_rewards, 0.0);
    std::vector<double> occ(S, 0.0), next(S, 0.0);
    occ[mdp.initial_state] = 1.0;
    for (int h = 1; h <= mdp.horizon; ++h) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::uint32_t s = 0; s < S; ++s) {
            const double w = occ[s];
            if (w <= 0.0) continue;
            if (!policy.defined_at(s, h))
                throw EvaluationError("expected_return_vector: policy '" + policy.id() +
                                      "' undefined at " + format_pair(s, h));
            policy.for_each_action(s, h, [&](std::uint32_t a, double pa) {
                const double wa = w * pa;
                for (std::uint32_t i = 0; i < mdp.n_rewards; ++i)
                    ret[i] += wa * mdp.reward(i, s, a);
                if (h < mdp.horizon)
                    for (const auto& [s2, pr] : mdp.successors(s, a)) next[s2] += wa * pr;
            });
        }
        std::swap(occ, next);
    }
    return ret;
}

double ser_value(const FiniteMDP& mdp, const Policy& policy, PValue p) {
    const ReturnVector g = expected_return_vector(mdp, policy);
    return p_mean(g, p);
}

double count_trajectories(const FiniteMDP& mdp, const Policy& policy) {
    const std::uint32_t S = mdp.n_states;
    std::vector<double> cnt(S, 0.0), prev(S, 0.0);
    // backward: cnt[s] = number of completions from (h, s)
    for (int h = mdp.horizon; h >= 1; --h) {
        for (std::uint32_t s = 0; s < S; ++s) {
            double total = 0.0;
            if (policy.defined_at(s, h)) {
                policy.for_each_action(s, h, [&](std::uint32_t a, double) {
                    if (h == mdp.horizon) {
                        total += 1.0;
                    } else {
                        for (const auto& [s2, pr] : mdp.successors(s, a)) {
                            (void)pr;
                            total += prev[s2];
                        }
                    }
                });
            }
            cnt[s] = total;
        }
        std::swap(cnt, prev);
    }
    return prev[mdp.initial_state];
}

namespace {

void enumerate_rec(const FiniteMDP& mdp, const Policy& policy, int h, std::uint32_t s,
                   double prob, std::vector<double>& g, TrajectoryDistribution& out) {
    if (!policy.defined_at(s, h))
        throw EvaluationError("enumerate_trajectories: policy '" + policy.id() +
                              "' undefined at " + format_pair(s, h));
    policy.for_each_action(s, h, [&](std::uint32_t a, double pa) {
        for (std::uint32_t i = 0; i < mdp.n_rewards; ++i) g[i] += mdp.reward(i, s, a);
        if (h == mdp.horizon) {
            out.probs.push_back(prob * pa);
            out.returns.insert(out.returns.end(), g.begin(), g.end());
            ++out.n_paths;
        } else {
            for (const auto& [s2, pr] : mdp.successors(s, a))
                enumerate_rec(mdp, policy, h + 1, s2, prob * pa * pr, g, out);
        }
        for (std::uint32_t i = 0; i < mdp.n_rewards; ++i) g[i] -= mdp.reward(i, s, a);
    });
}

} // namespace

TrajectoryDistribution enumerate_trajectories(const FiniteMDP& mdp, const Policy& policy,
                                              double path_cap) {
    const double count = count_trajectories(mdp, policy);
    if (!(count <= path_cap)) {
        char buf[128];
        std::snprintf(buf, sizeof(buf),
                      "enumerate_trajectories: %.3g paths exceed the cap of %.3g", count,
                      path_cap);
        throw SizeCapError(buf);
    }
    TrajectoryDistribution out;
    out.n_rewards = mdp.n_rewards;
    const auto reserve = static_cast<std::size_t>(count);
    out.probs.reserve(reserve);
    out.returns.reserve(reserve * mdp.n_rewards);
    std::vector<double> g(mdp.n_rewards, 0.0);
    enumerate_rec(mdp, policy, 1, mdp.initial_state, 1.0, g, out);
    return out;
}

double esr_value_exact(const FiniteMDP& mdp, const Policy& policy, PValue p, double path_cap) {
    const TrajectoryDistribution dist = enumerate_trajectories(mdp, policy, path_cap);
    double acc = 0.0;
    for (std::size_t k = 0; k < dist.n_paths; ++k)
        acc += dist.probs[k] * p_mean(dist.return_of(k), p);
    return acc;
}

McEstimate esr_value_mc(const FiniteMDP& mdp, const Policy& policy, PValue p,
                        std::size_t n_samples, std::uint64_t master_seed) {
    if (n_samples < 1) throw ValidationError("esr_value_mc: n_samples must be >= 1");
    // parallel slot fill + fixed-order reduction: bit-identical for every
    // thread count
    const std::vector<double> values =
        mc_scalarized_samples(mdp, policy, p, n_samples, master_seed);
    return reduce_mc(values);
}

} // namespace pmean
