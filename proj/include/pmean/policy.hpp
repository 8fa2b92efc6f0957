#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace pmean {

struct FiniteMDP;

enum class PolicyKind { Deterministic, Stochastic };

/// Time-dependent tabular policy: (state, step h in [1, H]) -> action
/// distribution, one-hot for deterministic policies. Identified by a stable
/// id within its policy set. Immutable after construction.
class Policy {
public:
    static constexpr std::uint32_t kUndefined = std::numeric_limits<std::uint32_t>::max();

    /// Empty policy; invalid until assigned from one of the factories.
    Policy() = default;

    /// table[(h-1)*n_states + s] = action index, or kUndefined.
    static Policy deterministic(std::string id, std::uint32_t n_states, std::uint32_t n_actions,
                                int horizon, std::vector<std::uint32_t> table);

    /// dist[((h-1)*n_states + s)*n_actions + a]; a row of all zeros marks an
    /// undefined (state, step) pair. Rows must sum to 1 within 1e-9.
    static Policy stochastic(std::string id, std::uint32_t n_states, std::uint32_t n_actions,
                             int horizon, std::vector<double> dist);

    const std::string& id() const { return id_; }
    PolicyKind kind() const { return kind_; }
    std::uint32_t n_states() const { return n_states_; }
    std::uint32_t n_actions() const { return n_actions_; }
    int horizon() const { return horizon_; }

    bool defined_at(std::uint32_t s, int h) const;

    /// Deterministic action at (s, h); requires Deterministic kind.
    std::uint32_t action_at(std::uint32_t s, int h) const;

    double prob(std::uint32_t s, int h, std::uint32_t a) const;

    /// Action sampled from the (s, h) row using a uniform draw in [0, 1).
    std::uint32_t sample_action(std::uint32_t s, int h, double u) const;

    /// Visits (action, probability) pairs with positive probability.
    template <class F>
    void for_each_action(std::uint32_t s, int h, F&& f) const {
        const std::size_t cell = cell_index(s, h);
        if (kind_ == PolicyKind::Deterministic) {
            const std::uint32_t a = det_[cell];
            if (a != kUndefined) f(a, 1.0);
            return;
        }
        const double* row = dist_.data() + cell * n_actions_;
        for (std::uint32_t a = 0; a < n_actions_; ++a)
            if (row[a] > 0.0) f(a, row[a]);
    }

    /// Checks row normalization and dimension consistency; throws
    /// ValidationError with the offending (state, step).
    void validate() const;

    std::uint64_t content_hash() const;

private:
    std::size_t cell_index(std::uint32_t s, int h) const;

    std::string id_;
    PolicyKind kind_ = PolicyKind::Deterministic;
    std::uint32_t n_states_ = 0;
    std::uint32_t n_actions_ = 0;
    int horizon_ = 0;
    std::vector<std::uint32_t> det_;
    std::vector<double> dist_;
};

/// Ordered list of policies with unique ids; the order is stable across runs
/// and serialization round-trips.
struct PolicySet {
    std::vector<Policy> policies;
    std::string generator;     // source metadata
    std::uint64_t seed = 0;
    std::uint64_t mdp_ref = 0; // content hash of the owning MDP

    std::size_t size() const { return policies.size(); }
    const Policy& operator[](std::size_t i) const { return policies[i]; }

    /// Index of a policy id; throws ValidationError if unknown.
    std::size_t index_of(const std::string& id) const;
    bool contains(const std::string& id) const;

    /// Throws ValidationError on duplicate ids.
    void validate() const;

    std::uint64_t content_hash() const;

private:
    mutable std::map<std::string, std::size_t, std::less<>> index_; // built lazily
    void build_index() const;
};

/// All deterministic policies of the MDP, lexicographically ordered by action
/// indices (cell order: state-major, then step). With stationary = true the
/// same state->action map is repeated across steps and only |A|^|S| policies
/// exist. Refuses with the computed count when it exceeds max_count.
PolicySet enumerate_deterministic_policies(const FiniteMDP& mdp, double max_count,
                                           bool stationary = false);

/// Canonical JSON persistence; two saves of the same set are byte-identical.
void save_policy_set(const PolicySet& set, const std::filesystem::path& path);
PolicySet load_policy_set(const std::filesystem::path& path);

} // namespace pmean
