#include "pmean/policy.hpp"

#include "pmean/errors.hpp"
#include "pmean/mdp.hpp"
#include "pmean/rng.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pmean {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kDistTol = 1e-9;

std::string zero_padded(std::size_t value, int width) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%0*zu", std::min(width, 32), value);
    return buf;
}

} // namespace

std::size_t Policy::cell_index(std::uint32_t s, int h) const {
    return static_cast<std::size_t>(h - 1) * n_states_ + s;
}

Policy Policy::deterministic(std::string id, std::uint32_t n_states, std::uint32_t n_actions,
                             int horizon, std::vector<std::uint32_t> table) {
    Policy p;
    p.id_ = std::move(id);
    p.kind_ = PolicyKind::Deterministic;
    p.n_states_ = n_states;
    p.n_actions_ = n_actions;
    p.horizon_ = horizon;
    p.det_ = std::move(table);
    p.validate();
    return p;
}

Policy Policy::stochastic(std::string id, std::uint32_t n_states, std::uint32_t n_actions,
                          int horizon, std::vector<double> dist) {
    Policy p;
    p.id_ = std::move(id);
    p.kind_ = PolicyKind::Stochastic;
    p.n_states_ = n_states;
    p.n_actions_ = n_actions;
    p.horizon_ = horizon;
    p.dist_ = std::move(dist);
    p.validate();
    return p;
}

bool Policy::defined_at(std::uint32_t s, int h) const {
    if (s >= n_states_ || h < 1 || h > horizon_) return false;
    const std::size_t cell = cell_index(s, h);
    if (kind_ == PolicyKind::Deterministic) return det_[cell] != kUndefined;
    const double* row = dist_.data() + cell * n_actions_;
    for (std::uint32_t a = 0; a < n_actions_; ++a)
        if (row[a] > 0.0) return true;
    return false;
}

std::uint32_t Policy::action_at(std::uint32_t s, int h) const {
    if (kind_ != PolicyKind::Deterministic)
        throw EvaluationError("policy '" + id_ + "': action_at requires a deterministic policy");
    return det_[cell_index(s, h)];
}

double Policy::prob(std::uint32_t s, int h, std::uint32_t a) const {
    const std::size_t cell = cell_index(s, h);
    if (kind_ == PolicyKind::Deterministic) return det_[cell] == a ? 1.0 : 0.0;
    return dist_[cell * n_actions_ + a];
}

std::uint32_t Policy::sample_action(std::uint32_t s, int h, double u) const {
    const std::size_t cell = cell_index(s, h);
    if (kind_ == PolicyKind::Deterministic) return det_[cell];
    const double* row = dist_.data() + cell * n_actions_;
    double acc = 0.0;
    std::uint32_t last = 0;
    for (std::uint32_t a = 0; a < n_actions_; ++a) {
        if (row[a] <= 0.0) continue;
        acc += row[a];
        last = a;
        if (u < acc) return a;
    }
    return last;
}

void Policy::validate() const {
    if (n_states_ < 1 || n_actions_ < 1 || horizon_ < 1)
        throw ValidationError("policy '" + id_ + "': empty dimensions");
    const std::size_t cells = static_cast<std::size_t>(n_states_) * horizon_;
    if (kind_ == PolicyKind::Deterministic) {
        if (det_.size() != cells)
            throw ValidationError("policy '" + id_ + "': table has wrong shape");
        for (std::size_t c = 0; c < cells; ++c)
            if (det_[c] != kUndefined && det_[c] >= n_actions_)
                throw ValidationError("policy '" + id_ + "': action index out of range");
        return;
    }
    if (dist_.size() != cells * n_actions_)
        throw ValidationError("policy '" + id_ + "': table has wrong shape");
    for (std::size_t c = 0; c < cells; ++c) {
        double sum = 0.0;
        bool any = false;
        for (std::uint32_t a = 0; a < n_actions_; ++a) {
            const double v = dist_[c * n_actions_ + a];
            if (v < 0.0)
                throw ValidationError("policy '" + id_ + "': negative action probability");
            if (v > 0.0) any = true;
            sum += v;
        }
        if (any && std::abs(sum - 1.0) > kDistTol) {
            const auto s = static_cast<std::uint32_t>(c % n_states_);
            const int h = static_cast<int>(c / n_states_) + 1;
            throw ValidationError("policy '" + id_ + "': distribution at (state " +
                                  std::to_string(s) + ", step " + std::to_string(h) +
                                  ") sums to " + std::to_string(sum));
        }
    }
}

std::uint64_t Policy::content_hash() const {
    std::uint64_t h = fnv1a64(id_);
    h = fnv1a64_accum(h, kind_ == PolicyKind::Deterministic ? 1 : 2);
    h = fnv1a64_accum(h, n_states_);
    h = fnv1a64_accum(h, n_actions_);
    h = fnv1a64_accum(h, static_cast<std::uint64_t>(horizon_));
    for (std::uint32_t a : det_) h = fnv1a64_accum(h, a);
    for (double v : dist_) h = fnv1a64_accum(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

void PolicySet::build_index() const {
    if (!index_.empty() || policies.empty()) return;
    for (std::size_t i = 0; i < policies.size(); ++i) index_.emplace(policies[i].id(), i);
}

std::size_t PolicySet::index_of(const std::string& id) const {
    build_index();
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("policy set: unknown policy id '" + id + "'");
    return it->second;
}

bool PolicySet::contains(const std::string& id) const {
    build_index();
    return index_.find(id) != index_.end();
}

void PolicySet::validate() const {
    index_.clear();
    for (std::size_t i = 0; i < policies.size(); ++i) {
        auto [it, inserted] = index_.emplace(policies[i].id(), i);
        (void)it;
        if (!inserted)
            throw ValidationError("policy set: duplicate policy id '" + policies[i].id() + "'");
        policies[i].validate();
    }
}

std::uint64_t PolicySet::content_hash() const {
    std::uint64_t h = fnv1a64("pmean.policyset.v1");
    h = fnv1a64_accum(h, mdp_ref);
    for (const Policy& p : policies) h = fnv1a64_accum(h, p.content_hash());
    return h;
}

PolicySet enumerate_deterministic_policies(const FiniteMDP& mdp, double max_count,
                                           bool stationary) {
    const std::size_t cells =
        stationary ? mdp.n_states : static_cast<std::size_t>(mdp.n_states) * mdp.horizon;
    const double count = std::pow(static_cast<double>(mdp.n_actions), static_cast<double>(cells));
    if (!(count <= max_count)) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "enumerate_deterministic_policies: %u^%zu = %.6g policies exceed "
                      "max_count = %.6g",
                      mdp.n_actions, cells, count, max_count);
        throw SizeCapError(buf);
    }
    const auto total = static_cast<std::size_t>(count);
    const int width = std::max(4, static_cast<int>(std::to_string(total - 1).size()));

    PolicySet set;
    set.generator = stationary ? "enumerate-stationary" : "enumerate";
    set.mdp_ref = mdp.content_hash();
    set.policies.reserve(total);
    const std::size_t table_cells = static_cast<std::size_t>(mdp.n_states) * mdp.horizon;
    std::vector<std::uint32_t> digits(cells, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        // digits are the base-|A| expansion of idx, most significant first,
        // which yields lexicographic order over action tables
        std::size_t rem = idx;
        for (std::size_t c = cells; c-- > 0;) {
            digits[c] = static_cast<std::uint32_t>(rem % mdp.n_actions);
            rem /= mdp.n_actions;
        }
        std::vector<std::uint32_t> table(table_cells);
        for (int h = 1; h <= mdp.horizon; ++h) {
            for (std::uint32_t s = 0; s < mdp.n_states; ++s) {
                // cell order: state-major, then step
                const std::size_t digit_cell =
                    stationary ? s : static_cast<std::size_t>(s) * mdp.horizon + (h - 1);
                table[static_cast<std::size_t>(h - 1) * mdp.n_states + s] = digits[digit_cell];
            }
        }
        set.policies.push_back(Policy::deterministic("det-" + zero_padded(idx, width),
                                                     mdp.n_states, mdp.n_actions, mdp.horizon,
                                                     std::move(table)));
    }
    return set;
}

namespace {

std::string hash_hex(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t parse_hash_hex(const std::string& s) {
    return std::strtoull(s.c_str(), nullptr, 16);
}

} // namespace

void save_policy_set(const PolicySet& set, const std::filesystem::path& path) {
    ordered_json j;
    j["mdp_ref"] = hash_hex(set.mdp_ref);
    ordered_json meta;
    meta["generator"] = set.generator;
    meta["seed"] = set.seed;
    meta["count"] = set.policies.size();
    if (!set.policies.empty()) {
        meta["n_states"] = set.policies.front().n_states();
        meta["n_actions"] = set.policies.front().n_actions();
        meta["horizon"] = set.policies.front().horizon();
    }
    j["meta"] = std::move(meta);
    ordered_json pols = ordered_json::array();
    for (const Policy& p : set.policies) {
        ordered_json pj;
        pj["id"] = p.id();
        pj["kind"] = p.kind() == PolicyKind::Deterministic ? "deterministic" : "stochastic";
        ordered_json table = ordered_json::object();
        for (std::uint32_t s = 0; s < p.n_states(); ++s) {
            for (int h = 1; h <= p.horizon(); ++h) {
                if (!p.defined_at(s, h)) continue;
                const std::string key = std::to_string(s) + "," + std::to_string(h);
                ordered_json row = ordered_json::array();
                if (p.kind() == PolicyKind::Deterministic) {
                    // one-hot rows as integers keep large sets compact
                    for (std::uint32_t a = 0; a < p.n_actions(); ++a)
                        row.push_back(a == p.action_at(s, h) ? 1 : 0);
                } else {
                    for (std::uint32_t a = 0; a < p.n_actions(); ++a)
                        row.push_back(p.prob(s, h, a));
                }
                table[key] = std::move(row);
            }
        }
        pj["table"] = std::move(table);
        pols.push_back(std::move(pj));
    }
    j["policies"] = std::move(pols);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("policy set: cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

PolicySet load_policy_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("policy set: cannot open " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ValidationError("policy set: " + path.string() + ": " + e.what());
    }

    PolicySet set;
    if (!j.contains("mdp_ref") || !j["mdp_ref"].is_string())
        throw ValidationError("policy set: /mdp_ref: expected hash string");
    set.mdp_ref = parse_hash_hex(j["mdp_ref"].get<std::string>());
    const auto& meta = j.contains("meta") ? j["meta"] : ordered_json::object();
    set.generator = meta.value("generator", std::string{});
    set.seed = meta.value("seed", std::uint64_t{0});
    if (!j.contains("policies") || !j["policies"].is_array())
        throw ValidationError("policy set: /policies: expected array");
    const auto& pols = j["policies"];
    if (pols.empty()) return set;

    const auto n_states = meta.value("n_states", std::uint32_t{0});
    const auto n_actions = meta.value("n_actions", std::uint32_t{0});
    const int horizon = meta.value("horizon", 0);
    if (n_states == 0 || n_actions == 0 || horizon == 0)
        throw ValidationError("policy set: /meta: n_states, n_actions and horizon are required");

    for (std::size_t pi = 0; pi < pols.size(); ++pi) {
        const auto& pj = pols[pi];
        const std::string ptr = "/policies/" + std::to_string(pi);
        if (!pj.contains("id") || !pj["id"].is_string())
            throw ValidationError("policy set: " + ptr + "/id: expected string");
        if (!pj.contains("kind") || !pj["kind"].is_string())
            throw ValidationError("policy set: " + ptr + "/kind: expected string");
        const std::string kind = pj["kind"].get<std::string>();
        const bool det = kind == "deterministic";
        if (!det && kind != "stochastic")
            throw ValidationError("policy set: " + ptr + "/kind: unknown kind '" + kind + "'");
        if (!pj.contains("table") || !pj["table"].is_object())
            throw ValidationError("policy set: " + ptr + "/table: expected object");

        const std::size_t cells = static_cast<std::size_t>(n_states) * horizon;
        std::vector<std::uint32_t> det_table(cells, Policy::kUndefined);
        std::vector<double> dist_table(det ? 0 : cells * n_actions, 0.0);
        for (const auto& [key, row] : pj["table"].items()) {
            std::uint32_t s = 0;
            int h = 0;
            if (std::sscanf(key.c_str(), "%u,%d", &s, &h) != 2 || s >= n_states || h < 1 ||
                h > horizon)
                throw ValidationError("policy set: " + ptr + "/table/" + key + ": bad key");
            if (!row.is_array() || row.size() != n_actions)
                throw ValidationError("policy set: " + ptr + "/table/" + key +
                                      ": expected row of length " + std::to_string(n_actions));
            const std::size_t cell = static_cast<std::size_t>(h - 1) * n_states + s;
            if (det) {
                std::uint32_t arg = Policy::kUndefined;
                for (std::uint32_t a = 0; a < n_actions; ++a) {
                    const double v = row[a].get<double>();
                    if (v == 1.0 && arg == Policy::kUndefined) {
                        arg = a;
                    } else if (v != 0.0) {
                        throw ValidationError("policy set: " + ptr + "/table/" + key +
                                              ": deterministic row must be one-hot");
                    }
                }
                det_table[cell] = arg;
            } else {
                for (std::uint32_t a = 0; a < n_actions; ++a)
                    dist_table[cell * n_actions + a] = row[a].get<double>();
            }
        }
        try {
            set.policies.push_back(
                det ? Policy::deterministic(pj["id"].get<std::string>(), n_states, n_actions,
                                            horizon, std::move(det_table))
                    : Policy::stochastic(pj["id"].get<std::string>(), n_states, n_actions,
                                         horizon, std::move(dist_table)));
        } catch (const ValidationError& e) {
            throw ValidationError("policy set: " + ptr + ": " + e.what());
        }
    }
    set.validate();
    return set;
}

} // namespace pmean
