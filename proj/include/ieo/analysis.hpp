// Copyright 2026 The ieo-pdm Authors
//
//    Licensed under the Apache License, Version 2.0 (the "License");
//    you may not use this file except in compliance with the License.
//    You may obtain a copy of the License at
//
//        http://www.apache.org/licenses/LICENSE-2.0
//
//    Unless required by applicable law or agreed to in writing, software
//    distributed under the License is distributed on an "AS IS" BASIS,
//    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//    See the License for the specific language governing permissions and
//    limitations under the License.

#pragma once

// Estimation error versus decision quality on a known RUL distribution, and
// calculators for the finite-sample decision-risk bounds.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "ieo/errors.hpp"
#include "ieo/maintenance.hpp"
#include "ieo/rul_dist.hpp"

namespace ieo::analysis {

/// Relative cross-entropy error in percent: (CE(p, q) / H(p) - 1) * 100.
inline double relative_estimation_error(const DiscreteRulDist& p_true, const DiscreteRulDist& p_hat) {
    const double h = entropy(p_true);
    if (!(h > 0.0)) throw DomainError("relative estimation error is undefined for a zero-entropy reference");
    return (cross_entropy(p_true, p_hat) / h - 1.0) * 100.0;
}

/// Relative excess of true expected cost when deciding on p_hat instead of p_true, in percent.
inline double relative_optimality_gap(const DiscreteRulDist& p_true, const DiscreteRulDist& p_hat,
                                      const Policy& policy, const CostParams& costs, const FeasibleSet& windows) {
    const double chosen = expected_cost(decide(policy, p_hat, windows), p_true, costs);
    const double best = expected_cost(decide(policy, p_true, windows), p_true, costs);
    return (chosen / best - 1.0) * 100.0;
}

/// One-parameter perturbation families around a reference distribution p, indexed by t >= 0.
enum class Family {
    rate_shift,   // truncated Poisson with rate base_rate + direction * t
    temper,       // p^(1 + direction * t), renormalized
    tail_temper,  // tempering restricted to values >= tail_start, keeping that block's total mass
};

struct DirectionSpec {
    Family family = Family::rate_shift;
    int direction = +1;
    double base_rate = 20.0;  // rate_shift only
    int tail_start = 1;       // tail_temper only

    std::string name() const {
        const char* sign = direction > 0 ? "+" : "-";
        switch (family) {
            case Family::rate_shift: return std::string("rate_shift") + sign;
            case Family::temper: return std::string("temper") + sign;
            case Family::tail_temper: return std::string("tail_temper") + sign;
        }
        return "";
    }
};

/// Member t of a family; throws DomainError outside the family's parameter range.
inline DiscreteRulDist family_member(const DiscreteRulDist& p, const DirectionSpec& spec, double t) {
    const auto support = p.support();
    switch (spec.family) {
        case Family::rate_shift: {
            const double rate = spec.base_rate + spec.direction * t;
            if (!(rate > 0.0)) throw DomainError("shifted rate left the positive range");
            return truncated_poisson(rate, support);
        }
        case Family::temper:
        case Family::tail_temper: {
            const double power = 1.0 + spec.direction * t;
            if (!(power > 0.0)) throw DomainError("tempering power left the positive range");
            const int start = spec.family == Family::temper ? 1 : spec.tail_start;
            std::vector<double> block_logs(p.probs().size(), -std::numeric_limits<double>::infinity());
            double block_mass = 0.0;
            for (std::size_t i = 0; i < block_logs.size(); ++i) {
                const double pi = p.probs()[i];
                if (support.value(i) >= start) {
                    block_mass += pi;
                    if (pi > 0.0) block_logs[i] = power * std::log(pi);
                }
            }
            const auto block = DiscreteRulDist::from_log_weights(support, block_logs);
            std::vector<double> q(p.probs().begin(), p.probs().end());
            for (std::size_t i = 0; i < q.size(); ++i) {
                if (support.value(i) >= start) q[i] = block.probs()[i] * block_mass;
            }
            return DiscreteRulDist::from_weights(support, std::move(q));
        }
    }
    throw DomainError("unknown family");
}

struct ConstructedEstimate {
    DiscreteRulDist dist;
    double t;
    double achieved_error;
};

/// Finds the family member whose relative estimation error equals `target` (percent)
/// by bracketing and bisection on t.
inline ConstructedEstimate construct_estimate_at_error(const DiscreteRulDist& p_true, double target,
                                                       const DirectionSpec& spec, double tol = 1e-8) {
    if (!(target > 0.0)) throw DomainError("target estimation error must be positive");
    auto error_at = [&](double t) { return relative_estimation_error(p_true, family_member(p_true, spec, t)); };
    // Largest admissible t for families with a boundary.
    double t_max = 1e6;
    if (spec.family == Family::rate_shift && spec.direction < 0) t_max = spec.base_rate;
    if (spec.family != Family::rate_shift && spec.direction < 0) t_max = 1.0;
    double lo = 0.0;
    double hi = std::min(0.5, t_max / 2);
    while (error_at(hi) < target) {
        lo = hi;
        if (hi >= t_max * (1.0 - 1e-12)) {
            throw DomainError("target error " + std::to_string(target) + "% unreachable in family " + spec.name());
        }
        hi = std::min(2.0 * hi, t_max * (1.0 - 1e-12));
        if (hi == lo) throw DomainError("target error unreachable in family " + spec.name());
    }
    double t = hi;
    double err = error_at(t);
    for (int it = 0; it < 200 && std::abs(err - target) > tol; ++it) {
        t = 0.5 * (lo + hi);
        err = error_at(t);
        if (err < target) {
            lo = t;
        } else {
            hi = t;
        }
    }
    return {family_member(p_true, spec, t), t, err};
}

struct ExampleConfig {
    double rate = 20.0;
    int horizon = 30;
    CostParams costs = CostParams::illustration();
    std::vector<double> target_errors = {1.0, 2.0};
    /// Estimate pair per target; targets without an entry use the last pair.
    std::vector<std::pair<DirectionSpec, DirectionSpec>> estimate_pairs;
    double tol = 1e-8;

    /// 1%: rate shifted up / down.  2%: upper tail sharpened / flattened from the
    /// reference's mode onward, which leaves P(Y < z) of early windows untouched.
    static ExampleConfig defaults() {
        ExampleConfig c;
        const int tail = mode(truncated_poisson(c.rate, RulSupport(c.horizon)));
        c.estimate_pairs = {
            {{Family::rate_shift, +1, c.rate}, {Family::rate_shift, -1, c.rate}},
            {{Family::tail_temper, +1, c.rate, tail}, {Family::tail_temper, -1, c.rate, tail}},
        };
        return c;
    }
};

struct EstimateEntry {
    std::string family;
    double t;
    double estimation_error;  // percent
    double optimality_gap;    // percent
    long decision;
    double expected_cost;     // under the reference distribution
    std::vector<double> probs;
};

struct TargetEntry {
    double target;
    EstimateEntry first;   // P-hat 1
    EstimateEntry second;  // P-hat 2
};

struct ExampleReport {
    std::vector<double> reference;
    long optimal_decision;
    double optimal_cost;
    std::vector<TargetEntry> targets;
    std::vector<std::pair<double, std::vector<EstimateEntry>>> catalog;  // every family, every target
};

inline ExampleReport run_motivating_example(const ExampleConfig& cfg) {
    const RulSupport support(cfg.horizon);
    const auto windows = FeasibleSet::of_support(support);
    const Policy policy = CsoPolicy{cfg.costs};
    const auto p = truncated_poisson(cfg.rate, support);
    ExampleReport rep;
    rep.reference.assign(p.probs().begin(), p.probs().end());
    rep.optimal_decision = decide(policy, p, windows);
    rep.optimal_cost = expected_cost(rep.optimal_decision, p, cfg.costs);

    auto entry = [&](const DirectionSpec& spec, double target) {
        const auto est = construct_estimate_at_error(p, target, spec, cfg.tol);
        const long z = decide(policy, est.dist, windows);
        return EstimateEntry{spec.name(),
                             est.t,
                             est.achieved_error,
                             relative_optimality_gap(p, est.dist, policy, cfg.costs, windows),
                             z,
                             expected_cost(z, p, cfg.costs),
                             {est.dist.probs().begin(), est.dist.probs().end()}};
    };
    if (cfg.estimate_pairs.empty()) throw ConfigError("example needs at least one estimate pair");
    const int tail = mode(p);
    for (std::size_t i = 0; i < cfg.target_errors.size(); ++i) {
        const double target = cfg.target_errors[i];
        const auto& pair = cfg.estimate_pairs[std::min(i, cfg.estimate_pairs.size() - 1)];
        rep.targets.push_back({target, entry(pair.first, target), entry(pair.second, target)});

        std::vector<EstimateEntry> all;
        for (auto fam : {Family::rate_shift, Family::temper, Family::tail_temper}) {
            for (int dir : {+1, -1}) {
                try {
                    all.push_back(entry({fam, dir, cfg.rate, tail}, target));
                } catch (const DomainError&) {
                    // target outside this family's reach
                }
            }
        }
        rep.catalog.emplace_back(target, std::move(all));
    }
    return rep;
}

inline nlohmann::json to_json(const EstimateEntry& e) {
    return {{"family", e.family},
            {"t", e.t},
            {"estimation_error_pct", e.estimation_error},
            {"optimality_gap_pct", e.optimality_gap},
            {"decision", e.decision},
            {"expected_cost", e.expected_cost},
            {"probs", e.probs}};
}

inline nlohmann::json to_json(const ExampleReport& r) {
    nlohmann::json j;
    j["reference"] = r.reference;
    j["optimal_decision"] = r.optimal_decision;
    j["optimal_expected_cost"] = r.optimal_cost;
    for (const auto& t : r.targets) {
        j["targets"].push_back({{"target_pct", t.target}, {"p_hat_1", to_json(t.first)}, {"p_hat_2", to_json(t.second)}});
    }
    for (const auto& [target, entries] : r.catalog) {
        nlohmann::json c = {{"target_pct", target}};
        for (const auto& e : entries) c["estimates"].push_back(to_json(e));
        j["catalog"].push_back(c);
    }
    return j;
}

struct BoundInputs {
    double n;       // sample count
    double d;       // Natarajan dimension of the policy class
    double K;       // number of feasible windows
    double C1;      // bound on the loss
    double delta;   // failure probability of the bound

    void validate() const {
        if (!(d >= 1.0)) throw DomainError("Natarajan dimension must be at least 1");
        if (!(n >= d)) throw DomainError("bound requires n >= d");
        if (!(K >= 2.0)) throw DomainError("bound requires at least 2 windows");
        if (!(C1 > 0.0)) throw DomainError("loss bound C1 must be positive");
        if (!(delta > 0.0 && delta <= 1.0)) throw DomainError("confidence parameter delta must lie in (0, 1]");
    }
};

/// 2 C1 sqrt((2 d log(e n / d) + 4 d log K) / n)
inline double complexity_term(const BoundInputs& in) {
    return 2.0 * in.C1 *
           std::sqrt((2.0 * in.d * std::log(std::numbers::e * in.n / in.d) + 4.0 * in.d * std::log(in.K)) / in.n);
}

/// Uniform upper bound on the true decision risk from the empirical one.
inline double risk_upper_bound(const BoundInputs& in, double empirical_risk) {
    in.validate();
    return empirical_risk + in.C1 * std::sqrt(std::log(1.0 / in.delta) / (2.0 * in.n)) + complexity_term(in);
}

/// Excess-risk radius of the empirical decision-risk minimizer over the best in class.
inline double excess_risk_bound(const BoundInputs& in) {
    in.validate();
    return 2.0 * in.C1 * std::sqrt(std::log(2.0 / in.delta) / (2.0 * in.n)) + complexity_term(in);
}

}  // namespace ieo::analysis
