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

// Single-component maintenance economics and the two decision policies.
//
// Cost of scheduling maintenance at window z when the realized RUL is y:
//   z <= y : preventive   c_p + c_m (y - z)
//   z >  y : corrective   c_c + c_d (z - y)

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "ieo/errors.hpp"
#include "ieo/rul_dist.hpp"

namespace ieo {

struct CostParams {
    double preventive = 50.0;           // c_p
    double corrective = 200.0;          // c_c
    double component_per_cycle = 1.0;   // c_m, amortized component life given up
    double downtime_per_cycle = 5.0;    // c_d

    void validate() const {
        if (!(preventive >= 0 && corrective >= 0 && component_per_cycle >= 0 && downtime_per_cycle >= 0)) {
            throw ConfigError("cost coefficients must be non-negative");
        }
        if (!(corrective > preventive)) throw ConfigError("corrective cost must exceed preventive cost");
        if (!(downtime_per_cycle > component_per_cycle)) {
            throw ConfigError("downtime cost per cycle must exceed component cost per cycle");
        }
    }

    CostParams scaled(double factor) const {
        return {preventive * factor, corrective * factor, component_per_cycle * factor,
                downtime_per_cycle * factor};
    }

    /// Turbofan case-study economics.
    static CostParams turbofan() { return {50.0, 200.0, 1.0, 5.0}; }
    /// Economics of the truncated-Poisson illustration.
    static CostParams illustration() { return {10.0, 100.0, 1.0, 5.0}; }
};

/// Discrete set of admissible maintenance windows, in cycles from now.
class FeasibleSet {
 public:
    explicit FeasibleSet(std::vector<long> windows) : windows_(std::move(windows)) {
        if (windows_.empty()) throw ConfigError("feasible set is empty");
        for (std::size_t i = 0; i < windows_.size(); ++i) {
            if (windows_[i] < 0) throw ConfigError("maintenance windows must be non-negative");
            if (i > 0 && windows_[i] <= windows_[i - 1]) {
                throw ConfigError("maintenance windows must be strictly increasing");
            }
        }
    }

    /// {first, first+step, ..., <= last}
    static FeasibleSet range(long first, long last, long step) {
        if (step <= 0 || last < first) throw ConfigError("invalid window range");
        std::vector<long> w;
        for (long z = first; z <= last; z += step) w.push_back(z);
        return FeasibleSet(std::move(w));
    }

    /// Every support value 1..H.
    static FeasibleSet of_support(RulSupport support) { return range(1, support.horizon(), 1); }

    std::span<const long> windows() const noexcept { return windows_; }
    std::size_t size() const noexcept { return windows_.size(); }
    long front() const noexcept { return windows_.front(); }
    long back() const noexcept { return windows_.back(); }
    bool contains(long z) const { return std::binary_search(windows_.begin(), windows_.end(), z); }

 private:
    std::vector<long> windows_;
};

struct QuantileParams {
    double alpha = 0.01;  // tolerated failure probability

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    }
};

inline double cost(long z, long y, const CostParams& c) {
    return z <= y ? c.preventive + c.component_per_cycle * static_cast<double>(y - z)
                  : c.corrective + c.downtime_per_cycle * static_cast<double>(z - y);
}

/// Exact expectation of cost(z, Y) over the whole support.
inline double expected_cost(long z, const DiscreteRulDist& dist, const CostParams& c) {
    double total = 0.0;
    const auto probs = dist.probs();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        total += probs[i] * cost(z, dist.support().value(i), c);
    }
    return total;
}

/// Expected cost of every window in one pass, from prefix sums of P(Y < z) and
/// E[Y; Y < z].
inline std::vector<double> expected_costs(const DiscreteRulDist& dist, const CostParams& c,
                                          const FeasibleSet& windows) {
    const auto probs = dist.probs();
    double mean = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) mean += probs[i] * dist.support().value(i);

    std::vector<double> out;
    out.reserve(windows.size());
    double mass_below = 0.0;   // P(Y < z)
    double first_below = 0.0;  // E[Y 1{Y < z}]
    std::size_t next = 0;      // first support index not yet accumulated
    for (long z : windows.windows()) {
        while (next < probs.size() && dist.support().value(next) < z) {
            mass_below += probs[next];
            first_below += probs[next] * dist.support().value(next);
            ++next;
        }
        const double mass_above = 1.0 - mass_below;
        const double first_above = mean - first_below;
        const double zd = static_cast<double>(z);
        out.push_back(c.preventive * mass_above + c.component_per_cycle * (first_above - zd * mass_above) +
                      c.corrective * mass_below + c.downtime_per_cycle * (zd * mass_below - first_below));
    }
    return out;
}

/// Window minimizing expected cost; ties go to the smaller window. Windows within
/// rounding distance of the prefix-sum minimum are re-scored with the direct sum.
inline long cso_decide(const DiscreteRulDist& dist, const CostParams& c, const FeasibleSet& windows) {
    const auto costs = expected_costs(dist, c, windows);
    const double lowest = *std::min_element(costs.begin(), costs.end());
    const double slack = 1e-9 * std::max(1.0, std::abs(lowest));
    long best = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < costs.size(); ++i) {
        if (costs[i] > lowest + slack) continue;
        const long z = windows.windows()[i];
        const double exact = expected_cost(z, dist, c);
        if (exact < best_cost) {
            best_cost = exact;
            best = z;
        }
    }
    return best;
}

/// Latest window whose predicted failure probability P(Y < z) stays within alpha.
inline long quantile_decide(const DiscreteRulDist& dist, const QuantileParams& q, const FeasibleSet& windows) {
    const auto probs = dist.probs();
    double below = 0.0;
    std::size_t next = 0;
    long chosen = -1;
    bool found = false;
    for (long z : windows.windows()) {
        while (next < probs.size() && dist.support().value(next) < z) below += probs[next++];
        // P(Y < z) is non-decreasing in z, so the first violation ends the scan.
        if (std::min(below, 1.0) > q.alpha) break;
        chosen = z;
        found = true;
    }
    if (!found) {
        throw InfeasibleError("no maintenance window meets failure tolerance " + std::to_string(q.alpha));
    }
    return chosen;
}

/// Hindsight-optimal cost for a realized RUL.
inline double oracle_cost(long y, const CostParams& c, const FeasibleSet& windows) {
    double best = std::numeric_limits<double>::infinity();
    for (long z : windows.windows()) best = std::min(best, cost(z, y, c));
    return best;
}

inline double regret(long z, long y, const CostParams& c, const FeasibleSet& windows) {
    return cost(z, y, c) - oracle_cost(y, c, windows);
}

/// Largest cost over windows x support; the loss bound used by the generalization bounds.
inline double max_cost(const CostParams& c, const FeasibleSet& windows, RulSupport support) {
    double worst = 0.0;
    for (long z : windows.windows()) {
        for (int y = 1; y <= support.horizon(); ++y) worst = std::max(worst, cost(z, y, c));
    }
    return worst;
}

struct CsoPolicy {
    CostParams costs;
};

struct QuantilePolicy {
    QuantileParams params;
};

/// A decision rule mapping a predicted distribution to a window.
using Policy = std::variant<CsoPolicy, QuantilePolicy>;

inline long decide(const Policy& policy, const DiscreteRulDist& dist, const FeasibleSet& windows) {
    return std::visit(
        [&](const auto& p) -> long {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, CsoPolicy>) {
                return cso_decide(dist, p.costs, windows);
            } else {
                return quantile_decide(dist, p.params, windows);
            }
        },
        policy);
}

inline std::string policy_name(const Policy& policy) {
    return std::holds_alternative<CsoPolicy>(policy) ? "cso" : "quantile";
}

}  // namespace ieo
