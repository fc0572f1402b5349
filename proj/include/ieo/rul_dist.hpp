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

// Discrete remaining-useful-life distributions over the interval support 1..H,
// where support value h stands for "RUL lies in [h, h+1) cycles".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ieo/errors.hpp"

namespace ieo {

/// NLL reported for a label that received exactly zero probability (about -log of
/// the smallest positive double), so batch means stay finite.
inline constexpr double kNllCap = 745.0;

class RulSupport {
 public:
    explicit RulSupport(int horizon) : horizon_(horizon) {
        if (horizon < 2) {
            throw DomainError("RUL support needs at least 2 intervals, got " +
                              std::to_string(horizon));
        }
    }

    int horizon() const noexcept { return horizon_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(horizon_); }
    bool contains(long y) const noexcept { return y >= 1 && y <= horizon_; }
    /// Support value at zero-based position i.
    int value(std::size_t i) const noexcept { return static_cast<int>(i) + 1; }

    friend bool operator==(const RulSupport&, const RulSupport&) = default;

 private:
    int horizon_;
};

class DiscreteRulDist {
 public:
    /// Takes ownership of an already normalized probability vector.
    DiscreteRulDist(RulSupport support, std::vector<double> probs)
        : support_(support), probs_(std::move(probs)) {
        if (probs_.size() != support_.size()) {
            throw DomainError("probability vector has " + std::to_string(probs_.size()) +
                              " entries, support has " + std::to_string(support_.size()));
        }
        double total = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0) || !std::isfinite(p)) {
                throw DomainError("probabilities must be finite and non-negative");
            }
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw DomainError("probabilities sum to " + std::to_string(total) + ", not 1");
        }
    }

    /// Normalizes non-negative weights into a distribution.
    static DiscreteRulDist from_weights(RulSupport support, std::vector<double> weights) {
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0) || !std::isfinite(w)) {
                throw DomainError("weights must be finite and non-negative");
            }
            total += w;
        }
        if (!(total > 0.0)) {
            throw DegenerateDistributionError("all weights are zero");
        }
        for (double& w : weights) w /= total;
        return DiscreteRulDist(support, std::move(weights));
    }

    /// Normalizes log-weights with a max shift (log-sum-exp).
    static DiscreteRulDist from_log_weights(RulSupport support, std::span<const double> log_weights) {
        double peak = -std::numeric_limits<double>::infinity();
        for (double l : log_weights) {
            if (std::isnan(l) || l == std::numeric_limits<double>::infinity()) {
                throw NumericError("non-finite log weight");
            }
            peak = std::max(peak, l);
        }
        if (peak == -std::numeric_limits<double>::infinity()) {
            throw DegenerateDistributionError("every support value has zero mass");
        }
        std::vector<double> w(log_weights.size());
        for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - peak);
        return from_weights(support, std::move(w));
    }

    static DiscreteRulDist point_mass(RulSupport support, int y) {
        if (!support.contains(y)) throw DomainError("point mass outside support");
        std::vector<double> p(support.size(), 0.0);
        p[static_cast<std::size_t>(y - 1)] = 1.0;
        return DiscreteRulDist(support, std::move(p));
    }

    static DiscreteRulDist uniform(RulSupport support) {
        return DiscreteRulDist(support, std::vector<double>(support.size(), 1.0 / support.horizon()));
    }

    const RulSupport& support() const noexcept { return support_; }
    std::span<const double> probs() const noexcept { return probs_; }
    /// Probability of support value y (1-based); y must be in the support.
    double prob(int y) const { return probs_.at(static_cast<std::size_t>(y - 1)); }

 private:
    RulSupport support_;
    std::vector<double> probs_;
};

struct WeibullParams {
    double scale;  // lambda, cycles
    double shape;  // k

    bool valid() const noexcept {
        return std::isfinite(scale) && std::isfinite(shape) && scale > 0.0 && shape > 0.0;
    }
};

inline void require_valid(const WeibullParams& params) {
    if (!params.valid()) {
        throw DomainError("Weibull parameters must be finite and positive (scale=" +
                          std::to_string(params.scale) + ", shape=" + std::to_string(params.shape) + ")");
    }
}

/// Where inside the interval [h, h+1) the density is evaluated.
enum class EvalPoint { left, midpoint };

inline double eval_location(int h, EvalPoint point) noexcept {
    return point == EvalPoint::left ? static_cast<double>(h) : h + 0.5;
}

/// log of (k/lambda)(y/lambda)^(k-1) exp(-(y/lambda)^k). May be -inf when the
/// density underflows; never NaN for valid parameters and y > 0.
inline double log_weibull_density(const WeibullParams& params, double y) {
    const double log_ratio = std::log(y) - std::log(params.scale);
    return std::log(params.shape) - std::log(params.scale) + (params.shape - 1.0) * log_ratio -
           std::exp(params.shape * log_ratio);
}

inline double weibull_density(const WeibullParams& params, double y) {
    require_valid(params);
    if (!(y > 0.0)) throw DomainError("Weibull density is evaluated at y > 0 only");
    const double ratio = y / params.scale;
    const double value = (params.shape / params.scale) * std::pow(ratio, params.shape - 1.0) *
                         std::exp(-std::pow(ratio, params.shape));
    if (!std::isfinite(value)) {
        throw NumericError("Weibull density overflow at y=" + std::to_string(y));
    }
    return value;
}

/// Truncates the Weibull density to the support and renormalizes, in log space.
inline DiscreteRulDist discretize_weibull(const WeibullParams& params, RulSupport support,
                                          EvalPoint point = EvalPoint::left) {
    require_valid(params);
    // Same arithmetic as log_weibull_density, with log(t) cached per support.
    thread_local std::vector<double> log_t;
    thread_local int cached_h = 0;
    thread_local EvalPoint cached_point = EvalPoint::left;
    if (cached_h != support.horizon() || cached_point != point) {
        log_t.resize(support.size());
        for (std::size_t i = 0; i < log_t.size(); ++i) log_t[i] = std::log(eval_location(support.value(i), point));
        cached_h = support.horizon();
        cached_point = point;
    }
    const double log_scale = std::log(params.scale);
    const double head = std::log(params.shape) - log_scale;
    std::vector<double> logs(support.size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double log_ratio = log_t[i] - log_scale;
        logs[i] = head + (params.shape - 1.0) * log_ratio - std::exp(params.shape * log_ratio);
    }
    return DiscreteRulDist::from_log_weights(support, logs);
}

/// log P(y | params) of the discretized distribution and its partial derivatives.
struct LogProbGrad {
    double log_prob;
    double d_scale;
    double d_shape;
};

/// Derivatives follow from log P(y) = g(y) - log sum_h exp(g(h)) with g the log
/// density; the normalizer contributes the expectation of dg under the distribution.
inline LogProbGrad discretized_log_prob_grad(const WeibullParams& params, RulSupport support, int y,
                                             EvalPoint point = EvalPoint::left) {
    require_valid(params);
    if (!support.contains(y)) throw DomainError("label " + std::to_string(y) + " outside support");
    const double k = params.shape;
    const double lam = params.scale;
    const std::size_t n = support.size();
    std::vector<double> g(n), gs(n), gk(n);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = eval_location(support.value(i), point);
        const double log_ratio = std::log(t) - std::log(lam);
        const double pw = std::exp(k * log_ratio);  // (t/lambda)^k
        g[i] = std::log(k) - std::log(lam) + (k - 1.0) * log_ratio - pw;
        gs[i] = (k / lam) * (pw - 1.0);
        gk[i] = 1.0 / k + log_ratio * (1.0 - pw);
        if (std::isnan(g[i])) throw NumericError("non-finite log density");
        peak = std::max(peak, g[i]);
    }
    if (peak == -std::numeric_limits<double>::infinity()) {
        throw DegenerateDistributionError("every support value has zero mass");
    }
    double z = 0.0, es = 0.0, ek = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::exp(g[i] - peak);
        if (w == 0.0) continue;
        z += w;
        es += w * gs[i];
        ek += w * gk[i];
    }
    es /= z;
    ek /= z;
    const std::size_t iy = static_cast<std::size_t>(y - 1);
    LogProbGrad out;
    out.log_prob = g[iy] - peak - std::log(z);
    // A label whose own density underflowed has no usable local slope.
    if (!std::isfinite(out.log_prob)) {
        out.d_scale = 0.0;
        out.d_shape = 0.0;
    } else {
        out.d_scale = gs[iy] - es;
        out.d_shape = gk[iy] - ek;
    }
    return out;
}

/// Poisson(rate) truncated to the support and renormalized.
inline DiscreteRulDist truncated_poisson(double rate, RulSupport support) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("Poisson rate must be positive");
    std::vector<double> logs(support.size());
    const double log_rate = std::log(rate);
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double h = support.value(i);
        logs[i] = h * log_rate - rate - std::lgamma(h + 1.0);
    }
    return DiscreteRulDist::from_log_weights(support, logs);
}

/// P(Y < z).
inline double cdf_below(const DiscreteRulDist& dist, long z) {
    const int horizon = dist.support().horizon();
    if (z <= 1) return 0.0;
    if (z > horizon) return 1.0;
    double total = 0.0;
    for (long h = 1; h < z; ++h) total += dist.probs()[static_cast<std::size_t>(h - 1)];
    return std::min(total, 1.0);
}

/// Negative log-likelihood of label y; kNllCap when y has zero mass.
inline double nll(const DiscreteRulDist& dist, int y) {
    if (!dist.support().contains(y)) {
        throw DomainError("label " + std::to_string(y) + " outside support 1.." +
                          std::to_string(dist.support().horizon()));
    }
    const double p = dist.prob(y);
    return p > 0.0 ? std::min(-std::log(p), kNllCap) : kNllCap;
}

/// Smallest support value attaining the maximum probability.
inline int mode(const DiscreteRulDist& dist) {
    const auto probs = dist.probs();
    const auto it = std::max_element(probs.begin(), probs.end());
    return static_cast<int>(it - probs.begin()) + 1;
}

inline double cross_entropy(const DiscreteRulDist& p, const DiscreteRulDist& q) {
    if (!(p.support() == q.support())) throw DomainError("cross entropy needs a common support");
    double total = 0.0;
    const auto pp = p.probs();
    const auto qq = q.probs();
    for (std::size_t i = 0; i < pp.size(); ++i) {
        if (pp[i] == 0.0) continue;
        if (qq[i] == 0.0) {
            throw InfiniteDivergenceError("q has zero mass at support value " + std::to_string(i + 1));
        }
        total -= pp[i] * std::log(qq[i]);
    }
    return total;
}

inline double entropy(const DiscreteRulDist& p) { return cross_entropy(p, p); }

}  // namespace ieo
