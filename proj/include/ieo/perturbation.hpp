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

// Score-function gradient of the Gaussian-smoothed decision loss
//
//   L~(theta) = E_eta[ L(theta + Sigma eta, y) ],  eta ~ N(0, I_2)
//   grad L~   = Sigma^{-1} E_eta[ (L(theta + Sigma eta, y) - b) eta ]
//
// estimated with M standard-normal draws. The baseline b = L(theta, y) leaves the
// expectation unchanged because E[eta] = 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <span>
#include <thread>
#include <vector>

#include "ieo/errors.hpp"
#include "ieo/maintenance.hpp"
#include "ieo/random.hpp"
#include "ieo/rul_dist.hpp"

namespace ieo {

/// Perturbation settings. Construction validates Sigma and caches its inverse.
class SpgConfig {
 public:
    SpgConfig() : SpgConfig(Eigen::Matrix2d::Identity()) {}

    explicit SpgConfig(const Eigen::Matrix2d& sigma, int samples = 1000, bool use_baseline = true,
                       double clamp_floor = 1e-3)
        : sigma_(sigma), samples_(samples), use_baseline_(use_baseline), clamp_floor_(clamp_floor) {
        if (!sigma.allFinite() || sigma(0, 1) != sigma(1, 0)) {
            throw ConfigError("perturbation covariance factor must be finite and symmetric");
        }
        const double det = sigma(0, 0) * sigma(1, 1) - sigma(0, 1) * sigma(1, 0);
        if (!(sigma(0, 0) > 0.0 && det > 0.0)) {
            throw ConfigError("perturbation covariance factor must be positive definite");
        }
        inverse_ << sigma(1, 1) / det, -sigma(0, 1) / det, -sigma(1, 0) / det, sigma(0, 0) / det;
        if (samples < 1) throw ConfigError("perturbation sample count must be at least 1");
        if (!(clamp_floor > 0.0)) throw ConfigError("clamp floor must be positive");
    }

    const Eigen::Matrix2d& sigma() const noexcept { return sigma_; }
    const Eigen::Matrix2d& sigma_inverse() const noexcept { return inverse_; }
    int samples() const noexcept { return samples_; }
    bool use_baseline() const noexcept { return use_baseline_; }
    double clamp_floor() const noexcept { return clamp_floor_; }

    SpgConfig with_samples(int m) const { return SpgConfig(sigma_, m, use_baseline_, clamp_floor_); }
    SpgConfig with_baseline(bool on) const { return SpgConfig(sigma_, samples_, on, clamp_floor_); }

 private:
    Eigen::Matrix2d sigma_;
    Eigen::Matrix2d inverse_;
    int samples_;
    bool use_baseline_;
    double clamp_floor_;
};

/// Everything needed to turn a predicted theta and a label into a realized cost.
/// The loss is always the maintenance cost, also when the policy ignores costs.
struct DecisionProblem {
    Policy policy;
    CostParams costs;
    FeasibleSet windows;
    RulSupport support;
    EvalPoint point = EvalPoint::left;
};

/// Cost of the decision the policy takes on discretize(theta), realized at label y.
inline double decision_loss(const WeibullParams& theta, long y, const DecisionProblem& problem) {
    const auto dist = discretize_weibull(theta, problem.support, problem.point);
    return cost(decide(problem.policy, dist, problem.windows), y, problem.costs);
}

/// Monte-Carlo score-function estimate of the smoothed-loss gradient w.r.t. (scale, shape).
inline Eigen::Vector2d smoothed_decision_grad(const WeibullParams& theta, long y, const DecisionProblem& problem,
                                              const SpgConfig& config, Rng& rng) {
    require_valid(theta);
    const Eigen::Vector2d center(theta.scale, theta.shape);
    const double baseline = config.use_baseline() ? decision_loss(theta, y, problem) : 0.0;
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (int j = 0; j < config.samples(); ++j) {
        Eigen::Vector2d eta;
        eta(0) = rng.normal();
        eta(1) = rng.normal();
        const Eigen::Vector2d moved = center + config.sigma() * eta;
        // Invalid perturbations are clamped, not resampled, so every eta keeps its weight.
        const WeibullParams perturbed{std::max(moved(0), config.clamp_floor()),
                                      std::max(moved(1), config.clamp_floor())};
        const double diff = decision_loss(perturbed, y, problem) - baseline;
        if (diff != 0.0) acc += diff * eta;
    }
    return config.sigma_inverse() * acc / static_cast<double>(config.samples());
}

/// Per-element gradients; element i draws from the substream derive_seed(seed, stream_ids[i]),
/// so results do not depend on batch order or on the number of threads.
inline std::vector<Eigen::Vector2d> batch_smoothed_grad(std::span<const WeibullParams> thetas,
                                                        std::span<const long> labels,
                                                        std::span<const std::uint64_t> stream_ids,
                                                        const DecisionProblem& problem, const SpgConfig& config,
                                                        std::uint64_t seed, unsigned threads = 1) {
    if (thetas.size() != labels.size() || thetas.size() != stream_ids.size()) {
        throw DomainError("batch gradient inputs differ in length");
    }
    std::vector<Eigen::Vector2d> out(thetas.size(), Eigen::Vector2d::Zero());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(derive_seed(seed, stream_ids[i]));
            out[i] = smoothed_decision_grad(thetas[i], labels[i], problem, config, rng);
        }
    };
    const std::size_t n = thetas.size();
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        work(0, n);
        return out;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, w, begin, end] {
            try {
                work(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

/// Same as above with stream ids 0..n-1.
inline std::vector<Eigen::Vector2d> batch_smoothed_grad(std::span<const WeibullParams> thetas,
                                                        std::span<const long> labels,
                                                        const DecisionProblem& problem, const SpgConfig& config,
                                                        std::uint64_t seed, unsigned threads = 1) {
    std::vector<std::uint64_t> ids(thetas.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    return batch_smoothed_grad(thetas, labels, ids, problem, config, seed, threads);
}

}  // namespace ieo
