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

// CSV emitters backing the figures. Rendering is left to external tools.

#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "ieo/analysis.hpp"
#include "ieo/perturbation.hpp"
#include "ieo/random.hpp"

namespace ieo::plot {

/// support value, reference probability, both estimates of the first target, then
/// both estimates of every further target.
inline void write_example_csv(std::ostream& os, const analysis::ExampleReport& rep) {
    os.precision(17);
    os << "y,p_true";
    for (const auto& t : rep.targets) os << ",p_hat1_" << t.target << "pct,p_hat2_" << t.target << "pct";
    os << '\n';
    for (std::size_t i = 0; i < rep.reference.size(); ++i) {
        os << i + 1 << ',' << rep.reference[i];
        for (const auto& t : rep.targets) os << ',' << t.first.probs[i] << ',' << t.second.probs[i];
        os << '\n';
    }
}

/// Gap versus error over a grid of targets for every family that reaches them.
inline void write_gap_curve_csv(std::ostream& os, const DiscreteRulDist& p, const CostParams& costs,
                                const std::vector<double>& targets) {
    const auto windows = FeasibleSet::of_support(p.support());
    const Policy policy = CsoPolicy{costs};
    const int tail = mode(p);
    os.precision(17);
    os << "family,target_pct,estimation_error_pct,optimality_gap_pct,decision\n";
    for (auto fam : {analysis::Family::rate_shift, analysis::Family::temper, analysis::Family::tail_temper}) {
        for (int dir : {+1, -1}) {
            const analysis::DirectionSpec spec{fam, dir, 20.0, tail};
            for (double target : targets) {
                try {
                    const auto est = analysis::construct_estimate_at_error(p, target, spec);
                    os << spec.name() << ',' << target << ',' << est.achieved_error << ','
                       << analysis::relative_optimality_gap(p, est.dist, policy, costs, windows) << ','
                       << decide(policy, est.dist, windows) << '\n';
                } catch (const DomainError&) {
                    // unreachable in this family
                }
            }
        }
    }
}

struct Grid {
    double scale_lo = 60.0, scale_hi = 140.0, scale_step = 2.0;
    double shape_lo = 5.0, shape_hi = 25.0, shape_step = 0.5;
};

/// NLL and decision loss of both policies over a (scale, shape) grid at one label.
inline void write_landscape_csv(std::ostream& os, const DecisionProblem& cso, const DecisionProblem& quantile, int y,
                                const Grid& g = {}) {
    os.precision(17);
    os << "scale,shape,nll,loss_cso,loss_quantile,regret_cso,regret_quantile\n";
    const double best = oracle_cost(y, cso.costs, cso.windows);
    for (double lam = g.scale_lo; lam <= g.scale_hi + 1e-9; lam += g.scale_step) {
        for (double k = g.shape_lo; k <= g.shape_hi + 1e-9; k += g.shape_step) {
            const WeibullParams th{lam, k};
            const double lc = decision_loss(th, y, cso);
            const double lq = decision_loss(th, y, quantile);
            os << lam << ',' << k << ',' << nll(discretize_weibull(th, cso.support, cso.point), y) << ',' << lc << ','
               << lq << ',' << lc - best << ',' << lq - best << '\n';
        }
    }
}

/// Descent directions at theta: the negative NLL gradient and the negative smoothed
/// decision-loss gradient of each policy.
inline void write_gradient_csv(std::ostream& os, const WeibullParams& theta, int y, const DecisionProblem& cso,
                               const DecisionProblem& quantile, const SpgConfig& spg, std::uint64_t seed) {
    os.precision(17);
    os << "source,scale,shape,d_scale,d_shape\n";
    const auto g = discretized_log_prob_grad(theta, cso.support, y, cso.point);
    os << "nll," << theta.scale << ',' << theta.shape << ',' << g.d_scale << ',' << g.d_shape << '\n';
    Rng rc(derive_seed(seed, 1));
    const Eigen::Vector2d gc = smoothed_decision_grad(theta, y, cso, spg, rc);
    os << "decision_cso," << theta.scale << ',' << theta.shape << ',' << -gc(0) << ',' << -gc(1) << '\n';
    Rng rq(derive_seed(seed, 2));
    const Eigen::Vector2d gq = smoothed_decision_grad(theta, y, quantile, spg, rq);
    os << "decision_quantile," << theta.scale << ',' << theta.shape << ',' << -gq(0) << ',' << -gq(1) << '\n';
}

/// Individual perturbations around theta; `changed` marks those whose loss differs
/// from the unperturbed one (the only ones that move the estimate when the baseline is on).
inline void write_perturbation_csv(std::ostream& os, const WeibullParams& theta, int y, const DecisionProblem& problem,
                                   const SpgConfig& spg, int count, std::uint64_t seed) {
    os.precision(17);
    os << "eta_scale,eta_shape,scale,shape,loss,changed\n";
    Rng rng(seed);
    const double base = decision_loss(theta, y, problem);
    for (int j = 0; j < count; ++j) {
        Eigen::Vector2d eta;
        eta(0) = rng.normal();
        eta(1) = rng.normal();
        const Eigen::Vector2d moved = Eigen::Vector2d(theta.scale, theta.shape) + spg.sigma() * eta;
        const WeibullParams p{std::max(moved(0), spg.clamp_floor()), std::max(moved(1), spg.clamp_floor())};
        const double l = decision_loss(p, y, problem);
        os << eta(0) << ',' << eta(1) << ',' << p.scale << ',' << p.shape << ',' << l << ',' << (l != base ? 1 : 0)
           << '\n';
    }
}

}  // namespace ieo::plot
