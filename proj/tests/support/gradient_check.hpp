#pragma once

// Central-difference check of the full NLL pipeline (discretization, positivity
// transform, network) on small random configurations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ieo/model.hpp"
#include "ieo/random.hpp"

namespace ieo::testing {

struct GradientCase {
    ModelConfig config;
    MlpParams params;
    Eigen::MatrixXd inputs;
    std::vector<int> labels;
    RulSupport support{60};
    Mode mode = Mode::eval;
    std::uint64_t dropout_seed = 0;
    double lambda_reg = 0.0;
};

inline GradientCase random_case(std::uint64_t seed) {
    Rng rng(seed);
    GradientCase g;
    g.config.input_dim = 3 + static_cast<int>(rng.below(6));
    g.config.hidden_dims.clear();
    const int depth = 1 + static_cast<int>(rng.below(2));
    for (int l = 0; l < depth; ++l) g.config.hidden_dims.push_back(2 + static_cast<int>(rng.below(7)));
    g.config.dropout_rate = rng.below(2) == 0 ? 0.0 : 0.2;
    g.config.scale_multiplier = 10.0 + 20.0 * rng.uniform01();
    g.config.shape_multiplier = 1.0 + 4.0 * rng.uniform01();
    g.params = init_params(g.config, derive_seed(seed, 1));
    const int batch = 1 + static_cast<int>(rng.below(4));
    g.inputs = Eigen::MatrixXd(g.config.input_dim, batch);
    for (Eigen::Index i = 0; i < g.inputs.size(); ++i) g.inputs(i) = 2.0 * rng.uniform01() - 1.0;
    for (int b = 0; b < batch; ++b) g.labels.push_back(1 + static_cast<int>(rng.below(40)));
    g.mode = g.config.dropout_rate > 0.0 ? Mode::train : Mode::eval;
    g.dropout_seed = derive_seed(seed, 2);
    g.lambda_reg = rng.below(3) == 0 ? 0.05 : 0.0;
    return g;
}

inline LossAndGrad evaluate_case(const GradientCase& g, const MlpParams& params) {
    Rng rng(g.dropout_seed);  // identical masks on every call
    return nll_batch_loss_and_grad(g.inputs, g.labels, params, g.config, g.support, g.mode, &rng, g.lambda_reg);
}

/// ||analytic - numeric|| / max(||analytic||, ||numeric||) over all parameters.
inline double relative_gradient_error(const GradientCase& g, double h = 1e-5) {
    const auto analytic = evaluate_case(g, g.params).grads;
    std::vector<double> a, n;
    analytic.for_each([&](double v) { a.push_back(v); });
    MlpParams probe = g.params;
    std::vector<double*> slots;
    probe.for_each([&](double& v) { slots.push_back(&v); });
    for (double* s : slots) {
        const double saved = *s;
        *s = saved + h;
        const double up = evaluate_case(g, probe).loss;
        *s = saved - h;
        const double down = evaluate_case(g, probe).loss;
        *s = saved;
        n.push_back((up - down) / (2.0 * h));
    }
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - n[i]) * (a[i] - n[i]);
        na += a[i] * a[i];
        nn += n[i] * n[i];
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

}  // namespace ieo::testing
