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

// Feed-forward RUL predictor: input -> ReLU hidden layers with inverted dropout ->
// two raw outputs u -> Weibull parameters theta = multiplier * softplus(u) + floor.
//
// Batches are column-major: one sample per column of the input matrix.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ieo/errors.hpp"
#include "ieo/random.hpp"
#include "ieo/rul_dist.hpp"

namespace ieo {

struct ModelConfig {
    int input_dim = 420;
    std::vector<int> hidden_dims = {400, 100};
    double dropout_rate = 0.10;
    /// Per-output multipliers on softplus(u): they set the natural units of the
    /// scale (cycles) and shape outputs so that a unit-scale network covers RUL ranges.
    double scale_multiplier = 100.0;
    double shape_multiplier = 10.0;
    double positivity_floor = 1e-3;

    static constexpr int output_dim = 2;

    void validate() const {
        if (input_dim <= 0) throw ConfigError("input_dim must be positive");
        for (int h : hidden_dims) {
            if (h <= 0) throw ConfigError("hidden layer widths must be positive");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
        if (!(scale_multiplier > 0.0 && shape_multiplier > 0.0)) {
            throw ConfigError("output multipliers must be positive");
        }
        if (!(positivity_floor > 0.0)) throw ConfigError("positivity floor must be positive");
    }

    /// Widths of every layer boundary: input, hidden..., output.
    std::vector<int> widths() const {
        std::vector<int> w{input_dim};
        w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
        w.push_back(output_dim);
        return w;
    }
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Network parameters; also used for gradients and optimizer moments.
struct MlpParams {
    std::vector<DenseLayer> layers;

    static MlpParams zeros(const ModelConfig& config) {
        const auto w = config.widths();
        MlpParams p;
        for (std::size_t l = 0; l + 1 < w.size(); ++l) {
            p.layers.push_back({Eigen::MatrixXd::Zero(w[l + 1], w[l]), Eigen::VectorXd::Zero(w[l + 1])});
        }
        return p;
    }

    MlpParams zeros_like() const {
        MlpParams p;
        for (const auto& layer : layers) {
            p.layers.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                                Eigen::VectorXd::Zero(layer.bias.size())});
        }
        return p;
    }

    bool same_shape(const MlpParams& other) const {
        if (layers.size() != other.layers.size()) return false;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].weight.rows() != other.layers[l].weight.rows() ||
                layers[l].weight.cols() != other.layers[l].weight.cols() ||
                layers[l].bias.size() != other.layers[l].bias.size()) {
                return false;
            }
        }
        return true;
    }

    bool matches(const ModelConfig& config) const { return same_shape(zeros(config)); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
        return n;
    }

    double squared_norm() const {
        double s = 0.0;
        for (const auto& layer : layers) s += layer.weight.squaredNorm() + layer.bias.squaredNorm();
        return s;
    }

    double norm() const { return std::sqrt(squared_norm()); }

    bool all_finite() const {
        for (const auto& layer : layers) {
            if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
        }
        return true;
    }

    /// this += factor * other
    void add_scaled(const MlpParams& other, double factor) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].weight += factor * other.layers[l].weight;
            layers[l].bias += factor * other.layers[l].bias;
        }
    }

    void scale(double factor) {
        for (auto& layer : layers) {
            layer.weight *= factor;
            layer.bias *= factor;
        }
    }

    /// Visits every scalar in a fixed order: per layer, weights row-major, then bias.
    template <typename F>
    void for_each(F&& f) {
        for (auto& layer : layers) {
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
                for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) f(layer.weight(r, c));
            }
            for (Eigen::Index r = 0; r < layer.bias.size(); ++r) f(layer.bias(r));
        }
    }

    template <typename F>
    void for_each(F&& f) const {
        const_cast<MlpParams*>(this)->for_each([&](double& v) { f(static_cast<const double&>(v)); });
    }

    bool operator==(const MlpParams& other) const {
        if (!same_shape(other)) return false;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].weight != other.layers[l].weight || layers[l].bias != other.layers[l].bias) return false;
        }
        return true;
    }
};

/// Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
inline MlpParams init_params(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    MlpParams p = MlpParams::zeros(config);
    Rng rng(seed);
    for (auto& layer : p.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                layer.weight(r, c) = bound * (2.0 * rng.uniform01() - 1.0);
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = bound * (2.0 * rng.uniform01() - 1.0);
    }
    return p;
}

enum class Mode { train, eval };

/// Intermediate values of a batch forward pass, kept for backpropagation.
struct ForwardTrace {
    Eigen::MatrixXd input;                     // in x B
    std::vector<Eigen::MatrixXd> pre;          // hidden pre-activations
    std::vector<Eigen::MatrixXd> post;         // hidden outputs after ReLU and dropout
    std::vector<Eigen::MatrixXd> masks;        // 0 or 1/(1-p); empty in eval mode
    Eigen::MatrixXd raw;                       // 2 x B
    Eigen::MatrixXd theta;                     // 2 x B, row 0 scale, row 1 shape

    Eigen::Index batch_size() const { return input.cols(); }
    WeibullParams params_at(Eigen::Index i) const { return {theta(0, i), theta(1, i)}; }
};

namespace detail {

inline double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

inline double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

}  // namespace detail

/// Batch forward pass. Train mode draws dropout masks from `rng` layer by layer,
/// sample by sample, unit by unit; it needs an rng whenever dropout_rate > 0.
inline ForwardTrace forward_batch(const Eigen::MatrixXd& inputs, const MlpParams& params,
                                  const ModelConfig& config, Mode mode, Rng* rng = nullptr) {
    if (inputs.rows() != config.input_dim) {
        throw DomainError("input has " + std::to_string(inputs.rows()) + " features, model expects " +
                          std::to_string(config.input_dim));
    }
    if (!params.matches(config)) throw DomainError("parameters do not match the model configuration");
    const bool use_dropout = mode == Mode::train && config.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr) throw DomainError("train-mode forward with dropout needs an rng");

    ForwardTrace trace;
    trace.input = inputs;
    const std::size_t hidden = config.hidden_dims.size();
    const Eigen::MatrixXd* current = &trace.input;
    for (std::size_t l = 0; l < hidden; ++l) {
        const auto& layer = params.layers[l];
        Eigen::MatrixXd z = layer.weight * (*current);
        z.colwise() += layer.bias;
        if (!z.allFinite()) throw NumericError("non-finite activation in layer " + std::to_string(l), static_cast<std::ptrdiff_t>(l));
        Eigen::MatrixXd a = z.cwiseMax(0.0);
        if (use_dropout) {
            const double keep_scale = 1.0 / (1.0 - config.dropout_rate);
            Eigen::MatrixXd mask(a.rows(), a.cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c) {
                for (Eigen::Index r = 0; r < mask.rows(); ++r) {
                    mask(r, c) = rng->uniform01() < config.dropout_rate ? 0.0 : keep_scale;
                }
            }
            a = a.cwiseProduct(mask);
            trace.masks.push_back(std::move(mask));
        }
        trace.pre.push_back(std::move(z));
        trace.post.push_back(std::move(a));
        current = &trace.post.back();
    }
    const auto& out = params.layers.back();
    trace.raw = out.weight * (*current);
    trace.raw.colwise() += out.bias;
    if (!trace.raw.allFinite()) {
        throw NumericError("non-finite raw output", static_cast<std::ptrdiff_t>(hidden));
    }
    trace.theta.resize(2, trace.raw.cols());
    for (Eigen::Index c = 0; c < trace.raw.cols(); ++c) {
        trace.theta(0, c) = config.scale_multiplier * detail::softplus(trace.raw(0, c)) + config.positivity_floor;
        trace.theta(1, c) = config.shape_multiplier * detail::softplus(trace.raw(1, c)) + config.positivity_floor;
    }
    return trace;
}

/// Single-sample forward pass.
inline std::pair<WeibullParams, ForwardTrace> forward(std::span<const double> x, const MlpParams& params,
                                                      const ModelConfig& config, Mode mode, Rng* rng = nullptr) {
    Eigen::MatrixXd input = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    if (!input.allFinite()) throw NumericError("non-finite input", 0);
    auto trace = forward_batch(input, params, config, mode, rng);
    const WeibullParams theta = trace.params_at(0);
    return {theta, std::move(trace)};
}

/// Eval-mode Weibull parameters for many samples, computed in fixed-size chunks.
inline std::vector<WeibullParams> predict(const Eigen::MatrixXd& inputs, const MlpParams& params,
                                          const ModelConfig& config, Eigen::Index chunk = 1024) {
    std::vector<WeibullParams> out;
    out.reserve(static_cast<std::size_t>(inputs.cols()));
    for (Eigen::Index start = 0; start < inputs.cols(); start += chunk) {
        const Eigen::Index n = std::min(chunk, inputs.cols() - start);
        const auto trace = forward_batch(inputs.middleCols(start, n), params, config, Mode::eval);
        for (Eigen::Index i = 0; i < n; ++i) out.push_back(trace.params_at(i));
    }
    return out;
}

/// Pulls per-sample output gradients dL/dtheta (2 x B) back to the parameters:
/// returns sum_i dL_i/dtheta_i * dtheta_i/domega.
inline MlpParams backprop_output_grad(const ForwardTrace& trace, const Eigen::MatrixXd& d_theta,
                                      const MlpParams& params, const ModelConfig& config) {
    const std::size_t hidden = config.hidden_dims.size();
    if (!params.matches(config) || trace.pre.size() != hidden || trace.raw.rows() != 2 ||
        d_theta.rows() != 2 || d_theta.cols() != trace.raw.cols() || trace.input.rows() != config.input_dim) {
        throw DomainError("trace, gradient and parameter shapes disagree");
    }
    const bool had_dropout = !trace.masks.empty();
    MlpParams grads = params.zeros_like();

    Eigen::MatrixXd delta(2, trace.raw.cols());
    for (Eigen::Index c = 0; c < delta.cols(); ++c) {
        delta(0, c) = d_theta(0, c) * config.scale_multiplier * detail::sigmoid(trace.raw(0, c));
        delta(1, c) = d_theta(1, c) * config.shape_multiplier * detail::sigmoid(trace.raw(1, c));
    }
    for (std::size_t l = hidden + 1; l-- > 0;) {
        const Eigen::MatrixXd& below = l == 0 ? trace.input : trace.post[l - 1];
        grads.layers[l].weight.noalias() = delta * below.transpose();
        grads.layers[l].bias = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd back = params.layers[l].weight.transpose() * delta;
        if (had_dropout) back = back.cwiseProduct(trace.masks[l - 1]);
        const auto& z = trace.pre[l - 1];
        delta = back.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    }
    return grads;
}

/// Gradient of lambda_reg * ||omega||_2; zero at omega = 0.
inline MlpParams l2_norm_grad(const MlpParams& params, double lambda_reg) {
    MlpParams g = params.zeros_like();
    const double n = params.norm();
    if (lambda_reg == 0.0 || n == 0.0) return g;
    g.add_scaled(params, lambda_reg / n);
    return g;
}

struct LossAndGrad {
    double loss = 0.0;
    MlpParams grads;
};

/// dNLL/dtheta for one sample, zero when the label's mass is below the NLL cap.
struct NllTerm {
    double loss;
    double d_scale;
    double d_shape;
};

inline NllTerm nll_term(const WeibullParams& theta, RulSupport support, int y, EvalPoint point = EvalPoint::left) {
    const auto lp = discretized_log_prob_grad(theta, support, y, point);
    if (!(-lp.log_prob < kNllCap)) return {kNllCap, 0.0, 0.0};
    return {-lp.log_prob, -lp.d_scale, -lp.d_shape};
}

/// Mean NLL over a batch plus lambda_reg * ||omega||_2, with its exact gradient.
inline LossAndGrad nll_batch_loss_and_grad(const Eigen::MatrixXd& inputs, std::span<const int> labels,
                                           const MlpParams& params, const ModelConfig& config,
                                           RulSupport support, Mode mode, Rng* rng,
                                           double lambda_reg = 0.0, EvalPoint point = EvalPoint::left) {
    if (static_cast<std::size_t>(inputs.cols()) != labels.size() || labels.empty()) {
        throw DomainError("batch inputs and labels disagree in length");
    }
    const auto trace = forward_batch(inputs, params, config, mode, rng);
    const double inv_n = 1.0 / static_cast<double>(labels.size());
    Eigen::MatrixXd d_theta(2, inputs.cols());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < inputs.cols(); ++i) {
        const auto term = nll_term(trace.params_at(i), support, labels[static_cast<std::size_t>(i)], point);
        loss += term.loss * inv_n;
        d_theta(0, i) = term.d_scale * inv_n;
        d_theta(1, i) = term.d_shape * inv_n;
    }
    LossAndGrad out{loss + lambda_reg * params.norm(), backprop_output_grad(trace, d_theta, params, config)};
    if (lambda_reg != 0.0) out.grads.add_scaled(l2_norm_grad(params, lambda_reg), 1.0);
    return out;
}

/// Single-sample NLL loss and gradient.
inline LossAndGrad nll_loss_and_grad(std::span<const double> x, int y, const MlpParams& params,
                                     const ModelConfig& config, RulSupport support, Mode mode, Rng* rng,
                                     double lambda_reg = 0.0, EvalPoint point = EvalPoint::left) {
    Eigen::MatrixXd input = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const int label[1] = {y};
    return nll_batch_loss_and_grad(input, label, params, config, support, mode, rng, lambda_reg, point);
}

struct AdamState {
    MlpParams first;
    MlpParams second;
    long step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_params(const MlpParams& params) {
        return {params.zeros_like(), params.zeros_like(), 0};
    }
};

/// Bias-corrected Adam update in place.
inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state, double lr) {
    if (!params.same_shape(grads) || !params.same_shape(state.first) || !params.same_shape(state.second)) {
        throw DomainError("Adam: parameter, gradient and moment shapes disagree");
    }
    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        update(params.layers[l].weight, grads.layers[l].weight, state.first.layers[l].weight,
               state.second.layers[l].weight);
        update(params.layers[l].bias, grads.layers[l].bias, state.first.layers[l].bias,
               state.second.layers[l].bias);
    }
}

}  // namespace ieo
