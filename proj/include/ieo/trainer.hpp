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

// Two-phase training: likelihood training (ETO) followed by decision-loss
// fine-tuning (IEO) from an ETO snapshot, driven by the perturbation gradient.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "ieo/cmapss.hpp"
#include "ieo/errors.hpp"
#include "ieo/maintenance.hpp"
#include "ieo/metrics.hpp"
#include "ieo/model.hpp"
#include "ieo/perturbation.hpp"
#include "ieo/random.hpp"

namespace ieo {

/// Seeded mini-batches: each epoch is a full shuffle, the last partial batch is kept,
/// and the batch of a step is a pure function of (seed, step).
class BatchSampler {
 public:
    BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
        : n_(n), batch_(batch_size), seed_(seed) {
        if (n == 0) throw DomainError("cannot sample batches from an empty dataset");
        if (batch_size == 0) throw ConfigError("batch size must be positive");
        per_epoch_ = (n_ + batch_ - 1) / batch_;
    }

    std::vector<std::size_t> batch(std::uint64_t step) {
        const std::uint64_t epoch = step / per_epoch_;
        if (!cached_epoch_ || *cached_epoch_ != epoch) {
            order_.resize(n_);
            for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
            Rng rng(derive_seed(seed_, epoch));
            rng.shuffle(std::span<std::size_t>(order_));
            cached_epoch_ = epoch;
        }
        const std::size_t b = static_cast<std::size_t>(step % per_epoch_);
        const std::size_t begin = b * batch_;
        const std::size_t end = std::min(n_, begin + batch_);
        return {order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end)};
    }

 private:
    std::size_t n_;
    std::size_t batch_;
    std::uint64_t seed_;
    std::size_t per_epoch_;
    std::vector<std::size_t> order_;
    std::optional<std::uint64_t> cached_epoch_;
};

struct EtoConfig {
    int steps = 200;               // before the snapshot handed to IEO
    int continuation_steps = 100;  // extra ETO-arm steps after the snapshot
    double lr = 1e-3;
    double continuation_lr = 1e-3;
    int batch_size = 64;
    double lambda_reg = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (steps < 1 || continuation_steps < 0) throw ConfigError("ETO step counts are invalid");
        if (!(lr > 0.0 && continuation_lr > 0.0)) throw ConfigError("ETO learning rates must be positive");
        if (batch_size < 1) throw ConfigError("ETO batch size must be positive");
        if (lambda_reg < 0.0) throw ConfigError("regularization strength must be non-negative");
    }
};

struct IeoConfig {
    int steps = 100;
    double lr = 2e-4;
    int batch_size = 64;
    SpgConfig spg;
    std::uint64_t seed = 0;
    std::optional<double> projection_radius;  // hard ball around the ETO snapshot; off by default
    unsigned threads = 1;                     // per-sample gradient workers

    void validate() const {
        if (steps < 0) throw ConfigError("IEO step count is invalid");
        if (!(lr > 0.0)) throw ConfigError("IEO learning rate must be positive");
        if (batch_size < 1) throw ConfigError("IEO batch size must be positive");
        if (projection_radius && !(*projection_radius > 0.0)) throw ConfigError("projection radius must be positive");
    }
};

struct StepRecord {
    std::uint64_t step;
    double loss;       // batch mean NLL (ETO) or batch mean decision loss (IEO)
    double grad_norm;
    double wall_ms;
};

struct TrainHistory {
    std::vector<StepRecord> records;

    /// One JSON object per line. Wall-clock is omitted unless requested so that
    /// histories of identical runs are byte-identical.
    void write_ndjson(std::ostream& os, const std::string& phase, bool with_timing = false) const {
        for (const auto& r : records) {
            nlohmann::json j = {{"phase", phase}, {"step", r.step}, {"loss", r.loss}, {"grad_norm", r.grad_norm}};
            if (with_timing) j["wall_ms"] = r.wall_ms;
            os << j.dump() << '\n';
        }
    }
};

/// Mutable ETO training state: parameters, optimizer moments and steps taken.
struct EtoState {
    MlpParams params;
    AdamState adam;
    std::uint64_t steps_done = 0;
};

namespace detail {

inline Eigen::MatrixXd gather(const cmapss::SampleMatrix& data, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd x(data.dim(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) x.col(static_cast<Eigen::Index>(i)) = data.features.col(static_cast<Eigen::Index>(idx[i]));
    return x;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

// Stream tags keep batch order, dropout masks and perturbations independent.
inline constexpr std::uint64_t kBatchStream = 0xB47C;
inline constexpr std::uint64_t kDropoutStream = 0xD209;
inline constexpr std::uint64_t kPerturbStream = 0x9E27;

}  // namespace detail

inline EtoState init_eto_state(const ModelConfig& model, std::uint64_t seed) {
    EtoState s;
    s.params = init_params(model, derive_seed(seed, 1));
    s.adam = AdamState::for_params(s.params);
    return s;
}

/// Runs `n_steps` Adam steps on the mini-batch mean NLL, continuing the state's step counter.
inline void run_eto_steps(EtoState& state, const cmapss::SampleMatrix& data, const ModelConfig& model,
                          const EtoConfig& cfg, RulSupport support, int n_steps, double lr, TrainHistory& history) {
    if (data.size() == 0) throw DomainError("ETO training set is empty");
    if (data.dim() != model.input_dim) throw ConfigError("dataset feature dimension differs from model input");
    BatchSampler sampler(data.size(), static_cast<std::size_t>(cfg.batch_size), derive_seed(cfg.seed, detail::kBatchStream));
    for (int i = 0; i < n_steps; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const std::uint64_t step = state.steps_done;
        const auto idx = sampler.batch(step);
        const Eigen::MatrixXd x = detail::gather(data, idx);
        std::vector<int> labels;
        for (auto j : idx) labels.push_back(data.labels[j]);
        Rng dropout(derive_seed(derive_seed(cfg.seed, detail::kDropoutStream), step));
        LossAndGrad lg;
        try {
            lg = nll_batch_loss_and_grad(x, labels, state.params, model, support, Mode::train, &dropout, cfg.lambda_reg);
        } catch (const NumericError& e) {
            throw TrainingDivergedError(e.what(), static_cast<std::size_t>(step));
        } catch (const DegenerateDistributionError& e) {
            throw TrainingDivergedError(e.what(), static_cast<std::size_t>(step));
        }
        const double gnorm = lg.grads.norm();
        if (!std::isfinite(lg.loss) || !std::isfinite(gnorm)) {
            throw TrainingDivergedError("non-finite NLL or gradient", static_cast<std::size_t>(step));
        }
        adam_step(state.params, lg.grads, state.adam, lr);
        ++state.steps_done;
        history.records.push_back({step, lg.loss, gnorm, detail::elapsed_ms(start)});
    }
}

struct TrainResult {
    MlpParams params;
    TrainHistory history;
};

/// Likelihood training from a seeded initialization for cfg.steps steps at cfg.lr.
inline TrainResult train_eto(const cmapss::SampleMatrix& data, const ModelConfig& model, const EtoConfig& cfg,
                             RulSupport support) {
    model.validate();
    cfg.validate();
    if (data.size() == 0) throw DomainError("ETO training set is empty");
    auto state = init_eto_state(model, cfg.seed);
    TrainHistory history;
    run_eto_steps(state, data, model, cfg, support, cfg.steps, cfg.lr, history);
    return {std::move(state.params), std::move(history)};
}

/// Decision-loss fine-tuning: per step, train-mode forward -> per-sample perturbation
/// gradients dL/dtheta -> backprop averaged over the batch -> Adam at the fine-tuning rate.
inline TrainResult finetune_ieo(const MlpParams& init, const cmapss::SampleMatrix& data, const ModelConfig& model,
                                const IeoConfig& cfg, const DecisionProblem& problem) {
    model.validate();
    cfg.validate();
    if (!init.matches(model)) throw DomainError("initial parameters do not match the model configuration");
    if (data.size() == 0) throw DomainError("IEO training set is empty");
    TrainResult out{init, {}};
    AdamState adam = AdamState::for_params(init);
    BatchSampler sampler(data.size(), static_cast<std::size_t>(cfg.batch_size), derive_seed(cfg.seed, detail::kBatchStream));
    const std::uint64_t perturb_seed = derive_seed(cfg.seed, detail::kPerturbStream);
    for (int i = 0; i < cfg.steps; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const auto step = static_cast<std::uint64_t>(i);
        const auto idx = sampler.batch(step);
        const Eigen::MatrixXd x = detail::gather(data, idx);
        Rng dropout(derive_seed(derive_seed(cfg.seed, detail::kDropoutStream), step));
        ForwardTrace trace;
        try {
            trace = forward_batch(x, out.params, model, Mode::train, &dropout);
        } catch (const NumericError& e) {
            throw TrainingDivergedError(e.what(), static_cast<std::size_t>(step));
        }
        std::vector<WeibullParams> thetas;
        std::vector<long> labels;
        std::vector<std::uint64_t> streams;
        double loss = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            thetas.push_back(trace.params_at(static_cast<Eigen::Index>(j)));
            labels.push_back(data.labels[idx[j]]);
            streams.push_back(idx[j]);
            loss += decision_loss(thetas.back(), labels.back(), problem);
        }
        loss /= static_cast<double>(idx.size());
        const auto grads = batch_smoothed_grad(thetas, labels, streams, problem, cfg.spg,
                                               derive_seed(perturb_seed, step), cfg.threads);
        Eigen::MatrixXd d_theta(2, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < grads.size(); ++j) {
            d_theta.col(static_cast<Eigen::Index>(j)) = grads[j] / static_cast<double>(idx.size());
        }
        const auto param_grads = backprop_output_grad(trace, d_theta, out.params, model);
        const double gnorm = param_grads.norm();
        if (!std::isfinite(loss) || !std::isfinite(gnorm)) {
            throw TrainingDivergedError("non-finite decision loss or gradient", static_cast<std::size_t>(step));
        }
        adam_step(out.params, param_grads, adam, cfg.lr);
        if (cfg.projection_radius) {
            MlpParams diff = out.params;
            diff.add_scaled(init, -1.0);
            const double dist = diff.norm();
            if (dist > *cfg.projection_radius) {
                out.params = init;
                out.params.add_scaled(diff, *cfg.projection_radius / dist);
            }
        }
        out.history.records.push_back({step, loss, gnorm, detail::elapsed_ms(start)});
    }
    return out;
}

/// Settings shared by every trial of an experiment.
struct TrialConfig {
    ModelConfig model;
    EtoConfig eto;
    IeoConfig ieo;
    CostParams costs = CostParams::turbofan();
    QuantileParams quantile;
    FeasibleSet windows = FeasibleSet::range(0, 125, 5);
    RulSupport support{150};

    DecisionProblem problem(const Policy& policy) const { return {policy, costs, windows, support}; }
    DecisionProblem cso() const { return problem(CsoPolicy{costs}); }
    DecisionProblem quantile_problem() const { return problem(QuantilePolicy{quantile}); }
};

enum class Framework { eto_cso, ieo_cso, eto_quantile, ieo_quantile };

inline constexpr std::array<Framework, 4> kFrameworks = {Framework::eto_cso, Framework::ieo_cso,
                                                         Framework::eto_quantile, Framework::ieo_quantile};

inline std::string framework_name(Framework f) {
    switch (f) {
        case Framework::eto_cso: return "ETO-C";
        case Framework::ieo_cso: return "IEO-C";
        case Framework::eto_quantile: return "ETO-Q";
        case Framework::ieo_quantile: return "IEO-Q";
    }
    return "";
}

struct TrialResult {
    std::uint64_t seed = 0;
    std::array<EvalReport, 4> reports;  // indexed like kFrameworks
    MlpParams eto_snapshot;             // parameters handed to both fine-tunes
    MlpParams eto_params;               // ETO arm after continuation
    MlpParams ieo_cso_params;
    MlpParams ieo_quantile_params;
    TrainHistory eto_history;           // snapshot phase and continuation
    TrainHistory ieo_cso_history;
    TrainHistory ieo_quantile_history;

    const EvalReport& report(Framework f) const { return reports[static_cast<std::size_t>(f)]; }
};

/// One trial: ETO to a snapshot, ETO continuation for the ETO arm, and one IEO
/// fine-tune per policy from the same snapshot; all four frameworks are then
/// evaluated on the split's evaluation set.
inline TrialResult run_trial(const cmapss::DatasetSplit& split, const TrialConfig& cfg, std::uint64_t trial_seed) {
    const auto train = cmapss::SampleMatrix::from(split.train);
    const auto eval = split.eval_is_train ? train : cmapss::SampleMatrix::from(split.eval);
    if (train.size() == 0) throw DomainError("training split is empty");
    if (eval.size() == 0) throw DomainError("evaluation split is empty");

    TrialResult r;
    r.seed = trial_seed;
    EtoConfig eto = cfg.eto;
    eto.seed = derive_seed(trial_seed, 10);
    eto.validate();
    auto state = init_eto_state(cfg.model, eto.seed);
    run_eto_steps(state, train, cfg.model, eto, cfg.support, eto.steps, eto.lr, r.eto_history);
    r.eto_snapshot = state.params;
    run_eto_steps(state, train, cfg.model, eto, cfg.support, eto.continuation_steps, eto.continuation_lr, r.eto_history);
    r.eto_params = state.params;

    IeoConfig ieo = cfg.ieo;
    ieo.seed = derive_seed(trial_seed, 20);
    const auto cso = cfg.cso();
    const auto quant = cfg.quantile_problem();
    auto ieo_c = finetune_ieo(r.eto_snapshot, train, cfg.model, ieo, cso);
    auto ieo_q = finetune_ieo(r.eto_snapshot, train, cfg.model, ieo, quant);
    r.ieo_cso_params = std::move(ieo_c.params);
    r.ieo_cso_history = std::move(ieo_c.history);
    r.ieo_quantile_params = std::move(ieo_q.params);
    r.ieo_quantile_history = std::move(ieo_q.history);

    const auto eto_thetas = predict(eval.features, r.eto_params, cfg.model);
    r.reports[0] = evaluate_predictions(eto_thetas, eval.labels, cso);
    r.reports[1] = evaluate(r.ieo_cso_params, cfg.model, cso, eval);
    r.reports[2] = evaluate_predictions(eto_thetas, eval.labels, quant);
    r.reports[3] = evaluate(r.ieo_quantile_params, cfg.model, quant, eval);
    return r;
}

}  // namespace ieo
