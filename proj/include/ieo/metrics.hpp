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

// Evaluation metrics over a labeled set and their aggregation across trials:
//   regret             mean of cost(z_i, y_i) - min_z cost(z, y_i)
//   failure frequency  mean of 1[z_i > y_i]
//   nll                mean of -log P(y_i | x_i)
//   mae                mean of |mode(P(. | x_i)) - y_i|

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ieo/cmapss.hpp"
#include "ieo/maintenance.hpp"
#include "ieo/model.hpp"
#include "ieo/perturbation.hpp"
#include "ieo/rul_dist.hpp"

namespace ieo {

struct SampleOutcome {
    long decision;
    int label;
    double regret;
};

struct EvalReport {
    double mean_regret = 0.0;
    double failure_frequency = 0.0;
    double mean_nll = 0.0;
    double mean_mae = 0.0;
    double mean_cost = 0.0;
    double mean_oracle_cost = 0.0;
    double max_sample_regret = 0.0;
    std::size_t n_samples = 0;
    std::vector<SampleOutcome> per_sample;  // filled on request
};

/// Metrics for given per-sample predictions.
inline EvalReport evaluate_predictions(std::span<const WeibullParams> thetas, std::span<const int> labels,
                                       const DecisionProblem& problem, bool keep_per_sample = false) {
    if (thetas.empty()) throw DomainError("evaluation set is empty");
    if (thetas.size() != labels.size()) throw DomainError("predictions and labels differ in length");
    EvalReport r;
    r.n_samples = thetas.size();
    double regret_sum = 0.0, fail = 0.0, nll_sum = 0.0, mae_sum = 0.0, cost_sum = 0.0, oracle_sum = 0.0;
    for (std::size_t i = 0; i < thetas.size(); ++i) {
        const int y = labels[i];
        const auto dist = discretize_weibull(thetas[i], problem.support, problem.point);
        const long z = decide(problem.policy, dist, problem.windows);
        const double c = cost(z, y, problem.costs);
        const double best = oracle_cost(y, problem.costs, problem.windows);
        regret_sum += c - best;
        cost_sum += c;
        oracle_sum += best;
        fail += z > y ? 1.0 : 0.0;
        nll_sum += nll(dist, y);
        mae_sum += std::abs(mode(dist) - y);
        r.max_sample_regret = std::max(r.max_sample_regret, c - best);
        if (keep_per_sample) r.per_sample.push_back({z, y, c - best});
    }
    const double n = static_cast<double>(thetas.size());
    r.mean_regret = regret_sum / n;
    r.failure_frequency = fail / n;
    r.mean_nll = nll_sum / n;
    r.mean_mae = mae_sum / n;
    r.mean_cost = cost_sum / n;
    r.mean_oracle_cost = oracle_sum / n;
    return r;
}

/// Runs the model in eval mode (no dropout) over the set and scores its decisions.
inline EvalReport evaluate(const MlpParams& params, const ModelConfig& config, const DecisionProblem& problem,
                           const cmapss::SampleMatrix& eval_set, bool keep_per_sample = false) {
    if (eval_set.size() == 0) throw DomainError("evaluation set is empty");
    const auto thetas = predict(eval_set.features, params, config);
    return evaluate_predictions(thetas, eval_set.labels, problem, keep_per_sample);
}

struct MetricSummary {
    double mean = 0.0;
    std::optional<double> std;  // sample standard deviation, absent below 2 trials
    double max = 0.0;
};

struct TrialAggregate {
    MetricSummary regret;
    MetricSummary failure_frequency;
    MetricSummary nll;
    MetricSummary mae;
    std::size_t trials = 0;
};

inline MetricSummary summarize(std::span<const double> values) {
    MetricSummary s;
    double sum = 0.0;
    s.max = values.front();
    for (double v : values) {
        sum += v;
        s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

/// Mean, sample standard deviation and maximum of each trial-level metric.
/// The regret maximum is over the trials' mean regrets.
inline TrialAggregate aggregate(std::span<const EvalReport> trials) {
    if (trials.empty()) throw DomainError("cannot aggregate zero trials");
    auto column = [&](auto member) {
        std::vector<double> v;
        for (const auto& t : trials) v.push_back(t.*member);
        return summarize(v);
    };
    TrialAggregate a;
    a.regret = column(&EvalReport::mean_regret);
    a.failure_frequency = column(&EvalReport::failure_frequency);
    a.nll = column(&EvalReport::mean_nll);
    a.mae = column(&EvalReport::mean_mae);
    a.trials = trials.size();
    return a;
}

inline nlohmann::json to_json(const EvalReport& r) {
    return {{"mean_regret", r.mean_regret},   {"failure_frequency", r.failure_frequency},
            {"mean_nll", r.mean_nll},         {"mean_mae", r.mean_mae},
            {"mean_cost", r.mean_cost},       {"mean_oracle_cost", r.mean_oracle_cost},
            {"max_sample_regret", r.max_sample_regret}, {"n_samples", r.n_samples}};
}

inline nlohmann::json to_json(const MetricSummary& s) {
    nlohmann::json j = {{"mean", s.mean}, {"max", s.max}};
    j["std"] = s.std ? nlohmann::json(*s.std) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json to_json(const TrialAggregate& a) {
    return {{"regret", to_json(a.regret)}, {"failure_frequency", to_json(a.failure_frequency)},
            {"nll", to_json(a.nll)},       {"mae", to_json(a.mae)},
            {"trials", a.trials}};
}

inline const char* kReportCsvHeader = "mean_regret,failure_frequency,mean_nll,mean_mae,mean_cost,mean_oracle_cost,max_sample_regret,n_samples";

inline void write_csv_row(std::ostream& os, const EvalReport& r) {
    const auto old = os.precision(17);
    os << r.mean_regret << ',' << r.failure_frequency << ',' << r.mean_nll << ',' << r.mean_mae << ','
       << r.mean_cost << ',' << r.mean_oracle_cost << ',' << r.max_sample_regret << ',' << r.n_samples;
    os.precision(old);
}

/// One summary row: per metric mean, std (empty when absent) and max.
inline void write_aggregate_csv(std::ostream& os, const std::string& label, const TrialAggregate& a) {
    const auto old = os.precision(17);
    os << label << ',' << a.trials;
    for (const auto* m : {&a.regret, &a.failure_frequency, &a.nll, &a.mae}) {
        os << ',' << m->mean << ',';
        if (m->std) os << *m->std;
        os << ',' << m->max;
    }
    os.precision(old);
}

inline const char* kAggregateCsvHeader =
    "framework,trials,regret_mean,regret_std,regret_max,failure_mean,failure_std,failure_max,"
    "nll_mean,nll_std,nll_max,mae_mean,mae_std,mae_max";

}  // namespace ieo
