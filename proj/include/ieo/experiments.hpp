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

// Case-study orchestration: configuration (presets, key = value files), dataset
// loading with an on-disk window cache, repeated seeded trials and result files.
//
// Output directory layout:
//   summary.json                     configuration echo, dataset description, aggregates
//   trials.csv                       one row per (trial, framework)
//   figures/metrics_tidy.csv         framework, trial, metric, value
//   history/<trial>.ndjson           per-step training records of every phase
//   checkpoints/<trial>-<phase>.bin  eto_snapshot, eto, ieo_cso, ieo_quantile

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ieo/checkpoint.hpp"
#include "ieo/cmapss.hpp"
#include "ieo/errors.hpp"
#include "ieo/metrics.hpp"
#include "ieo/synthetic.hpp"
#include "ieo/trainer.hpp"

namespace ieo {

inline constexpr const char* kTrainFileName = "train_FD001.txt";

struct CaseConfig {
    cmapss::Case kind = cmapss::Case::base;
    int n_trials = 100;
    std::uint64_t master_seed = 0;
    std::filesystem::path data_dir = "data";
    cmapss::DataConfig data;
    TrialConfig trial;
    unsigned threads = 1;
    std::string preset = "full";
    bool write_checkpoints = true;
    bool timing = false;  // wall-clock in history and summary; breaks byte-identical output

    void validate() const {
        if (n_trials < 1) throw ConfigError("trial count must be positive");
        trial.model.validate();
        trial.eto.validate();
        trial.ieo.validate();
        trial.costs.validate();
        trial.quantile.validate();
        if (trial.windows.back() > trial.support.horizon()) {
            throw ConfigError("maintenance windows must not exceed the horizon");
        }
        if (data.horizon != trial.support.horizon()) throw ConfigError("data and model horizons differ");
        if (trial.model.input_dim != data.window * static_cast<int>(data.sensor_ids.size())) {
            throw ConfigError("model input dimension must equal window x sensor count");
        }
    }
};

/// Applies a named preset. "full" is the complete training configuration;
/// "desk" shortens every phase for quick runs and is not that configuration.
inline void apply_preset(CaseConfig& c, const std::string& name) {
    if (name == "full") {
        c.n_trials = 100;
        c.trial.eto.steps = 200;
        c.trial.eto.continuation_steps = 100;
        c.trial.ieo.steps = 100;
        c.trial.ieo.spg = c.trial.ieo.spg.with_samples(1000);
    } else if (name == "desk") {
        c.n_trials = 20;
        c.trial.eto.steps = 100;
        c.trial.eto.continuation_steps = 50;
        c.trial.ieo.steps = 50;
        c.trial.ieo.spg = c.trial.ieo.spg.with_samples(200);
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected full or desk)");
    }
    c.preset = name;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': not a number: '" + v + "'");
    }
}

inline long to_long(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) throw ConfigError("config key '" + key + "': not an integer: '" + v + "'");
    return static_cast<long>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("config key '" + key + "': not a boolean: '" + v + "'");
}

inline std::vector<int> to_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    for (const auto& item : split_list(v)) out.push_back(static_cast<int>(to_long(key, item)));
    return out;
}

}  // namespace detail

/// Flat key = value pairs; '#' starts a comment.
inline std::map<std::string, std::string> parse_config_text(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", no);
        kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
    }
    return kv;
}

/// Applies key/value settings to a configuration. The preset key is applied first.
inline void apply_settings(CaseConfig& c, const std::map<std::string, std::string>& kv) {
    using namespace detail;
    if (auto it = kv.find("preset"); it != kv.end()) apply_preset(c, it->second);
    auto& t = c.trial;
    for (const auto& [key, v] : kv) {
        if (key == "preset") continue;
        if (key == "case") c.kind = cmapss::parse_case(v);
        else if (key == "trials") c.n_trials = static_cast<int>(to_long(key, v));
        else if (key == "seed") c.master_seed = static_cast<std::uint64_t>(to_long(key, v));
        else if (key == "data_dir") c.data_dir = v;
        else if (key == "threads") c.threads = static_cast<unsigned>(to_long(key, v));
        else if (key == "checkpoints") c.write_checkpoints = to_bool(key, v);
        else if (key == "timing") c.timing = to_bool(key, v);
        else if (key == "window") c.data.window = static_cast<int>(to_long(key, v));
        else if (key == "stride") c.data.stride = static_cast<int>(to_long(key, v));
        else if (key == "sensors") c.data.sensor_ids = to_int_list(key, v);
        else if (key == "cap") c.data.cap_override = static_cast<int>(to_long(key, v));
        else if (key == "filter_max") c.data.filter_override = static_cast<int>(to_long(key, v));
        else if (key == "rul_limit") c.data.rul_limit = static_cast<int>(to_long(key, v));
        else if (key == "test_engines") c.data.test_engines = static_cast<int>(to_long(key, v));
        else if (key == "horizon") {
            c.data.horizon = static_cast<int>(to_long(key, v));
            t.support = RulSupport(c.data.horizon);
        }
        else if (key == "hidden") t.model.hidden_dims = to_int_list(key, v);
        else if (key == "dropout") t.model.dropout_rate = to_double(key, v);
        else if (key == "scale_multiplier") t.model.scale_multiplier = to_double(key, v);
        else if (key == "shape_multiplier") t.model.shape_multiplier = to_double(key, v);
        else if (key == "eto_steps") t.eto.steps = static_cast<int>(to_long(key, v));
        else if (key == "eto_continuation_steps") t.eto.continuation_steps = static_cast<int>(to_long(key, v));
        else if (key == "eto_lr") t.eto.lr = to_double(key, v);
        else if (key == "eto_continuation_lr") t.eto.continuation_lr = to_double(key, v);
        else if (key == "batch_size") {
            t.eto.batch_size = static_cast<int>(to_long(key, v));
            t.ieo.batch_size = t.eto.batch_size;
        }
        else if (key == "lambda_reg") t.eto.lambda_reg = to_double(key, v);
        else if (key == "ieo_steps") t.ieo.steps = static_cast<int>(to_long(key, v));
        else if (key == "ieo_lr") t.ieo.lr = to_double(key, v);
        else if (key == "projection_radius") t.ieo.projection_radius = to_double(key, v);
        else if (key == "spg_samples") t.ieo.spg = t.ieo.spg.with_samples(static_cast<int>(to_long(key, v)));
        else if (key == "spg_baseline") t.ieo.spg = t.ieo.spg.with_baseline(to_bool(key, v));
        else if (key == "spg_sigma") {
            const auto parts = split_list(v);
            if (parts.size() != 4) throw ConfigError("spg_sigma needs 4 comma-separated entries (row-major 2x2)");
            Eigen::Matrix2d s;
            s << to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2]), to_double(key, parts[3]);
            const auto& old = t.ieo.spg;
            t.ieo.spg = SpgConfig(s, old.samples(), old.use_baseline(), old.clamp_floor());
        }
        else if (key == "alpha") t.quantile.alpha = to_double(key, v);
        else if (key == "c_p") t.costs.preventive = to_double(key, v);
        else if (key == "c_c") t.costs.corrective = to_double(key, v);
        else if (key == "c_m") t.costs.component_per_cycle = to_double(key, v);
        else if (key == "c_d") t.costs.downtime_per_cycle = to_double(key, v);
        else if (key == "windows") {
            const auto parts = split_list(v, ':');
            if (parts.size() != 3) throw ConfigError("windows expects first:last:step");
            t.windows = FeasibleSet::range(to_long(key, parts[0]), to_long(key, parts[1]), to_long(key, parts[2]));
        }
        else throw ConfigError("unknown config key '" + key + "'");
    }
    t.model.input_dim = c.data.window * static_cast<int>(c.data.sensor_ids.size());
}

inline nlohmann::json to_json(const CaseConfig& c) {
    const auto& t = c.trial;
    nlohmann::json j;
    j["case"] = cmapss::case_name(c.kind);
    j["preset"] = c.preset;
    j["trials"] = c.n_trials;
    j["seed"] = c.master_seed;
    j["data"] = {{"window", c.data.window}, {"stride", c.data.stride}, {"sensors", c.data.sensor_ids},
                 {"horizon", c.data.horizon}, {"test_engines", c.data.test_engines}, {"rul_limit", c.data.rul_limit}};
    j["model"] = {{"input_dim", t.model.input_dim}, {"hidden", t.model.hidden_dims},
                  {"dropout", t.model.dropout_rate}, {"scale_multiplier", t.model.scale_multiplier},
                  {"shape_multiplier", t.model.shape_multiplier}, {"positivity_floor", t.model.positivity_floor}};
    j["eto"] = {{"steps", t.eto.steps}, {"continuation_steps", t.eto.continuation_steps}, {"lr", t.eto.lr},
                {"continuation_lr", t.eto.continuation_lr}, {"batch_size", t.eto.batch_size},
                {"lambda_reg", t.eto.lambda_reg}};
    const auto& s = t.ieo.spg.sigma();
    j["ieo"] = {{"steps", t.ieo.steps}, {"lr", t.ieo.lr}, {"batch_size", t.ieo.batch_size},
                {"spg_samples", t.ieo.spg.samples()}, {"spg_baseline", t.ieo.spg.use_baseline()},
                {"spg_sigma", {s(0, 0), s(0, 1), s(1, 0), s(1, 1)}}};
    if (t.ieo.projection_radius) j["ieo"]["projection_radius"] = *t.ieo.projection_radius;
    j["costs"] = {{"c_p", t.costs.preventive}, {"c_c", t.costs.corrective}, {"c_m", t.costs.component_per_cycle},
                  {"c_d", t.costs.downtime_per_cycle}};
    j["alpha"] = t.quantile.alpha;
    j["windows"] = std::vector<long>(t.windows.windows().begin(), t.windows.windows().end());
    return j;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes the surrogate fleet as <dir>/train_FD001.txt unless a file is already there.
/// Returns true when a file was written.
inline bool ensure_surrogate_data(const std::filesystem::path& dir, int engines = 100, std::uint64_t seed = 2001) {
    const auto path = dir / kTrainFileName;
    if (std::filesystem::exists(path)) return false;
    std::filesystem::create_directories(dir);
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    cmapss::write_cmapss(os, cmapss::synthesize_fleet(engines, seed));
    return true;
}

inline std::filesystem::path cache_path(const std::filesystem::path& dir, cmapss::Case c) {
    return dir / ("cache_" + cmapss::case_name(c) + ".ieods");
}

/// Loads the split for a case from <data_dir>/train_FD001.txt, reusing the window cache
/// when its fingerprint matches, and refreshing it otherwise.
inline cmapss::DatasetSplit load_split(const std::filesystem::path& data_dir, cmapss::Case c,
                                       const cmapss::DataConfig& cfg, bool write_cache = true) {
    const auto source = data_dir / kTrainFileName;
    if (!std::filesystem::exists(source)) {
        throw Error("data missing: " + source.string() + " (run prepare-data, or place the CMAPSS file there)");
    }
    const std::string bytes = read_file(source);
    const auto hash = cmapss::cache_hash(bytes, c, cfg);
    const auto cpath = cache_path(data_dir, c);
    if (std::filesystem::exists(cpath)) {
        std::ifstream in(cpath, std::ios::binary);
        if (auto cached = cmapss::read_cache(in, hash)) return std::move(*cached);
    }
    std::istringstream text(bytes);
    auto split = cmapss::make_split(cmapss::parse_cmapss(text), c, cfg);
    if (write_cache) {
        std::ofstream out(cpath, std::ios::binary);
        if (out) cmapss::write_cache(out, split, hash);
    }
    return split;
}

struct ExperimentResult {
    std::array<TrialAggregate, 4> aggregates;  // indexed like kFrameworks
    std::vector<std::array<EvalReport, 4>> trials;
    std::vector<std::uint64_t> seeds;
    nlohmann::json config;
    std::string dataset_rule;
    std::size_t n_train = 0;
    std::size_t n_eval = 0;
    double runtime_s = 0.0;

    const TrialAggregate& aggregate_of(Framework f) const { return aggregates[static_cast<std::size_t>(f)]; }
};

inline std::uint64_t trial_seed(std::uint64_t master, int index) {
    return derive_seed(master, static_cast<std::uint64_t>(index));
}

namespace detail {

inline void write_trial_files(const std::filesystem::path& out, int index, const TrialResult& r, const CaseConfig& c) {
    {
        std::ofstream h(out / "history" / (std::to_string(index) + ".ndjson"));
        r.eto_history.write_ndjson(h, "eto", c.timing);
        r.ieo_cso_history.write_ndjson(h, "ieo_cso", c.timing);
        r.ieo_quantile_history.write_ndjson(h, "ieo_quantile", c.timing);
    }
    if (!c.write_checkpoints) return;
    const auto& m = c.trial.model;
    const auto steps_eto = static_cast<std::uint64_t>(c.trial.eto.steps);
    const auto steps_all = steps_eto + static_cast<std::uint64_t>(c.trial.eto.continuation_steps);
    const auto steps_ieo = steps_eto + static_cast<std::uint64_t>(c.trial.ieo.steps);
    const auto dir = out / "checkpoints";
    save_checkpoint(dir / (std::to_string(index) + "-eto_snapshot.bin"), {m, r.eto_snapshot, r.seed, steps_eto});
    save_checkpoint(dir / (std::to_string(index) + "-eto.bin"), {m, r.eto_params, r.seed, steps_all});
    save_checkpoint(dir / (std::to_string(index) + "-ieo_cso.bin"), {m, r.ieo_cso_params, r.seed, steps_ieo});
    save_checkpoint(dir / (std::to_string(index) + "-ieo_quantile.bin"), {m, r.ieo_quantile_params, r.seed, steps_ieo});
}

}  // namespace detail

/// Runs every trial of a case on the given split and writes the result files to `out`
/// (skipped when `out` is empty). Trials run on `threads` workers; results are assembled
/// by trial index, so output does not depend on scheduling.
inline ExperimentResult run_experiment_on(const cmapss::DatasetSplit& split, const CaseConfig& c,
                                          const std::filesystem::path& out) {
    c.validate();
    const auto start = std::chrono::steady_clock::now();
    if (!out.empty()) {
        std::filesystem::create_directories(out / "history");
        std::filesystem::create_directories(out / "figures");
        if (c.write_checkpoints) std::filesystem::create_directories(out / "checkpoints");
    }
    ExperimentResult res;
    res.config = to_json(c);
    res.dataset_rule = split.rule;
    res.n_train = split.train.size();
    res.n_eval = split.eval.size();
    res.trials.resize(static_cast<std::size_t>(c.n_trials));
    for (int i = 0; i < c.n_trials; ++i) res.seeds.push_back(trial_seed(c.master_seed, i));

    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(c.n_trials));
    std::atomic<int> next{0};
    std::mutex io;
    auto worker = [&] {
        for (int i = next++; i < c.n_trials; i = next++) {
            try {
                const auto r = run_trial(split, c.trial, res.seeds[static_cast<std::size_t>(i)]);
                res.trials[static_cast<std::size_t>(i)] = r.reports;
                if (!out.empty()) {
                    std::lock_guard lock(io);
                    detail::write_trial_files(out, i, r, c);
                }
            } catch (...) {
                failures[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    const unsigned n_workers = std::max(1u, std::min<unsigned>(c.threads, static_cast<unsigned>(c.n_trials)));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::string failed;
    for (int i = 0; i < c.n_trials; ++i) {
        if (!failures[static_cast<std::size_t>(i)]) continue;
        try {
            std::rethrow_exception(failures[static_cast<std::size_t>(i)]);
        } catch (const std::exception& e) {
            failed += "\n  trial " + std::to_string(i) + " (seed " + std::to_string(res.seeds[static_cast<std::size_t>(i)]) +
                      "): " + e.what();
        }
    }
    if (!failed.empty()) throw Error("trials failed:" + failed);

    for (std::size_t f = 0; f < kFrameworks.size(); ++f) {
        std::vector<EvalReport> per;
        for (const auto& t : res.trials) per.push_back(t[f]);
        res.aggregates[f] = aggregate(per);
    }
    res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!out.empty()) {
        nlohmann::json summary;
        summary["config"] = res.config;
        summary["dataset"] = {{"rule", res.dataset_rule}, {"n_train", res.n_train}, {"n_eval", res.n_eval}};
        summary["trial_seeds"] = res.seeds;
        for (std::size_t f = 0; f < kFrameworks.size(); ++f) {
            summary["frameworks"][framework_name(kFrameworks[f])] = to_json(res.aggregates[f]);
        }
        if (c.timing) summary["runtime_s"] = res.runtime_s;
        std::ofstream(out / "summary.json") << summary.dump(2) << '\n';

        std::ofstream trials(out / "trials.csv");
        trials << "trial,seed,framework," << kReportCsvHeader << '\n';
        std::ofstream tidy(out / "figures" / "metrics_tidy.csv");
        tidy << "framework,trial,metric,value\n";
        tidy.precision(17);
        for (std::size_t i = 0; i < res.trials.size(); ++i) {
            for (std::size_t f = 0; f < kFrameworks.size(); ++f) {
                const auto& r = res.trials[i][f];
                const auto name = framework_name(kFrameworks[f]);
                trials << i << ',' << res.seeds[i] << ',' << name << ',';
                write_csv_row(trials, r);
                trials << '\n';
                tidy << name << ',' << i << ",regret," << r.mean_regret << '\n'
                     << name << ',' << i << ",failure_frequency," << r.failure_frequency << '\n'
                     << name << ',' << i << ",nll," << r.mean_nll << '\n'
                     << name << ',' << i << ",mae," << r.mean_mae << '\n';
            }
        }
        std::ofstream agg(out / "aggregates.csv");
        agg << kAggregateCsvHeader << '\n';
        for (std::size_t f = 0; f < kFrameworks.size(); ++f) {
            write_aggregate_csv(agg, framework_name(kFrameworks[f]), res.aggregates[f]);
            agg << '\n';
        }
    }
    return res;
}

inline ExperimentResult run_experiment(const CaseConfig& c, const std::filesystem::path& out) {
    c.validate();
    const auto split = load_split(c.data_dir, c.kind, c.data);
    return run_experiment_on(split, c, out);
}

}  // namespace ieo
