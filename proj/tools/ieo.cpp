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

// ieo: command-line front end for data preparation, training, evaluation,
// experiments, the motivating example, the bound calculator and figure data.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ieo/analysis.hpp"
#include "ieo/checkpoint.hpp"
#include "ieo/experiments.hpp"
#include "ieo/plot_data.hpp"

namespace fs = std::filesystem;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<int> trials;
    std::optional<unsigned> threads;
    std::optional<std::string> preset;
    std::optional<std::string> data_dir;
    bool timing = false;
    bool no_checkpoints = false;
};

// defaults -> preset -> config file -> flags
ieo::CaseConfig build_config(const Globals& g, std::optional<std::string> case_name = std::nullopt) {
    ieo::CaseConfig c;
    std::map<std::string, std::string> kv;
    if (g.config) {
        std::ifstream in(*g.config);
        if (!in) throw ieo::ConfigError("cannot open config file " + *g.config);
        kv = ieo::parse_config_text(in);
    }
    if (g.preset) kv["preset"] = *g.preset;
    if (case_name) kv["case"] = *case_name;
    ieo::apply_settings(c, kv);
    if (g.seed) c.master_seed = *g.seed;
    if (g.trials) c.n_trials = *g.trials;
    if (g.threads) c.threads = *g.threads;
    if (g.data_dir) c.data_dir = *g.data_dir;
    if (g.timing) c.timing = true;
    if (g.no_checkpoints) c.write_checkpoints = false;
    c.trial.ieo.threads = 1;
    return c;
}

fs::path out_dir(const Globals& g, const std::string& fallback) {
    fs::path p = g.out ? fs::path(*g.out) : fs::path(fallback);
    fs::create_directories(p);
    return p;
}

ieo::DecisionProblem problem_for(const ieo::CaseConfig& c, const std::string& policy) {
    if (policy == "cso") return c.trial.cso();
    if (policy == "quantile") return c.trial.quantile_problem();
    throw ieo::ConfigError("unknown policy '" + policy + "' (expected cso or quantile)");
}

void print_report(const std::string& label, const ieo::EvalReport& r) {
    std::cout << label << ": regret " << r.mean_regret << ", failure frequency " << r.failure_frequency << ", NLL "
              << r.mean_nll << ", MAE " << r.mean_mae << " (" << r.n_samples << " samples)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Integrated estimate-optimize predictive maintenance"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--config", g.config, "key = value configuration file");
    app.add_option("--out", g.out, "output file or directory");
    app.add_option("--trials", g.trials, "number of trials");
    app.add_option("--threads", g.threads, "worker threads");
    app.add_option("--preset", g.preset, "full or desk");
    app.add_option("--data-dir", g.data_dir, "directory holding train_FD001.txt");
    app.add_flag("--timing", g.timing, "record wall-clock times (outputs are then not byte-stable)");
    app.add_flag("--no-checkpoints", g.no_checkpoints, "skip writing checkpoints");

    std::string case_name = "base";
    std::string policy = "cso";
    std::string init_path, ckpt_path;

    auto* prep = app.add_subcommand("prepare-data", "validate the training file and build window caches");
    bool synthesize = false;
    int engines = 100;
    std::uint64_t data_seed = 2001;
    prep->add_flag("--synthesize", synthesize, "write the surrogate fleet when no training file exists");
    prep->add_option("--engines", engines, "surrogate engine count");
    prep->add_option("--data-seed", data_seed, "surrogate generator seed");

    auto* train = app.add_subcommand("train", "likelihood (ETO) training");
    train->add_option("--case", case_name)->check(CLI::IsMember({"base", "short", "long"}));
    bool with_continuation = false;
    train->add_flag("--continue", with_continuation, "also run the continuation phase");

    auto* fine = app.add_subcommand("finetune", "decision-loss (IEO) fine-tuning from a checkpoint");
    fine->add_option("--case", case_name)->check(CLI::IsMember({"base", "short", "long"}));
    fine->add_option("--init", init_path, "ETO checkpoint")->required();
    fine->add_option("--policy", policy)->check(CLI::IsMember({"cso", "quantile"}));

    auto* eval = app.add_subcommand("evaluate", "decision metrics of a checkpoint");
    eval->add_option("--case", case_name)->check(CLI::IsMember({"base", "short", "long"}));
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--policy", policy)->check(CLI::IsMember({"cso", "quantile"}));

    auto* exper = app.add_subcommand("experiment", "repeated-trial case study");
    exper->add_option("--case", case_name)->required()->check(CLI::IsMember({"base", "short", "long"}));

    auto* example = app.add_subcommand("example", "motivating example report");

    auto* bound = app.add_subcommand("bound", "generalization bound calculator");
    ieo::analysis::BoundInputs bi{1000, 10, 26, 0, 0.05};
    std::optional<double> c1;
    double empirical = 0.0;
    bound->add_option("--n", bi.n, "sample count");
    bound->add_option("--d", bi.d, "Natarajan dimension");
    bound->add_option("--K", bi.K, "number of windows");
    bound->add_option("--C1", c1, "loss bound (default: maximal cost of the configured problem)");
    bound->add_option("--delta", bi.delta, "failure probability");
    bound->add_option("--empirical", empirical, "empirical decision risk");

    auto* plot = app.add_subcommand("plot-data", "CSV files backing the figures");
    int label = 95;
    double at_scale = 100.0, at_shape = 15.0;
    int n_perturb = 200;
    plot->add_option("--label", label, "realized RUL of the landscape");
    plot->add_option("--scale", at_scale, "Weibull scale of the gradient point");
    plot->add_option("--shape", at_shape, "Weibull shape of the gradient point");
    plot->add_option("--perturbations", n_perturb, "perturbations listed per policy");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*prep) {
            auto c = build_config(g);
            if (synthesize && ieo::ensure_surrogate_data(c.data_dir, engines, data_seed)) {
                std::cout << "wrote surrogate fleet (" << engines << " engines, seed " << data_seed << ") to "
                          << (c.data_dir / ieo::kTrainFileName).string() << '\n';
            }
            const auto fleet = ieo::cmapss::parse_cmapss(c.data_dir / ieo::kTrainFileName);
            std::cout << fleet.size() << " engines\n";
            for (auto k : {ieo::cmapss::Case::base, ieo::cmapss::Case::short_term, ieo::cmapss::Case::long_term}) {
                const auto split = ieo::load_split(c.data_dir, k, c.data);
                std::cout << split.rule << ": " << split.train.size() << " train / " << split.eval.size()
                          << " eval samples\n";
            }
            return 0;
        }
        if (*train) {
            auto c = build_config(g, case_name);
            c.validate();
            const auto split = ieo::load_split(c.data_dir, c.kind, c.data);
            const auto data = ieo::cmapss::SampleMatrix::from(split.train);
            auto eto = c.trial.eto;
            eto.seed = c.master_seed;
            auto state = ieo::init_eto_state(c.trial.model, eto.seed);
            ieo::TrainHistory hist;
            ieo::run_eto_steps(state, data, c.trial.model, eto, c.trial.support, eto.steps, eto.lr, hist);
            if (with_continuation) {
                ieo::run_eto_steps(state, data, c.trial.model, eto, c.trial.support, eto.continuation_steps,
                                   eto.continuation_lr, hist);
            }
            const auto dir = out_dir(g, "runs/" + ieo::cmapss::case_name(c.kind));
            ieo::save_checkpoint(dir / "eto.bin", {c.trial.model, state.params, c.master_seed, state.steps_done});
            std::ofstream h(dir / "eto_history.ndjson");
            hist.write_ndjson(h, "eto", c.timing);
            std::cout << "ETO " << state.steps_done << " steps, final batch NLL " << hist.records.back().loss
                      << "; checkpoint " << (dir / "eto.bin").string() << '\n';
            return 0;
        }
        if (*fine) {
            auto c = build_config(g, case_name);
            const auto init = ieo::load_checkpoint(init_path);
            c.trial.model = init.config;
            c.validate();
            const auto split = ieo::load_split(c.data_dir, c.kind, c.data);
            const auto data = ieo::cmapss::SampleMatrix::from(split.train);
            auto cfg = c.trial.ieo;
            cfg.seed = c.master_seed;
            cfg.threads = c.threads;
            const auto res = ieo::finetune_ieo(init.params, data, c.trial.model, cfg, problem_for(c, policy));
            const auto dir = out_dir(g, "runs/" + ieo::cmapss::case_name(c.kind));
            const auto file = dir / ("ieo_" + policy + ".bin");
            ieo::save_checkpoint(file, {c.trial.model, res.params, c.master_seed,
                                        init.step + static_cast<std::uint64_t>(cfg.steps)});
            std::ofstream h(dir / ("ieo_" + policy + "_history.ndjson"));
            res.history.write_ndjson(h, "ieo_" + policy, c.timing);
            std::cout << "IEO (" << policy << ") " << cfg.steps << " steps; checkpoint " << file.string() << '\n';
            return 0;
        }
        if (*eval) {
            auto c = build_config(g, case_name);
            const auto ck = ieo::load_checkpoint(ckpt_path);
            c.trial.model = ck.config;
            c.validate();
            const auto split = ieo::load_split(c.data_dir, c.kind, c.data);
            const auto data = ieo::cmapss::SampleMatrix::from(split.eval);
            const auto rep = ieo::evaluate(ck.params, ck.config, problem_for(c, policy), data);
            print_report(policy, rep);
            if (g.out) {
                fs::path p(*g.out);
                if (p.has_parent_path()) fs::create_directories(p.parent_path());
                std::ofstream(p) << ieo::to_json(rep).dump(2) << '\n';
            }
            return 0;
        }
        if (*exper) {
            auto c = build_config(g, case_name);
            const auto dir = out_dir(g, "results/" + ieo::cmapss::case_name(c.kind));
            const auto res = ieo::run_experiment(c, dir);
            std::cout << res.dataset_rule << "; " << res.n_train << " train / " << res.n_eval << " eval samples, "
                      << c.n_trials << " trials\n";
            for (std::size_t f = 0; f < ieo::kFrameworks.size(); ++f) {
                const auto& a = res.aggregates[f];
                std::cout << ieo::framework_name(ieo::kFrameworks[f]) << ": regret " << a.regret.mean << " +- "
                          << a.regret.std.value_or(0.0) << ", failure " << a.failure_frequency.mean << " +- "
                          << a.failure_frequency.std.value_or(0.0) << ", NLL " << a.nll.mean << ", MAE " << a.mae.mean
                          << '\n';
            }
            std::cout << "results in " << dir.string() << '\n';
            return 0;
        }
        if (*example) {
            const auto rep = ieo::analysis::run_motivating_example(ieo::analysis::ExampleConfig::defaults());
            const auto dir = out_dir(g, "results/example");
            std::ofstream(dir / "example.json") << ieo::analysis::to_json(rep).dump(2) << '\n';
            std::ofstream csv(dir / "example.csv");
            ieo::plot::write_example_csv(csv, rep);
            std::cout << "optimal window " << rep.optimal_decision << ", expected cost " << rep.optimal_cost << '\n';
            for (const auto& t : rep.targets) {
                for (const auto* e : {&t.first, &t.second}) {
                    std::cout << "  target " << t.target << "%: " << e->family << " error " << e->estimation_error
                              << "% gap " << e->optimality_gap << "% window " << e->decision << '\n';
                }
            }
            return 0;
        }
        if (*bound) {
            const auto c = build_config(g);
            bi.C1 = c1 ? *c1 : ieo::max_cost(c.trial.costs, c.trial.windows, c.trial.support);
            const double upper = ieo::analysis::risk_upper_bound(bi, empirical);
            const double excess = ieo::analysis::excess_risk_bound(bi);
            std::cout.precision(12);
            std::cout << "n=" << bi.n << " d=" << bi.d << " K=" << bi.K << " C1=" << bi.C1 << " delta=" << bi.delta
                      << '\n'
                      << "risk upper bound: " << upper << '\n'
                      << "excess risk bound: " << excess << '\n';
            return 0;
        }
        if (*plot) {
            const auto c = build_config(g);
            const auto dir = out_dir(g, "results/figures");
            const auto rep = ieo::analysis::run_motivating_example(ieo::analysis::ExampleConfig::defaults());
            std::ofstream ex(dir / "example.csv");
            ieo::plot::write_example_csv(ex, rep);
            std::ofstream gap(dir / "gap_curve.csv");
            std::vector<double> targets;
            for (int i = 1; i <= 40; ++i) targets.push_back(0.1 * i);
            ieo::plot::write_gap_curve_csv(gap, ieo::truncated_poisson(20.0, ieo::RulSupport(30)),
                                           ieo::CostParams::illustration(), targets);
            const auto cso = c.trial.cso();
            const auto quant = c.trial.quantile_problem();
            std::ofstream land(dir / "landscape.csv");
            ieo::plot::write_landscape_csv(land, cso, quant, label);
            const ieo::WeibullParams at{at_scale, at_shape};
            std::ofstream grad(dir / "gradients.csv");
            ieo::plot::write_gradient_csv(grad, at, label, cso, quant, c.trial.ieo.spg, c.master_seed);
            std::ofstream pc(dir / "perturbations_cso.csv");
            ieo::plot::write_perturbation_csv(pc, at, label, cso, c.trial.ieo.spg, n_perturb, c.master_seed);
            std::ofstream pq(dir / "perturbations_quantile.csv");
            ieo::plot::write_perturbation_csv(pq, at, label, quant, c.trial.ieo.spg, n_perturb, c.master_seed);
            std::cout << "figure data in " << dir.string()
                      << " (per-trial metrics come from experiment: figures/metrics_tidy.csv)\n";
            return 0;
        }
    } catch (const ieo::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
