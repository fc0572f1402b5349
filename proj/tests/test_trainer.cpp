#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "ieo/metrics.hpp"
#include "ieo/synthetic.hpp"
#include "ieo/trainer.hpp"

using namespace ieo;

namespace {

const RulSupport kH(150);

int draw(const DiscreteRulDist& d, Rng& r) {
    const double u = r.uniform01();
    double c = 0.0;
    for (int h = 1; h <= d.support().horizon(); ++h) {
        c += d.prob(h);
        if (u < c) return h;
    }
    return d.support().horizon();
}

struct Synthetic {
    cmapss::SampleMatrix data;
    double entropy_floor = 0.0;
};

// y ~ discretized Weibull(30 + 60 x0, 4): inside the model class
Synthetic well_specified(int n = 2000) {
    Rng rng(5);
    Synthetic s;
    s.data.features.resize(4, n);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < 4; ++d) s.data.features(d, i) = rng.uniform01();
        const auto p = discretize_weibull({30.0 + 60.0 * s.data.features(0, i), 4.0}, kH);
        s.entropy_floor += entropy(p) / n;
        s.data.labels.push_back(draw(p, rng));
    }
    return s;
}

// 80% near 40 + 40 x0, 20% late failures at 110: bimodal, outside the Weibull family
cmapss::SampleMatrix misspecified(int n = 2000) {
    Rng rng(5);
    cmapss::SampleMatrix m;
    m.features.resize(4, n);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < 4; ++d) m.features(d, i) = rng.uniform01();
        m.labels.push_back(rng.uniform01() < 0.8 ? 40 + static_cast<int>(40.0 * m.features(0, i)) : 110);
    }
    return m;
}

ModelConfig small_model(double dropout = 0.0) {
    ModelConfig m;
    m.input_dim = 4;
    m.hidden_dims = {32};
    m.dropout_rate = dropout;
    return m;
}

DecisionProblem cso_problem() {
    const auto c = CostParams::turbofan();
    return {CsoPolicy{c}, c, FeasibleSet::range(0, 125, 5), kH};
}

}  // namespace

TEST(BatchSampler, PureFunctionOfSeedAndStep) {
    BatchSampler a(103, 10, 7), b(103, 10, 7);
    std::vector<std::vector<std::size_t>> forward;
    for (std::uint64_t s = 0; s < 40; ++s) forward.push_back(a.batch(s));
    for (std::uint64_t s = 40; s-- > 0;) EXPECT_EQ(b.batch(s), forward[s]);
}

TEST(BatchSampler, EpochIsPermutationWithPartialBatch) {
    BatchSampler s(23, 5, 1);
    std::multiset<std::size_t> seen;
    for (std::uint64_t step = 0; step < 5; ++step) {
        const auto b = s.batch(step);
        EXPECT_EQ(b.size(), step == 4 ? 3u : 5u);
        seen.insert(b.begin(), b.end());
    }
    EXPECT_EQ(seen.size(), 23u);
    EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 23u);
    EXPECT_NE(s.batch(0), s.batch(5));  // new epoch, new order
}

TEST(TrainEto, OverfitsOneSample) {
    cmapss::SampleMatrix one;
    one.features = Eigen::MatrixXd::Constant(4, 1, 0.3);
    one.labels = {57};
    EtoConfig cfg;
    cfg.steps = 300;
    cfg.lr = 1e-2;
    cfg.seed = 1;
    const auto r = train_eto(one, small_model(), cfg, kH);
    ASSERT_EQ(r.history.records.size(), 300u);
    EXPECT_LT(r.history.records.back().loss, 0.5 * r.history.records.front().loss);
    double early = 0, late = 0;
    for (int i = 0; i < 50; ++i) {
        early += r.history.records[i].loss;
        late += r.history.records[250 + i].loss;
    }
    EXPECT_LT(late, early);
}

TEST(TrainEto, ReachesEntropyFloorOnWellSpecifiedData) {
    const auto s = well_specified();
    EtoConfig cfg;
    cfg.steps = 1500;
    cfg.lr = 1e-2;
    cfg.seed = 3;
    const auto m = small_model();
    const auto r = train_eto(s.data, m, cfg, kH);
    const auto th = predict(s.data.features, r.params, m);
    double mean_nll = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) mean_nll += nll(discretize_weibull(th[i], kH), s.data.labels[i]);
    mean_nll /= static_cast<double>(th.size());
    EXPECT_LT(std::abs(mean_nll - s.entropy_floor), 0.1 * s.entropy_floor);
}

TEST(TrainEto, DeterministicWithDropout) {
    const auto s = well_specified(300);
    EtoConfig cfg;
    cfg.steps = 40;
    cfg.seed = 11;
    const auto a = train_eto(s.data, small_model(0.1), cfg, kH);
    const auto b = train_eto(s.data, small_model(0.1), cfg, kH);
    EXPECT_TRUE(a.params == b.params);
    for (std::size_t i = 0; i < a.history.records.size(); ++i) {
        EXPECT_EQ(a.history.records[i].loss, b.history.records[i].loss);
    }
}

TEST(TrainEto, DivergenceCarriesStep) {
    const auto s = well_specified(64);
    auto m = small_model();
    EtoConfig cfg;
    cfg.steps = 5;
    cfg.lr = 1e-3;
    auto state = init_eto_state(m, 1);
    state.params.layers[0].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainHistory h;
    try {
        run_eto_steps(state, s.data, m, cfg, kH, 5, 1e-3, h);
        FAIL() << "expected divergence";
    } catch (const TrainingDivergedError& e) {
        EXPECT_EQ(e.step(), 0u);
    }
}

TEST(FinetuneIeo, ZeroGradientPlateauKeepsParams) {
    // every prediction sits far beyond the horizon: all perturbed decisions coincide
    const auto data = misspecified(128);
    const auto m = small_model();
    auto init = init_params(m, 2);
    init.layers[1].bias(0) = 40.0;  // scale ~ 4000
    init.layers[1].bias(1) = 30.0;  // shape ~ 300
    IeoConfig cfg;
    cfg.steps = 3;
    cfg.spg = cfg.spg.with_samples(50);
    const auto r = finetune_ieo(init, data, m, cfg, cso_problem());
    EXPECT_TRUE(r.params == init);
    for (const auto& rec : r.history.records) EXPECT_EQ(rec.grad_norm, 0.0);
}

TEST(FinetuneIeo, ReducesRegretUnderMisspecification) {
    const auto data = misspecified();
    const auto m = small_model();
    EtoConfig eto;
    eto.steps = 1000;
    eto.lr = 1e-2;
    eto.seed = 3;
    const auto base = train_eto(data, m, eto, kH);
    IeoConfig cfg;
    cfg.steps = 60;
    cfg.lr = 2e-3;
    cfg.seed = 9;
    cfg.spg = cfg.spg.with_samples(100);
    const auto problem = cso_problem();
    const auto tuned = finetune_ieo(base.params, data, m, cfg, problem);
    const double before = evaluate(base.params, m, problem, data).mean_regret;
    const double after = evaluate(tuned.params, m, problem, data).mean_regret;
    EXPECT_LT(after, before);
}

TEST(FinetuneIeo, DeterministicAndThreadIndependent) {
    const auto data = misspecified(200);
    const auto m = small_model(0.1);
    const auto init = init_params(m, 4);
    IeoConfig cfg;
    cfg.steps = 4;
    cfg.seed = 5;
    cfg.spg = cfg.spg.with_samples(50);
    const auto a = finetune_ieo(init, data, m, cfg, cso_problem());
    cfg.threads = 3;
    const auto b = finetune_ieo(init, data, m, cfg, cso_problem());
    EXPECT_TRUE(a.params == b.params);
}

TEST(FinetuneIeo, ProjectionRadiusIsRespected) {
    const auto data = misspecified(200);
    const auto m = small_model();
    const auto init = init_params(m, 4);
    IeoConfig cfg;
    cfg.steps = 20;
    cfg.lr = 1e-2;
    cfg.spg = cfg.spg.with_samples(50);
    cfg.projection_radius = 1e-3;
    const auto r = finetune_ieo(init, data, m, cfg, cso_problem());
    MlpParams diff = r.params;
    diff.add_scaled(init, -1.0);
    EXPECT_LE(diff.norm(), 1e-3 * (1.0 + 1e-12));
}

TEST(RunTrial, PairingAndIsolation) {
    const auto fleet = cmapss::synthesize_fleet(12, 3);
    cmapss::DataConfig dc;
    const auto split = cmapss::make_split(fleet, cmapss::Case::base, dc);
    TrialConfig cfg;
    cfg.eto.steps = 3;
    cfg.eto.continuation_steps = 2;
    cfg.ieo.steps = 0;
    cfg.ieo.spg = cfg.ieo.spg.with_samples(20);
    const auto r = run_trial(split, cfg, 77);
    EXPECT_TRUE(r.ieo_cso_params == r.eto_snapshot);
    EXPECT_TRUE(r.ieo_quantile_params == r.eto_snapshot);
    EXPECT_FALSE(r.eto_params == r.eto_snapshot);
    const auto& ec = r.report(Framework::eto_cso);
    const auto& eq = r.report(Framework::eto_quantile);
    EXPECT_EQ(ec.mean_nll, eq.mean_nll);
    EXPECT_EQ(ec.mean_mae, eq.mean_mae);
    EXPECT_EQ(ec.n_samples, split.train.size());
    EXPECT_EQ(r.eto_history.records.size(), 5u);
}

TEST(RunTrial, SeedDeterminesEverything) {
    const auto fleet = cmapss::synthesize_fleet(12, 3);
    const auto split = cmapss::make_split(fleet, cmapss::Case::base, cmapss::DataConfig{});
    TrialConfig cfg;
    cfg.eto.steps = 3;
    cfg.eto.continuation_steps = 1;
    cfg.ieo.steps = 2;
    cfg.ieo.spg = cfg.ieo.spg.with_samples(20);
    const auto a = run_trial(split, cfg, 5);
    const auto b = run_trial(split, cfg, 5);
    const auto c = run_trial(split, cfg, 6);
    EXPECT_TRUE(a.ieo_cso_params == b.ieo_cso_params);
    EXPECT_TRUE(a.ieo_quantile_params == b.ieo_quantile_params);
    EXPECT_EQ(a.report(Framework::ieo_quantile).mean_regret, b.report(Framework::ieo_quantile).mean_regret);
    EXPECT_FALSE(a.eto_snapshot == c.eto_snapshot);
}

TEST(TrainHistory, NdjsonOmitsTimingByDefault) {
    TrainHistory h;
    h.records.push_back({0, 1.5, 2.0, 12.3});
    std::ostringstream plain, timed;
    h.write_ndjson(plain, "eto");
    h.write_ndjson(timed, "eto", true);
    EXPECT_EQ(plain.str().find("wall_ms"), std::string::npos);
    EXPECT_NE(timed.str().find("wall_ms"), std::string::npos);
    EXPECT_NE(plain.str().find("\"phase\":\"eto\""), std::string::npos);
}
