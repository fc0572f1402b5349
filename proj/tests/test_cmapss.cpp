#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <string>

#include "ieo/cmapss.hpp"
#include "ieo/synthetic.hpp"

using namespace ieo;
using namespace ieo::cmapss;

namespace {

std::string row(int unit, int cycle, double base = 0.0) {
    std::ostringstream os;
    os << unit << ' ' << cycle;
    for (int i = 0; i < kSettings; ++i) os << ' ' << 0.001 * i;
    for (int s = 1; s <= kSensors; ++s) os << ' ' << base + s + 0.1 * cycle;
    os << '\n';
    return os.str();
}

std::string fleet_text(int units, int lifetime) {
    std::string t;
    for (int u = 1; u <= units; ++u) {
        for (int c = 1; c <= lifetime + u; ++c) t += row(u, c, u);
    }
    return t;
}

EngineSeries single_sensor(int unit, std::vector<double> values, int sensor_id = 2) {
    EngineSeries e;
    e.unit_id = unit;
    e.settings = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(values.size()), kSettings);
    e.sensors = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    e.sensor_ids = {sensor_id};
    return e;
}

}  // namespace

TEST(ParseCmapss, ThreeRowFixture) {
    std::istringstream in(row(1, 1) + row(1, 2) + row(1, 3));
    const auto fleet = parse_cmapss(in);
    ASSERT_EQ(fleet.size(), 1u);
    EXPECT_EQ(fleet[0].lifetime(), 3);
    EXPECT_EQ(fleet[0].sensors.cols(), kSensors);
    EXPECT_DOUBLE_EQ(fleet[0].sensors(2, 0), 1.3);
}

TEST(ParseCmapss, EmptyFileGivesEmptyFleet) {
    std::istringstream in("");
    EXPECT_TRUE(parse_cmapss(in).empty());
}

TEST(ParseCmapss, GroupsAndSortsUnits) {
    std::istringstream in(row(2, 1) + row(1, 1) + row(2, 2) + row(1, 2));
    const auto fleet = parse_cmapss(in);
    ASSERT_EQ(fleet.size(), 2u);
    EXPECT_EQ(fleet[0].unit_id, 1);
    EXPECT_EQ(fleet[1].unit_id, 2);
}

TEST(ParseCmapss, ErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            parse_cmapss(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return 0;
    };
    EXPECT_EQ(line_of(row(1, 1) + "1 2 3\n"), 2u);
    std::string bad = row(1, 2);
    bad.replace(bad.find(' ', 4) + 1, 1, "x");
    EXPECT_EQ(line_of(row(1, 1) + bad), 2u);
    EXPECT_GT(line_of(row(1, 1) + row(1, 3)), 0u);  // cycle gap
}

TEST(ParseCmapss, RoundTripsThroughWriter) {
    std::istringstream in(fleet_text(3, 5));
    const auto fleet = parse_cmapss(in);
    std::ostringstream out;
    write_cmapss(out, fleet);
    std::istringstream again(out.str());
    const auto back = parse_cmapss(again);
    ASSERT_EQ(back.size(), fleet.size());
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        EXPECT_EQ(back[i].unit_id, fleet[i].unit_id);
        EXPECT_EQ(back[i].sensors, fleet[i].sensors);
        EXPECT_EQ(back[i].settings, fleet[i].settings);
    }
}

TEST(MakeWindows, LifetimeThirtyFive) {
    std::vector<double> v(35);
    for (int i = 0; i < 35; ++i) v[i] = i;
    const auto w = make_windows({single_sensor(1, v)}, WindowOptions{});
    ASSERT_EQ(w.samples.size(), 6u);
    for (int i = 0; i < 6; ++i) {
        EXPECT_EQ(w.samples[i].label, 6 - i);
        EXPECT_EQ(w.samples[i].features.size(), 30u);
        EXPECT_EQ(w.samples[i].features.front(), i);
        EXPECT_EQ(w.samples[i].features.back(), i + 29);
    }
}

TEST(MakeWindows, FilterCapAndShortSeries) {
    const auto e = single_sensor(1, std::vector<double>(240, 0.5));
    WindowOptions opt;
    opt.filter_max = 125;
    const auto filtered = make_windows({e}, opt);
    EXPECT_EQ(filtered.samples.size(), 125u);
    for (const auto& s : filtered.samples) EXPECT_LE(s.label, 125);

    WindowOptions capped;
    capped.cap = 125;
    const auto c = make_windows({e}, capped);
    EXPECT_EQ(c.samples.size(), 211u);
    EXPECT_EQ(c.samples.front().label, 125);  // raw label 211

    const auto shorty = make_windows({single_sensor(2, std::vector<double>(20, 0.0))}, WindowOptions{});
    EXPECT_TRUE(shorty.samples.empty());
    EXPECT_EQ(shorty.skipped_short, 1u);
}

TEST(MakeWindows, LabelsClampedToHorizon) {
    WindowOptions opt;
    opt.horizon = 150;
    const auto w = make_windows({single_sensor(1, std::vector<double>(300, 0.0))}, opt);
    for (const auto& s : w.samples) {
        ASSERT_GE(s.label, 1);
        ASSERT_LE(s.label, 150);
    }
}

TEST(Normalizer, HandFixture) {
    EngineSeries e;
    e.unit_id = 1;
    e.settings = Eigen::MatrixXd::Zero(3, kSettings);
    e.sensors.resize(3, 2);
    e.sensors << 1.0, 10.0, 3.0, 30.0, 2.0, 20.0;
    e.sensor_ids = {7, 9};
    const auto n = Normalizer::fit({e}, {7, 9});
    const auto out = n.apply(e);
    EXPECT_DOUBLE_EQ(out.sensors(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(out.sensors(1, 0), 1.0);
    EXPECT_DOUBLE_EQ(out.sensors(2, 0), 0.5);
    EXPECT_DOUBLE_EQ(out.sensors(2, 1), 0.5);

    EngineSeries outside = e;
    outside.sensors(0, 0) = -5.0;
    outside.sensors(1, 1) = 99.0;
    const auto clipped = n.apply(outside);
    EXPECT_EQ(clipped.sensors(0, 0), 0.0);
    EXPECT_EQ(clipped.sensors(1, 1), 1.0);
}

TEST(Normalizer, ShiftInvariantAndRejectsConstantSensor) {
    std::istringstream in(fleet_text(3, 10));
    auto fleet = parse_cmapss(in);
    const auto ids = default_sensor_ids();
    const auto n = Normalizer::fit(fleet, ids);
    auto shifted = fleet;
    for (auto& e : shifted) e.sensors.array() += 7.0;
    const auto ns = Normalizer::fit(shifted, ids);
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const auto a = n.apply(fleet[i]);
        const auto b = ns.apply(shifted[i]);
        EXPECT_LT((a.sensors - b.sensors).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(a.sensors.minCoeff(), 0.0);
        EXPECT_LE(a.sensors.maxCoeff(), 1.0);
    }
    EXPECT_THROW(Normalizer::fit({single_sensor(1, std::vector<double>(5, 2.0))}, {2}), ConfigError);
}

TEST(MakeSplit, Cases) {
    const auto fleet = synthesize_fleet(30, 5);
    DataConfig cfg;
    cfg.test_engines = 6;
    const auto base = make_split(fleet, Case::base, cfg);
    EXPECT_EQ(base.train.size(), base.eval.size());
    EXPECT_TRUE(base.eval_is_train);
    for (const auto& s : base.train) EXPECT_LE(s.label, 125);

    const auto shorty = make_split(fleet, Case::short_term, cfg);
    std::set<int> tr(shorty.train_units.begin(), shorty.train_units.end());
    for (int u : shorty.eval_units) EXPECT_EQ(tr.count(u), 0u);
    EXPECT_EQ(shorty.eval_units.size(), 6u);
    EXPECT_EQ(shorty.eval_units.front(), 1);
    for (const auto& s : shorty.eval) EXPECT_LE(s.label, 125);

    const auto longer = make_split(fleet, Case::long_term, cfg);
    int max_label = 0;
    std::size_t windows = 0;
    for (const auto& e : fleet) {
        if (e.unit_id > 6) windows += static_cast<std::size_t>(e.lifetime() - 30 + 1);
    }
    for (const auto& s : longer.train) max_label = std::max(max_label, s.label);
    EXPECT_EQ(max_label, 125);
    EXPECT_EQ(longer.train.size(), windows);
    for (const auto& s : longer.train) EXPECT_EQ(s.features.size(), 420u);

    EXPECT_THROW(make_split(synthesize_fleet(5, 1), Case::short_term, cfg), ConfigError);
}

TEST(Cache, RoundTripAndHashMismatch) {
    const auto fleet = synthesize_fleet(25, 2);
    DataConfig cfg;
    cfg.test_engines = 5;
    const auto split = make_split(fleet, Case::short_term, cfg);
    std::stringstream ss;
    write_cache(ss, split, 42);
    const auto back = read_cache(ss, 42);
    ASSERT_TRUE(back.has_value());
    ASSERT_EQ(back->train.size(), split.train.size());
    ASSERT_EQ(back->eval.size(), split.eval.size());
    EXPECT_EQ(back->train[17].features, split.train[17].features);
    EXPECT_EQ(back->eval.back().label, split.eval.back().label);
    EXPECT_EQ(back->rule, split.rule);
    std::stringstream again(ss.str());
    EXPECT_FALSE(read_cache(again, 43).has_value());
    std::stringstream junk("garbage!");
    EXPECT_THROW(read_cache(junk, 42), ParseError);
}

TEST(Cache, HashDependsOnConfig) {
    DataConfig a, b;
    b.window = 20;
    EXPECT_NE(cache_hash("x", Case::base, a), cache_hash("x", Case::base, b));
    EXPECT_NE(cache_hash("x", Case::base, a), cache_hash("x", Case::long_term, a));
    EXPECT_NE(cache_hash("x", Case::base, a), cache_hash("y", Case::base, a));
}

TEST(Surrogate, ShapeAndDeterminism) {
    const auto a = synthesize_fleet(100, 2001);
    const auto b = synthesize_fleet(100, 2001);
    ASSERT_EQ(a.size(), 100u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].sensors, b[i].sensors);
        EXPECT_GE(a[i].lifetime(), 128);
        EXPECT_LE(a[i].lifetime(), 362);
    }
    std::ostringstream os;
    write_cmapss(os, a);
    std::istringstream is(os.str());
    EXPECT_EQ(parse_cmapss(is).size(), 100u);
}
