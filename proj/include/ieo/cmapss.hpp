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

// CMAPSS run-to-failure files -> engine series -> normalized sliding windows.
//
// Text format: one row per (unit, cycle), 26 whitespace-separated numbers:
//   unit  cycle  setting1..3  sensor1..21

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ieo/binary_io.hpp"
#include "ieo/errors.hpp"
#include "ieo/rul_dist.hpp"

namespace ieo::cmapss {

inline constexpr int kSettings = 3;
inline constexpr int kSensors = 21;
inline constexpr int kColumns = 2 + kSettings + kSensors;

/// The 14 sensors that vary in FD001 (1-based sensor numbers).
inline const std::vector<int>& default_sensor_ids() {
    static const std::vector<int> ids = {2, 3, 4, 7, 8, 9, 11, 12, 13, 14, 15, 17, 20, 21};
    return ids;
}

struct RawRecord {
    int unit_id = 0;
    int cycle = 0;
    std::array<double, kSettings> settings{};
    std::array<double, kSensors> sensors{};
};

/// One engine's trajectory, rows ordered by cycle 1..lifetime.
struct EngineSeries {
    int unit_id = 0;
    Eigen::MatrixXd settings;  // cycles x 3
    Eigen::MatrixXd sensors;   // cycles x sensor_ids.size()
    std::vector<int> sensor_ids;

    int lifetime() const { return static_cast<int>(sensors.rows()); }

    /// Copy restricted to the given sensors, in the given order.
    EngineSeries select(const std::vector<int>& ids) const {
        EngineSeries out{unit_id, settings, Eigen::MatrixXd(sensors.rows(), static_cast<Eigen::Index>(ids.size())), ids};
        for (std::size_t j = 0; j < ids.size(); ++j) {
            const auto it = std::find(sensor_ids.begin(), sensor_ids.end(), ids[j]);
            if (it == sensor_ids.end()) throw ConfigError("sensor " + std::to_string(ids[j]) + " not available");
            out.sensors.col(static_cast<Eigen::Index>(j)) = sensors.col(it - sensor_ids.begin());
        }
        return out;
    }
};

namespace detail {

inline double parse_number(std::string_view tok, std::size_t line) {
    double v = 0.0;
    const auto* first = tok.data();
    const auto* last = tok.data() + tok.size();
    if (!tok.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
        throw ParseError("not a finite number: '" + std::string(tok) + "'", line);
    }
    return v;
}

inline int parse_index(std::string_view tok, std::size_t line, const char* what) {
    const double v = parse_number(tok, line);
    if (v < 1.0 || v != std::floor(v) || v > 1e9) {
        throw ParseError(std::string(what) + " must be a positive integer, got '" + std::string(tok) + "'", line);
    }
    return static_cast<int>(v);
}

}  // namespace detail

/// Parses CMAPSS text, grouping rows by unit and checking cycles run 1, 2, ... without gaps.
inline std::vector<EngineSeries> parse_cmapss(std::istream& in) {
    struct Row {
        RawRecord rec;
        std::size_t line;
    };
    std::map<int, std::vector<Row>> by_unit;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        std::vector<std::string_view> tokens;
        std::string_view rest(text);
        while (true) {
            const auto b = rest.find_first_not_of(" \t\r");
            if (b == std::string_view::npos) break;
            rest.remove_prefix(b);
            const auto e = rest.find_first_of(" \t\r");
            tokens.push_back(rest.substr(0, e));
            if (e == std::string_view::npos) break;
            rest.remove_prefix(e);
        }
        if (tokens.empty()) continue;
        if (tokens.size() != kColumns) {
            throw ParseError("expected " + std::to_string(kColumns) + " columns, found " +
                                 std::to_string(tokens.size()),
                             line_no);
        }
        Row row{{}, line_no};
        row.rec.unit_id = detail::parse_index(tokens[0], line_no, "unit id");
        row.rec.cycle = detail::parse_index(tokens[1], line_no, "cycle");
        for (int i = 0; i < kSettings; ++i) row.rec.settings[i] = detail::parse_number(tokens[2 + i], line_no);
        for (int i = 0; i < kSensors; ++i) {
            row.rec.sensors[i] = detail::parse_number(tokens[2 + kSettings + i], line_no);
        }
        by_unit[row.rec.unit_id].push_back(row);
    }

    std::vector<EngineSeries> out;
    for (auto& [unit, rows] : by_unit) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.rec.cycle < b.rec.cycle; });
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].rec.cycle != static_cast<int>(i) + 1) {
                throw ParseError("unit " + std::to_string(unit) + " expected cycle " + std::to_string(i + 1) +
                                     ", found " + std::to_string(rows[i].rec.cycle),
                                 rows[i].line);
            }
        }
        EngineSeries s;
        s.unit_id = unit;
        const auto n = static_cast<Eigen::Index>(rows.size());
        s.settings.resize(n, kSettings);
        s.sensors.resize(n, kSensors);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (int c = 0; c < kSettings; ++c) s.settings(r, c) = rows[static_cast<std::size_t>(r)].rec.settings[c];
            for (int c = 0; c < kSensors; ++c) s.sensors(r, c) = rows[static_cast<std::size_t>(r)].rec.sensors[c];
        }
        for (int id = 1; id <= kSensors; ++id) s.sensor_ids.push_back(id);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<EngineSeries> parse_cmapss(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open CMAPSS file " + path.string());
    return parse_cmapss(in);
}

/// Writes series with all 21 sensors back in CMAPSS text form (shortest round-trip digits).
inline void write_cmapss(std::ostream& os, const std::vector<EngineSeries>& engines) {
    char buf[64];
    auto num = [&](double v) {
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        os.write(buf, r.ptr - buf);
    };
    for (const auto& e : engines) {
        if (e.sensors.cols() != kSensors) throw ConfigError("write_cmapss needs all 21 sensors");
        for (Eigen::Index r = 0; r < e.sensors.rows(); ++r) {
            os << e.unit_id << ' ' << (r + 1);
            for (int c = 0; c < kSettings; ++c) {
                os << ' ';
                num(e.settings(r, c));
            }
            for (int c = 0; c < kSensors; ++c) {
                os << ' ';
                num(e.sensors(r, c));
            }
            os << '\n';
        }
    }
}

/// Per-sensor min-max scaling fitted on training engines.
struct Normalizer {
    std::vector<int> sensor_ids;
    Eigen::VectorXd minimum;
    Eigen::VectorXd maximum;

    static Normalizer fit(const std::vector<EngineSeries>& train, const std::vector<int>& ids) {
        if (train.empty()) throw ConfigError("normalizer needs at least one engine");
        Normalizer n{ids, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ids.size()), std::numeric_limits<double>::infinity()),
                     Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ids.size()), -std::numeric_limits<double>::infinity())};
        for (const auto& e : train) {
            const auto sel = e.select(ids);
            n.minimum = n.minimum.cwiseMin(sel.sensors.colwise().minCoeff().transpose());
            n.maximum = n.maximum.cwiseMax(sel.sensors.colwise().maxCoeff().transpose());
        }
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (!(n.maximum(static_cast<Eigen::Index>(j)) > n.minimum(static_cast<Eigen::Index>(j)))) {
                throw ConfigError("sensor " + std::to_string(ids[j]) +
                                  " is constant on the training engines; choose different sensors");
            }
        }
        return n;
    }

    /// Maps each selected sensor to [0, 1], clipping values outside the fitted range.
    EngineSeries apply(const EngineSeries& series) const {
        EngineSeries out = series.select(sensor_ids);
        const Eigen::RowVectorXd lo = minimum.transpose();
        const Eigen::RowVectorXd range = (maximum - minimum).transpose();
        for (Eigen::Index r = 0; r < out.sensors.rows(); ++r) {
            out.sensors.row(r) = ((out.sensors.row(r) - lo).array() / range.array()).cwiseMax(0.0).cwiseMin(1.0);
        }
        return out;
    }
};

struct WindowSample {
    std::vector<double> features;  // window rows, time-major: [t * n_sensors + s]
    int label = 0;                 // remaining cycles, in 1..H
    int unit_id = 0;
    int end_cycle = 0;             // cycle of the window's last row
};

struct WindowOptions {
    int window = 30;
    int stride = 1;
    std::optional<int> cap;         // labels above cap become cap
    std::optional<int> filter_max;  // samples with labels above this are dropped
    int horizon = 150;              // labels are clamped into 1..horizon
};

struct Windowed {
    std::vector<WindowSample> samples;
    std::size_t skipped_short = 0;  // series shorter than the window
};

/// Sliding windows over already-normalized series. The label of the window ending at
/// cycle e of an engine with lifetime T is T - e + 1, so the window ending at failure has label 1.
inline Windowed make_windows(const std::vector<EngineSeries>& engines, const WindowOptions& opt) {
    if (opt.window < 1 || opt.stride < 1) throw ConfigError("window and stride must be positive");
    if (opt.horizon < 2) throw ConfigError("horizon must be at least 2");
    Windowed out;
    for (const auto& e : engines) {
        const int life = e.lifetime();
        if (life < opt.window) {
            ++out.skipped_short;
            continue;
        }
        const auto n_sensors = e.sensors.cols();
        for (int end = opt.window; end <= life; end += opt.stride) {
            int label = std::max(1, life - end + 1);
            if (opt.filter_max && label > *opt.filter_max) continue;
            if (opt.cap) label = std::min(label, *opt.cap);
            label = std::min(label, opt.horizon);
            WindowSample s;
            s.label = label;
            s.unit_id = e.unit_id;
            s.end_cycle = end;
            s.features.resize(static_cast<std::size_t>(opt.window * n_sensors));
            for (int t = 0; t < opt.window; ++t) {
                const Eigen::Index row = end - opt.window + t;
                for (Eigen::Index c = 0; c < n_sensors; ++c) {
                    s.features[static_cast<std::size_t>(t * n_sensors + c)] = e.sensors(row, c);
                }
            }
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

enum class Case { base, short_term, long_term };

inline std::string case_name(Case c) {
    switch (c) {
        case Case::base: return "base";
        case Case::short_term: return "short";
        case Case::long_term: return "long";
    }
    return "base";
}

inline Case parse_case(const std::string& s) {
    if (s == "base") return Case::base;
    if (s == "short" || s == "short_term" || s == "short-term") return Case::short_term;
    if (s == "long" || s == "long_term" || s == "long-term") return Case::long_term;
    throw ConfigError("unknown case '" + s + "' (expected base, short or long)");
}

struct DataConfig {
    int window = 30;
    int stride = 1;
    std::vector<int> sensor_ids = default_sensor_ids();
    int horizon = 150;
    int test_engines = 20;
    int rul_limit = 125;  // filter bound (base, short) or cap (long)
    /// Overrides of the case defaults; a value of 0 disables.
    std::optional<int> cap_override;
    std::optional<int> filter_override;

    std::string canonical() const {
        std::ostringstream os;
        os << "window=" << window << ";stride=" << stride << ";horizon=" << horizon << ";test=" << test_engines
           << ";limit=" << rul_limit << ";cap=" << (cap_override ? std::to_string(*cap_override) : "-")
           << ";filter=" << (filter_override ? std::to_string(*filter_override) : "-") << ";sensors=";
        for (int id : sensor_ids) os << id << ',';
        return os.str();
    }
};

struct DatasetSplit {
    std::vector<WindowSample> train;
    std::vector<WindowSample> eval;
    std::vector<int> train_units;
    std::vector<int> eval_units;
    std::string rule;  // human-readable description of partition and label rule
    bool eval_is_train = false;
};

inline WindowOptions window_options(Case c, const DataConfig& cfg) {
    WindowOptions w;
    w.window = cfg.window;
    w.stride = cfg.stride;
    w.horizon = cfg.horizon;
    if (c == Case::long_term) {
        w.cap = cfg.rul_limit;
    } else {
        w.filter_max = cfg.rul_limit;
    }
    if (cfg.cap_override) w.cap = *cfg.cap_override > 0 ? std::optional<int>(*cfg.cap_override) : std::nullopt;
    if (cfg.filter_override) {
        w.filter_max = *cfg.filter_override > 0 ? std::optional<int>(*cfg.filter_override) : std::nullopt;
    }
    return w;
}

/// Builds train/eval windows for a case:
///   base  - every engine for training and evaluation, labels above the limit dropped
///   short - first `test_engines` engines evaluate, the rest train, labels above the limit dropped
///   long  - same partition, every window kept, labels capped at the limit
inline DatasetSplit make_split(const std::vector<EngineSeries>& engines, Case c, const DataConfig& cfg) {
    std::vector<EngineSeries> sorted = engines;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.unit_id < b.unit_id; });
    const auto opts = window_options(c, cfg);
    DatasetSplit split;
    std::vector<EngineSeries> train_eng, eval_eng;
    if (c == Case::base) {
        if (sorted.empty()) throw ConfigError("no engines to build the base case from");
        train_eng = sorted;
        split.eval_is_train = true;
    } else {
        if (static_cast<int>(sorted.size()) <= cfg.test_engines) {
            throw ConfigError("out-of-sample split needs more than " + std::to_string(cfg.test_engines) +
                              " engines, have " + std::to_string(sorted.size()));
        }
        eval_eng.assign(sorted.begin(), sorted.begin() + cfg.test_engines);
        train_eng.assign(sorted.begin() + cfg.test_engines, sorted.end());
    }
    const auto norm = Normalizer::fit(train_eng, cfg.sensor_ids);
    auto normalize_all = [&](const std::vector<EngineSeries>& v) {
        std::vector<EngineSeries> out;
        for (const auto& e : v) out.push_back(norm.apply(e));
        return out;
    };
    split.train = make_windows(normalize_all(train_eng), opts).samples;
    for (const auto& e : train_eng) split.train_units.push_back(e.unit_id);
    if (split.eval_is_train) {
        split.eval = split.train;
        split.eval_units = split.train_units;
    } else {
        split.eval = make_windows(normalize_all(eval_eng), opts).samples;
        for (const auto& e : eval_eng) split.eval_units.push_back(e.unit_id);
    }
    std::ostringstream rule;
    rule << case_name(c) << ": train engines " << split.train_units.size() << ", eval engines "
         << split.eval_units.size() << (split.eval_is_train ? " (same as train)" : "");
    if (opts.filter_max) rule << ", labels > " << *opts.filter_max << " dropped";
    if (opts.cap) rule << ", labels capped at " << *opts.cap;
    split.rule = rule.str();
    return split;
}

/// Samples in column-major matrix form for batched training.
struct SampleMatrix {
    Eigen::MatrixXd features;  // dim x n
    std::vector<int> labels;

    static SampleMatrix from(const std::vector<WindowSample>& samples) {
        SampleMatrix m;
        if (samples.empty()) return m;
        const auto dim = static_cast<Eigen::Index>(samples.front().features.size());
        m.features.resize(dim, static_cast<Eigen::Index>(samples.size()));
        for (std::size_t i = 0; i < samples.size(); ++i) {
            if (static_cast<Eigen::Index>(samples[i].features.size()) != dim) {
                throw DomainError("samples differ in feature dimension");
            }
            m.features.col(static_cast<Eigen::Index>(i)) =
                Eigen::Map<const Eigen::VectorXd>(samples[i].features.data(), dim);
            m.labels.push_back(samples[i].label);
        }
        return m;
    }

    std::size_t size() const { return labels.size(); }
    Eigen::Index dim() const { return features.rows(); }
};

// Dataset cache layout (little-endian):
//   "IEODSET1"                 8 bytes magic
//   u64 config hash
//   u32 feature dim, u32 eval_is_train flag
//   u32 n_train_units, u32 ids..., u32 n_eval_units, u32 ids...
//   u32 rule length, rule bytes
//   u64 n_train, then per sample: dim f64 features, i32 label, i32 unit id, i32 end cycle
//   u64 n_eval, samples as above (n_eval = 0 when eval_is_train)
inline constexpr std::string_view kCacheMagic = "IEODSET1";

inline void write_cache(std::ostream& os, const DatasetSplit& split, std::uint64_t hash) {
    using namespace binio;
    put_bytes(os, kCacheMagic);
    put_u64(os, hash);
    const std::uint32_t dim = split.train.empty() ? 0 : static_cast<std::uint32_t>(split.train.front().features.size());
    put_u32(os, dim);
    put_u32(os, split.eval_is_train ? 1 : 0);
    for (const auto* units : {&split.train_units, &split.eval_units}) {
        put_u32(os, static_cast<std::uint32_t>(units->size()));
        for (int u : *units) put_u32(os, static_cast<std::uint32_t>(u));
    }
    put_u32(os, static_cast<std::uint32_t>(split.rule.size()));
    put_bytes(os, split.rule);
    auto samples = [&](const std::vector<WindowSample>& v) {
        put_u64(os, v.size());
        for (const auto& s : v) {
            if (s.features.size() != dim) throw DomainError("samples differ in feature dimension");
            for (double f : s.features) put_f64(os, f);
            put_i32(os, s.label);
            put_i32(os, s.unit_id);
            put_i32(os, s.end_cycle);
        }
    };
    samples(split.train);
    samples(split.eval_is_train ? std::vector<WindowSample>{} : split.eval);
}

/// Reads a cache; returns nullopt when its hash differs from `expected_hash`.
inline std::optional<DatasetSplit> read_cache(std::istream& is, std::uint64_t expected_hash) {
    using namespace binio;
    if (get_bytes(is, kCacheMagic.size()) != kCacheMagic) throw ParseError("not a dataset cache file", 0);
    if (get_u64(is) != expected_hash) return std::nullopt;
    DatasetSplit split;
    const std::uint32_t dim = get_u32(is);
    split.eval_is_train = get_u32(is) != 0;
    for (auto* units : {&split.train_units, &split.eval_units}) {
        const auto n = get_u32(is);
        for (std::uint32_t i = 0; i < n; ++i) units->push_back(static_cast<int>(get_u32(is)));
    }
    split.rule = get_bytes(is, get_u32(is));
    auto samples = [&](std::vector<WindowSample>& v) {
        const auto n = get_u64(is);
        v.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            WindowSample s;
            s.features.resize(dim);
            for (auto& f : s.features) f = get_f64(is);
            s.label = get_i32(is);
            s.unit_id = get_i32(is);
            s.end_cycle = get_i32(is);
            v.push_back(std::move(s));
        }
    };
    samples(split.train);
    samples(split.eval);
    if (split.eval_is_train) split.eval = split.train;
    return split;
}

/// Fingerprint of (source data bytes, case, data configuration).
inline std::uint64_t cache_hash(std::string_view source_bytes, Case c, const DataConfig& cfg) {
    auto h = binio::fnv1a(source_bytes);
    h = binio::fnv1a(case_name(c), h);
    return binio::fnv1a(cfg.canonical(), h);
}

}  // namespace ieo::cmapss
