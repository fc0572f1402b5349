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

// Surrogate run-to-failure fleet in the CMAPSS FD001 text format, for environments
// where the NASA files are not available. Each engine follows
//
//   sensor_j(t) = base_j + offset_ij + direction_j * amplitude_j * wear_i(t) + noise
//   wear_i(t)   = w0_i + (1 - w0_i) * exp(-(T_i - t) / tau_i)
//
// with lifetime T_i = 128 + Gamma(2, 39) (capped at 362), tau_i in [25, 65] and initial
// wear w0_i in [0, 0.1]. The seven sensors that are flat in FD001 stay flat here.
// The data are not NASA measurements; results on them are not comparable with
// published FD001 figures.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ieo/cmapss.hpp"
#include "ieo/random.hpp"

namespace ieo::cmapss {

struct SensorProfile {
    double base;
    double noise;      // standard deviation of measurement noise
    double direction;  // +1 rises with wear, -1 falls, 0 flat
};

inline const std::array<SensorProfile, kSensors>& fd001_like_profiles() {
    static const std::array<SensorProfile, kSensors> p = {{
        {518.67, 0.0, 0.0},   {642.50, 0.45, 1.0},  {1590.5, 5.5, 1.0},  {1408.9, 8.0, 1.0},
        {14.62, 0.0, 0.0},    {21.61, 0.0, 0.0},    {553.40, 0.80, -1.0}, {2388.09, 0.06, 1.0},
        {9065.0, 18.0, 1.0},  {1.30, 0.0, 0.0},     {47.54, 0.24, 1.0},  {521.40, 0.65, -1.0},
        {2388.09, 0.06, 1.0}, {8143.8, 16.0, 1.0},  {8.442, 0.033, 1.0}, {0.03, 0.0, 0.0},
        {393.2, 1.3, 1.0},    {2388.0, 0.0, 0.0},   {100.0, 0.0, 0.0},   {38.82, 0.16, -1.0},
        {23.29, 0.10, -1.0},
    }};
    return p;
}

/// Deterministic surrogate fleet; unit ids 1..n_engines.
inline std::vector<EngineSeries> synthesize_fleet(int n_engines = 100, std::uint64_t seed = 2001) {
    const auto& profiles = fd001_like_profiles();
    std::vector<EngineSeries> out;
    for (int unit = 1; unit <= n_engines; ++unit) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(unit)));
        const double gamma2 = -39.0 * (std::log(1.0 - rng.uniform01()) + std::log(1.0 - rng.uniform01()));
        const int life = std::min(362, 128 + static_cast<int>(std::lround(gamma2)));
        const double tau = 25.0 + 40.0 * rng.uniform01();
        const double w0 = 0.1 * rng.uniform01();
        std::array<double, kSensors> offset{};
        std::array<double, kSensors> gain{};
        for (int j = 0; j < kSensors; ++j) {
            offset[j] = profiles[j].noise * 0.8 * rng.normal();
            // Amplitude near failure is 6-9 noise deviations, engine-specific.
            gain[j] = profiles[j].noise * (6.0 + 3.0 * rng.uniform01());
        }
        EngineSeries e;
        e.unit_id = unit;
        e.settings.resize(life, kSettings);
        e.sensors.resize(life, kSensors);
        for (int id = 1; id <= kSensors; ++id) e.sensor_ids.push_back(id);
        for (int t = 1; t <= life; ++t) {
            const double wear = w0 + (1.0 - w0) * std::exp(-(life - t) / tau);
            const Eigen::Index r = t - 1;
            e.settings(r, 0) = std::round(0.0022 * rng.normal() * 1e4) / 1e4;
            e.settings(r, 1) = std::round(0.0003 * rng.normal() * 1e4) / 1e4;
            e.settings(r, 2) = 100.0;
            for (int j = 0; j < kSensors; ++j) {
                const auto& p = profiles[j];
                double v = p.base;
                if (p.direction != 0.0) v += offset[j] + p.direction * gain[j] * wear + p.noise * rng.normal();
                e.sensors(r, j) = std::round(v * 1e4) / 1e4;
            }
        }
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace ieo::cmapss
