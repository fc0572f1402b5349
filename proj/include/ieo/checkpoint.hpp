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

// Model checkpoint file, little-endian:
//
//   "IEOCKPT1"                      magic, 8 bytes
//   u32 format version (= 1)
//   u32 input_dim
//   u32 hidden layer count L, then L x u32 widths
//   u32 output_dim (= 2)
//   f64 dropout_rate, f64 scale_multiplier, f64 shape_multiplier, f64 positivity_floor
//   u64 rng seed, u64 training step count
//   per affine layer (L + 1 of them):
//     u32 rows, u32 cols, rows*cols f64 weights (row-major), rows f64 biases

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "ieo/binary_io.hpp"
#include "ieo/errors.hpp"
#include "ieo/model.hpp"

namespace ieo {

inline constexpr std::string_view kCheckpointMagic = "IEOCKPT1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    MlpParams params;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
    using namespace binio;
    if (!ck.params.matches(ck.config)) throw DomainError("checkpoint parameters do not match its configuration");
    put_bytes(os, kCheckpointMagic);
    put_u32(os, kCheckpointVersion);
    put_u32(os, static_cast<std::uint32_t>(ck.config.input_dim));
    put_u32(os, static_cast<std::uint32_t>(ck.config.hidden_dims.size()));
    for (int h : ck.config.hidden_dims) put_u32(os, static_cast<std::uint32_t>(h));
    put_u32(os, ModelConfig::output_dim);
    put_f64(os, ck.config.dropout_rate);
    put_f64(os, ck.config.scale_multiplier);
    put_f64(os, ck.config.shape_multiplier);
    put_f64(os, ck.config.positivity_floor);
    put_u64(os, ck.seed);
    put_u64(os, ck.step);
    for (const auto& layer : ck.params.layers) {
        put_u32(os, static_cast<std::uint32_t>(layer.weight.rows()));
        put_u32(os, static_cast<std::uint32_t>(layer.weight.cols()));
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put_f64(os, layer.weight(r, c));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) put_f64(os, layer.bias(r));
    }
}

inline Checkpoint read_checkpoint(std::istream& is) {
    using namespace binio;
    if (get_bytes(is, kCheckpointMagic.size()) != kCheckpointMagic) throw ParseError("not a checkpoint file", 0);
    if (const auto v = get_u32(is); v != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + std::to_string(v), 0);
    }
    Checkpoint ck;
    ck.config.input_dim = static_cast<int>(get_u32(is));
    const auto hidden = get_u32(is);
    if (hidden > 64) throw ParseError("implausible hidden layer count", 0);
    ck.config.hidden_dims.clear();
    for (std::uint32_t i = 0; i < hidden; ++i) ck.config.hidden_dims.push_back(static_cast<int>(get_u32(is)));
    if (get_u32(is) != ModelConfig::output_dim) throw ParseError("checkpoint output dimension is not 2", 0);
    ck.config.dropout_rate = get_f64(is);
    ck.config.scale_multiplier = get_f64(is);
    ck.config.shape_multiplier = get_f64(is);
    ck.config.positivity_floor = get_f64(is);
    ck.config.validate();
    ck.seed = get_u64(is);
    ck.step = get_u64(is);
    ck.params = MlpParams::zeros(ck.config);
    for (auto& layer : ck.params.layers) {
        const auto rows = get_u32(is);
        const auto cols = get_u32(is);
        if (rows != layer.weight.rows() || cols != layer.weight.cols()) {
            throw ParseError("checkpoint layer shape disagrees with its configuration", 0);
        }
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = get_f64(is);
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = get_f64(is);
    }
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write checkpoint " + path.string());
    write_checkpoint(os, ck);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open checkpoint " + path.string());
    return read_checkpoint(is);
}

}  // namespace ieo
