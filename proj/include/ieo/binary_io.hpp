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

// Little-endian binary encoding helpers shared by the checkpoint and dataset cache
// formats, plus the FNV-1a hash used to fingerprint configurations.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "ieo/errors.hpp"

namespace ieo::binio {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

inline void put_i32(std::ostream& os, std::int32_t v) { put_u32(os, static_cast<std::uint32_t>(v)); }
inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

inline void put_bytes(std::ostream& os, std::string_view s) { os.write(s.data(), static_cast<std::streamsize>(s.size())); }

inline void get_exact(std::istream& is, char* out, std::size_t n) {
    is.read(out, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n) throw ParseError("unexpected end of binary file", 0);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    get_exact(is, reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    get_exact(is, reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_u32(is)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline std::string get_bytes(std::istream& is, std::size_t n) {
    std::string s(n, '\0');
    get_exact(is, s.data(), n);
    return s;
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xCBF29CE484222325ULL) {
    for (char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace ieo::binio
