// Copyright 2026 The OpenNOD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace opennod::codec {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ParseError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Little-endian float32 array <-> base64, the wire form of embeddings.
std::string encode_f32(std::span<const double> values);
std::vector<double> decode_f32(std::string_view base64);

/// First 8 bytes of SHA-256, read big-endian. Used for cache keys.
std::uint64_t hash64(std::string_view data);

std::string hex64(std::uint64_t value);

}  // namespace opennod::codec
