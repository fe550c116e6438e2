/*
 * Copyright (C) 2026 The terl-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
*/

#pragma once

// Binary checkpoint container. All integers are little-endian.
//
//   magic       8 bytes  "TERLCKPT"
//   version     u32      (currently 1)
//   header_len  u32, then header_len bytes of UTF-8 metadata (JSON)
//   count       u32      number of entries
//   entry       repeated `count` times:
//     name_len  u32, then name bytes
//     ndim      u32, then ndim x u32 extents
//     nbytes    u64      payload size, 4 * product(extents)
//     payload   float32 little-endian, row-major
//
// Values are stored as 32-bit floats, so a store round-trips bit-exactly
// once ParamStore::round_to_float has been applied.

#include "terl/tensor.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>

namespace terl::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint
{
  std::string header;
  ParamStore params;
};

std::string encode_checkpoint(const std::string& header, const ParamStore& params);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const std::string& header, const ParamStore& params);
Checkpoint read_checkpoint(const std::string& path);

} // namespace terl::nn
