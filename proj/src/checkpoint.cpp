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

#include "terl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace terl::nn {

namespace {

constexpr char kMagic[8] = {'T', 'E', 'R', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::string& out, T value)
{
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

class Reader
{
public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T le()
  {
    need(sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  std::string take(std::size_t n)
  {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const
  {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

} // namespace

std::string encode_checkpoint(const std::string& header, const ParamStore& params)
{
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.params())
  {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out += p.name;
    put_le<std::uint32_t>(out, 2);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.cols()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.value.size()) * 4);
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(p.value.data()[i])));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes)
{
  Reader in(bytes);
  if (in.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = in.le<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.header = in.take(in.le<std::uint32_t>());
  const auto count = in.le<std::uint32_t>();
  for (std::uint32_t e = 0; e < count; ++e)
  {
    std::string name = in.take(in.le<std::uint32_t>());
    const auto ndim = in.le<std::uint32_t>();
    if (ndim == 0 || ndim > 2)
      throw CheckpointError("entry '" + name + "' has unsupported rank");
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t d = 0; d < ndim; ++d)
      dims[d] = in.le<std::uint32_t>();
    // rank-1 entries load as a single row
    const std::uint64_t rows = ndim == 2 ? dims[0] : 1;
    const std::uint64_t cols = ndim == 2 ? dims[1] : dims[0];
    const auto nbytes = in.le<std::uint64_t>();
    if (nbytes != rows * cols * 4)
      throw CheckpointError("entry '" + name + "' payload size does not match its shape");
    Matrix value(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < value.size(); ++i)
      value.data()[i] = static_cast<double>(std::bit_cast<float>(in.le<std::uint32_t>()));
    if (ckpt.params.contains(name))
      throw CheckpointError("duplicate entry '" + name + "'");
    ckpt.params.add(name, std::move(value));
  }
  if (!in.at_end())
    throw CheckpointError("trailing bytes after last entry");
  return ckpt;
}

void write_checkpoint(const std::string& path, const std::string& header, const ParamStore& params)
{
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f)
    throw CheckpointError("cannot open '" + path + "' for writing");
  const std::string bytes = encode_checkpoint(header, params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f)
    throw CheckpointError("failed writing '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path)
{
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

} // namespace terl::nn
