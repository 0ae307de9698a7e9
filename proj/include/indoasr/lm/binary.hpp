// binary.hpp
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
//
// \file
// Binary model format, all integers and floats little-endian:
//
//   "NGLM" | u32 version | u8 order
//   u32 word count, then per word: u32 byte length, UTF-8 bytes
//   per order n = 1..order: u64 entry count, then per entry
//     n x u32 word ids (context then word), f32 log10 prob, f32 log10 backoff
//
// Entries are stored sorted so lookups bisect the loaded arrays directly.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "indoasr/bytes.hpp"
#include "indoasr/error.hpp"
#include "indoasr/lm/arpa.hpp"
#include "indoasr/lm/model.hpp"

namespace indoasr::lm {

inline constexpr char kBinaryMagic[4] = {'N', 'G', 'L', 'M'};
inline constexpr std::uint32_t kBinaryVersion = 1;

namespace detail {
using bytes::ByteReader;
using bytes::ByteWriter;
}  // namespace detail

inline std::string to_binary(const NGramModel& model) {
  detail::ByteWriter w;
  w.bytes(kBinaryMagic, 4);
  w.u32(kBinaryVersion);
  w.u8(static_cast<std::uint8_t>(model.order()));
  const auto& words = model.words().words();
  w.u32(static_cast<std::uint32_t>(words.size()));
  for (const auto& s : words) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    w.bytes(s.data(), s.size());
  }
  for (int n = 1; n <= model.order(); ++n) {
    const auto& t = model.table(n);
    w.u64(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (WordId id : t.key(i)) w.u32(id);
      w.f32(t.prob(i));
      w.f32(t.backoff(i));
    }
  }
  return w.data();
}

inline NGramModel from_binary(std::string_view data) {
  detail::ByteReader r(data);
  if (data.size() < 4) throw TruncatedFile("binary model shorter than its magic");
  if (std::memcmp(r.bytes(4).data(), kBinaryMagic, 4) != 0) throw BadMagic("not an NGLM binary model");
  const std::uint32_t version = r.u32();
  if (version != kBinaryVersion)
    throw VersionMismatch("NGLM version " + std::to_string(version) + ", expected " +
                          std::to_string(kBinaryVersion));
  const int order = r.u8();
  if (order < 1) throw Error("binary model has order 0");

  WordTable words;
  const std::uint32_t nwords = r.u32();
  for (std::uint32_t i = 0; i < nwords; ++i) {
    const std::uint32_t len = r.u32();
    if (words.add(r.bytes(len)) != i) throw Error("binary model has a duplicate word");
  }

  std::vector<OrderTable> tables;
  for (int n = 1; n <= order; ++n) {
    const std::uint64_t count = r.u64();
    const std::size_t entry_bytes = static_cast<std::size_t>(n) * 4 + 8;
    if (count > r.remaining() / entry_bytes)
      throw TruncatedFile("binary model truncated in order " + std::to_string(n));
    OrderTable t(n);
    NGram key(static_cast<std::size_t>(n));
    for (std::uint64_t i = 0; i < count; ++i) {
      for (auto& id : key) {
        id = r.u32();
        if (id >= nwords) throw Error("binary model references word id " + std::to_string(id));
      }
      const float prob = r.f32();
      const float backoff = r.f32();
      t.append(key, prob, backoff);
    }
    tables.push_back(std::move(t));
  }
  if (r.remaining()) throw Error("trailing bytes after binary model");
  return NGramModel(std::move(words), std::move(tables));
}

inline void write_binary(const NGramModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::string data = to_binary(model);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed: " + path);
}

using bytes::slurp;

inline NGramModel read_binary(const std::string& path) { return from_binary(slurp(path)); }

// Binary if the file starts with the NGLM magic, ARPA text otherwise.
inline NGramModel load_model(const std::string& path) {
  const std::string data = slurp(path);
  if (data.size() >= 4 && std::memcmp(data.data(), kBinaryMagic, 4) == 0) return from_binary(data);
  std::istringstream in(data);
  return read_arpa(in);
}

}  // namespace indoasr::lm
