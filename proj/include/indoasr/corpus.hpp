// corpus.hpp
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
// Dataset manifests (JSON Lines), WAV header validation and the
// recombine-then-split recipe for train/validation subsets.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "indoasr/error.hpp"
#include "indoasr/random.hpp"
#include "indoasr/textnorm.hpp"

namespace indoasr::corpus {

enum class Source { titml_idn, magic_data, common_voice, other };
enum class Subset { train, validation, test };

inline constexpr std::uint32_t kTargetSampleRate = 16000;

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::titml_idn: return "titml_idn";
    case Source::magic_data: return "magic_data";
    case Source::common_voice: return "common_voice";
    case Source::other: return "other";
  }
  return "other";
}

inline std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::train: return "train";
    case Subset::validation: return "validation";
    case Subset::test: return "test";
  }
  return "train";
}

inline std::optional<Source> parse_source(std::string_view s) {
  for (Source v : {Source::titml_idn, Source::magic_data, Source::common_voice, Source::other})
    if (s == to_string(v)) return v;
  return std::nullopt;
}

inline std::optional<Subset> parse_subset(std::string_view s) {
  if (s == "dev") return Subset::validation;
  for (Subset v : {Subset::train, Subset::validation, Subset::test})
    if (s == to_string(v)) return v;
  return std::nullopt;
}

struct UtteranceRecord {
  std::string id;
  std::string audio_path;
  std::string transcript_raw;
  textnorm::NormalizedText transcript_norm;
  double duration_s = 0.0;
  std::uint32_t sample_rate_hz = kTargetSampleRate;
  std::string speaker_id;
  Source source = Source::other;
  Subset subset = Subset::train;

  friend bool operator==(const UtteranceRecord&, const UtteranceRecord&) = default;
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& obj, const char* key,
                                   std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw MissingField(key, line);
  return *it;
}

inline std::string string_field(const nlohmann::json& obj, const char* key,
                                std::size_t line) {
  const auto& v = field(obj, key, line);
  if (!v.is_string()) throw ParseError(std::string("\"") + key + "\" must be a string", line);
  return v.get<std::string>();
}

}  // namespace detail

inline UtteranceRecord record_from_json(const nlohmann::json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError("expected a JSON object", line);
  UtteranceRecord r;
  r.id = detail::string_field(obj, "id", line);
  r.audio_path = detail::string_field(obj, "audio_path", line);
  r.transcript_raw = detail::string_field(obj, "transcript", line);

  const auto& dur = detail::field(obj, "duration_s", line);
  if (!dur.is_number() || dur.get<double>() < 0.0)
    throw ParseError("\"duration_s\" must be a nonnegative number", line);
  r.duration_s = dur.get<double>();

  const auto& rate = detail::field(obj, "sample_rate_hz", line);
  if (!rate.is_number_integer() || rate.get<std::int64_t>() <= 0 ||
      rate.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max())
    throw ParseError("\"sample_rate_hz\" must be a positive integer", line);
  r.sample_rate_hz = static_cast<std::uint32_t>(rate.get<std::int64_t>());

  r.speaker_id = detail::string_field(obj, "speaker_id", line);

  auto src = parse_source(detail::string_field(obj, "source", line));
  if (!src) throw ParseError("unknown \"source\" value", line);
  r.source = *src;
  auto sub = parse_subset(detail::string_field(obj, "subset", line));
  if (!sub) throw ParseError("unknown \"subset\" value", line);
  r.subset = *sub;
  return r;
}

inline nlohmann::ordered_json record_to_json(const UtteranceRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["audio_path"] = r.audio_path;
  j["transcript"] = r.transcript_raw;
  j["duration_s"] = r.duration_s;
  j["sample_rate_hz"] = r.sample_rate_hz;
  j["speaker_id"] = r.speaker_id;
  j["source"] = to_string(r.source);
  j["subset"] = to_string(r.subset);
  return j;
}

// Blank lines are skipped; every other line must hold one record.
inline std::vector<UtteranceRecord> parse_manifest(std::istream& in) {
  std::vector<UtteranceRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](char c) { return textnorm::is_space(c); }))
      continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    records.push_back(record_from_json(obj, lineno));
  }
  return records;
}

inline std::vector<UtteranceRecord> load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path);
  return parse_manifest(in);
}

inline void write_manifest(std::span<const UtteranceRecord> records, std::ostream& out) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline void save_manifest(std::span<const UtteranceRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_manifest(records, out);
  if (!out) throw IoError("write failed: " + path);
}

// Fills transcript_norm. Returns how many utterances lost digits.
inline std::size_t normalize_transcripts(std::span<UtteranceRecord> records) {
  std::size_t with_digits = 0;
  for (auto& r : records) {
    textnorm::NormalizeStats stats;
    r.transcript_norm = textnorm::normalize(r.transcript_raw, &stats);
    if (stats.digits_removed) ++with_digits;
  }
  return with_digits;
}

// ---------------------------------------------------------------------------
// WAV headers

struct WavInfo {
  std::uint16_t audio_format = 0;  // 1 = PCM
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  std::uint32_t data_bytes = 0;

  double duration_s() const {
    const double frame_bytes = channels * (bits_per_sample / 8.0);
    return frame_bytes > 0 && sample_rate > 0 ? data_bytes / frame_bytes / sample_rate : 0.0;
  }
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace detail

inline WavInfo read_wav_info(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  unsigned char riff[12];
  if (!in.read(reinterpret_cast<char*>(riff), 12)) throw IoError(path + ": truncated RIFF header");
  if (std::string_view(reinterpret_cast<char*>(riff), 4) != "RIFF" ||
      std::string_view(reinterpret_cast<char*>(riff) + 8, 4) != "WAVE")
    throw IoError(path + ": not a RIFF/WAVE file");

  WavInfo info;
  bool have_fmt = false;
  unsigned char hdr[8];
  while (in.read(reinterpret_cast<char*>(hdr), 8)) {
    std::string_view id(reinterpret_cast<char*>(hdr), 4);
    std::uint32_t size = detail::le32(hdr + 4);
    if (id == "fmt ") {
      if (size < 16) throw IoError(path + ": fmt chunk too small");
      std::vector<unsigned char> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size))
        throw IoError(path + ": truncated fmt chunk");
      info.audio_format = detail::le16(&fmt[0]);
      info.channels = detail::le16(&fmt[2]);
      info.sample_rate = detail::le32(&fmt[4]);
      info.bits_per_sample = detail::le16(&fmt[14]);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError(path + ": data chunk precedes fmt chunk");
      info.data_bytes = size;
      return info;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
    if (size & 1 && id == "fmt ") in.seekg(1, std::ios::cur);
  }
  throw IoError(path + ": no data chunk");
}

// Mono 16-bit PCM writer, used to produce fixtures.
inline void write_wav_pcm16(const std::string& path, std::span<const std::int16_t> samples,
                            std::uint32_t sample_rate, std::uint16_t channels = 1) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto put16 = [&](std::uint16_t v) {
    out.put(static_cast<char>(v & 0xff));
    out.put(static_cast<char>(v >> 8));
  };
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.write("RIFF", 4);
  put32(36 + data_bytes);
  out.write("WAVEfmt ", 8);
  put32(16);
  put16(1);
  put16(channels);
  put32(sample_rate);
  put32(sample_rate * channels * 2);
  put16(static_cast<std::uint16_t>(channels * 2));
  put16(16);
  out.write("data", 4);
  put32(data_bytes);
  for (std::int16_t s : samples) put16(static_cast<std::uint16_t>(s));
  if (!out) throw IoError("write failed: " + path);
}

enum class AudioIssueKind { io_error, sample_rate, channels, encoding };

inline std::string_view to_string(AudioIssueKind k) {
  switch (k) {
    case AudioIssueKind::io_error: return "io_error";
    case AudioIssueKind::sample_rate: return "sample_rate";
    case AudioIssueKind::channels: return "channels";
    case AudioIssueKind::encoding: return "encoding";
  }
  return "io_error";
}

struct AudioIssue {
  std::size_t index;  // position in the input list
  std::string id;
  AudioIssueKind kind;
  std::string message;
};

struct AudioReport {
  std::size_t checked = 0;
  std::vector<AudioIssue> issues;  // input order

  bool ok() const { return issues.empty(); }
};

// Reads each record's WAV header and flags anything that is not 16 kHz mono
// 16-bit PCM. Unreadable files become io_error entries. Audio is not touched.
// Relative audio paths are resolved against base_dir.
inline AudioReport validate_audio(std::span<const UtteranceRecord> records,
                                  const std::filesystem::path& base_dir = {}) {
  AudioReport report;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ++report.checked;
    std::filesystem::path p(r.audio_path);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    WavInfo info;
    try {
      info = read_wav_info(p.string());
    } catch (const IoError& e) {
      report.issues.push_back({i, r.id, AudioIssueKind::io_error, e.what()});
      continue;
    }
    if (info.sample_rate != kTargetSampleRate)
      report.issues.push_back({i, r.id, AudioIssueKind::sample_rate,
                               "sample rate " + std::to_string(info.sample_rate) +
                                   " Hz, needs resample to 16000"});
    if (info.channels != 1)
      report.issues.push_back({i, r.id, AudioIssueKind::channels,
                               std::to_string(info.channels) + " channels, needs mono"});
    if (info.audio_format != 1 || info.bits_per_sample != 16)
      report.issues.push_back({i, r.id, AudioIssueKind::encoding,
                               "format " + std::to_string(info.audio_format) + "/" +
                                   std::to_string(info.bits_per_sample) +
                                   "-bit, needs 16-bit PCM"});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_fraction = 0.9;
  std::uint64_t seed = 53;
};

// floor((1 - f) * n). The small slack absorbs binary rounding of f so that
// e.g. f = 0.9, n = 10 yields 1 rather than 0.
inline std::size_t validation_count(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("train fraction must lie in (0, 1)");
  return static_cast<std::size_t>(std::floor((1.0 - train_fraction) * double(n) + 1e-9));
}

struct Split {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> validation;
};

// Pools both subsets, sorts by id (full record as tie-break) so the result
// does not depend on manifest order, Fisher-Yates shuffles with the seed and
// takes the first train_count records as train.
inline Split recombine_and_split(std::span<const UtteranceRecord> train,
                                 std::span<const UtteranceRecord> validation,
                                 const SplitSpec& spec) {
  std::vector<UtteranceRecord> pool;
  pool.reserve(train.size() + validation.size());
  pool.insert(pool.end(), train.begin(), train.end());
  pool.insert(pool.end(), validation.begin(), validation.end());
  if (pool.empty()) throw EmptyInput("nothing to split");

  const std::size_t n_val = validation_count(pool.size(), spec.train_fraction);
  std::sort(pool.begin(), pool.end(), [](const UtteranceRecord& a, const UtteranceRecord& b) {
    return std::tie(a.id, a.audio_path, a.transcript_raw, a.speaker_id, a.duration_s,
                    a.sample_rate_hz, a.source, a.subset) <
           std::tie(b.id, b.audio_path, b.transcript_raw, b.speaker_id, b.duration_s,
                    b.sample_rate_hz, b.source, b.subset);
  });
  Rng rng(spec.seed);
  rng.shuffle(std::span(pool));

  Split out;
  const std::size_t n_train = pool.size() - n_val;
  out.train.assign(std::make_move_iterator(pool.begin()),
                   std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(n_train)));
  out.validation.assign(std::make_move_iterator(pool.begin() + static_cast<std::ptrdiff_t>(n_train)),
                        std::make_move_iterator(pool.end()));
  for (auto& r : out.train) r.subset = Subset::train;
  for (auto& r : out.validation) r.subset = Subset::validation;
  return out;
}

// ---------------------------------------------------------------------------
// Duration bookkeeping

inline std::map<Source, double> duration_totals(std::span<const UtteranceRecord> records) {
  std::map<Source, double> totals;
  for (const auto& r : records) totals[r.source] += r.duration_s;
  return totals;
}

// Published per-source totals, in seconds.
inline std::optional<double> reference_duration_s(Source s) {
  switch (s) {
    case Source::titml_idn: return 14 * 3600.0 + 31 * 60.0;
    case Source::magic_data: return 3 * 3600.0 + 33 * 60.0;
    case Source::common_voice: return 6 * 3600.0 + 14 * 60.0 + 1.0;
    case Source::other: return std::nullopt;
  }
  return std::nullopt;
}

inline std::string format_duration(double seconds) {
  auto total = static_cast<long long>(std::llround(seconds));
  char buf[48];
  std::snprintf(buf, sizeof buf, "%lldh%02lldm%02llds", total / 3600, (total / 60) % 60,
                total % 60);
  return buf;
}

}  // namespace indoasr::corpus
