// cli.hpp
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
// The indoasr command line. run_cli() takes the argument list and the two
// output streams so the whole tool can be driven in-process.

#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "indoasr/corpus.hpp"
#include "indoasr/ctc_decode.hpp"
#include "indoasr/error.hpp"
#include "indoasr/metrics.hpp"
#include "indoasr/ngram_lm.hpp"
#include "indoasr/random.hpp"
#include "indoasr/synthetic.hpp"
#include "indoasr/textnorm.hpp"
#include "indoasr/xlsr_math.hpp"

#ifndef INDOASR_VERSION
#define INDOASR_VERSION "0.0.0"
#endif

namespace indoasr::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

inline constexpr std::uint64_t kDefaultSeed = 53;

namespace detail {

inline void ensure_parent(const std::string& path) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

inline std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

// Normalized non-empty lines; counts lines that lost digits.
inline std::vector<textnorm::NormalizedText> read_corpus(const std::string& path, std::size_t* with_digits = nullptr) {
  std::vector<textnorm::NormalizedText> out;
  for (const auto& line : read_lines(path)) {
    textnorm::NormalizeStats stats;
    auto t = textnorm::normalize(line, &stats);
    if (with_digits && stats.digits_removed) ++*with_digits;
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

struct TextRecord {
  std::string id;
  std::string text;
};

// JSONL with {id, text} per line.
inline std::vector<TextRecord> read_text_records(const std::string& path) {
  std::vector<TextRecord> out;
  std::set<std::string> ids;
  std::size_t n = 0;
  for (const auto& line : read_lines(path)) {
    ++n;
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": " + e.what(), n);
    }
    for (const char* key : {"id", "text"}) {
      if (!j.is_object() || !j.contains(key)) throw MissingField(key, n);
      if (!j[key].is_string()) throw ParseError(path + ": field \"" + key + "\" must be a string", n);
    }
    TextRecord r{j["id"].get<std::string>(), j["text"].get<std::string>()};
    if (!ids.insert(r.id).second) throw ParseError(path + ": duplicate id \"" + r.id + "\"", n);
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_text_records(const std::vector<TextRecord>& records, const std::string& path) {
  auto out = open_out(path);
  for (const auto& r : records) out << ordered_json{{"id", r.id}, {"text", r.text}}.dump() << '\n';
  if (!out) throw IoError("write failed: " + path);
}

inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// *.ctcl files of a directory in name order; the id is the file stem.
inline std::vector<fs::path> posterior_files(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ctcl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

struct DecodeFlags {
  std::size_t beam = 100;
  double alpha = 0.5;
  double beta = 1.0;
  double prune = -9.21;
  bool greedy = false;
  unsigned threads = 1;

  ctc::BatchOptions options(const lm::NGramModel* lm) const {
    ctc::BatchOptions o;
    o.greedy = greedy;
    o.config = {beam, alpha, beta, prune};
    o.lm = lm;
    o.threads = threads;
    return o;
  }
};

struct DecodeOutcome {
  std::vector<TextRecord> hyps;
  std::vector<ctc::DecodeFailure> failures;
};

inline DecodeOutcome decode_directory(const std::string& dir, const textnorm::Vocabulary& vocab,
                                      const ctc::BatchOptions& options) {
  std::vector<ctc::Utterance> utts;
  DecodeOutcome out;
  for (const auto& f : posterior_files(dir)) {
    try {
      utts.push_back({f.stem().string(), ctc::read_posteriors(f.string())});
    } catch (const Error& e) {
      out.failures.push_back({f.stem().string(), e.what()});
    }
  }
  auto result = ctc::batch_decode(utts, vocab, options);
  for (auto& d : result.decoded) out.hyps.push_back({d.id, d.text.str()});
  out.failures.insert(out.failures.end(), result.failures.begin(), result.failures.end());
  std::sort(out.failures.begin(), out.failures.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

// References in file order; a missing hypothesis scores as empty output.
inline std::vector<metrics::ScoredPair> join_pairs(const std::vector<TextRecord>& refs,
                                                   const std::vector<TextRecord>& hyps, std::ostream& err) {
  std::map<std::string, std::string> by_id;
  for (const auto& h : hyps) by_id[h.id] = h.text;
  std::vector<metrics::ScoredPair> pairs;
  std::size_t missing = 0;
  for (const auto& r : refs) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) ++missing;
    pairs.push_back({r.id, r.text, it == by_id.end() ? std::string() : it->second});
    if (it != by_id.end()) by_id.erase(it);
  }
  if (missing) err << "warning: " << missing << " reference(s) have no hypothesis; scored as empty\n";
  if (!by_id.empty()) err << "warning: " << by_id.size() << " hypothesis id(s) have no reference; ignored\n";
  return pairs;
}

inline std::string wer_csv(const metrics::WerReport& r) {
  std::string out = "id,reference_words,substitutions,deletions,insertions,wer\n";
  auto line = [&](const std::string& id, std::size_t n, const metrics::EditCounts& c, double wer) {
    out += id + "," + std::to_string(n) + "," + std::to_string(c.substitutions) + "," +
           std::to_string(c.deletions) + "," + std::to_string(c.insertions) + "," +
           metrics::format_percent(wer) + "\n";
  };
  for (const auto& u : r.utterances) line(u.id, u.reference_length, u.counts, u.error_rate());
  line("TOTAL", r.reference_length, r.counts, r.wer);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

class Tool {
 public:
  Tool(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(const std::vector<std::string>& args) {
    CLI::App app{"Indonesian ASR toolkit: corpus prep, n-gram LMs, CTC decoding, WER.", "indoasr"};
    app.set_version_flag("--version", std::string(INDOASR_VERSION));
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--seed", seed_, "Seed for every random choice")->capture_default_str();
    app.add_option("--run-log", run_log_, "Write the JSON run log here instead of stderr");
    app.add_option("--threads", threads_, "Worker threads for decoding")->capture_default_str()
        ->check(CLI::Range(1u, 256u));
    define(app);

    std::vector<const char*> argv{"indoasr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out_, err_);
      if (code == 0) return 0;
      if (!dynamic_cast<const CLI::ExtrasError*>(&e)) {
        std::vector<std::string> extra;
        for (const CLI::App* a = &app; a;) {
          for (const auto& r : a->remaining()) extra.push_back(r);
          const auto subs = a->get_subcommands();
          a = subs.empty() ? nullptr : subs.front();
        }
        if (!extra.empty()) err_ << "unrecognized argument: " << extra.front() << "\n";
      }
      return 2;
    }

    int status = 0;
    try {
      status = action_();
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      status = 1;
    }
    emit_run_log(app, args, status);
    return status;
  }

 private:
  void define(CLI::App& app);
  void emit_run_log(CLI::App& app, const std::vector<std::string>& args, int status);
  int run_benchmark();

  void on(CLI::App* sub, std::function<int()> fn) {
    sub->callback([this, sub, fn] {
      action_ = fn;
      command_ = sub;
    });
  }

  std::ostream& out_;
  std::ostream& err_;
  std::uint64_t seed_ = kDefaultSeed;
  std::string run_log_;
  unsigned threads_ = 1;
  std::function<int()> action_ = [] { return 0; };
  CLI::App* command_ = nullptr;

  // Flag storage, one set per subcommand.
  std::string in_, out_path_, manifest_, audio_root_, train_out_, validation_out_, vocab_, lm_path_,
      arpa_, binary_, posteriors_, refs_, hyps_, text_out_, sentence_, config_, log_in_, smoothing_ = "mkn";
  double train_fraction_ = 0.9, k_ = 1.0, sample_fraction_ = 1.0;
  int order_ = 5;
  std::uint64_t prune_ = 0, unk_threshold_ = 1;
  bool skip_audio_ = false, cer_ = false, large_ = false;
  long long samples_ = 0;
  detail::DecodeFlags decode_;
  synthetic::BenchmarkConfig synth_;
};

inline void Tool::define(CLI::App& app) {
  auto existing = CLI::ExistingFile;

  // manifest -----------------------------------------------------------------
  auto* manifest = app.add_subcommand("manifest", "Manifest tooling");
  manifest->require_subcommand(1);

  auto* validate = manifest->add_subcommand("validate", "Check records, transcripts and audio headers");
  validate->add_option("--in", manifest_, "Manifest (JSON Lines)")->required()->check(existing);
  validate->add_option("--audio-root", audio_root_, "Directory for relative audio paths (default: manifest dir)");
  validate->add_flag("--skip-audio", skip_audio_, "Do not open audio files");
  on(validate, [this] {
    auto records = corpus::load_manifest(manifest_);
    const std::size_t digits = corpus::normalize_transcripts(records);
    out_ << "records " << records.size() << "\n";
    if (digits) err_ << "warning: " << digits << " transcript(s) contained digits, which were removed\n";
    std::size_t empty = 0;
    for (const auto& r : records) empty += r.transcript_norm.empty();
    if (empty) err_ << "warning: " << empty << " transcript(s) are empty after normalization\n";
    for (const auto& [source, secs] : corpus::duration_totals(records)) {
      out_ << "duration " << corpus::to_string(source) << " " << corpus::format_duration(secs);
      if (auto ref = corpus::reference_duration_s(source)) out_ << " (published " << corpus::format_duration(*ref) << ")";
      out_ << "\n";
    }
    if (skip_audio_) return 0;
    const fs::path root = audio_root_.empty() ? fs::path(manifest_).parent_path() : fs::path(audio_root_);
    const auto report = corpus::validate_audio(records, root);
    out_ << "audio checked " << report.checked << ", issues " << report.issues.size() << "\n";
    for (const auto& i : report.issues)
      out_ << "issue " << i.id << " " << corpus::to_string(i.kind) << ": " << i.message << "\n";
    return report.ok() ? 0 : 1;
  });

  auto* split = manifest->add_subcommand("split", "Pool train and validation records and re-split them");
  split->add_option("--in", manifest_, "Manifest (JSON Lines)")->required()->check(existing);
  split->add_option("--train-fraction", train_fraction_, "Share of pooled records kept for training")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  split->add_option("--out-train", train_out_, "Train manifest to write")->required();
  split->add_option("--out-validation", validation_out_, "Validation manifest to write")->required();
  on(split, [this] {
    const auto records = corpus::load_manifest(manifest_);
    std::vector<corpus::UtteranceRecord> train, dev;
    std::size_t test = 0;
    for (const auto& r : records) {
      if (r.subset == corpus::Subset::train) train.push_back(r);
      else if (r.subset == corpus::Subset::validation) dev.push_back(r);
      else ++test;
    }
    const auto s = corpus::recombine_and_split(train, dev, {train_fraction_, seed_});
    detail::ensure_parent(train_out_);
    detail::ensure_parent(validation_out_);
    corpus::save_manifest(s.train, train_out_);
    corpus::save_manifest(s.validation, validation_out_);
    out_ << "train " << s.train.size() << "\nvalidation " << s.validation.size() << "\n";
    if (test) out_ << "test records left out " << test << "\n";
    return 0;
  });

  // text ---------------------------------------------------------------------
  auto* normalize = app.add_subcommand("normalize", "Normalize text, one sentence per line");
  normalize->add_option("--in", in_, "Raw text")->required()->check(existing);
  normalize->add_option("--out", out_path_, "Normalized text")->required();
  on(normalize, [this] {
    const auto lines = detail::read_lines(in_);
    auto out = detail::open_out(out_path_);
    std::size_t digits = 0, dropped = 0, kept = 0;
    for (const auto& line : lines) {
      textnorm::NormalizeStats stats;
      const auto t = textnorm::normalize(line, &stats);
      digits += stats.digits_removed > 0;
      if (t.empty()) {
        ++dropped;
        continue;
      }
      out << t.str() << '\n';
      ++kept;
    }
    out_ << "lines " << kept << "\n";
    if (dropped) err_ << "warning: " << dropped << " line(s) empty after normalization were dropped\n";
    if (digits) err_ << "warning: " << digits << " line(s) contained digits, which were removed\n";
    return 0;
  });

  auto* vocab = app.add_subcommand("build-vocab", "Character vocabulary from transcripts");
  vocab->add_option("--in", in_, "Manifest (.jsonl) or text file, one transcript per line")->required()->check(existing);
  vocab->add_option("--out", out_path_, "Vocabulary file")->required();
  on(vocab, [this] {
    std::vector<textnorm::NormalizedText> texts;
    if (fs::path(in_).extension() == ".jsonl") {
      auto records = corpus::load_manifest(in_);
      corpus::normalize_transcripts(records);
      for (auto& r : records) texts.push_back(r.transcript_norm);
    } else {
      texts = detail::read_corpus(in_);
    }
    const auto v = textnorm::build_vocab(texts);
    detail::ensure_parent(out_path_);
    textnorm::write_vocab(v, out_path_);
    out_ << "tokens " << v.size() << "\n";
    return 0;
  });

  // lm -----------------------------------------------------------------------
  auto* lm = app.add_subcommand("lm", "n-gram language models");
  lm->require_subcommand(1);

  auto* train = lm->add_subcommand("train", "Estimate a backoff model from text");
  train->add_option("--in", in_, "Training text, one sentence per line")->required()->check(existing);
  train->add_option("--order", order_, "Model order")->capture_default_str()->check(CLI::Range(1, lm::kMaxOrder));
  train->add_option("--smoothing", smoothing_, "mkn or add-k")->capture_default_str()
      ->check(CLI::IsMember({"mkn", "add-k"}));
  train->add_option("--k", k_, "Additive constant for add-k")->capture_default_str()->check(CLI::NonNegativeNumber);
  train->add_option("--prune", prune_, "Drop n-grams (order >= 2) seen at most this often")->capture_default_str();
  train->add_option("--unk-threshold", unk_threshold_, "Words seen fewer times become <unk>")->capture_default_str();
  train->add_option("--sample-fraction", sample_fraction_, "Keep each line with this probability (seeded)")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  train->add_option("--arpa", arpa_, "ARPA output");
  train->add_option("--binary", binary_, "Binary output");
  on(train, [this] {
    if (arpa_.empty() && binary_.empty()) throw CLI::RequiredError("--arpa or --binary");
    auto corpus = detail::read_corpus(in_);
    if (sample_fraction_ < 1.0) {
      Rng rng(seed_);
      std::vector<textnorm::NormalizedText> kept;
      for (auto& s : corpus)
        if (rng.bernoulli(sample_fraction_)) kept.push_back(std::move(s));
      out_ << "sampled " << kept.size() << " of " << corpus.size() << " sentences\n";
      corpus = std::move(kept);
    }
    const auto counts = lm::count_ngrams(corpus, order_, {unk_threshold_});
    const auto smoothing = smoothing_ == "mkn" ? lm::Smoothing::modified_kneser_ney() : lm::Smoothing::add_k(k_);
    lm::EstimateReport report;
    const auto model = lm::estimate(counts, {smoothing, prune_}, &report);
    for (const auto& w : report.warnings) err_ << "warning: " << w << "\n";
    if (!arpa_.empty()) {
      detail::ensure_parent(arpa_);
      lm::emit_arpa(model, arpa_);
    }
    if (!binary_.empty()) {
      detail::ensure_parent(binary_);
      lm::write_binary(model, binary_);
    }
    out_ << "order " << model.order() << "\n";
    for (int n = 1; n <= model.order(); ++n) out_ << "ngram " << n << "=" << model.table(n).size() << "\n";
    return 0;
  });

  auto* binary = lm->add_subcommand("binary", "Convert an ARPA model to the binary format");
  binary->add_option("--in", in_, "ARPA model")->required()->check(existing);
  binary->add_option("--out", out_path_, "Binary model")->required();
  on(binary, [this] {
    const auto model = lm::parse_arpa(in_);
    detail::ensure_parent(out_path_);
    lm::write_binary(model, out_path_);
    out_ << "entries " << model.entry_count() << "\n";
    return 0;
  });

  auto* query = lm->add_subcommand("query", "Score sentences");
  query->add_option("--lm", lm_path_, "ARPA or binary model")->required()->check(existing);
  auto* q_sentence = query->add_option("--sentence", sentence_, "One sentence");
  auto* q_in = query->add_option("--in", in_, "Text file, one sentence per line")->check(existing);
  q_sentence->excludes(q_in);
  on(query, [this] {
    if (sentence_.empty() && in_.empty()) throw CLI::RequiredError("--sentence or --in");
    const auto model = lm::load_model(lm_path_);
    std::vector<std::string> lines = in_.empty() ? std::vector<std::string>{sentence_} : detail::read_lines(in_);
    double total = 0.0;
    std::size_t tokens = 0;
    for (const auto& line : lines) {
      const auto t = textnorm::normalize(line);
      const auto words = t.words();
      const double lp = model.score_sentence(words);
      total += lp;
      tokens += words.size() + 1;
      out_ << detail::fixed(lp) << "\t" << t.str() << "\n";
    }
    out_ << "total " << detail::fixed(total) << " perplexity " << detail::fixed(std::pow(10.0, -total / double(tokens)), 4) << "\n";
    return 0;
  });

  // decode / eval ----------------------------------------------------------------
  auto decode_flags = [this](CLI::App* sub) {
    sub->add_option("--beam", decode_.beam, "Beam width")->capture_default_str()->check(CLI::Range(std::size_t{1}, std::size_t{100000}));
    sub->add_option("--alpha", decode_.alpha, "LM weight")->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--beta", decode_.beta, "Word insertion bonus")->capture_default_str();
    sub->add_option("--prune-threshold", decode_.prune, "Skip labels below this ln-probability per frame")->capture_default_str();
  };

  auto* decode = app.add_subcommand("decode", "Decode CTCL posterior files");
  decode->add_option("--posteriors", posteriors_, "Directory of .ctcl files")->required()->check(CLI::ExistingDirectory);
  decode->add_option("--vocab", vocab_, "Vocabulary file")->required()->check(existing);
  decode->add_option("--lm", lm_path_, "ARPA or binary model for fusion")->check(existing);
  decode->add_flag("--greedy", decode_.greedy, "Best-path decoding instead of beam search");
  decode->add_option("--out", out_path_, "Hypotheses (JSON Lines)")->required();
  decode_flags(decode);
  on(decode, [this] {
    const auto v = textnorm::read_vocab(vocab_);
    std::optional<lm::NGramModel> model;
    if (!lm_path_.empty()) model = lm::load_model(lm_path_);
    decode_.threads = threads_;
    const auto result = detail::decode_directory(posteriors_, v, decode_.options(model ? &*model : nullptr));
    detail::write_text_records(result.hyps, out_path_);
    for (const auto& f : result.failures) err_ << "failed " << f.id << ": " << f.message << "\n";
    out_ << "decoded " << result.hyps.size() << ", failed " << result.failures.size() << "\n";
    return result.hyps.empty() ? 1 : 0;
  });

  auto* eval = app.add_subcommand("eval-wer", "Score hypotheses against references");
  eval->add_option("--refs", refs_, "References (JSON Lines {id, text})")->required()->check(existing);
  eval->add_option("--hyps", hyps_, "Hypotheses (JSON Lines {id, text})")->required()->check(existing);
  eval->add_option("--out", out_path_, "Per-utterance CSV report")->required();
  eval->add_flag("--cer", cer_, "Also report character error rate");
  on(eval, [this] {
    const auto pairs = detail::join_pairs(detail::read_text_records(refs_), detail::read_text_records(hyps_), err_);
    const auto report = metrics::corpus_wer(pairs);
    auto out = detail::open_out(out_path_);
    out << detail::wer_csv(report);
    out_ << "WER " << metrics::format_percent(report.wer) << " (S=" << report.counts.substitutions
         << " D=" << report.counts.deletions << " I=" << report.counts.insertions
         << " N=" << report.reference_length << ")\n";
    if (cer_) out_ << "CER " << metrics::format_percent(metrics::corpus_cer(pairs).wer) << "\n";
    return 0;
  });

  auto* bench = app.add_subcommand("benchmark", "Decode and score a grid of LM configurations x test sets");
  bench->add_option("--config", config_, "Grid description (JSON)")->required()->check(existing);
  bench->add_option("--out", out_path_, "CSV table");
  bench->add_option("--text", text_out_, "Aligned text table");
  on(bench, [this] { return run_benchmark(); });

  // xlsr ---------------------------------------------------------------------
  auto* xlsr = app.add_subcommand("xlsr", "Encoder geometry and loss checks");
  xlsr->require_subcommand(1);
  auto* frames = xlsr->add_subcommand("frames", "Frames produced for a number of samples");
  frames->add_option("--samples", samples_, "Input length in samples")->required();
  frames->add_flag("--large", large_, "LARGE context dimensions");
  on(frames, [this] {
    const auto cfg = large_ ? xlsr::EncoderConfig::large() : xlsr::EncoderConfig::base();
    const auto frames = xlsr::frame_count(samples_, cfg);
    out_ << "samples " << samples_ << "\n"
         << "frames " << frames << "\n"
         << "hop_samples " << cfg.hop() << "\n"
         << "receptive_field_samples " << cfg.receptive_field() << "\n"
         << "context_dim " << cfg.context_dim << "\n";
    return 0;
  });
  auto* losscheck = xlsr->add_subcommand("losscheck", "Gradient and invariant checks of the quantizer and losses");
  on(losscheck, [this] {
    bool ok = true;
    for (const auto& r : xlsr::losscheck(seed_)) {
      char line[256];
      std::snprintf(line, sizeof line, "%-4s  %-44s  %-12.6g  limit %g\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.value, r.limit);
      out_ << line;
      ok = ok && r.pass;
    }
    return ok ? 0 : 1;
  });

  // synthetic data and replay ----------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Write a synthetic benchmark: LM text, references, posteriors, vocab");
  synth->add_option("--out", out_path_, "Output directory")->required();
  synth->add_option("--lm-sentences", synth_.lm_sentences, "LM training sentences")->capture_default_str();
  synth->add_option("--utterances", synth_.test_utterances, "Test utterances")->capture_default_str();
  synth->add_option("--confusion", synth_.noise.confusion_prob, "Per-letter confusion probability")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  synth->add_option("--rare-rate", synth_.rare_rate, "Chance a test place phrase is unseen in the LM text")
      ->capture_default_str()->check(CLI::Range(0.0, 1.0));
  on(synth, [this] {
    synth_.seed = seed_;
    const auto b = synthetic::make_benchmark(synth_);
    const fs::path dir(out_path_);
    fs::create_directories(dir / "posteriors");
    {
      // Written as raw text so the pipeline has something to normalize.
      auto out = detail::open_out((dir / "lm_corpus.txt").string());
      for (const auto& s : b.lm_corpus) {
        std::string line = s.str();
        line[0] = static_cast<char>(line[0] - 'a' + 'A');
        out << line << ".\n";
      }
    }
    std::vector<detail::TextRecord> refs;
    for (std::size_t i = 0; i < b.ids.size(); ++i) {
      refs.push_back({b.ids[i], b.references[i].str()});
      ctc::write_posteriors(b.posteriors[i], (dir / "posteriors" / (b.ids[i] + ".ctcl")).string());
    }
    detail::write_text_records(refs, (dir / "refs.jsonl").string());
    textnorm::write_vocab(b.vocab, (dir / "vocab.txt").string());
    out_ << "lm sentences " << b.lm_corpus.size() << "\nutterances " << b.ids.size() << "\n";
    return 0;
  });

  auto* replay = app.add_subcommand("replay", "Re-run the command recorded in a run log");
  replay->add_option("--log", log_in_, "Run log (JSON)")->required()->check(existing);
  on(replay, [this] {
    std::ifstream in(log_in_);
    nlohmann::json log;
    try {
      log = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(log_in_ + ": " + e.what(), 0);
    }
    if (!log.contains("argv") || !log["argv"].is_array()) throw MissingField("argv", 0);
    std::vector<std::string> args;
    const auto recorded = log["argv"].get<std::vector<std::string>>();
    for (std::size_t i = 0; i < recorded.size(); ++i) {
      if (recorded[i] == "--run-log") {
        ++i;
        continue;
      }
      if (recorded[i].rfind("--run-log=", 0) == 0) continue;
      args.push_back(recorded[i]);
    }
    if (!args.empty() && args.front() == "replay") throw Error("refusing to replay a replay");
    Tool inner(out_, err_);
    return inner.run(args);
  });
}

inline void Tool::emit_run_log(CLI::App& app, const std::vector<std::string>& args, int status) {
  ordered_json log;
  log["tool"] = "indoasr";
  log["version"] = INDOASR_VERSION;
  std::string path;
  for (const CLI::App* a = command_; a && a != &app; a = a->get_parent()) path = a->get_name() + (path.empty() ? "" : " " + path);
  log["subcommand"] = path;
  log["seed"] = seed_;
  log["argv"] = args;
  ordered_json flags = ordered_json::object();
  std::vector<const CLI::App*> chain;
  for (const CLI::App* a = command_; a; a = a->get_parent()) chain.insert(chain.begin(), a);
  if (chain.empty()) chain.push_back(&app);
  for (const CLI::App* a : chain)
    for (const CLI::Option* opt : a->get_options()) {
      if (opt->count() == 0 || opt->get_name() == "--help" || opt->get_name() == "--version") continue;
      const auto& res = opt->results();
      if (res.size() == 1)
        flags[opt->get_name()] = res.front();
      else
        flags[opt->get_name()] = res;
    }
  log["flags"] = flags;
  log["exit_code"] = status;
  if (run_log_.empty()) {
    err_ << "run-log " << log.dump() << "\n";
    return;
  }
  auto out = detail::open_out(run_log_);
  out << log.dump(2) << "\n";
}

// Config layout:
//   {"vocab": "vocab.txt",
//    "decode": {"beam": 100, "alpha": 0.5, "beta": 1.0},
//    "test_sets": [{"name": "cv", "posteriors": "post/", "refs": "refs.jsonl"}],
//    "lm": [{"name": "-"}, {"name": "5-gram", "path": "lm5.nglm"}]}
// Relative paths resolve against the config's directory. A row without a
// path decodes greedily unless it sets "greedy": false.
inline int Tool::run_benchmark() {
  nlohmann::json cfg;
  {
    std::ifstream in(config_);
    try {
      cfg = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(config_ + ": " + e.what(), 0);
    }
  }
  const fs::path base = fs::path(config_).parent_path();
  auto path_of = [&](const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw MissingField(key, 0);
    const fs::path p = j[key].get<std::string>();
    return (p.is_absolute() ? p : base / p).string();
  };
  auto list = [&](const char* key) {
    if (!cfg.contains(key)) return nlohmann::json::array();
    if (!cfg[key].is_array()) throw ParseError(config_ + ": \"" + std::string(key) + "\" must be an array", 0);
    return cfg[key];
  };
  const auto sets = list("test_sets");
  const auto rows = list("lm");
  if (sets.empty() || rows.empty()) throw EmptyInput("benchmark needs at least one test set and one lm row");

  const auto vocab = textnorm::read_vocab(path_of(cfg, "vocab"));
  detail::DecodeFlags flags;
  if (cfg.contains("decode")) {
    const auto& d = cfg["decode"];
    flags.beam = d.value("beam", flags.beam);
    flags.alpha = d.value("alpha", flags.alpha);
    flags.beta = d.value("beta", flags.beta);
    flags.prune = d.value("prune_threshold", flags.prune);
  }
  flags.threads = threads_;

  metrics::WerGrid grid;
  for (const auto& s : sets) grid.add_column(s.value("name", std::string("test")));
  for (const auto& row : rows) {
    const std::string name = row.value("name", std::string("-"));
    grid.add_row(name);
    std::optional<lm::NGramModel> model;
    auto row_flags = flags;
    try {
      if (row.contains("path")) model = lm::load_model(path_of(row, "path"));
      row_flags.greedy = row.value("greedy", !model.has_value());
    } catch (const Error& e) {
      err_ << "warning: row " << name << " skipped: " << e.what() << "\n";
      continue;
    }
    for (const auto& s : sets) {
      const std::string column = s.value("name", std::string("test"));
      try {
        const auto decoded = detail::decode_directory(path_of(s, "posteriors"), vocab,
                                                      row_flags.options(model ? &*model : nullptr));
        for (const auto& f : decoded.failures) err_ << "failed " << column << "/" << f.id << ": " << f.message << "\n";
        const auto pairs = detail::join_pairs(detail::read_text_records(path_of(s, "refs")), decoded.hyps, err_);
        grid.set(name, column, metrics::corpus_wer(pairs).wer);
      } catch (const Error& e) {
        err_ << "warning: cell " << name << " x " << column << " missing: " << e.what() << "\n";
      }
    }
  }
  out_ << grid.text();
  if (!out_path_.empty()) detail::open_out(out_path_) << grid.csv();
  if (!text_out_.empty()) detail::open_out(text_out_) << grid.text();
  return 0;
}

// Runs one command line (without the program name). Returns the exit code.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  Tool tool(out, err);
  return tool.run(args);
}

}  // namespace indoasr::cli
