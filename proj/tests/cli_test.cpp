// cli_test.cpp
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

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;
using indoasr::cli::run_cli;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("indoasr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  Outcome run(std::vector<std::string> args) const {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
  }

  void write(const std::string& name, const std::string& content) const {
    fs::create_directories(fs::path(p(name)).parent_path());
    std::ofstream(p(name), std::ios::binary) << content;
  }

  // synth -> normalize -> vocab -> lm (orders 2..5) under prefix/.
  void pipeline(const std::string& prefix, std::size_t utterances = 12) const {
    const auto d = [&](const std::string& n) { return p(prefix + "/" + n); };
    ASSERT_EQ(run({"synth", "--out", d("syn"), "--utterances", std::to_string(utterances)}).code, 0);
    ASSERT_EQ(run({"normalize", "--in", d("syn/lm_corpus.txt"), "--out", d("norm.txt")}).code, 0);
    ASSERT_EQ(run({"build-vocab", "--in", d("norm.txt"), "--out", d("vocab.txt")}).code, 0);
    for (int n = 2; n <= 5; ++n) {
      const auto o = std::to_string(n);
      ASSERT_EQ(run({"lm", "train", "--order", o, "--in", d("norm.txt"), "--arpa", d("lm" + o + ".arpa")}).code, 0);
      ASSERT_EQ(run({"lm", "binary", "--in", d("lm" + o + ".arpa"), "--out", d("lm" + o + ".nglm")}).code, 0);
    }
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndVersionExitZero) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"lm", "train", "--help"}).code, 0);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_NE(v.out.find(INDOASR_VERSION), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitTwoAndNameTheFlag) {
  auto r = run({"decode", "--posteriors", dir_.string(), "--vocab", p("v.txt"), "--out", p("h"), "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos) << r.err;

  r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("frobnicate"), std::string::npos) << r.err;

  r = run({"lm", "train", "--in", p("missing.txt"), "--arpa", p("x.arpa")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--in"), std::string::npos) << r.err;

  write("c.txt", "saya makan\n");
  r = run({"lm", "train", "--in", p("c.txt"), "--order", "6", "--arpa", p("x.arpa")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--order"), std::string::npos) << r.err;

  r = run({"lm", "train", "--in", p("c.txt")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--arpa"), std::string::npos) << r.err;

  EXPECT_EQ(run({"--seed", "abc", "xlsr", "losscheck"}).code, 2);
  EXPECT_EQ(run({"lm", "train", "--in", p("c.txt"), "--smoothing", "witten-bell", "--arpa", p("x")}).code, 2);
}

TEST_F(Cli, RuntimeErrorsExitOne) {
  auto r = run({"xlsr", "frames", "--samples", "399"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.out, "");
  EXPECT_NE(r.err.find("error:"), std::string::npos);

  write("bad.arpa", "\\data\\\nngram 1=5\n\n\\1-grams:\n-1.0 a\n\\end\\\n");
  EXPECT_EQ(run({"lm", "binary", "--in", p("bad.arpa"), "--out", p("x.nglm")}).code, 1);

  write("bad.ctcl", "NOPE");
  EXPECT_EQ(run({"lm", "query", "--lm", p("bad.ctcl"), "--sentence", "a"}).code, 1);
}

TEST_F(Cli, FramesAndLosscheck) {
  auto r = run({"xlsr", "frames", "--samples", "16000"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("frames 49\n"), std::string::npos);
  r = run({"xlsr", "losscheck", "--seed", "11"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 7);
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, EvalWerIdenticalIsZero) {
  write("r.jsonl", R"({"id":"a","text":"Saya makan nasi"})" "\n" R"({"id":"b","text":"dia pergi"})" "\n");
  auto r = run({"eval-wer", "--refs", p("r.jsonl"), "--hyps", p("r.jsonl"), "--out", p("w.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("WER 0.000%"), std::string::npos);
  const auto csv = slurp(p("w.csv"));
  EXPECT_NE(csv.find("TOTAL,5,0,0,0,0.000%\n"), std::string::npos) << csv;
}

TEST_F(Cli, EvalWerJoinsOnId) {
  write("r.jsonl", R"({"id":"a","text":"saya makan nasi"})" "\n" R"({"id":"b","text":"dia pergi"})" "\n");
  write("h.jsonl", R"({"id":"b","text":"dia pergi ke"})" "\n" R"({"id":"a","text":"saya minum nasi"})" "\n");
  auto r = run({"eval-wer", "--refs", p("r.jsonl"), "--hyps", p("h.jsonl"), "--out", p("w.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(p("w.csv")),
            "id,reference_words,substitutions,deletions,insertions,wer\n"
            "a,3,1,0,0,33.333%\n"
            "b,2,0,0,1,50.000%\n"
            "TOTAL,5,1,0,1,40.000%\n");

  write("h.jsonl", R"({"id":"a","text":"saya makan nasi"})" "\n");
  r = run({"eval-wer", "--refs", p("r.jsonl"), "--hyps", p("h.jsonl"), "--out", p("w.csv")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("WER 40.000%"), std::string::npos);
  EXPECT_NE(r.err.find("no hypothesis"), std::string::npos);

  write("dup.jsonl", R"({"id":"a","text":"x"})" "\n" R"({"id":"a","text":"y"})" "\n");
  EXPECT_EQ(run({"eval-wer", "--refs", p("dup.jsonl"), "--hyps", p("h.jsonl"), "--out", p("w.csv")}).code, 1);
}

TEST_F(Cli, LanguageModelBeatsGreedyOnSyntheticPipeline) {
  pipeline("t");
  const auto d = [&](const std::string& n) { return p("t/" + n); };
  ASSERT_EQ(run({"decode", "--posteriors", d("syn/posteriors"), "--vocab", d("syn/vocab.txt"), "--greedy",
                 "--out", d("greedy.jsonl")}).code, 0);
  ASSERT_EQ(run({"decode", "--posteriors", d("syn/posteriors"), "--vocab", d("syn/vocab.txt"), "--lm",
                 d("lm5.nglm"), "--alpha", "0.5", "--beta", "1.0", "--beam", "100", "--out", d("lm.jsonl")}).code, 0);
  const auto greedy = run({"eval-wer", "--refs", d("syn/refs.jsonl"), "--hyps", d("greedy.jsonl"), "--out", d("g.csv")});
  const auto fused = run({"eval-wer", "--refs", d("syn/refs.jsonl"), "--hyps", d("lm.jsonl"), "--out", d("l.csv")});
  ASSERT_EQ(greedy.code, 0);
  ASSERT_EQ(fused.code, 0);
  const auto wer = [](const std::string& out) { return std::stod(out.substr(4)); };
  EXPECT_LT(wer(fused.out), wer(greedy.out)) << greedy.out << fused.out;
}

TEST_F(Cli, IdenticalRunsGiveIdenticalBytes) {
  pipeline("a");
  pipeline("b");
  for (const char* f : {"syn/lm_corpus.txt", "syn/refs.jsonl", "syn/vocab.txt", "syn/posteriors/syn0003.ctcl",
                        "norm.txt", "vocab.txt", "lm3.arpa", "lm5.arpa", "lm5.nglm"})
    EXPECT_EQ(slurp(p(std::string("a/") + f)), slurp(p(std::string("b/") + f))) << f;

  for (const char* t : {"1", "4"}) {
    ASSERT_EQ(run({"decode", "--threads", t, "--posteriors", p("a/syn/posteriors"), "--vocab", p("a/syn/vocab.txt"),
                   "--lm", p("a/lm3.nglm"), "--out", p(std::string("h") + t + ".jsonl")}).code, 0);
  }
  EXPECT_EQ(slurp(p("h1.jsonl")), slurp(p("h4.jsonl")));

  ASSERT_EQ(run({"synth", "--out", p("c"), "--utterances", "12", "--seed", "54"}).code, 0);
  EXPECT_NE(slurp(p("a/syn/refs.jsonl")), slurp(p("c/refs.jsonl")));
}

TEST_F(Cli, SampleFractionIsSeeded) {
  pipeline("t", 2);
  const auto train = [&](const std::string& seed, const std::string& out) {
    return run({"lm", "train", "--order", "3", "--in", p("t/norm.txt"), "--sample-fraction", "0.5", "--seed", seed,
                "--arpa", p(out)});
  };
  ASSERT_EQ(train("1", "a.arpa").code, 0);
  ASSERT_EQ(train("1", "b.arpa").code, 0);
  ASSERT_EQ(train("2", "c.arpa").code, 0);
  EXPECT_EQ(slurp(p("a.arpa")), slurp(p("b.arpa")));
  EXPECT_NE(slurp(p("a.arpa")), slurp(p("c.arpa")));
}

TEST_F(Cli, RunLogRecordsSeedAndReplays) {
  pipeline("t", 6);
  const std::vector<std::string> args{"decode", "--posteriors", p("t/syn/posteriors"), "--vocab", p("t/syn/vocab.txt"),
                                      "--lm", p("t/lm2.nglm"), "--out", p("h.jsonl"), "--run-log", p("log.json")};
  ASSERT_EQ(run(args).code, 0);
  const auto log = nlohmann::json::parse(slurp(p("log.json")));
  EXPECT_EQ(log["seed"], 53);
  EXPECT_EQ(log["subcommand"], "decode");
  EXPECT_EQ(log["version"], INDOASR_VERSION);
  EXPECT_EQ(log["argv"].get<std::vector<std::string>>(), args);
  EXPECT_EQ(log["flags"]["--lm"], p("t/lm2.nglm"));
  EXPECT_EQ(log["exit_code"], 0);
  const auto text = slurp(p("log.json"));
  EXPECT_EQ(text.find("time"), std::string::npos);
  EXPECT_EQ(text.find("date"), std::string::npos);

  const auto first = slurp(p("h.jsonl"));
  fs::remove(p("h.jsonl"));
  ASSERT_EQ(run({"replay", "--log", p("log.json")}).code, 0);
  EXPECT_EQ(slurp(p("h.jsonl")), first);
  EXPECT_EQ(slurp(p("log.json")), text);

  const auto r = run({"xlsr", "frames", "--samples", "400"});
  EXPECT_NE(r.err.find("run-log {"), std::string::npos);
  EXPECT_NE(r.err.find("\"seed\":53"), std::string::npos);
}

TEST_F(Cli, BenchmarkGrid) {
  pipeline("t", 8);
  const std::string cfg = R"({
    "vocab": "t/syn/vocab.txt",
    "test_sets": [{"name": "syn", "posteriors": "t/syn/posteriors", "refs": "t/syn/refs.jsonl"},
                  {"name": "absent", "posteriors": "nowhere", "refs": "t/syn/refs.jsonl"}],
    "lm": [{"name": "-"}, {"name": "2-gram", "path": "t/lm2.nglm"}, {"name": "3-gram", "path": "t/lm3.nglm"},
           {"name": "4-gram", "path": "t/lm4.nglm"}, {"name": "5-gram", "path": "t/lm5.nglm"}]})";
  write("bench.json", cfg);
  const auto r = run({"benchmark", "--config", p("bench.json"), "--out", p("grid.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(p("grid.csv"));
  std::vector<std::string> lines;
  std::istringstream in(csv);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 6u) << csv;
  EXPECT_EQ(lines[0], "config,syn,absent,AVG WER");
  const char* rows[] = {"-,", "2-gram,", "3-gram,", "4-gram,", "5-gram,"};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(lines[static_cast<std::size_t>(i + 1)].rfind(rows[i], 0), 0u) << lines[static_cast<std::size_t>(i + 1)];
    EXPECT_NE(lines[static_cast<std::size_t>(i + 1)].find(",\xe2\x80\x93,"), std::string::npos);
  }
  EXPECT_NE(r.err.find("absent"), std::string::npos);

  write("empty.json", R"({"vocab": "t/syn/vocab.txt", "test_sets": [], "lm": []})");
  EXPECT_EQ(run({"benchmark", "--config", p("empty.json")}).code, 1);
}

TEST_F(Cli, ManifestSplitAndValidate) {
  std::vector<indoasr::corpus::UtteranceRecord> records;
  for (int i = 0; i < 2130 + 1835; ++i) {
    indoasr::corpus::UtteranceRecord r;
    r.id = "cv" + std::to_string(i);
    r.audio_path = "a.wav";
    r.transcript_raw = i == 0 ? "Ada 3 ekor" : "kalimat";
    r.duration_s = 1.0;
    r.source = indoasr::corpus::Source::common_voice;
    r.subset = i < 2130 ? indoasr::corpus::Subset::train : indoasr::corpus::Subset::validation;
    records.push_back(r);
  }
  indoasr::corpus::save_manifest(records, p("m.jsonl"));
  auto r = run({"manifest", "split", "--in", p("m.jsonl"), "--train-fraction", "0.9", "--seed", "5",
                "--out-train", p("s/train.jsonl"), "--out-validation", p("s/dev.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "train 3569\nvalidation 396\n");
  EXPECT_EQ(indoasr::corpus::load_manifest(p("s/dev.jsonl")).size(), 396u);

  records.resize(3);
  indoasr::corpus::save_manifest(records, p("small.jsonl"));
  indoasr::corpus::write_wav_pcm16(p("a.wav"), std::vector<std::int16_t>(1600, 0), 16000);
  r = run({"manifest", "validate", "--in", p("small.jsonl")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("published 6h14m01s"), std::string::npos);
  EXPECT_NE(r.err.find("1 transcript(s) contained digits"), std::string::npos);

  indoasr::corpus::write_wav_pcm16(p("a.wav"), std::vector<std::int16_t>(1600, 0), 48000);
  r = run({"manifest", "validate", "--in", p("small.jsonl")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("needs resample to 16000"), std::string::npos);
}

}  // namespace
