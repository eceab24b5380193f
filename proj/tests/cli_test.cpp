// SPDX-License-Identifier: Apache-2.0
//
// Drives the wsa executable end to end: exit codes, stdout contracts and the
// files each subcommand leaves behind.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "wsa/analysis/csv.hpp"
#include "wsa/core/io.hpp"
#include "wsa/dsp/wav.hpp"

namespace fs = std::filesystem;

namespace wsa {
namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr interleaved
};

Run run(const std::string& args) {
  const std::string cmd = std::string(WSA_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// One scratch directory with a toy checkpoint and three synthetic pairs,
// shared by the whole suite.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("wsa_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ASSERT_EQ(run("init --seed 1 --out " + p("toy.bin")).code, 0);
    ASSERT_EQ(run("synth --count 3 --seconds 1 --out-dir " + p("pairs")).code, 0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }
  static std::string p(const std::string& name) { return (dir_ / name).string(); }
  static fs::path dir_;
};

fs::path Cli::dir_;

TEST_F(Cli, FlopsReferenceNumbers) {
  auto r = run("flops --seq 801 --window 10 --sinks 8");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "full 641601\nwsa 14418\nreduction 44.5\n");
  r = run("flops --seq 801 --window 200 --sinks 0");
  EXPECT_NE(r.out.find("reduction 4.005"), std::string::npos) << r.out;
  r = run("flops --seq 100 --window 200 --sinks 0");
  EXPECT_NE(r.out.find("wsa 10000\nreduction 1\n"), std::string::npos) << r.out;
}

TEST_F(Cli, BadArgumentsExit2) {
  EXPECT_EQ(run("separate --bogus").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("flops --seq notanumber").code, 2);
}

TEST_F(Cli, SeparateWritesEqualLength) {
  const auto r = run("separate --input " + p("pairs/pair000.mix.wav") + " --weights " + p("toy.bin") + " --out " +
                     p("full.wav"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("mode full"), std::string::npos);
  EXPECT_EQ(dsp::read_wav(p("full.wav")).length(), dsp::read_wav(p("pairs/pair000.mix.wav")).length());
}

TEST_F(Cli, SeparateWsaReportsReduction) {
  // 16000 samples at hop 128: T' = 126, reduction T'^2 / (T' * 18) = 7.
  const auto r = run("separate --input " + p("pairs/pair000.mix.wav") + " --weights " + p("toy.bin") +
                     " --window 10 --sinks 8 --out " + p("wsa.wav"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("mode wsa\nseq 126\nfull_scores 15876\nscores 2268\nreduction 7\n"), std::string::npos)
      << r.out;
}

TEST_F(Cli, SeparateErrors) {
  auto r = run("separate --input " + p("pairs/pair000.mix.wav") + " --weights " + p("missing.bin") + " --out " +
               p("x.wav"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("missing.bin"), std::string::npos);
  r = run("separate --input " + p("pairs/pair000.mix.wav") + " --weights " + p("toy.bin") + " --window 9 --out " +
          p("x.wav"));
  EXPECT_EQ(r.code, 4);
  EXPECT_FALSE(fs::exists(p("x.wav")));
}

TEST_F(Cli, SweepCsv) {
  const auto r = run("sweep --weights " + p("toy.bin") + " --eval-dir " + p("pairs") +
                     " --windows 252,100,10 --out " + p("sweep.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto table = analysis::read_csv(p("sweep.csv"));
  EXPECT_EQ(table.header, (std::vector<std::string>{"window", "sdr_db", "flops_reduction"}));
  ASSERT_EQ(table.rows.size(), 4u);
  EXPECT_EQ(table.rows[0][0], "full");
  // W = 252 >= 2 T' covers every frame.
  EXPECT_NEAR(std::stod(table.rows[1][1]), std::stod(table.rows[0][1]), 0.01);
  EXPECT_EQ(table.rows[1][2], "1");
  EXPECT_EQ(analysis::to_string(analysis::parse_csv(read_file(p("sweep.csv")))), read_file(p("sweep.csv")));
}

TEST_F(Cli, SweepEmptyDirExit2) {
  fs::create_directories(p("empty"));
  EXPECT_EQ(run("sweep --weights " + p("toy.bin") + " --eval-dir " + p("empty")).code, 2);
}

TEST_F(Cli, AnalyzeOutputs) {
  const auto r = run("analyze --weights " + p("toy.bin") + " --input " + p("pairs/pair001.mix.wav") +
                     " --out-dir " + p("maps"));
  ASSERT_EQ(r.code, 0) << r.out;
  std::size_t maps = 0, crops = 0;
  for (const auto& e : fs::directory_iterator(p("maps"))) {
    const std::string name = e.path().filename().string();
    if (name.starts_with("site") && name.ends_with("_crop.csv")) {
      ++crops;
      const auto t = analysis::read_csv(e.path());
      EXPECT_EQ(t.header.size(), 30u);
      EXPECT_EQ(t.rows.size(), 30u);
    } else if (name.starts_with("site")) {
      ++maps;
    }
  }
  EXPECT_EQ(maps, 4u);   // two blocks, time + frequency each
  EXPECT_EQ(crops, 2u);  // frequency maps (12 bands) are smaller than the crop
  const auto loc = analysis::read_csv(p("maps/locality.csv"));
  ASSERT_EQ(loc.rows.size(), 5u);
  for (std::size_t i = 1; i < loc.rows.size(); ++i) {
    EXPECT_GE(std::stod(loc.rows[i][1]), std::stod(loc.rows[i - 1][1]));
  }
}

TEST_F(Cli, AnalyzeRejectsWsaCheckpoint) {
  write_file_atomic(p("wsa.json"), R"({"attention_mode":"wsa","wsa":{"window":10,"sinks":8}})");
  ASSERT_EQ(run("init --config " + p("wsa.json") + " --out " + p("wsa.bin")).code, 0);
  const auto r = run("analyze --weights " + p("wsa.bin") + " --input " + p("pairs/pair001.mix.wav") +
                     " --out-dir " + p("maps_wsa"));
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("full-attention"), std::string::npos) << r.out;
}

TEST_F(Cli, GradcheckF64Passes) {
  const auto r = run("gradcheck --f64 --seed 0");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("max_rel_error"), std::string::npos);
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
}

TEST_F(Cli, DistillDemoDeterministic) {
  const std::string args = "distill-demo --steps 12 --pretrain-steps 3 --seed 4 --out ";
  const auto a = run(args + p("h1.csv"));
  const auto b = run(args + p("h2.csv"));
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_NE(a.out.find("ratio "), std::string::npos);
  EXPECT_EQ(read_file(p("h1.csv")), read_file(p("h2.csv")));
  const auto t = analysis::read_csv(p("h1.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"step", "recon", "distill_mse", "distill_cos", "total"}));
  EXPECT_EQ(t.rows.size(), 12u);
}

TEST_F(Cli, DistillDemoNonFiniteExit5) {
  EXPECT_EQ(run("distill-demo --steps 5 --pretrain-steps 2 --lr 1e38 --out " + p("bad.csv")).code, 5);
}

TEST_F(Cli, EvalMetricTable) {
  const auto r = run("eval --estimate " + p("pairs/pair002.target.wav") + " --reference " +
                     p("pairs/pair002.target.wav"));
  ASSERT_EQ(r.code, 0) << r.out;
  const auto t = analysis::parse_csv(r.out);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_EQ(t.rows[0][0], "sdr");
  EXPECT_EQ(t.rows[0][1], "100");  // capped
}

}  // namespace
}  // namespace wsa
