#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "sensekern/pyramid.hpp"

namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sensekern_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_text_split("train.tsv", 0, 24);
    write_text_split("test.tsv", 100, 10);
  }
  void TearDown() override { fs::remove_all(dir_); }

  void write_text_split(const std::string& name, int offset, int per_class) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(offset) + 1);
    const std::vector<std::string> a{"faith", "prayer", "church", "hymn", "worship", "belief"};
    const std::vector<std::string> b{"reason", "evidence", "logic", "proof", "science", "belief"};
    std::ofstream os(dir_ / name);
    for (int i = 0; i < per_class; ++i) {
      for (int cls = 0; cls < 2; ++cls) {
        const auto& words = cls ? b : a;
        std::ostringstream text;
        for (int k = 0; k < 8; ++k) text << words[rng() % words.size()] << ' ';
        os << (cls ? "b" : "a") << offset + i << '\t' << (cls ? "skeptic" : "believer") << '\t' << text.str()
           << "the of and\n";
      }
    }
  }

  int run(const std::string& args) {
    const std::string cmd = std::string(SENSEKERN_CLI) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, TextPipelineEndToEnd) {
  ASSERT_EQ(run("prepare-text --train " + path("train.tsv") + " --test " + path("test.tsv") + " --out " +
                path("prep")),
            0)
      << read(dir_ / "stderr.txt");
  EXPECT_TRUE(fs::exists(dir_ / "prep" / "vocab.txt"));
  EXPECT_EQ(read(dir_ / "prep" / "vocab.txt").find("the\n"), std::string::npos);  // SMART stopword

  ASSERT_EQ(run("gram --rows " + path("prep/train.corpus") + " --kernel sensing1:n=50 --out " + path("train.gram")), 0)
      << read(dir_ / "stderr.txt");
  ASSERT_EQ(run("gram --rows " + path("prep/test.corpus") + " --cols " + path("prep/train.corpus") +
                " --kernel sensing1:n=50 --out " + path("test.gram")),
            0);
  ASSERT_EQ(run("train --gram " + path("train.gram") + " --corpus " + path("prep/train.corpus") + " --C 1 --out " +
                path("model.txt")),
            0)
      << read(dir_ / "stderr.txt");
  ASSERT_EQ(run("predict --model " + path("model.txt") + " --gram " + path("test.gram") + " --corpus " +
                path("prep/test.corpus") + " --out " + path("pred.tsv")),
            0)
      << read(dir_ / "stderr.txt");
  EXPECT_NE(read(dir_ / "stdout.txt").find("CCR"), std::string::npos);
  EXPECT_NE(read(dir_ / "pred.tsv").find("a100\t"), std::string::npos);
}

TEST_F(Cli, ExperimentWritesReportsAndIsReproducible) {
  ASSERT_EQ(run("prepare-text --train " + path("train.tsv") + " --test " + path("test.tsv") + " --out " +
                path("prep")),
            0);
  const std::string common = "experiment --train " + path("prep/train.corpus") + " --test " +
                             path("prep/test.corpus") + " --kernel sensing2:N=30 --kernel sensing1:n=50 --C 0.1,1 " +
                             "--folds 3 --seed 5 --out ";
  ASSERT_EQ(run(common + path("r1")), 0) << read(dir_ / "stderr.txt");
  ASSERT_EQ(run(common + path("r2")), 0);
  const auto kv = read(dir_ / "r1" / "report.kv");
  EXPECT_NE(kv.find("test.ccr="), std::string::npos);
  EXPECT_NE(kv.find("sensing2:N=30,seed=5"), std::string::npos);
  auto body = [&](const fs::path& p) {
    const auto s = read(p);
    return s.substr(0, s.find("time "));
  };
  EXPECT_EQ(body(dir_ / "r1" / "report.txt"), body(dir_ / "r2" / "report.txt"));

  ASSERT_EQ(run("cv --corpus " + path("prep/train.corpus") + " --family sensing1 --C 1 --folds 3 --seed 2"), 0)
      << read(dir_ / "stderr.txt");
  EXPECT_NE(read(dir_ / "stdout.txt").find("sensing1:n=500"), std::string::npos);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("prepare-text --train " + path("missing.tsv") + " --test " + path("test.tsv") + " --out " +
                path("x")),
            2);
  ASSERT_EQ(run("prepare-text --train " + path("train.tsv") + " --test " + path("test.tsv") + " --out " +
                path("prep")),
            0);
  // --seed is mandatory for randomized paths.
  EXPECT_EQ(run("cv --corpus " + path("prep/train.corpus") + " --kernel sensing1"), 2);
  EXPECT_EQ(run("gram --rows " + path("prep/train.corpus") + " --kernel sensing2:N=10 --out " + path("g")), 2);
  EXPECT_EQ(run("gram --rows " + path("prep/train.corpus") + " --kernel bogus --out " + path("g")), 2);
  EXPECT_EQ(run("prepare-text --train " + path("train.tsv") + " --test " + path("test.tsv") + " --stoplist " +
                path("nope.txt") + " --out " + path("y")),
            2);
  {
    std::ofstream os(dir_ / "broken.corpus");
    os << "sensekern-corpus 1\nW 2\nvocab " << std::string(64, '0') << "\nM 1\nsplit x\nd\tl\t9:1\n";
  }
  EXPECT_EQ(run("gram --rows " + path("broken.corpus") + " --kernel sensing0 --out " + path("g")), 3);
}

TEST_F(Cli, BagOfFeaturesPipeline) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> nd(0.f, 0.3f);
  std::uniform_real_distribution<float> pos(0.f, 32.f);
  for (const std::string split : {"train", "test"}) {
    for (const std::string cls : {"coast", "forest"}) {
      fs::create_directories(dir_ / ("desc_" + split) / cls);
      for (int i = 0; i < (split == "train" ? 6 : 3); ++i) {
        sensekern::DescriptorSet d;
        d.image_id = split + "_" + cls + std::to_string(i);
        d.width = d.height = 32;
        d.dim = 4;
        for (int p = 0; p < 30; ++p) {
          d.positions.push_back({pos(rng), pos(rng)});
          for (int k = 0; k < 4; ++k) d.values.push_back((cls == "coast" ? 1.f : -1.f) * (k % 2) + nd(rng));
        }
        std::ofstream os(dir_ / ("desc_" + split) / cls / (d.image_id + ".sdsc"), std::ios::binary);
        sensekern::write_descriptors_binary(os, d);
      }
    }
  }
  ASSERT_EQ(run("prepare-bof --train " + path("desc_train") + " --test " + path("desc_test") +
                " --words 6 --sample 200 --levels 1 --seed 4 --out " + path("bof")),
            0)
      << read(dir_ / "stderr.txt");
  ASSERT_EQ(run("gram --rows " + path("bof/train.pyramid") + " --kernel sensing0:pyramid=0.5/0.5 --out " +
                path("bof.gram")),
            0)
      << read(dir_ / "stderr.txt");
  ASSERT_EQ(run("experiment --train-descriptors " + path("desc_train") + " --test-descriptors " + path("desc_test") +
                " --words 6 --sample 200 --levels 1 --kernel sensing2:N=40 --C 1 --folds 3 --seed 6 --out " +
                path("bof_report")),
            0)
      << read(dir_ / "stderr.txt");
  EXPECT_NE(read(dir_ / "bof_report" / "report.txt").find("pyramid=0.5/0.5"), std::string::npos);
  EXPECT_EQ(run("prepare-bof --train " + path("desc_train") + " --test " + path("desc_test") + " --out " +
                path("bof2")),
            2);  // no --seed
}

TEST_F(Cli, VerifySubsetRuns) {
  EXPECT_EQ(run("verify --only 8"), 0) << read(dir_ / "stdout.txt");
  EXPECT_NE(read(dir_ / "stdout.txt").find("[PASS] 8."), std::string::npos);
}
