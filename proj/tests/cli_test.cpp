#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "volreg_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(VOLREG_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    write_text(kRoot / "synth.json", R"({"n_patients": 30, "shape": [16, 16, 32]})");
    ASSERT_EQ(run("synth --config " + (kRoot / "synth.json").string() + " --seed 5 --out-dir " + (kRoot / "data").string()), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(kRoot); }

  static std::string data() { return (kRoot / "data").string(); }
};

}  // namespace

TEST_F(Cli, SynthWritesManifestAndTables) {
  EXPECT_TRUE(fs::exists(kRoot / "data" / "records.csv"));
  EXPECT_TRUE(fs::exists(kRoot / "data" / "features.csv"));
  EXPECT_FALSE(fs::is_empty(kRoot / "data" / "volumes"));
  const auto manifest = nlohmann::json::parse(slurp(kRoot / "data" / "manifest.json"));
  EXPECT_EQ(manifest.at("command"), "synth");
  EXPECT_EQ(manifest.at("seed"), 5);
  EXPECT_EQ(manifest.at("deterministic"), true);
  EXPECT_TRUE(manifest.contains("version"));
  EXPECT_TRUE(manifest.at("outputs").is_array() || manifest.at("outputs").is_object());
}

TEST_F(Cli, SynthRerunIsByteIdentical) {
  const fs::path again = kRoot / "again";
  ASSERT_EQ(run("synth --config " + (kRoot / "synth.json").string() + " --seed 5 --deterministic --out-dir " + again.string()), 0);
  for (const char* name : {"records.csv", "features.csv"}) EXPECT_EQ(slurp(again / name), slurp(kRoot / "data" / name)) << name;
  std::size_t volumes = 0;
  for (const auto& e : fs::directory_iterator(kRoot / "data" / "volumes")) {
    EXPECT_EQ(slurp(e.path()), slurp(again / "volumes" / e.path().filename())) << e.path();
    ++volumes;
  }
  EXPECT_GT(volumes, 0u);
}

TEST_F(Cli, TrainCnnIsDeterministicAndFeedsCam) {
  write_text(kRoot / "cnn.json", R"({"input": [16, 16, 32], "channels": 4, "epochs": 2, "batch_size": 4, "learning_rate": 0.001})");
  const std::string base = "train-cnn --config " + (kRoot / "cnn.json").string() + " --data " + data() + " --seed 3 --out-dir ";
  ASSERT_EQ(run(base + (kRoot / "cnn1").string()), 0);
  ASSERT_EQ(run(base + (kRoot / "cnn2").string()), 0);
  EXPECT_EQ(slurp(kRoot / "cnn1" / "checkpoint.vrck"), slurp(kRoot / "cnn2" / "checkpoint.vrck"));
  EXPECT_EQ(slurp(kRoot / "cnn1" / "predictions.csv"), slurp(kRoot / "cnn2" / "predictions.csv"));
  EXPECT_EQ(slurp(kRoot / "cnn1" / "results.csv"), slurp(kRoot / "cnn2" / "results.csv"));

  const fs::path vol = fs::directory_iterator(kRoot / "data" / "volumes")->path();
  ASSERT_EQ(run("cam --checkpoint " + (kRoot / "cnn1" / "checkpoint.vrck").string() + " --volume " + vol.string() +
                " --target vfi --out-dir " + (kRoot / "cam").string()),
            0);
  std::size_t ppm = 0;
  for (const auto& e : fs::directory_iterator(kRoot / "cam" / "overlays")) {
    ppm += e.path().extension() == ".ppm";
    EXPECT_EQ(slurp(e.path()).substr(0, 2), "P6");
  }
  EXPECT_GT(ppm, 0u);
  EXPECT_FALSE(fs::is_empty(kRoot / "cam" / "cams"));

  EXPECT_EQ(run("eval --checkpoint " + (kRoot / "cnn1" / "checkpoint.vrck").string() + " --data " + data() +
                " --out-dir " + (kRoot / "eval_cnn").string()),
            0);
}

TEST_F(Cli, TrainMlAndSearch) {
  EXPECT_EQ(run("train-ml --data " + data() + " --method LR --out-dir " + (kRoot / "ml").string()), 0);
  EXPECT_TRUE(fs::exists(kRoot / "ml" / "model_VFI.vrck"));
  const std::string search = "search --data " + data() + " --method KNR --trials 3 --folds 2 --seed 1 --out-dir ";
  ASSERT_EQ(run(search + (kRoot / "s1").string()), 0);
  ASSERT_EQ(run(search + (kRoot / "s2").string()), 0);
  EXPECT_EQ(slurp(kRoot / "s1" / "results.csv"), slurp(kRoot / "s2" / "results.csv"));
  EXPECT_EQ(slurp(kRoot / "s1" / "trials.csv"), slurp(kRoot / "s2" / "trials.csv"));
  EXPECT_EQ(run("eval --results " + (kRoot / "s1" / "results.csv").string() + " --out-dir " + (kRoot / "e").string()), 0);
  EXPECT_FALSE(slurp(kRoot / "e" / "summary.txt").empty());
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("synth"), 2);  // --out-dir is required
  EXPECT_EQ(run("frobnicate --out-dir x"), 2);
  EXPECT_EQ(run("synth --config /nonexistent.json --out-dir " + (kRoot / "x").string()), 2);
  write_text(kRoot / "bad.json", "{not json");
  EXPECT_EQ(run("synth --config " + (kRoot / "bad.json").string() + " --out-dir " + (kRoot / "x").string()), 2);
  EXPECT_EQ(run("train-ml --data " + data() + " --method XGB --out-dir " + (kRoot / "x").string()), 2);
  write_text(kRoot / "broken.octv", "OCTV\x01");
  write_text(kRoot / "ck.vrck", "VRCK");
  EXPECT_EQ(run("cam --checkpoint " + (kRoot / "ck.vrck").string() + " --volume " + (kRoot / "broken.octv").string() +
                " --out-dir " + (kRoot / "x").string()),
            2);
  write_text(kRoot / "nan.csv",
             "method,target,fold,pc,rmse_standard,rmse_paper_literal\nLR,VFI,0,nan,1,0.1\nLR,VFI,1,nan,1,0.1\n");
  EXPECT_EQ(run("eval --results " + (kRoot / "nan.csv").string() + " --out-dir " + (kRoot / "x").string()), 3);
}
