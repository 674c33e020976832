#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(WISVA_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

// Small floors, 16 px, tiny model: every command finishes in seconds.
nlohmann::json tiny_config(int shelves, double ap_height = 15.0) {
  return {{"seed", 7},
          {"num_scenes", 2},
          {"scene", {{"width_m", 16.0}, {"depth_m", 16.0}, {"min_shelves", shelves}, {"ap_height_m", ap_height}}},
          {"tensors", {{"resolution", 16}, {"sweep_spacing_m", 2.0}}},
          {"model",
           {{"resolution", 16}, {"latent_dim", 8}, {"branch_channels", {4, 8, 8}}, {"trunk_channels", 8}, {"hidden", 32}}},
          {"train", {{"epochs", 2}, {"batch_size", 4}, {"lr", 2e-3}}},
          {"eval", {{"fewshot_sweep_m", 1.0}, {"finetune_epochs", 1}, {"error_map_samples", 1}}}};
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(fs::temp_directory_path() / ("wisva_cli_" + std::to_string(::getpid())));
    fs::create_directories(*root_);
    std::ofstream(*root_ / "tiny.json") << tiny_config(5).dump();
    std::ofstream(*root_ / "empty.json") << tiny_config(0, 3.0).dump();
    const Result g = run("gen --config " + (*root_ / "tiny.json").string() + " --out " + (*root_ / "data").string());
    ASSERT_EQ(g.code, 0) << g.out;
  }
  static void TearDownTestSuite() {
    std::error_code ec;
    fs::remove_all(*root_, ec);
    delete root_;
  }
  static std::string cfg() { return " --config " + (*root_ / "tiny.json").string(); }
  static std::string data() { return " --data " + (*root_ / "data" / "dataset.wsv").string(); }
  static std::string dir(const std::string& name) { return " --out " + (*root_ / name).string(); }
  static inline fs::path* root_ = nullptr;
};

}  // namespace

TEST(CliCounts, DryRunDefaults) {
  const Result a = run("gen --dry-run");
  EXPECT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("720 samples, 540 train / 180 val"), std::string::npos) << a.out;
  const Result b = run("gen --dry-run --samples 2200");
  EXPECT_NE(b.out.find("2200 samples, 1650 train / 550 val"), std::string::npos) << b.out;
}

TEST(CliCounts, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("gen --bogus").code, 2);
  EXPECT_EQ(run("train").code, 2);
  EXPECT_EQ(run("gen --dry-run --train-frac 1.5").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, GenIsDeterministic) {
  const Result g = run("gen" + cfg() + dir("data2"));
  ASSERT_EQ(g.code, 0) << g.out;
  EXPECT_NE(g.out.find("128 samples, 96 train / 32 val"), std::string::npos) << g.out;
  EXPECT_TRUE(slurp(*root_ / "data" / "dataset.wsv") == slurp(*root_ / "data2" / "dataset.wsv"));
  EXPECT_EQ(slurp(*root_ / "data" / "dataset.wsv.json"), slurp(*root_ / "data2" / "dataset.wsv.json"));
  EXPECT_TRUE(fs::exists(*root_ / "data2" / "config.json"));
}

TEST_F(Cli, GenSampleLimit) {
  const Result g = run("gen --samples 16" + cfg() + dir("data16"));
  ASSERT_EQ(g.code, 0) << g.out;
  EXPECT_NE(g.out.find("16 samples, 12 train / 4 val"), std::string::npos) << g.out;
  EXPECT_EQ(run("gen --samples 999" + cfg() + dir("data999")).code, 2);
}

TEST_F(Cli, TrainWritesOneRowPerEpoch) {
  ASSERT_EQ(run("gen --samples 16" + cfg() + dir("d16")).code, 0);
  const std::string d16 = " --data " + (*root_ / "d16" / "dataset.wsv").string();
  const Result t = run("train --epochs 1" + cfg() + d16 + dir("t1"));
  ASSERT_EQ(t.code, 0) << t.out;
  const auto rows = csv_rows(*root_ / "t1" / "vae_loss.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].front(), "epoch");
  EXPECT_TRUE(fs::exists(*root_ / "t1" / "vae.ckpt"));

  ASSERT_EQ(run("train --model ae --epochs 2" + cfg() + d16 + dir("t1")).code, 0);
  const auto ae = csv_rows(*root_ / "t1" / "ae_loss.csv");
  ASSERT_EQ(ae.size(), 3u);
  const auto kl = std::find(ae[0].begin(), ae[0].end(), "train_kl") - ae[0].begin();
  ASSERT_LT(kl, static_cast<long>(ae[0].size()));
  for (std::size_t r = 1; r < ae.size(); ++r) EXPECT_EQ(std::stod(ae[r][kl]), 0.0);

  ASSERT_EQ(run("train --epochs 1" + cfg() + d16 + dir("t2")).code, 0);
  EXPECT_EQ(slurp(*root_ / "t1" / "vae_loss.csv"), slurp(*root_ / "t2" / "vae_loss.csv"));
  EXPECT_TRUE(slurp(*root_ / "t1" / "vae.ckpt") == slurp(*root_ / "t2" / "vae.ckpt"));
}

TEST_F(Cli, ResumeContinuesTheRun) {
  ASSERT_EQ(run("train --epochs 2 --checkpoint-every 1" + cfg() + data() + dir("full")).code, 0);
  ASSERT_EQ(run("train --epochs 1 --checkpoint-every 1" + cfg() + data() + dir("half")).code, 0);
  const Result r = run("train --epochs 2 --checkpoint-every 1 --resume " + (*root_ / "half" / "vae.ckpt").string() + cfg() + data() +
                    dir("half"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(slurp(*root_ / "half" / "vae.ckpt") == slurp(*root_ / "full" / "vae.ckpt"));
  EXPECT_EQ(slurp(*root_ / "half" / "vae_loss.csv"), slurp(*root_ / "full" / "vae_loss.csv"));
}

TEST_F(Cli, EvalScenarios) {
  ASSERT_EQ(run("train" + cfg() + data() + dir("m")).code, 0);
  ASSERT_EQ(run("train --model ae" + cfg() + data() + dir("m")).code, 0);
  const std::string vae = " --vae " + (*root_ / "m" / "vae.ckpt").string();
  const std::string ae = " --ae " + (*root_ / "m" / "ae.ckpt").string();

  const Result v = run("eval --scenario validation" + cfg() + data() + vae + ae + dir("rep"));
  ASSERT_EQ(v.code, 0) << v.out;
  const auto pos = v.out.find("report: ");
  ASSERT_NE(pos, std::string::npos);
  fs::path rdir = v.out.substr(pos + 8);
  rdir = rdir.string().substr(0, rdir.string().find('\n'));
  const auto j = nlohmann::json::parse(slurp(rdir / "report.json"));
  ASSERT_EQ(j["models"].size(), 3u);
  EXPECT_EQ(j["models"][2]["name"], "mean");
  EXPECT_TRUE(fs::exists(rdir / "metrics.csv"));
  EXPECT_EQ(rdir.filename().string().rfind("validation_seed7_", 0), 0u);

  const Result dn = run("eval --scenario denoising --lo-res 8" + cfg() + data() + vae + dir("rep"));
  EXPECT_EQ(dn.code, 0) << dn.out;
  EXPECT_NE(dn.out.find("pixelated"), std::string::npos);

  const Result ex = run("eval --scenario extrapolation --epochs 1" + cfg() + data() + dir("rep"));
  EXPECT_EQ(ex.code, 0) << ex.out;
  EXPECT_NE(ex.out.find("vae_val"), std::string::npos);

  const Result fs_ = run("eval --scenario fewshot --shots 4,16,64" + cfg() + vae + dir("rep"));
  ASSERT_EQ(fs_.code, 0) << fs_.out;
  EXPECT_NE(fs_.out.find("k4 "), std::string::npos);
  EXPECT_NE(fs_.out.find("k16 "), std::string::npos);
  EXPECT_NE(fs_.out.find("k64 "), std::string::npos);

  // Swapped kinds, missing models, unknown scenario, too many shots.
  const std::string swapped = " --vae " + (*root_ / "m" / "ae.ckpt").string() + " --ae " +
                              (*root_ / "m" / "vae.ckpt").string();
  EXPECT_EQ(run("eval --scenario validation" + cfg() + data() + swapped + dir("rep")).code, 2);
  EXPECT_EQ(run("eval --scenario validation" + cfg() + data() + vae + dir("rep")).code, 2);
  EXPECT_EQ(run("eval --scenario transfer" + cfg() + data() + dir("rep")).code, 2);
  EXPECT_EQ(run("eval --scenario fewshot --shots 4,1000" + cfg() + vae + dir("rep")).code, 2);
  EXPECT_EQ(run("eval --scenario fewshot --shots 16,4" + cfg() + vae + dir("rep")).code, 2);
}

TEST_F(Cli, PredictIsDeterministicAndChecksBounds) {
  ASSERT_EQ(run("train --epochs 1" + cfg() + data() + dir("p")).code, 0);
  const std::string ck = " --checkpoint " + (*root_ / "p" / "vae.ckpt").string();
  const Result a = run("predict --ap-x 4 --ap-y 5 --png a.png" + cfg() + ck + dir("p"));
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(run("predict --ap-x 4 --ap-y 5 --png b.png" + cfg() + ck + dir("p")).code, 0);
  EXPECT_TRUE(slurp(*root_ / "p" / "a.png") == slurp(*root_ / "p" / "b.png"));
  EXPECT_EQ(csv_rows(*root_ / "p" / "a.csv").size(), 16u);
  const Result out = run("predict --ap-x 40 --ap-y 5" + cfg() + ck + dir("p"));
  EXPECT_EQ(out.code, 2);
  EXPECT_NE(out.out.find("outside"), std::string::npos) << out.out;
  EXPECT_EQ(run("predict --ap-x -1 --ap-y 5" + cfg() + ck + dir("p")).code, 2);
  EXPECT_EQ(run("predict --ap-x 1 --ap-y 1 --checkpoint /nonexistent.ckpt" + cfg() + dir("p")).code, 2);
}

TEST_F(Cli, PredictPeaksNearTheAp) {
  const std::string ecfg = " --config " + (*root_ / "empty.json").string();
  ASSERT_EQ(run("gen" + ecfg + dir("e")).code, 0);
  const Result t = run("train --model ae --epochs 40" + ecfg + " --data " + (*root_ / "e" / "dataset.wsv").string() +
                    dir("e"));
  ASSERT_EQ(t.code, 0) << t.out;
  const double ax = 11.3, ay = 4.6;
  const Result p = run("predict --ap-x 11.3 --ap-y 4.6" + ecfg + " --checkpoint " + (*root_ / "e" / "ae.ckpt").string() +
                    dir("e"));
  ASSERT_EQ(p.code, 0) << p.out;
  const auto rows = csv_rows(*root_ / "e" / "prediction.csv");
  ASSERT_EQ(rows.size(), 16u);
  double best = -1e9;
  int bi = 0, bj = 0;
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      if (const double v = std::stod(rows[i][j]); v > best) {
        best = v;
        bi = i;
        bj = j;
      }
  // 1 m cells; cell centres at (j + 0.5, i + 0.5).
  EXPECT_LE(std::hypot(bj + 0.5 - ax, bi + 0.5 - ay), 2.5) << "peak at " << bi << "," << bj;
}

TEST_F(Cli, ExportAndFileErrors) {
  const Result x = run("export --sample 3 --channels" + data() + dir("x"));
  ASSERT_EQ(x.code, 0) << x.out;
  for (const char* f : {"sample3_sinr.png", "sample3_sinr.csv", "sample3_distance.png", "sample3_los.png"})
    EXPECT_TRUE(fs::exists(*root_ / "x" / f)) << f;
  EXPECT_EQ(run("export --sample 100000" + data() + dir("x")).code, 2);

  // Corrupt dataset, unreadable config, unknown config key.
  fs::copy_file(*root_ / "data" / "dataset.wsv", *root_ / "bad.wsv");
  fs::copy_file(*root_ / "data" / "dataset.wsv.json", *root_ / "bad.wsv.json");
  {
    std::fstream f(*root_ / "bad.wsv", std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  const Result bad = run("train --data " + (*root_ / "bad.wsv").string() + cfg() + dir("x"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("BadMagic"), std::string::npos) << bad.out;
  EXPECT_EQ(run("gen --dry-run --config /nonexistent.json").code, 2);
  std::ofstream(*root_ / "typo.json") << R"({"train": {"epoch": 3}})";
  const Result typo = run("gen --dry-run --config " + (*root_ / "typo.json").string());
  EXPECT_EQ(typo.code, 2);
  EXPECT_NE(typo.out.find("train.epoch"), std::string::npos) << typo.out;
}
