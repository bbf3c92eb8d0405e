#include "app.hpp"

#include "stsad/scoring.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <unistd.h>

using namespace stsad;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stsad_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "stsad");
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  std::string path(const std::string& rel) const { return (dir_ / rel).string(); }

  void small_dataset(int systems = 4, int days = 10) {
    ASSERT_EQ(run({"synth", "--systems", std::to_string(systems), "--days", std::to_string(days), "--out",
                   path("data")}),
              0)
        << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

AnomalyScoreSeries toy_series(double shift) {
  AnomalyScoreSeries s;
  const auto d0 = parse_date("2021-01-01");
  for (int sys = 0; sys < 3; ++sys) {
    for (int i = 0; i < 10; ++i) {
      const bool fault = i % 4 == 0;
      const bool merk = i == 5;
      s.entries.push_back({"s" + std::to_string(sys), d0 + std::chrono::days(i), i,
                           (fault ? 2.0 : 0.5) + 0.1 * ((i * 7 + sys) % 5) + shift,
                           fault ? DayLabel::Fault : (merk ? DayLabel::Merk : DayLabel::Normal)});
    }
  }
  return s;
}

}  // namespace

TEST(Sha256, KnownDigest) {
  const fs::path p = fs::temp_directory_path() / ("stsad_sha_" + std::to_string(::getpid()));
  std::ofstream(p) << "abc";
  EXPECT_EQ(cli::sha256_file(p.string()), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  fs::remove(p);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}), cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}), cli::kUsage);
  EXPECT_EQ(run({"train", "--data", path("missing")}), cli::kUsage);
  EXPECT_NE(err_.str().find("stsad synth"), std::string::npos);
  EXPECT_EQ(run({"--help"}), cli::kOk);
  EXPECT_EQ(run({"--version"}), cli::kOk);
}

TEST_F(Cli, PcaWorkflowIsIdempotentAndWritesManifests) {
  small_dataset();
  ASSERT_EQ(run({"train", "--data", path("data"), "--detector", "pca", "--out", path("models")}), 0) << err_.str();
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run({"score", "--data", path("data"), "--checkpoint", path("models/pca.ckpt"), "--detector",
                   "pca-rescaled", "--out", path(out)}),
              0)
        << err_.str();
  }
  const std::string a = slurp(path("a/pca-rescaled.csv"));
  EXPECT_EQ(a, slurp(path("b/pca-rescaled.csv")));
  const AnomalyScoreSeries series = load_scores(path("a/pca-rescaled.csv"));
  EXPECT_EQ(series.size(), 10u);  // one test system of ten days

  const auto manifest = nlohmann::json::parse(slurp(path("a/manifest.json")));
  EXPECT_EQ(manifest["command"], "score");
  EXPECT_EQ(manifest["tool"], "stsad");
  EXPECT_EQ(manifest["inputs"][path("models/pca.ckpt")], cli::sha256_file(path("models/pca.ckpt")));
  EXPECT_NE(manifest["config"].get<std::string>().find("detector=\"pca-rescaled\""), std::string::npos);

  // Rerun from the recorded configuration.
  ASSERT_EQ(run({"--config", path("a/config.ini"), "score", "--out", path("c")}), 0) << err_.str();
  EXPECT_EQ(a, slurp(path("c/pca-rescaled.csv")));
}

TEST_F(Cli, DetectorCheckpointMismatchIsDataError) {
  small_dataset();
  ASSERT_EQ(run({"train", "--data", path("data"), "--detector", "pca", "--out", path("models")}), 0);
  EXPECT_EQ(run({"score", "--data", path("data"), "--checkpoint", path("models/pca.ckpt"), "--detector", "vae",
                 "--out", path("s")}),
            cli::kData);
  EXPECT_EQ(run({"score", "--data", path("data"), "--checkpoint", path("models/pca.ckpt"), "--detector", "nope",
                 "--out", path("s")}),
            cli::kUsage);
}

TEST_F(Cli, TrainThreeSeedsIsDeterministic) {
  small_dataset(4, 2);
  for (const char* out : {"m1", "m2"}) {
    ASSERT_EQ(run({"train", "--data", path("data"), "--seeds", "1,2,3", "--steps", "2", "--out", path(out)}), 0)
        << err_.str();
  }
  for (int seed = 1; seed <= 3; ++seed) {
    const std::string ckpt = "vae_seed" + std::to_string(seed) + ".ckpt";
    ASSERT_TRUE(fs::exists(path("m1/" + ckpt)));
    EXPECT_EQ(slurp(path("m1/" + ckpt)), slurp(path("m2/" + ckpt)));
    EXPECT_TRUE(fs::exists(path("m1/vae_seed" + std::to_string(seed) + "_log.csv")));
  }
  EXPECT_NE(slurp(path("m1/vae_seed1.ckpt")), slurp(path("m1/vae_seed2.ckpt")));
  EXPECT_EQ(nlohmann::json::parse(slurp(path("m1/train_summary.json"))).size(), 3u);
}

TEST_F(Cli, EvalComparesDetectorsAcrossSeedsAndMatchesLibrary) {
  fs::create_directories(path("scores"));
  std::vector<std::string> files;
  for (const char* det : {"vae", "pca-rescaled"}) {
    for (int seed = 1; seed <= 3; ++seed) {
      const std::string f = path(std::string("scores/") + det + "_seed" + std::to_string(seed) + ".csv");
      save_scores(f, toy_series(0.01 * seed));
      files.push_back(f);
    }
  }
  std::vector<std::string> hashes;
  for (const auto& f : files) hashes.push_back(cli::sha256_file(f));

  std::vector<std::string> args{"eval", "--out", path("eval"), "--merk", "positive", "--scores"};
  args.insert(args.end(), files.begin(), files.end());
  ASSERT_EQ(run(args), 0) << err_.str();

  const std::string table = slurp(path("eval/comparison.txt"));
  int rows = 0;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) rows += line.rfind("vae", 0) == 0 || line.rfind("pca", 0) == 0;
  EXPECT_EQ(rows, 2);
  EXPECT_NE(table.find("±"), std::string::npos);

  for (std::size_t i = 0; i < files.size(); ++i) EXPECT_EQ(cli::sha256_file(files[i]), hashes[i]);

  EvalOptions opts;
  opts.merk = MerkMode::Positive;
  const EvalReport direct = evaluate(load_scores(files[0]), opts, "vae");
  const auto j = nlohmann::json::parse(slurp(path("eval/eval_vae_seed1.json")));
  EXPECT_EQ(j["auc_roc"].get<double>(), *direct.auc_roc.value);
  EXPECT_EQ(j["auc_pr"].get<double>(), *direct.auc_pr.value);
  EXPECT_EQ(j["optimal_f1"].get<double>(), *direct.optimal_f1.value);
  EXPECT_EQ(j["system_wise_f1"].get<double>(), *direct.system_wise_f1.value);
}

TEST_F(Cli, ReportPointsCapAndColors) {
  AnomalyScoreSeries s = toy_series(0.0);
  s.entries[3].score = 9.0;
  save_scores(path("s.csv"), s);
  ASSERT_EQ(run({"report", "--scores", path("s.csv"), "--system", "s0", "--out", path("rep")}), 0) << err_.str();
  const std::string svg = slurp(path("rep/s0.svg"));
  const std::regex circle("<circle [^>]*fill=\"(#[0-9a-f]{6})\" data-day=\"([0-9]+)\" data-score=\"([^\"]+)\"");
  std::vector<std::smatch> points;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), circle); it != std::sregex_iterator(); ++it) {
    points.push_back(*it);
  }
  ASSERT_EQ(points.size(), 10u);

  std::ifstream csv(path("rep/s0.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "day_index,capped_score,label");
  const std::map<std::string, std::string> colors{{"Normal", "#2ca02c"}, {"Merk", "#ff7f0e"}, {"Fault", "#d62728"}};
  for (const auto& p : points) {
    ASSERT_TRUE(std::getline(csv, line));
    std::istringstream row(line);
    std::string day, score, label;
    std::getline(row, day, ',');
    std::getline(row, score, ',');
    std::getline(row, label, ',');
    EXPECT_EQ(p[2].str(), day);
    EXPECT_LE(std::stod(score), 3.0);
    EXPECT_LE(std::stod(p[3].str()), 3.0);
    EXPECT_EQ(p[1].str(), colors.at(label));
  }
  EXPECT_EQ(run({"report", "--scores", path("s.csv"), "--system", "nope", "--out", path("rep")}), cli::kData);
  EXPECT_EQ(run({"report", "--scores", path("s.csv"), "--cap", "0", "--out", path("rep")}), cli::kUsage);
}
