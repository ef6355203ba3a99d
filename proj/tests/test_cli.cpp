#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cli.hpp"

namespace grkt {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out, err;
};

Result grkt(std::vector<std::string> args) {
  args.insert(args.begin(), "grkt");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("grkt_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  std::string path(const std::string& rel) const { return (root / rel).string(); }

  std::string small_config() const {
    const auto p = root / "small.cfg";
    std::ofstream(p) << "embed_dim = 8\nmemory_dim = 4\nhidden_dim = 8\nlayers = 1\n"
                        "batch_size = 8\nmin_cooccurrence = 3\nfolds = 3\npatience = 2\n";
    return p.string();
  }

  std::string make_data() {
    auto r = grkt({"synth", "--students", "30", "--kcs", "8", "--questions", "20", "--min-len", "15",
                   "--max-len", "25", "--seed", "2", "--out", path("synth")});
    EXPECT_EQ(r.code, 0) << r.err;
    return path("synth/data.csv");
  }

  fs::path root;
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(grkt({}).code, cli::kExitUsage);
  EXPECT_EQ(grkt({"frobnicate"}).code, cli::kExitUsage);
  EXPECT_EQ(grkt({"synth", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(grkt({"train"}).code, cli::kExitUsage);
  EXPECT_EQ(grkt({"eval", "--data", "x.csv"}).code, cli::kExitUsage);
  EXPECT_EQ(grkt({"synth", "--students", "many"}).code, cli::kExitUsage);
  EXPECT_EQ(grkt({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(grkt({"--version"}).code, cli::kExitOk);
}

TEST_F(CliTest, BadFoldIsAUsageError) {
  auto data = make_data();
  auto cfg = small_config();
  for (std::string fold : {"x", "7", "-1", ""}) {
    auto r = grkt({"train", "--data", data, "--config", cfg, "--fold", fold, "--epochs", "1", "--out", path("t")});
    EXPECT_EQ(r.code, cli::kExitUsage) << "'" << fold << "': " << r.err;
  }
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  auto r = grkt({"build-graphs", "--data", path("missing.csv"), "--out", path("g")});
  EXPECT_EQ(r.code, cli::kExitRuntime);
  EXPECT_FALSE(r.err.empty());
  auto data = make_data();
  EXPECT_EQ(grkt({"eval", "--data", data, "--checkpoint", path("nope.json"), "--out", path("e")}).code,
            cli::kExitRuntime);
  std::ofstream(root / "bad.cfg") << "layers = 0\n";
  EXPECT_EQ(grkt({"train", "--data", data, "--config", path("bad.cfg"), "--out", path("t")}).code, cli::kExitRuntime);
  std::ofstream(root / "garbled.csv") << "student,question,kcs,correct,timestamp\nu1,q1,c1,maybe,5\n";
  EXPECT_EQ(grkt({"build-graphs", "--data", path("garbled.csv"), "--out", path("g")}).code, cli::kExitRuntime);
}

TEST_F(CliTest, PipelineWritesArtifactsAndManifests) {
  auto data = make_data();
  auto cfg = small_config();
  for (const char* f : {"data.csv", "truth.json", "planted_graphs.tsv", "manifest.json"})
    EXPECT_TRUE(fs::exists(root / "synth" / f)) << f;
  EXPECT_EQ(load_json(root / "synth/manifest.json")["seed"].get<int>(), 2);

  auto g = grkt({"build-graphs", "--data", data, "--config", cfg, "--fold", "1", "--out", path("graphs")});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_TRUE(fs::exists(root / "graphs/graphs.tsv"));
  EXPECT_EQ(load_json(root / "graphs/manifest.json")["fold"].get<int>(), 1);

  auto t = grkt({"train", "--data", data, "--config", cfg, "--fold", "0", "--epochs", "2", "--out", path("train")});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("epoch 1"), std::string::npos);
  for (const char* f : {"report.json", "manifest.json", "config.txt", "fold0/checkpoint.json", "fold0/graphs.tsv"})
    EXPECT_TRUE(fs::exists(root / "train" / f)) << f;
  auto report = load_json(root / "train/report.json");
  EXPECT_EQ(report["summary"]["auc"]["folds"].get<int>(), 1);

  const std::string ckpt = path("train/fold0/checkpoint.json");
  auto e = grkt({"eval", "--data", data, "--checkpoint", ckpt, "--fold", "0", "--out", path("eval")});
  ASSERT_EQ(e.code, 0) << e.err;
  auto ev = load_json(root / "eval/eval.json");
  EXPECT_EQ(ev["consistency"].get<double>(), 1.0);
  EXPECT_EQ(ev["variant"].get<std::string>(), "GRKT");
  EXPECT_NEAR(ev["auc"].get<double>(), report["folds"][0]["test"]["auc"].get<double>(), 1e-12);

  auto tr = grkt({"trace", "--data", data, "--checkpoint", ckpt, "--student", "u3", "--out", path("trace")});
  ASSERT_EQ(tr.code, 0) << tr.err;
  for (const char* f : {"trace_u3.csv", "trace_u3_full.csv", "trace_u3.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(root / "trace" / f)) << f;
  EXPECT_EQ(grkt({"trace", "--data", data, "--checkpoint", ckpt, "--student", "nobody", "--out", path("trace")}).code,
            cli::kExitRuntime);

  auto gc = grkt({"gradcheck", "--samples", "30", "--out", path("gc")});
  ASSERT_EQ(gc.code, 0) << gc.err;
  EXPECT_TRUE(load_json(root / "gc/gradcheck.json")["passed"].get<bool>());
  EXPECT_TRUE(fs::exists(root / "gc/manifest.json"));
}

TEST_F(CliTest, EvalNeverTouchesTheCheckpoint) {
  auto data = make_data();
  auto cfg = small_config();
  ASSERT_EQ(grkt({"train", "--data", data, "--config", cfg, "--epochs", "1", "--out", path("train")}).code, 0);
  const fs::path ckpt = root / "train/fold0/checkpoint.json";
  const auto bytes = slurp(ckpt);
  const auto mtime = fs::last_write_time(ckpt);
  for (const char* variant : {"--no-lf", "--no-sim", "--no-pre"}) {
    auto r = grkt({"eval", "--data", data, "--checkpoint", ckpt.string(), variant, "--out", path("eval")});
    EXPECT_EQ(r.code, 0) << r.err;
  }
  auto r = grkt({"eval", "--data", data, "--checkpoint", ckpt.string(), "--consistency-rule", "non-increase",
                 "--out", (root / "train/fold0").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(ckpt), bytes);
  EXPECT_EQ(fs::last_write_time(ckpt), mtime);
}

TEST_F(CliTest, EnvironmentChoosesDefaultOutputDirectory) {
  ASSERT_EQ(setenv("GRKT_OUT", path("env_out").c_str(), 1), 0);
  auto r = grkt({"synth", "--students", "3", "--kcs", "4", "--questions", "6", "--min-len", "5", "--max-len", "6"});
  unsetenv("GRKT_OUT");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(root / "env_out/data.csv"));
  EXPECT_TRUE(fs::exists(root / "env_out/manifest.json"));
}

TEST_F(CliTest, SameSeedSameSynthBytes) {
  for (const char* dir : {"a", "b"})
    ASSERT_EQ(grkt({"synth", "--students", "5", "--seed", "9", "--out", path(dir)}).code, 0);
  EXPECT_EQ(slurp(root / "a/data.csv"), slurp(root / "b/data.csv"));
}

}  // namespace
}  // namespace grkt
