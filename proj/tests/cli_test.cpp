#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sasow/checkpoint.hpp"
#include "sasow/cli.hpp"
#include "sasow/data.hpp"
#include "sasow/detail/files.hpp"
#include "sasow/feasibility.hpp"
#include "sasow/report.hpp"

namespace sasow {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sasow_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

std::vector<std::string> gen_args(const fs::path& out, const std::string& seed = "1") {
  return {"gen-data", "--states", "3", "--objects", "4", "--dim", "8", "--images-per-comp", "6", "--seen-frac",
          "0.5", "--noise", "0.3", "--seed", seed, "--out", out.string(), "--patches", "2"};
}

fs::path quick_config(const fs::path& dir, const std::string& classifier = "mlp", int patches = 2) {
  const auto path = dir / (classifier + "_config.json");
  detail::write_file(path, R"({"classifier":")" + classifier + R"(","epochs":30,"batch_size":8,"learning_rate":0.01,)" +
                               R"("patch_count":)" + std::to_string(patches) + "}");
  return path;
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({}).code, kExitInput);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitInput);
  EXPECT_EQ(cli({"gen-data", "--states", "3"}).code, kExitInput);
}

TEST(GenData, WritesLoadableDeterministicDataset) {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  auto r = cli(gen_args(a));
  ASSERT_EQ(r.code, kExitOk) << r.err;
  ASSERT_EQ(cli(gen_args(b)).code, kExitOk);
  const Dataset ds = load_dataset(a);
  EXPECT_EQ(ds.vocab.state_count(), 3);
  EXPECT_EQ(ds.split.seen.size(), 6u);
  EXPECT_EQ(detail::read_file(a / "features.bin"), detail::read_file(b / "features.bin"));
  EXPECT_TRUE(fs::exists(a / "embeddings.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(GenData, InvalidFlagsExitTwo) {
  const auto dir = scratch("gen_bad");
  auto args = gen_args(dir);
  args[10] = "0";  // --seen-frac
  EXPECT_EQ(cli(args).code, kExitInput);
  args = gen_args(dir);
  args[6] = "9";  // --dim not divisible by --patches 2
  EXPECT_EQ(cli(args).code, kExitInput);
  args = gen_args(dir);
  args.insert(args.end(), {"--moving", "sideways"});
  EXPECT_EQ(cli(args).code, kExitInput);
}

TEST(GenData, MovingAndReduceOptions) {
  const auto plain = scratch("gen_plain"), moved = scratch("gen_moved");
  ASSERT_EQ(cli(gen_args(plain)).code, kExitOk);
  auto args = gen_args(moved);
  args.insert(args.end(), {"--moving", "--reduce-comps", "5", "--test-seen-frac", "0.5"});
  auto r = cli(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const Dataset a = load_dataset(plain), b = load_dataset(moved);
  EXPECT_EQ(b.split.seen.size(), 5u);
  EXPECT_EQ(a.split.unseen, b.split.unseen);
  fs::remove_all(plain);
  fs::remove_all(moved);
}

TEST(Train, WritesCheckpointsAndDeterministicSummary) {
  const auto dir = scratch("train");
  ASSERT_EQ(cli(gen_args(dir / "data")).code, kExitOk);
  const auto cfg = quick_config(dir);
  for (const char* out : {"m1", "m2"}) {
    auto r = cli({"train", "--data", (dir / "data").string(), "--config", cfg.string(), "--out", (dir / out).string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  const auto s1 = nlohmann::json::parse(detail::read_file(dir / "m1" / "summary.json"));
  const auto s2 = nlohmann::json::parse(detail::read_file(dir / "m2" / "summary.json"));
  EXPECT_GT(s1["a_sta"].get<double>(), 0.0);
  EXPECT_LE(s1["a_sta"].get<double>(), 1.0);
  EXPECT_GT(s1["a_obj"].get<double>(), 0.0);
  EXPECT_LE(s1["a_obj"].get<double>(), 1.0);
  EXPECT_EQ(s1["measured_on"], "validation");
  EXPECT_EQ(s1["state_checksum"], s2["state_checksum"]);
  EXPECT_EQ(s1["object_checksum"], s2["object_checksum"]);
  EXPECT_EQ(load_checkpoint(dir / "m1", "state").kind(), ClassifierKind::mlp);
  fs::remove_all(dir);
}

TEST(Train, SeedEnvironmentOverridesConfig) {
  const auto dir = scratch("train_env");
  ASSERT_EQ(cli(gen_args(dir / "data")).code, kExitOk);
  const auto cfg = quick_config(dir);
  auto train_to = [&](const char* out) {
    return cli({"train", "--data", (dir / "data").string(), "--config", cfg.string(), "--out", (dir / out).string()});
  };
  ASSERT_EQ(train_to("base").code, kExitOk);
  ::setenv("SASOW_SEED", "99", 1);
  const auto r = train_to("env");
  ::unsetenv("SASOW_SEED");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto a = nlohmann::json::parse(detail::read_file(dir / "base" / "summary.json"));
  const auto b = nlohmann::json::parse(detail::read_file(dir / "env" / "summary.json"));
  EXPECT_EQ(b["config"]["seed"], 99);
  EXPECT_NE(a["state_checksum"], b["state_checksum"]);
  fs::remove_all(dir);
}

TEST(Train, InputProblemsExitTwo) {
  const auto dir = scratch("train_bad");
  ASSERT_EQ(cli(gen_args(dir / "data")).code, kExitOk);
  EXPECT_EQ(cli({"train", "--data", (dir / "nowhere").string(), "--out", (dir / "m").string()}).code, kExitInput);
  const auto cfg = quick_config(dir, "attention", 3);  // 8 features into 3 patches
  EXPECT_EQ(cli({"train", "--data", (dir / "data").string(), "--config", cfg.string(), "--out", (dir / "m").string()})
                .code,
            kExitInput);
  detail::write_file(dir / "bad.json", R"({"epochs": -1})");
  EXPECT_EQ(cli({"train", "--data", (dir / "data").string(), "--config", (dir / "bad.json").string(), "--out",
                 (dir / "m").string()})
                .code,
            kExitInput);
  fs::remove_all(dir);
}

class EvalTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = scratch("eval");
    ASSERT_EQ(cli(gen_args(dir_ / "data")).code, kExitOk);
    for (const std::string kind : {"mlp", "attention"}) {
      auto r = cli({"train", "--data", (dir_ / "data").string(), "--config", quick_config(dir_, kind).string(),
                    "--out", (dir_ / kind).string()});
      ASSERT_EQ(r.code, kExitOk) << r.err;
    }
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::vector<std::string> eval_args(const std::string& report) {
    return {"eval", "--data", (dir_ / "data").string(), "--model", (dir_ / "mlp").string(), "--model",
            (dir_ / "attention").string(), "--report", (dir_ / report).string()};
  }

  static inline fs::path dir_;
};

TEST_F(EvalTest, AllVariantsTable) {
  auto args = eval_args("all.json");
  args.insert(args.end(), {"--variant", "all", "--curve-csv", (dir_ / "curves.csv").string()});
  auto r = cli(args);
  ASSERT_EQ(r.code, kExitOk) << r.err << r.out;
  const auto reports = reports_from_json(detail::read_file(dir_ / "all.json"));
  ASSERT_EQ(reports.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(reports[i].variant, kAllVariants[i]);
  // Variants sharing a classifier share primitive predictions.
  EXPECT_EQ(reports[0].state_acc, reports[2].state_acc);
  EXPECT_EQ(reports[1].object_acc, reports[3].object_acc);
  EXPECT_EQ(reports[0].alpha, 1.0);
  for (const char* name : {"kg-sp", "kg-sa", "kg-sow", "sasow"}) EXPECT_NE(r.out.find(name), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "curves.csv"));
}

TEST_F(EvalTest, SingleVariantAndMaskSources) {
  auto args = eval_args("one.json");
  args.insert(args.end(), {"--variant", "kg-sow", "--embeddings", (dir_ / "data" / "embeddings.csv").string(),
                           "--tau", "0.2"});
  auto r = cli(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(load_report(dir_ / "one.json").variant, Variant::kg_sow);

  args = eval_args("one.json");
  args.insert(args.end(), {"--variant", "kg-sp", "--no-mask", "--mask", "x.csv"});
  EXPECT_EQ(cli(args).code, kExitInput);
  args = eval_args("one.json");
  args.insert(args.end(), {"--variant", "kg-sp", "--weighted"});
  EXPECT_EQ(cli(args).code, kExitInput);
}

TEST_F(EvalTest, NonPositiveAccuracyBlocksWeighting) {
  const auto copy = dir_ / "mlp_zero";
  fs::copy(dir_ / "mlp", copy, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  auto summary = nlohmann::ordered_json::parse(detail::read_file(copy / "summary.json"));
  summary["a_sta"] = 0.0;
  detail::write_file(copy / "summary.json", summary.dump(2));
  std::vector<std::string> args{"eval", "--data", (dir_ / "data").string(), "--model", copy.string(),
                                "--report", (dir_ / "w.json").string()};
  auto weighted = args;
  weighted.push_back("--weighted");
  EXPECT_EQ(cli(weighted).code, kExitInput);
  EXPECT_EQ(cli(args).code, kExitOk);
}

TEST_F(EvalTest, ModelDatasetMismatchExitsTwo) {
  const auto other = dir_ / "other";
  auto args = gen_args(other);
  args[4] = "5";  // --objects
  ASSERT_EQ(cli(args).code, kExitOk);
  EXPECT_EQ(cli({"eval", "--data", other.string(), "--model", (dir_ / "mlp").string(), "--report",
                 (dir_ / "x.json").string()})
                .code,
            kExitInput);
}

TEST_F(EvalTest, FeasibilityCommand) {
  const auto data = (dir_ / "data").string(), emb = (dir_ / "data" / "embeddings.csv").string();
  auto r = cli({"feasibility", "--embeddings", emb, "--data", data, "--tau", "-1", "--out",
                (dir_ / "all_mask.csv").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("feasible compositions: 12 of 12"), std::string::npos) << r.out;
  EXPECT_EQ(cli({"feasibility", "--embeddings", emb, "--data", data, "--tau", "1.01", "--out",
                 (dir_ / "m.csv").string()})
                .code,
            kExitInput);

  const double tau = 0.1;
  ASSERT_EQ(cli({"feasibility", "--embeddings", emb, "--data", data, "--tau", "0.1", "--out",
                 (dir_ / "mask.csv").string()})
                .code,
            kExitOk);
  const Dataset ds = load_dataset(dir_ / "data");
  const EmbeddingTable table = load_embeddings(emb);
  const FeasibilityMask mask = load_mask(dir_ / "mask.csv", ds.vocab);
  for (Eigen::Index s = 0; s < 3; ++s) {
    for (Eigen::Index o = 0; o < 4; ++o) {
      const Vector& eo = table.at(ds.vocab.objects()[static_cast<std::size_t>(o)]);
      double best = -2.0;
      for (const auto& c : ds.split.seen) {
        if (c.state != s) continue;
        const Vector& ep = table.at(ds.vocab.objects()[static_cast<std::size_t>(c.object)]);
        best = std::max(best, eo.dot(ep) / (eo.norm() * ep.norm()));
      }
      EXPECT_EQ(mask(s, o), ds.split.seen.count({s, o}) != 0 || best >= tau) << s << "," << o;
    }
  }

  detail::write_file(dir_ / "short_emb.csv", "nothing,1,2\n");
  EXPECT_EQ(cli({"feasibility", "--embeddings", (dir_ / "short_emb.csv").string(), "--data", data, "--tau", "0",
                 "--out", (dir_ / "m.csv").string()})
                .code,
            kExitInput);
}

// Tiny committed dataset and checkpoints. Set SASOW_UPDATE_GOLDEN=1 to
// rebuild the fixture and golden report from scratch.
TEST(Golden, ReportMatchesCommittedFile) {
  const fs::path fixture = fs::path(SASOW_FIXTURE_DIR) / "tiny";
  const fs::path golden = fixture / "golden_report.json";
  if (const char* env = std::getenv("SASOW_UPDATE_GOLDEN"); env != nullptr && std::string(env) == "1") {
    fs::remove_all(fixture);
    auto gen = gen_args(fixture / "data", "5");
    gen.insert(gen.end(), {"--state-noise", "1.2"});
    ASSERT_EQ(cli(gen).code, kExitOk);
    ASSERT_EQ(cli({"train", "--data", (fixture / "data").string(), "--config",
                   quick_config(fixture / "data").string(), "--out", (fixture / "model").string()})
                  .code,
              kExitOk);
    fs::remove(fixture / "data" / "mlp_config.json");
    ASSERT_EQ(cli({"eval", "--data", (fixture / "data").string(), "--model", (fixture / "model").string(),
                   "--report", golden.string(), "--variant", "kg-sow", "--bias-points", "200"})
                  .code,
              kExitOk);
  }
  const auto out = scratch("golden") / "report.json";
  auto r = cli({"eval", "--data", (fixture / "data").string(), "--model", (fixture / "model").string(), "--report",
                out.string(), "--variant", "kg-sow", "--bias-points", "200"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(detail::read_file(out), detail::read_file(golden));

  // The golden curve itself is checked against direct enumeration.
  const EvalReport report = load_report(golden);
  const Dataset ds = load_dataset(fixture / "data");
  const ClassifierModel sta = load_checkpoint(fixture / "model", "state");
  const ClassifierModel obj = load_checkpoint(fixture / "model", "object");
  std::vector<Matrix> scores;
  std::vector<Composition> labels;
  for (auto row : ds.indices(Split::test)) {
    const Vector f = ds.features.row(static_cast<Eigen::Index>(row)).transpose();
    const Vector ps = predict_probs(sta, f).entries(), po = predict_probs(obj, f).entries();
    Matrix s(ps.size(), po.size());
    for (Eigen::Index i = 0; i < ps.size(); ++i) {
      for (Eigen::Index j = 0; j < po.size(); ++j) s(i, j) = std::pow(ps[i], report.alpha) * po[j];
    }
    scores.push_back(s);
    labels.push_back(ds.samples[row].composition());
  }
  std::vector<double> biases;
  for (const auto& p : report.curve) biases.push_back(p.bias);
  const auto brute = oracle::brute_force_sweep(scores, labels, ds.split.seen, biases);
  ASSERT_EQ(brute.size(), report.curve.size());
  for (std::size_t i = 0; i < brute.size(); ++i) {
    EXPECT_EQ(report.curve[i].seen_acc, brute[i].seen_acc) << i;
    EXPECT_EQ(report.curve[i].unseen_acc, brute[i].unseen_acc) << i;
  }
  fs::remove_all(out.parent_path());
}

}  // namespace
}  // namespace sasow
