#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "ilac/checkpoint.hpp"
#include "ilac/cli.hpp"
#include "ilac/corpus.hpp"

namespace ilac {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ilac_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<json> metrics(const fs::path& dir) {
  std::vector<json> lines;
  std::ifstream in(dir / "metrics.jsonl");
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(json::parse(line));
  return lines;
}

json last_line_json(const std::string& out) {
  const auto end = out.find_last_not_of('\n');
  const auto start = out.rfind('\n', end);
  return json::parse(out.substr(start == std::string::npos ? 0 : start + 1, end - start));
}

json echoed_config(const std::string& out) {
  const auto at = out.find("config ");
  EXPECT_NE(at, std::string::npos);
  return json::parse(out.substr(at + 7, out.find('\n', at) - at - 7));
}

// A corpus small enough to train in well under a second per epoch.
fs::path small_corpus(const std::string& name, std::uint64_t seed = 3) {
  const fs::path dir = fresh_dir(name);
  const CliResult r = run({"gen", "--out", dir.string(), "--scenes", "80", "--seed", std::to_string(seed), "--contexts", "2",
                     "--obj-classes", "6", "--pred-classes", "4", "--feat-dim", "6", "--max-objects", "4"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  return dir;
}

std::vector<std::string> small_train(const fs::path& data, const fs::path& out, std::size_t epochs) {
  return {"train", "--data", data.string(), "--out", out.string(), "--d", "8", "--d-phi", "8",
          "--epochs", std::to_string(epochs), "--lr", "3e-3", "--seed", "5"};
}

TEST(CliGen, SameSeedGivesIdenticalFiles) {
  const fs::path a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
  for (const auto& dir : {a, b}) {
    EXPECT_EQ(run({"gen", "--scenes", "100", "--seed", "7", "--out", dir.string()}).code, kExitOk);
  }
  for (const char* split : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
    EXPECT_EQ(slurp(a / split), slurp(b / split)) << split;
  }
  EXPECT_EQ(slurp(a / "config.json"), slurp(b / "config.json"));
}

TEST(CliGen, MoreContextsThanClassesIsASpecError) {
  const CliResult r = run({"gen", "--contexts", "10", "--obj-classes", "5", "--out", fresh_dir("gen_bad").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_FALSE(r.err.empty());
}

TEST(CliGen, DefaultSplitCounts) {
  const fs::path dir = fresh_dir("gen_split");
  ASSERT_EQ(run({"gen", "--out", dir.string(), "--scenes", "1000"}).code, kExitOk);
  EXPECT_EQ(read_corpus(dir / "train.jsonl").scenes.size(), 700u);
  EXPECT_EQ(read_corpus(dir / "val.jsonl").scenes.size(), 100u);
  EXPECT_EQ(read_corpus(dir / "test.jsonl").scenes.size(), 200u);
}

TEST(CliGen, MissingOutIsAUsageError) { EXPECT_EQ(run({"gen", "--scenes", "10"}).code, kExitUsage); }

TEST(CliGen, EnvironmentSeedOverridesTheFlag) {
  const fs::path a = fresh_dir("gen_env"), b = fresh_dir("gen_env_ref");
  ::setenv("ILAC_SEED", "41", 1);
  const CliResult r = run({"gen", "--scenes", "40", "--seed", "7", "--out", a.string()});
  ::unsetenv("ILAC_SEED");
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(echoed_config(r.out).at("gen").at("seed"), 41);
  ASSERT_EQ(run({"gen", "--scenes", "40", "--seed", "41", "--out", b.string()}).code, kExitOk);
  EXPECT_EQ(slurp(a / "train.jsonl"), slurp(b / "train.jsonl"));
}

TEST(CliGen, MalformedEnvironmentSeedIsRejected) {
  ::setenv("ILAC_SEED", "12x", 1);
  const CliResult r = run({"gen", "--scenes", "40", "--out", fresh_dir("gen_env_bad").string()});
  ::unsetenv("ILAC_SEED");
  EXPECT_EQ(r.code, kExitUsage);
}

TEST(CliTrain, MissingCorpusIsAUsageError) {
  EXPECT_EQ(run({"train", "--out", fresh_dir("train_nodata").string()}).code, kExitUsage);
  EXPECT_EQ(run({"train", "--data", fresh_dir("train_absent").string(), "--out", fresh_dir("t").string()}).code,
            kExitUsage);
}

TEST(CliTrain, IterationCountIsTheOnlyConfigDifference) {
  const fs::path data = small_corpus("iters_data");
  const fs::path one = fresh_dir("iters_1"), two = fresh_dir("iters_2");
  auto a = small_train(data, one, 1), b = small_train(data, two, 1);
  a.insert(a.end(), {"--iters", "1"});
  b.insert(b.end(), {"--iters", "2"});
  ASSERT_EQ(run(a).code, kExitOk);
  ASSERT_EQ(run(b).code, kExitOk);
  json ca = json::parse(slurp(one / "config.json")), cb = json::parse(slurp(two / "config.json"));
  EXPECT_EQ(ca["model"]["n_iters"], 1);
  EXPECT_EQ(cb["model"]["n_iters"], 2);
  ca["model"].erase("n_iters");
  cb["model"].erase("n_iters");
  EXPECT_EQ(ca, cb);
  EXPECT_NE(slurp(one / "model.ckpt"), slurp(two / "model.ckpt"));
}

TEST(CliTrain, NoContextLeavesContextParametersAtInitialization) {
  const fs::path data = small_corpus("noctx_data");
  const fs::path out = fresh_dir("noctx");
  auto args = small_train(data, out, 2);
  args.insert(args.end(), {"--ablation", "no-context"});
  ASSERT_EQ(run(args).code, kExitOk);
  const Checkpoint c = load_checkpoint(out / "last.ckpt");
  EXPECT_FALSE(c.config.use_context);
  const ModelParams init = init_params(c.config, 5);
  const auto trained = param_entries(c.params), initial = param_entries(init);
  std::size_t frozen = 0, moved = 0;
  for (std::size_t k = 0; k < trained.size(); ++k) {
    const std::string& name = trained[k].first;
    const bool context = name.starts_with("node_attn") || name.starts_with("edge_attn") ||
                         name.starts_with("context_lstm");
    const bool same = std::ranges::equal(trained[k].second->data(), initial[k].second->data());
    if (context) {
      EXPECT_TRUE(same) << name;
      ++frozen;
    } else if (!same) {
      ++moved;
    }
  }
  EXPECT_GT(frozen, 0u);
  EXPECT_GT(moved, 0u);
}

TEST(CliTrain, UnknownAblationIsAUsageError) {
  const fs::path data = small_corpus("ablation_bad_data");
  auto args = small_train(data, fresh_dir("ablation_bad"), 1);
  args.insert(args.end(), {"--ablation", "no-edges"});
  EXPECT_EQ(run(args).code, kExitUsage);
}

TEST(CliTrain, ResumeContinuesTheLossCurve) {
  const fs::path data = small_corpus("resume_data");
  const fs::path full = fresh_dir("resume_full"), part = fresh_dir("resume_part");
  ASSERT_EQ(run(small_train(data, full, 3)).code, kExitOk);
  ASSERT_EQ(run(small_train(data, part, 2)).code, kExitOk);
  // --epochs counts the epochs to add on top of the checkpoint.
  auto args = small_train(data, part, 1);
  args.insert(args.end(), {"--resume", (part / "last.ckpt").string()});
  const CliResult r = run(args);
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto a = metrics(full), b = metrics(part);
  ASSERT_EQ(a.size(), 3u);
  ASSERT_EQ(b.size(), 3u);
  const double want = a[2]["train_loss"], got = b[2]["train_loss"];
  EXPECT_NEAR(got, want, 0.01 * want);
  EXPECT_EQ(b[2]["epoch"], 2);
}

TEST(CliTrain, EchoedConfigReproducesTheCheckpointBitwise) {
  const fs::path data = small_corpus("echo_data");
  const fs::path first = fresh_dir("echo_1"), second = fresh_dir("echo_2");
  ASSERT_EQ(run(small_train(data, first, 2)).code, kExitOk);
  const CliResult r = run({"train", "--data", data.string(), "--out", second.string(), "--config",
                     (first / "config.json").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(slurp(first / "model.ckpt"), slurp(second / "model.ckpt"));
  EXPECT_EQ(slurp(first / "config.json"), slurp(second / "config.json"));
}

TEST(CliEval, FreqBaselineNeedsNoCheckpoint) {
  const fs::path data = small_corpus("freq_data");
  const CliResult r = run({"eval", "--data", data.string(), "--baseline", "freq"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("FREQ"), std::string::npos);
}

TEST(CliEval, NeitherCheckpointNorBaselineIsAUsageError) {
  const fs::path data = small_corpus("eval_none_data");
  EXPECT_EQ(run({"eval", "--data", data.string()}).code, kExitUsage);
}

TEST(CliEval, OutputMatchesTheReportShape) {
  const fs::path data = small_corpus("shape_data");
  const fs::path model = fresh_dir("shape_model"), out = fresh_dir("shape_eval");
  ASSERT_EQ(run(small_train(data, model, 1)).code, kExitOk);
  const CliResult r = run({"eval", "--data", data.string(), "--checkpoint", (model / "model.ckpt").string(), "--mode",
                     "predcls,sgcls", "--k", "20,50", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(slurp(out / "eval.json"));
  ASSERT_TRUE(j.is_array());
  ASSERT_EQ(j.size(), 2u);
  for (const auto& rep : j) {
    for (const char* key : {"mode", "recall", "object_accuracy", "scenes_scored", "scenes_skipped"}) {
      EXPECT_TRUE(rep.contains(key)) << key;
    }
    EXPECT_EQ(rep["recall"].size(), 2u);
    for (const auto& [k, v] : rep["recall"].items()) {
      EXPECT_GE(v.get<double>(), 0.0);
      EXPECT_LE(v.get<double>(), 1.0);
    }
  }
  EXPECT_EQ(j[0]["mode"], "predcls");
  EXPECT_TRUE(j[0]["object_accuracy"].is_null());
  EXPECT_TRUE(j[1]["object_accuracy"].is_number());
}

TEST(CliEval, CheckpointForADifferentCorpusIsAVersionError) {
  const fs::path data = small_corpus("mismatch_data");
  const fs::path model = fresh_dir("mismatch_model"), other = fresh_dir("mismatch_other");
  ASSERT_EQ(run(small_train(data, model, 1)).code, kExitOk);
  ASSERT_EQ(run({"gen", "--out", other.string(), "--scenes", "40", "--obj-classes", "7", "--contexts", "2",
                 "--feat-dim", "6", "--pred-classes", "4"})
                .code,
            kExitOk);
  const CliResult r = run({"eval", "--data", other.string(), "--checkpoint", (model / "model.ckpt").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("checkpoint"), std::string::npos);
}

TEST(CliEval, TrainingDataRecallIsAtLeastTestRecall) {
  std::vector<double> gaps;
  for (std::uint64_t seed : {1, 2, 3}) {
    const fs::path data = small_corpus("fit_data_" + std::to_string(seed), seed);
    const fs::path model = fresh_dir("fit_model_" + std::to_string(seed));
    ASSERT_EQ(run(small_train(data, model, 6)).code, kExitOk);
    auto recall = [&](const char* split) {
      const CliResult r = run({"eval", "--data", (data / split).string(), "--checkpoint", (model / "model.ckpt").string(),
                         "--mode", "sgcls", "--k", "50"});
      EXPECT_EQ(r.code, kExitOk) << r.err;
      return last_line_json(r.out)[0]["recall"]["50"].get<double>();
    };
    gaps.push_back(recall("train.jsonl") - recall("test.jsonl"));
  }
  std::sort(gaps.begin(), gaps.end());
  EXPECT_GE(gaps[1], 0.0);
}

TEST(CliEntropy, EmptyFileIsAUsageError) {
  const fs::path p = fresh_dir("entropy_empty.jsonl");
  std::ofstream(p).close();
  EXPECT_EQ(run({"entropy", "--data", p.string()}).code, kExitUsage);
  fs::remove(p);
}

TEST(CliEntropy, StrongContextShowsAPositiveGap) {
  const fs::path dir = fresh_dir("entropy_gamma1");
  ASSERT_EQ(run({"gen", "--out", dir.string(), "--scenes", "2000", "--gamma", "1", "--compact"}).code, kExitOk);
  const CliResult r = run({"entropy", "--data", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = last_line_json(r.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["category"], "objects");
  EXPECT_GT(j[0]["h_marginal"].get<double>() - j[0]["h_conditional"].get<double>(), 0.0);
  EXPECT_NE(r.out.find("Objects"), std::string::npos);
}

TEST(CliGradcheck, FourthOrderStencilPasses) {
  const CliResult r = run({"gradcheck", "--five-point", "--step", "1e-3"});
  EXPECT_EQ(r.code, kExitOk) << r.out;
  EXPECT_NE(r.out.find("gradcheck PASS"), std::string::npos);
}

TEST(CliGradcheck, FailureExitsWithTheNumericalCode) {
  const CliResult r = run({"gradcheck", "--tol", "1e-14"});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.out.find("gradcheck FAIL"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsAUsageError) { EXPECT_EQ(run({}).code, kExitUsage); }

TEST(Cli, HelpExitsCleanly) { EXPECT_EQ(run({"--help"}).code, kExitOk); }

}  // namespace
}  // namespace ilac
