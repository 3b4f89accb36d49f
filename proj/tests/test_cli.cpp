#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "btpnn/cli.hpp"
#include "helpers.hpp"

using namespace btpnn;
using btpnn::testing::slurp;
using btpnn::testing::TempDir;
using btpnn::testing::write_file;

namespace {

const char* kToyCsv =
    "x1,x2,y\n"
    "0.1,3,0.2\n0.5,1,0.9\n0.9,2,1.7\n0.3,5,0.5\n0.7,4,1.2\n"
    "0.2,6,0.4\n0.6,8,1.1\n0.8,7,1.5\n0.4,9,0.8\n0.05,10,0.1\n";

std::string toy_config(int burn_in, int iterations, int chains, const std::string& extra = "") {
  return "{\"C0\":0.005,\"K_max\":10,\"alpha_adding\":0.95,\"gamma_adding\":2.0,\"sigma_beta2\":0.01,"
         "\"a_gamma\":2.0,\"b_gamma\":0.005,\"v\":3.0,\"q_lambda\":0.9,\"q_add\":0.28,\"q_delete\":0.28,"
         "\"q_change\":0.44,\"M\":5.0,\"step_size\":0.01,\"burn_in\":" +
         std::to_string(burn_in) + ",\"iterations\":" + std::to_string(iterations) +
         ",\"n_chains\":" + std::to_string(chains) + ",\"seed\":3" + extra + "}";
}

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "btpnn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

class CliFit : public ::testing::Test {
 protected:
  void SetUp() override {
    write_file(dir.file("toy.csv"), kToyCsv);
    write_file(dir.file("cfg.json"), toy_config(5, 10, 2));
    const auto r = run_cli({"fit", "--config", dir.file("cfg.json"), "--data", dir.file("toy.csv"), "--out", dir.file("fit")});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  TempDir dir{"cli_fit"};
};

}  // namespace

TEST_F(CliFit, WritesSamplesTraceAndManifest) {
  const auto samples = read_samples(dir.file("fit/samples.jsonl"));
  EXPECT_EQ(samples.size(), 20u);
  const auto trace = slurp(dir.file("fit/trace.csv"));
  EXPECT_EQ(line_count(trace), 1u + 20u);
  const auto manifest = json::parse(slurp(dir.file("fit/manifest.json")));
  for (const char* key : {"config", "config_resolved", "data", "dataset_fingerprint", "seed", "chains", "samples_hash",
                          "outputs", "versions", "wall_clock_seconds"}) {
    EXPECT_TRUE(manifest.contains(key)) << key;
  }
  EXPECT_EQ(manifest["chains"], 2);
  EXPECT_EQ(manifest["samples_hash"], cli::file_hash(dir.file("fit/samples.jsonl")));
  // lambda is recorded resolved.
  EXPECT_TRUE(manifest["config_resolved"].contains("lambda"));
  EXPECT_FALSE(manifest["config_resolved"].contains("q_lambda"));
}

TEST_F(CliFit, ManifestRerunReproducesSamples) {
  const auto r = run_cli({"fit", "--manifest", dir.file("fit/manifest.json"), "--out", dir.file("rerun")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir.file("rerun/samples.jsonl")), slurp(dir.file("fit/samples.jsonl")));
  write_file(dir.file("toy.csv"), std::string(kToyCsv) + "0.95,11,1.9\n");
  const auto changed = run_cli({"fit", "--manifest", dir.file("fit/manifest.json"), "--out", dir.file("rerun2")});
  EXPECT_EQ(changed.code, 2);
  EXPECT_NE(changed.err.find("fingerprint"), std::string::npos) << changed.err;
}

TEST_F(CliFit, SeedOverrideChangesDraws) {
  const auto r = run_cli({"fit", "--config", dir.file("cfg.json"), "--data", dir.file("toy.csv"), "--out",
                          dir.file("other"), "--seed", "11", "--chains", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_samples(dir.file("other/samples.jsonl")).size(), 10u);
  EXPECT_NE(slurp(dir.file("other/samples.jsonl")), slurp(dir.file("fit/samples.jsonl")));
}

TEST_F(CliFit, PredictWritesIntervals) {
  write_file(dir.file("new.csv"), "x1,x2\n0.5,2\n0.2,9\n");
  const auto r = run_cli({"predict", "--samples", dir.file("fit/samples.jsonl"), "--data", dir.file("new.csv"), "--out",
                          dir.file("pred.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto text = slurp(dir.file("pred.csv"));
  EXPECT_EQ(text.substr(0, text.find('\n')), "row,prediction,lower_2.5,upper_97.5");
  EXPECT_EQ(line_count(text), 3u);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    double row, mean, lo, hi;
    char c;
    std::istringstream ls(line);
    ls >> row >> c >> mean >> c >> lo >> c >> hi;
    EXPECT_LT(lo, mean);
    EXPECT_LT(mean, hi);
  }
  EXPECT_TRUE(std::filesystem::exists(dir.file("pred.csv.manifest.json")));
}

TEST_F(CliFit, ImportanceAndComponents) {
  const auto imp = run_cli({"importance", "--samples", dir.file("fit/samples.jsonl"), "--data", dir.file("toy.csv"),
                            "--normalize"});
  ASSERT_EQ(imp.code, 0) << imp.err;
  std::istringstream in(imp.out);
  std::string header, first;
  std::getline(in, header);
  EXPECT_EQ(header, "rank,set,order,score");
  if (std::getline(in, first)) {
    EXPECT_EQ(first.substr(first.rfind(',') + 1), "1");
  }

  const auto comp = run_cli({"components", "--samples", dir.file("fit/samples.jsonl"), "--data", dir.file("toy.csv"),
                             "--set", "1", "--out", dir.file("c1.csv")});
  ASSERT_EQ(comp.code, 0) << comp.err;
  const auto c1 = slurp(dir.file("c1.csv"));
  EXPECT_EQ(c1.substr(0, c1.find('\n')), "x1,estimate,lower_2.5,upper_97.5");
  EXPECT_EQ(line_count(c1), 102u);
  const auto c2 = run_cli({"components", "--samples", dir.file("fit/samples.jsonl"), "--data", dir.file("toy.csv"),
                           "--set", "2,1"});
  ASSERT_EQ(c2.code, 0) << c2.err;
  EXPECT_EQ(c2.out.substr(0, c2.out.find('\n')), "x1,x2,estimate,lower_2.5,upper_97.5");
  EXPECT_EQ(line_count(c2.out), 1u + 41u * 41u);
  const auto bad = run_cli({"components", "--samples", dir.file("fit/samples.jsonl"), "--data", dir.file("toy.csv"),
                            "--set", "3"});
  EXPECT_EQ(bad.code, 2);
}

TEST(Cli, InvalidConfigExitsWithTwo) {
  TempDir dir("cli_bad");
  write_file(dir.file("toy.csv"), kToyCsv);
  std::string cfg = toy_config(1, 1, 1);
  cfg.replace(cfg.find("\"q_change\":0.44"), 15, "\"q_change\":0.40");
  write_file(dir.file("cfg.json"), cfg);
  const auto r = run_cli({"fit", "--config", dir.file("cfg.json"), "--data", dir.file("toy.csv"), "--out", dir.file("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("q_add + q_delete + q_change"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir.file("o/samples.jsonl")));
  const auto missing = run_cli({"fit", "--config", dir.file("nope.json"), "--data", dir.file("toy.csv"), "--out", dir.file("o")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({"fit"}).code, 2);
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  const auto v = run_cli({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::string(cli::kVersion) + "\n");
}

TEST(Cli, BenchSmoke) {
  TempDir dir("cli_bench");
  write_file(dir.file("spec.json"),
             R"({"function_id": "f2", "n": 500, "p": 10, "snr": 5, "seed": 4,
                 "fit": {"burn_in": 100, "iterations": 100, "K_max": 40}})");
  const auto r = run_cli({"bench", "--spec", dir.file("spec.json"), "--out", dir.file("report.json"), "--data-out",
                          dir.file("data.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = json::parse(slurp(dir.file("report.json")));
  for (const char* key : {"function_id", "family", "n", "p", "snr", "seed", "n_train", "n_test", "noise_variance",
                          "n_samples", "mean_K", "metrics", "component_selection_auroc", "acceptance"}) {
    EXPECT_TRUE(rep.contains(key)) << key;
  }
  EXPECT_EQ(rep["n_train"], 400);
  EXPECT_EQ(rep["n_test"], 100);
  EXPECT_EQ(rep["n_samples"], 100);
  for (const char* m : {"rmse", "nll", "crps"}) EXPECT_TRUE(rep["metrics"][m].is_number()) << m;
  for (const char* d : {"1", "2", "3"}) EXPECT_TRUE(rep["component_selection_auroc"][d].is_number()) << d;
  const auto data = load_csv(dir.file("data.csv"), "y", Family::gaussian);
  EXPECT_EQ(data.n, 500u);
  const auto truth = json::parse(slurp(dir.file("data.csv.truth.json")));
  EXPECT_TRUE(truth["signal_sets"].is_array());
  EXPECT_TRUE(std::filesystem::exists(dir.file("report.json.manifest.json")));

  write_file(dir.file("bad.json"), R"({"function_id": "f2", "p": 5})");
  EXPECT_EQ(run_cli({"bench", "--spec", dir.file("bad.json"), "--out", dir.file("r2.json")}).code, 2);
}

TEST(Cli, BinaryExitCodes) {
  const std::string bin = BTPNN_CLI_PATH;
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
  };
  EXPECT_EQ(status(bin + " --version"), 0);
  EXPECT_EQ(status(bin + " predict --samples /nonexistent.jsonl --data /nonexistent.csv --out /tmp/x.csv"), 2);
  EXPECT_EQ(status(bin + " nonsense"), 2);
}
