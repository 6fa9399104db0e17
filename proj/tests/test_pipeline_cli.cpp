#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oracles.hpp"

using namespace tlstm;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status;
  std::string out;
};

CliRun cli(const std::string& args, const fs::path& cwd) {
  const fs::path log = cwd / "cli_output.txt";
  const std::string cmd = "cd '" + cwd.string() + "' && '" TLSTM_CLI_PATH "' " + args + " > '" + log.string() + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove(log);
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tlstm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json j = {{"data", (dir_ / "d.csv").string()}, {"max_epochs", 2}, {"batch_size", 64}};
    j.update(extra);
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }
  void synth(std::size_t records = 1500) {
    ASSERT_EQ(cli("synth --records " + std::to_string(records) + " --seed 7 --cycles 3 --out d.csv", dir_).status, 0);
  }

  fs::path dir_;
};

}  // namespace

TEST(RunConfigJson, UnknownKeyRejected) {
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"data", "x.csv"}, {"learning_rate", 0.1}}), Error);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"data", "x.csv"}, {"mode", "fancy"}}), Error);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"data", "x.csv"}, {"max_epochs", "many"}}), Error);
}

TEST(RunConfigJson, EchoRoundTrips) {
  RunConfig c;
  c.data = "x.csv";
  c.mode = ModelMode::Baseline;
  c.n_components = 7;
  c.train.seed = 99;
  c.train.lr0 = 0.003;
  c.column_map = {{"SOC", "soc"}};
  const RunConfig back = run_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(RunConfigJson, ComponentRangeValidated) {
  RunConfig c;
  c.data = "x.csv";
  c.n_components = 0;
  EXPECT_THROW(c.validate(), Error);
  c.n_components = 15;
  EXPECT_THROW(c.validate(), Error);
  c.n_components = 14;
  EXPECT_NO_THROW(c.validate());
}

TEST_F(CliTest, SynthWritesRequestedRowsDeterministically) {
  ASSERT_EQ(cli("synth --records 1000 --seed 7 --out a.csv", dir_).status, 0);
  ASSERT_EQ(cli("synth --records 1000 --seed 7 --out b.csv", dir_).status, 0);
  const std::string a = slurp(dir_ / "a.csv");
  EXPECT_EQ(a, slurp(dir_ / "b.csv"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 1001);
  EXPECT_EQ(parse_telemetry(dir_ / "a.csv").records.size(), 1000u);
}

TEST_F(CliTest, SynthRejectsZeroRecords) {
  const CliRun r = cli("synth --records 0 --out z.csv", dir_);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("--records"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "z.csv"));
}

TEST_F(CliTest, TrainTuckerWritesProjection) {
  synth();
  const fs::path cfg = write_config("t.json", {{"mode", "tucker"}});
  const CliRun r = cli("train --config t.json --out run_t --quiet", dir_);
  ASSERT_EQ(r.status, 0) << r.out;
  const fs::path run = dir_ / "run_t";
  for (const char* f : {"model.ckpt", "preprocess.json", "projection.json", "train_report.json", "loss_curve.csv",
                        "metrics.json", "test_timeseries.csv", "test_residual_hist.csv", "test_scatter.csv",
                        "config_echo.json", "timing.json"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  const auto proj = nlohmann::json::parse(slurp(run / "projection.json"));
  EXPECT_EQ(proj["k"], 10);
  EXPECT_EQ(load_checkpoint(run / "model.ckpt").input_dim(), 10u);
  const auto echo = nlohmann::json::parse(slurp(run / "config_echo.json"));
  EXPECT_EQ(echo["toolkit_version"], kToolkitVersion);
  EXPECT_EQ(echo["mode"], "tucker");
  EXPECT_EQ(echo["max_epochs"], 2);
}

TEST_F(CliTest, TrainBaselineHasNoProjection) {
  synth();
  write_config("b.json", {{"mode", "baseline"}});
  const CliRun r = cli("train --config b.json --out run_b --quiet", dir_);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_FALSE(fs::exists(dir_ / "run_b" / "projection.json"));
  EXPECT_EQ(load_checkpoint(dir_ / "run_b" / "model.ckpt").input_dim(), 14u);
  const auto m = nlohmann::json::parse(slurp(dir_ / "run_b" / "metrics.json"));
  EXPECT_EQ(m["input_dim"], 14);
}

TEST_F(CliTest, OverridesApply) {
  synth();
  write_config("c.json");
  const CliRun r = cli("train --config c.json --out run_k --mode tucker --components 6 --seed 3 --quiet", dir_);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(load_checkpoint(dir_ / "run_k" / "model.ckpt").input_dim(), 6u);
  const auto echo = nlohmann::json::parse(slurp(dir_ / "run_k" / "config_echo.json"));
  EXPECT_EQ(echo["seed"], 3);
  EXPECT_EQ(echo["n_components"], 6);
}

TEST_F(CliTest, CorruptCsvNamesLine) {
  synth(300);
  {
    std::ofstream(dir_ / "d.csv", std::ios::app) << "1,2,3\n";
  }
  write_config("c.json");
  const CliRun r = cli("train --config c.json --out run_c", dir_);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("line 302"), std::string::npos) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
}

TEST_F(CliTest, MissingDataFileFails) {
  const fs::path cfg = write_config("m.json", {{"data", (dir_ / "nope.csv").string()}});
  const CliRun r = cli("train --config m.json --out run_m", dir_);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("nope.csv"), std::string::npos);
}

TEST_F(CliTest, RefusesNonEmptyOutputWithoutForce) {
  synth();
  write_config("c.json");
  fs::create_directories(dir_ / "busy");
  std::ofstream(dir_ / "busy" / "keep.txt") << "x";
  const CliRun r = cli("train --config c.json --out busy --quiet", dir_);
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("--force"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "busy" / "model.ckpt"));
  EXPECT_EQ(cli("train --config c.json --out busy --force --quiet", dir_).status, 0);
  EXPECT_TRUE(fs::exists(dir_ / "busy" / "model.ckpt"));
}

TEST_F(CliTest, EvaluateReproducesTrainMetrics) {
  synth();
  write_config("c.json");
  ASSERT_EQ(cli("train --config c.json --out run_e --quiet", dir_).status, 0);
  const CliRun r = cli("evaluate --config c.json --out run_e", dir_);
  ASSERT_EQ(r.status, 0) << r.out;
  const auto trained = nlohmann::json::parse(slurp(dir_ / "run_e" / "metrics.json"));
  const auto evald = nlohmann::json::parse(slurp(dir_ / "run_e" / "evaluation.json"));
  for (int s = 0; s < 3; ++s) {
    EXPECT_EQ(trained["splits"][s]["n"], evald["splits"][s]["n"]);
    EXPECT_NEAR(trained["splits"][s]["mse"].get<double>(), evald["splits"][s]["mse"].get<double>(), 1e-9);
  }
}

TEST_F(CliTest, CompareWritesTableAndMatchingEchoes) {
  synth();
  write_config("c.json");
  const CliRun r = cli("compare --config c.json --out cmp --quiet", dir_);
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string table = slurp(dir_ / "cmp" / "comparison.txt");
  EXPECT_EQ(table.rfind("Model", 0), 0u);
  EXPECT_NE(table.find("RMSE(%)"), std::string::npos);
  EXPECT_NE(table.find("\nLSTM "), std::string::npos);
  EXPECT_NE(table.find("\nTucker-LSTM "), std::string::npos);
  EXPECT_NE(r.out.find("Tucker-LSTM"), std::string::npos);

  auto echo_b = nlohmann::json::parse(slurp(dir_ / "cmp" / "baseline" / "config_echo.json"));
  auto echo_t = nlohmann::json::parse(slurp(dir_ / "cmp" / "tucker" / "config_echo.json"));
  EXPECT_EQ(echo_b["mode"], "baseline");
  EXPECT_EQ(echo_t["mode"], "tucker");
  for (auto* e : {&echo_b, &echo_t}) {
    e->erase("mode");
    e->erase("output_dir");
  }
  EXPECT_EQ(echo_b, echo_t);

  const auto rb = nlohmann::json::parse(slurp(dir_ / "cmp" / "baseline" / "metrics.json"));
  const auto rt = nlohmann::json::parse(slurp(dir_ / "cmp" / "tucker" / "metrics.json"));
  EXPECT_EQ(rb["input_dim"], 14);
  EXPECT_EQ(rt["input_dim"], 10);
  for (int s = 0; s < 3; ++s) EXPECT_EQ(rb["splits"][s]["n"], rt["splits"][s]["n"]);
  EXPECT_NE(cli("compare --config c.json --out cmp --quiet", dir_).status, 0);
}

TEST_F(CliTest, EchoReproducesRun) {
  synth();
  write_config("c.json");
  ASSERT_EQ(cli("train --config c.json --out r1 --quiet", dir_).status, 0);
  ASSERT_EQ(cli("train --config r1/config_echo.json --out r2 --quiet", dir_).status, 0);
  for (const char* f : {"model.ckpt", "train_report.json", "metrics.json", "test_timeseries.csv"})
    EXPECT_EQ(slurp(dir_ / "r1" / f), slurp(dir_ / "r2" / f)) << f;
}
