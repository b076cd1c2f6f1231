#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "flatopt_cli_test";

struct Result {
  int code;
  std::string output;
};

Result run(const std::string& args, const std::string& env = "") {
  const fs::path log = kRoot / "last.log";
  fs::create_directories(kRoot);
  const std::string cmd = env + " \"" FLATOPT_CLI_PATH "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::create_directories(kRoot);
  const fs::path p = kRoot / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSmall = "[data]\nn_train = 64\nn_test = 64\n[optim]\nepochs = 4\nbatch_size = 16\nschedule = 2:0.5\n";

}  // namespace

TEST(Cli, TrainWritesReproducibleOutputs) {
  const auto cfg = write_config("small.cfg", std::string(kSmall) + "optimizer = sam\n");
  const fs::path a = kRoot / "train_a", b = kRoot / "train_b";
  fs::remove_all(a);
  fs::remove_all(b);
  ASSERT_EQ(run("train --config " + cfg.string() + " --out " + a.string() + " --seed 3").code, 0);
  ASSERT_EQ(run("train --config " + cfg.string() + " --out " + b.string() + " --seed 3").code, 0);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "run.json"), slurp(b / "run.json"));
  EXPECT_TRUE(fs::exists(a / "timing.csv"));
  const fs::path c = kRoot / "train_c";
  ASSERT_EQ(run("train --config " + cfg.string() + " --out " + c.string() + " --seed 4").code, 0);
  EXPECT_NE(slurp(a / "metrics.csv"), slurp(c / "metrics.csv"));
}

TEST(Cli, SamWithZeroRhoMatchesSgd) {
  const std::string base = std::string(kSmall) + "epoch_parity = equal\n";
  const auto sgd = write_config("sgd.cfg", base + "optimizer = sgd\n");
  const auto sam = write_config("sam0.cfg", base + "optimizer = sam\nrho = 0\n");
  ASSERT_EQ(run("train --config " + sgd.string() + " --out " + (kRoot / "sgd").string()).code, 0);
  ASSERT_EQ(run("train --config " + sam.string() + " --out " + (kRoot / "sam0").string()).code, 0);
  EXPECT_EQ(slurp(kRoot / "sgd" / "metrics.csv"), slurp(kRoot / "sam0" / "metrics.csv"));
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto bad = write_config("bad.cfg", "[optim]\noptimizer = adam\n");
  const auto r = run("train --config " + bad.string() + " --out " + (kRoot / "bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("optimizer"), std::string::npos);
  const auto unknown = write_config("unknown.cfg", "learning_rate = 0.1\n");
  const auto u = run("train --config " + unknown.string());
  EXPECT_EQ(u.code, 2);
  EXPECT_NE(u.output.find("learning_rate"), std::string::npos);
  EXPECT_EQ(run("train --config /nonexistent/x.cfg").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --seed notanumber").code, 2);
  EXPECT_EQ(run("verify --suite nosuch --out " + kRoot.string()).code, 2);
  const auto delta = write_config("delta.cfg", "delta = 2\n");
  EXPECT_EQ(run("bound --config " + delta.string() + " --out " + kRoot.string()).code, 2);
}

TEST(Cli, VerifyKlPasses) {
  const auto r = run("verify --suite kl --out " + kRoot.string());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("PASS kl.scalar_quadrature"), std::string::npos);
  EXPECT_EQ(r.output.find("FAIL"), std::string::npos);
  const std::string report = slurp(kRoot / "verify_kl.json");
  EXPECT_NE(report.find("\"pass\": true"), std::string::npos);
}

TEST(Cli, BoundAndCompare) {
  const auto cfg = write_config("bound.cfg", "p = 2\nn = 100\n");
  const auto r = run("bound --config " + cfg.string() + " --out " + kRoot.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(slurp(kRoot / "bound.csv"), r.output);

  const auto cfg2 = write_config("small_sgd.cfg", std::string(kSmall));
  for (int s : {1, 2})
    ASSERT_EQ(run("train --config " + cfg2.string() + " --seed " + std::to_string(s) + " --out " +
                  (kRoot / ("cmp" + std::to_string(s))).string())
                  .code,
              0);
  const auto c = run("compare " + (kRoot / "cmp1").string() + " " + (kRoot / "cmp2").string() + " --out " +
                     kRoot.string());
  EXPECT_EQ(c.code, 0) << c.output;
  EXPECT_NE(c.output.find("two_moons,sgd,2,"), std::string::npos);
  EXPECT_NE(run("compare " + (kRoot / "nothing_here").string()).code, 0);
}

TEST(Cli, LandscapeWritesPanelsAndSidecar) {
  const auto cfg = write_config("land.cfg", "[grid]\nresolution = 21\n[perturbation]\nmc_samples = 20\n");
  const fs::path out = kRoot / "land";
  ASSERT_EQ(run("landscape --config " + cfg.string() + " --out " + out.string(), "FLATOPT_THREADS=1").code, 0);
  EXPECT_TRUE(fs::exists(out / "panel_c_ball_max.csv"));
  EXPECT_TRUE(fs::exists(out / "landscape.timestamp"));
  const std::string first = slurp(out / "panel_b_smoothed.csv");
  ASSERT_EQ(run("landscape --config " + cfg.string() + " --out " + out.string()).code, 0);
  EXPECT_EQ(slurp(out / "panel_b_smoothed.csv"), first);
}

TEST(Cli, BadThreadCapIsConfigError) {
  const auto cfg = write_config("land2.cfg", "[grid]\nresolution = 5\n");
  EXPECT_EQ(run("landscape --config " + cfg.string() + " --out " + (kRoot / "l2").string(), "FLATOPT_THREADS=-1").code,
            2);
}
