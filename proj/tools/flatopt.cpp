// flatopt: train / landscape / verify / bound / compare.
// Exit codes: 0 ok, 1 runtime error, 2 config error, 3 verification failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flatopt/harness/bound_job.hpp"
#include "flatopt/harness/compare.hpp"
#include "flatopt/harness/landscape.hpp"
#include "flatopt/harness/train.hpp"
#include "flatopt/harness/verify.hpp"

namespace fs = std::filesystem;
using namespace flatopt;
using namespace flatopt::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVerify = 3;

Config load_resolved(const std::string& path, const std::vector<KeySpec>& schema, std::optional<std::uint64_t> seed) {
  Config raw = path.empty() ? Config{} : Config::load(path);
  if (seed) raw.set("seed", std::to_string(*seed));
  return raw.resolve(schema);
}

void write_sidecar(const fs::path& out, const std::string& job) {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  atomic_write(out / (job + ".timestamp"), "finished_unix_s," + std::to_string(secs) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbed-gradient optimizers and flatness checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  std::string config_path, out_dir = ".", suite = "all";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> run_dirs;

  auto add_common = [&](CLI::App* sub, bool with_seed) {
    sub->add_option("--config", config_path, "config file (key = value, [sections])");
    sub->add_option("--out", out_dir, "output directory");
    if (with_seed) sub->add_option("--seed", seed, "overrides the config seed");
  };
  auto* train = app.add_subcommand("train", "train an MLP on a synthetic data set");
  add_common(train, true);
  auto* landscape = app.add_subcommand("landscape", "toy-landscape grids (loss, smoothed, ball max, Taylor)");
  add_common(landscape, true);
  auto* verify = app.add_subcommand("verify", "run an invariant suite");
  add_common(verify, false);
  verify->add_option("--suite", suite, "prop1|prop2|prop3|prop4|upperbound|kl|bound|all");
  auto* bound = app.add_subcommand("bound", "evaluate the PAC-Bayes bound");
  add_common(bound, false);
  auto* compare = app.add_subcommand("compare", "tabulate best test accuracy across runs");
  compare->add_option("--out", out_dir, "output directory");
  compare->add_option("runs", run_dirs, "run directories containing run.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const fs::path out(out_dir);
    if (train->parsed()) {
      const Config c = load_resolved(config_path, train_schema(), seed);
      const RunRecord r = run_training(c);
      write_run(out, r);
      std::printf("%s seed=%llu epochs=%zu final_train_acc=%.4f best_test_acc=%.4f\n", c.str("optimizer").c_str(),
                  static_cast<unsigned long long>(r.summary.seed), r.epochs.size(), r.summary.final_train_acc,
                  r.summary.best_test_acc);
    } else if (landscape->parsed()) {
      const Config c = load_resolved(config_path, landscape_schema(), seed);
      run_landscape(c, out);
      write_sidecar(out, "landscape");
      std::printf("wrote 4 panels to %s\n", out.string().c_str());
    } else if (verify->parsed()) {
      if (!config_path.empty()) throw Error(ErrorKind::ConfigError, "verify takes --suite, not --config");
      const auto checks = run_verify(suite);
      const auto report = verify_report(suite, checks);
      atomic_write(out / ("verify_" + suite + ".json"), report.dump(2) + "\n");
      for (const auto& c : checks)
        std::printf("%s %s value=%.6g\n", c.pass ? "PASS" : "FAIL", c.check.c_str(), c.value);
      if (!report["pass"].get<bool>()) return kExitVerify;
    } else if (bound->parsed()) {
      const Config c = load_resolved(config_path, bound_schema(), std::nullopt);
      const auto row = run_bound(c);
      const std::string csv = bound_csv(row);
      atomic_write(out / "bound.csv", csv);
      std::fputs(csv.c_str(), stdout);
    } else if (compare->parsed()) {
      const auto rows = compare_runs(load_runs(run_dirs));
      const std::string csv = compare_csv(rows);
      atomic_write(out / "comparison.csv", csv);
      std::fputs(csv.c_str(), stdout);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "flatopt: %s\n", e.what());
    switch (e.kind()) {
      case ErrorKind::ConfigError:
      case ErrorKind::UnknownSuite:
      case ErrorKind::InvalidDelta:
        return kExitConfig;
      default:
        return kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "flatopt: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
