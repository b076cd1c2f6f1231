#pragma once

// run.json holds the resolved config, the per-epoch metrics and a summary.
// Wall-clock times are kept out of it (and out of metrics.csv) so reruns are
// byte-identical; they go to timing.csv next to it.

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flatopt/dataset.hpp"
#include "flatopt/harness/config.hpp"
#include "flatopt/harness/io.hpp"

#ifndef FLATOPT_VERSION
#define FLATOPT_VERSION "v0.1.0"
#endif

namespace flatopt::harness {

inline constexpr int kFormatVersion = 1;

inline std::string version_string() { return FLATOPT_VERSION; }

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
  double mean_sigma2 = 0.0;
  double wall_ms = 0.0;

  friend bool operator==(const EpochRow&, const EpochRow&) = default;
};

struct RunSummary {
  double best_test_acc = 0.0;
  double final_train_acc = 0.0;
  double final_test_acc = 0.0;
  std::uint64_t seed = 0;
  std::string version;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct RunRecord {
  int format_version = kFormatVersion;
  Config config;
  std::vector<EpochRow> epochs;
  RunSummary summary;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline void check_record(const RunRecord& r) {
  for (std::size_t i = 0; i < r.epochs.size(); ++i) {
    const auto& e = r.epochs[i];
    if (e.epoch != static_cast<int>(i)) throw Error(ErrorKind::MissingRun, "epochs are not contiguous from 0");
    for (double a : {e.train_acc, e.test_acc})
      if (!(a >= 0.0 && a <= 1.0)) throw Error(ErrorKind::MissingRun, "accuracy outside [0, 1]");
  }
}

inline std::string metrics_csv(const RunRecord& r) {
  std::string out = "epoch,train_loss,train_acc,test_loss,test_acc,mean_sigma2\n";
  for (const auto& e : r.epochs) {
    out += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," + format_double(e.train_acc) + "," +
           format_double(e.test_loss) + "," + format_double(e.test_acc) + "," + format_double(e.mean_sigma2) + "\n";
  }
  return out;
}

inline std::string timing_csv(const RunRecord& r) {
  std::string out = "epoch,wall_ms\n";
  for (const auto& e : r.epochs) out += std::to_string(e.epoch) + "," + format_double(e.wall_ms) + "\n";
  return out;
}

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["format_version"] = r.format_version;
  j["config"] = r.config.to_json();
  auto rows = nlohmann::ordered_json::array();
  for (const auto& e : r.epochs) {
    nlohmann::ordered_json row;
    row["epoch"] = e.epoch;
    row["train_loss"] = e.train_loss;
    row["train_acc"] = e.train_acc;
    row["test_loss"] = e.test_loss;
    row["test_acc"] = e.test_acc;
    row["mean_sigma2"] = e.mean_sigma2;
    rows.push_back(std::move(row));
  }
  j["epochs"] = std::move(rows);
  nlohmann::ordered_json s;
  s["best_test_acc"] = r.summary.best_test_acc;
  s["final_train_acc"] = r.summary.final_train_acc;
  s["final_test_acc"] = r.summary.final_test_acc;
  s["seed"] = r.summary.seed;
  s["version"] = r.summary.version;
  j["summary"] = std::move(s);
  return j;
}

inline RunRecord from_json(const nlohmann::ordered_json& j) {
  try {
    RunRecord r;
    r.format_version = j.at("format_version").get<int>();
    if (r.format_version != kFormatVersion)
      throw Error(ErrorKind::MissingRun, "unsupported run.json format_version " + std::to_string(r.format_version));
    r.config = Config::from_json(j.at("config"));
    for (const auto& row : j.at("epochs")) {
      EpochRow e;
      e.epoch = row.at("epoch").get<int>();
      e.train_loss = row.at("train_loss").get<double>();
      e.train_acc = row.at("train_acc").get<double>();
      e.test_loss = row.at("test_loss").get<double>();
      e.test_acc = row.at("test_acc").get<double>();
      e.mean_sigma2 = row.at("mean_sigma2").get<double>();
      r.epochs.push_back(e);
    }
    const auto& s = j.at("summary");
    r.summary.best_test_acc = s.at("best_test_acc").get<double>();
    r.summary.final_train_acc = s.at("final_train_acc").get<double>();
    r.summary.final_test_acc = s.at("final_test_acc").get<double>();
    r.summary.seed = s.at("seed").get<std::uint64_t>();
    r.summary.version = s.at("version").get<std::string>();
    check_record(r);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MissingRun, std::string("malformed run.json: ") + e.what());
  }
}

/// Writes run.json, metrics.csv and timing.csv into dir.
inline void write_run(const std::filesystem::path& dir, const RunRecord& r) {
  check_record(r);
  atomic_write(dir / "run.json", to_json(r).dump(2) + "\n");
  atomic_write(dir / "metrics.csv", metrics_csv(r));
  atomic_write(dir / "timing.csv", timing_csv(r));
}

/// Reads run.json from dir, plus wall times from timing.csv when present.
inline RunRecord load_run(const std::filesystem::path& dir) {
  const auto path = dir / "run.json";
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::MissingRun, "no run.json in " + dir.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MissingRun, path.string() + ": " + e.what());
  }
  RunRecord r = from_json(j);
  if (std::filesystem::exists(dir / "timing.csv")) {
    std::istringstream in(read_file(dir / "timing.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto comma = line.find(',');
      if (comma == std::string::npos) continue;
      const auto epoch = std::stoul(line.substr(0, comma));
      if (epoch < r.epochs.size()) r.epochs[epoch].wall_ms = std::stod(line.substr(comma + 1));
    }
  }
  return r;
}

}  // namespace flatopt::harness
