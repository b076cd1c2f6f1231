#pragma once

// `compare` job: best test accuracy per (dataset, optimizer), mean and
// sample standard deviation over seeds, in percent.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "flatopt/harness/run_record.hpp"

namespace flatopt::harness {

struct CompareRow {
  std::string dataset;
  std::string optimizer;
  std::size_t runs = 0;
  double mean = 0.0;  // percent
  double std = 0.0;   // percent, n - 1 denominator; 0 for a single run
};

/// m.mm^{+-s.ss}
inline std::string format_mean_std(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f^{±%.2f}", mean, std);
  return buf;
}

inline std::vector<CompareRow> compare_runs(const std::vector<RunRecord>& runs) {
  if (runs.empty()) throw Error(ErrorKind::MissingRun, "compare needs at least one run");
  struct Group {
    std::string dataset, optimizer;
    std::vector<double> acc;
  };
  std::vector<Group> groups;
  for (const auto& r : runs) {
    const std::string ds = r.config.str("dataset"), opt = r.config.str("optimizer");
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.dataset == ds && g.optimizer == opt; });
    if (it == groups.end()) {
      groups.push_back({ds, opt, {}});
      it = std::prev(groups.end());
    }
    it->acc.push_back(100.0 * r.summary.best_test_acc);
  }
  std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
    return std::tie(a.dataset, a.optimizer) < std::tie(b.dataset, b.optimizer);
  });
  std::vector<CompareRow> out;
  for (const auto& g : groups) {
    CompareRow row{g.dataset, g.optimizer, g.acc.size(), 0.0, 0.0};
    for (double a : g.acc) row.mean += a;
    row.mean /= static_cast<double>(g.acc.size());
    if (g.acc.size() > 1) {
      double ss = 0.0;
      for (double a : g.acc) ss += (a - row.mean) * (a - row.mean);
      row.std = std::sqrt(ss / static_cast<double>(g.acc.size() - 1));
    }
    out.push_back(row);
  }
  return out;
}

inline std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "dataset,optimizer,runs,mean,std,formatted\n";
  for (const auto& r : rows)
    out += r.dataset + "," + r.optimizer + "," + std::to_string(r.runs) + "," + format_double(r.mean) + "," +
           format_double(r.std) + "," + format_mean_std(r.mean, r.std) + "\n";
  return out;
}

inline std::vector<RunRecord> load_runs(const std::vector<std::string>& dirs) {
  std::vector<RunRecord> runs;
  for (const auto& d : dirs) runs.push_back(load_run(d));
  return runs;
}

}  // namespace flatopt::harness
