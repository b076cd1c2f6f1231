#pragma once

// `bound` job: one-row CSV with the bound evaluated with and without the
// covering term.

#include <cmath>
#include <string>
#include <vector>

#include "flatopt/dataset.hpp"
#include "flatopt/harness/config.hpp"
#include "flatopt/pacbayes.hpp"

namespace flatopt::harness {

inline const std::vector<KeySpec>& bound_schema() {
  static const std::vector<KeySpec> schema = {
      {"bound", "p", "162"},
      {"bound", "n", "400"},
      {"bound", "delta", "0.05"},
      {"bound", "kl", "0"},
      {"bound", "empirical_sam_loss", "0"},
      {"bound", "loss_max", "1"},
      {"bound", "c_cover", "1"},
      {"bound", "gamma_form", "main"},
  };
  return schema;
}

struct BoundRow {
  BoundInputs inputs;
  double gamma = 0.0;
  double with_cover = 0.0;
  double without_cover = 0.0;
};

inline BoundRow run_bound(const Config& c) {
  BoundInputs in;
  in.p = static_cast<std::size_t>(c.positive_integer("p"));
  in.n = static_cast<std::size_t>(c.positive_integer("n"));
  in.delta = c.real("delta");
  in.kl_value = c.real("kl");
  in.empirical_sam_loss = c.real("empirical_sam_loss");
  in.loss_max = c.real("loss_max");
  const double c_cover = c.real("c_cover");
  if (!(c_cover >= 0.0)) throw Error(ErrorKind::ConfigError, "key 'c_cover' must be >= 0");
  const auto form = c.choice("gamma_form", {"main", "appendix"}) == "main" ? GammaForm::Main : GammaForm::Appendix;
  if (in.n < 2) throw Error(ErrorKind::ConfigError, "key 'n' must be >= 2");
  if (!(in.kl_value >= 0.0)) throw Error(ErrorKind::ConfigError, "key 'kl' must be >= 0");
  if (!(in.loss_max >= 0.0)) throw Error(ErrorKind::ConfigError, "key 'loss_max' must be >= 0");
  BoundRow r{in, gamma_radius(in.p, in.n, form), pac_bound(in, c_cover), pac_bound(in, 0.0)};
  return r;
}

inline std::string bound_csv(const BoundRow& r) {
  return "p,n,delta,kl,gamma,bound_with_cover,bound_without_cover\n" + std::to_string(r.inputs.p) + "," +
         std::to_string(r.inputs.n) + "," + format_double(r.inputs.delta) + "," + format_double(r.inputs.kl_value) +
         "," + format_double(r.gamma) + "," + format_double(r.with_cover) + "," + format_double(r.without_cover) +
         "\n";
}

}  // namespace flatopt::harness
