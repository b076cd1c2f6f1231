#pragma once

// `train` job: an MLP on a synthetic data set, optimized by one of the
// presets sgd, sam, asam, fsam, rsam, mfvi, vsam.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "flatopt/dataset.hpp"
#include "flatopt/harness/config.hpp"
#include "flatopt/harness/run_record.hpp"
#include "flatopt/mlp.hpp"
#include "flatopt/optimizer.hpp"

namespace flatopt::harness {

inline const std::vector<KeySpec>& train_schema() {
  static const std::vector<KeySpec> schema = {
      {"data", "dataset", "two_moons"},
      {"data", "n_train", "400"},
      {"data", "n_test", "400"},
      {"data", "noise", "0.1"},
      {"data", "classes", "3"},
      {"data", "spread", "1.0"},
      {"data", "data_seed", "7"},
      {"model", "hidden", "32"},
      {"model", "label_smoothing", "0.1"},
      {"optim", "optimizer", "sgd"},
      {"optim", "lr", "0.1"},
      {"optim", "momentum", "0.9"},
      {"optim", "weight_decay", "0.0005"},
      {"optim", "batch_size", "128"},
      {"optim", "epochs", "200"},
      {"optim", "epoch_parity", "flops"},
      {"optim", "schedule", "100:0.2,150:0.04"},
      {"optim", "rho", "0.05"},
      {"optim", "lr_sigma", "0.01"},
      {"optim", "sigma0", "auto"},
      {"optim", "asam_rule", "table1"},
      {"optim", "fsam_rule", "fisher"},
      {"optim", "fisher_damping", "1e-8"},
      {"run", "seed", "1"},
  };
  return schema;
}

/// "e1:m1,e2:m2" (or "none") into schedule breakpoints.
inline StepSchedule parse_schedule(const std::string& text) {
  StepSchedule s;
  if (text.empty() || text == "none") return s;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, comma - pos);
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument("missing ':'");
      std::size_t used = 0;
      const int epoch = std::stoi(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("epoch");
      const std::string m = item.substr(colon + 1);
      const double mult = std::stod(m, &used);
      if (used != m.size() || epoch < 0 || !(mult >= 0.0)) throw std::invalid_argument("value");
      s.breakpoints.emplace_back(epoch, mult);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::ConfigError, "key 'schedule': bad entry '" + item + "'");
    }
    pos = comma + 1;
  }
  try {
    validate_schedule(s);
  } catch (const Error&) {
    throw Error(ErrorKind::ConfigError, "key 'schedule': epochs must be strictly increasing");
  }
  return s;
}

inline bool one_backprop(const std::string& optimizer) {
  return optimizer == "sgd" || optimizer == "rsam" || optimizer == "mfvi";
}

/// Epoch multiplier from the parity convention: under `flops`, optimizers
/// with one gradient per step get twice the epochs of the two-gradient ones.
inline int epoch_factor(const Config& c) {
  const auto& parity = c.choice("epoch_parity", {"flops", "equal"});
  return parity == "flops" && one_backprop(c.str("optimizer")) ? 2 : 1;
}

struct TrainSetup {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> widths;
  OptimizerConfig optimizer;
  int epochs = 0;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
};

inline Dataset make_dataset(const Config& c, std::size_t n, std::uint64_t seed) {
  const auto& name = c.choice("dataset", {"two_moons", "blobs"});
  if (name == "two_moons") return make_two_moons(n, c.real("noise"), seed);
  const auto k = c.positive_integer("classes");
  if (k < 2) throw Error(ErrorKind::ConfigError, "key 'classes' must be >= 2");
  return make_blobs(n, static_cast<int>(k), c.real("spread"), seed, 2, static_cast<std::uint64_t>(c.integer("data_seed")));
}

/// Turns a resolved config into data, model widths and optimizer settings.
inline TrainSetup build_setup(const Config& c) {
  TrainSetup s;
  s.seed = static_cast<std::uint64_t>(c.integer("seed"));
  const auto data_seed = static_cast<std::uint64_t>(c.integer("data_seed"));
  const auto n_train = static_cast<std::size_t>(c.positive_integer("n_train"));
  s.train = make_dataset(c, n_train, data_seed);
  s.test = make_dataset(c, static_cast<std::size_t>(c.positive_integer("n_test")), data_seed + 1);

  s.widths.push_back(s.train.d);
  {
    const std::string& h = c.str("hidden");
    std::size_t pos = 0;
    while (pos <= h.size()) {
      const auto comma = std::min(h.find(',', pos), h.size());
      const std::string item = detail::trim(h.substr(pos, comma - pos));
      std::size_t used = 0;
      long w = 0;
      try {
        w = std::stol(item, &used);
      } catch (const std::logic_error&) {
        used = 0;
      }
      if (used == 0 || used != item.size() || w <= 0)
        throw Error(ErrorKind::ConfigError, "key 'hidden': bad width '" + item + "'");
      s.widths.push_back(static_cast<std::size_t>(w));
      pos = comma + 1;
    }
  }
  s.widths.push_back(static_cast<std::size_t>(s.train.num_classes));
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < s.widths.size(); ++l) p += s.widths[l + 1] * (s.widths[l] + 1);

  const std::string& name =
      c.choice("optimizer", {"sgd", "sam", "asam", "fsam", "rsam", "mfvi", "vsam"});
  const double rho = c.real("rho");
  const double wd = c.real("weight_decay");
  if (!(rho >= 0.0)) throw Error(ErrorKind::ConfigError, "key 'rho' must be >= 0");
  if (!(wd >= 0.0)) throw Error(ErrorKind::ConfigError, "key 'weight_decay' must be >= 0");
  const double ls = c.real("label_smoothing");
  if (!(ls >= 0.0 && ls < 1.0)) throw Error(ErrorKind::ConfigError, "key 'label_smoothing' must lie in [0, 1)");

  const int factor = epoch_factor(c);
  s.epochs = static_cast<int>(c.positive_integer("epochs")) * factor;
  s.batch_size = static_cast<std::size_t>(c.positive_integer("batch_size"));

  OptimizerConfig& o = s.optimizer;
  o.lr_mu = c.real("lr");
  o.momentum = c.real("momentum");
  o.seed = s.seed;
  o.schedule = parse_schedule(c.str("schedule"));
  for (auto& bp : o.schedule.breakpoints) bp.first *= factor;
  o.penalty = L2Penalty{wd / 2.0};
  const double pd = static_cast<double>(p);
  const double sigma2_init = rho * rho / pd;

  auto kl_penalty = [&] {
    double sigma0 = 0.0;
    if (c.str("sigma0") == "auto") {
      // KL mu-part 1/(2 N sigma0^2) |mu|^2 matches weight decay wd/2 |mu|^2.
      if (!(wd > 0.0)) throw Error(ErrorKind::ConfigError, "key 'sigma0': auto needs weight_decay > 0");
      sigma0 = 1.0 / std::sqrt(static_cast<double>(n_train) * wd);
    } else {
      sigma0 = c.real("sigma0");
      if (!(sigma0 > 0.0)) throw Error(ErrorKind::ConfigError, "key 'sigma0' must be positive");
    }
    return KlPenalty{sigma0, static_cast<double>(n_train)};
  };
  auto learned = [&] {
    if (!(rho > 0.0)) throw Error(ErrorKind::ConfigError, "key 'rho' must be > 0 for a learned covariance");
    o.learn_sigma = true;
    o.lr_sigma = c.real("lr_sigma");
    if (!(o.lr_sigma > 0.0)) throw Error(ErrorKind::ConfigError, "key 'lr_sigma' must be > 0");
    o.covariance = CovarianceSpec::diagonal(Vec(p, sigma2_init));
    o.penalty = kl_penalty();
  };

  if (name == "sgd") {
    o.perturbation = Perturbation::None;
  } else if (name == "sam") {
    o.perturbation = Perturbation::WorstCase;
    o.covariance = CovarianceSpec::isotropic(rho);
  } else if (name == "asam" || name == "fsam") {
    if (!(rho > 0.0)) throw Error(ErrorKind::ConfigError, "key 'rho' must be > 0 for " + name);
    o.perturbation = Perturbation::WorstCase;
    if (name == "asam") {
      const auto& rule = c.choice("asam_rule", {"table1", "weight_squared"});
      o.covariance = CovarianceSpec::mu_adaptive(rule == "table1" ? AsamRule::Table1 : AsamRule::WeightSquared,
                                                 sigma2_init);
    } else {
      const auto& rule = c.choice("fsam_rule", {"fisher", "inverse"});
      const double damping = c.real("fisher_damping");
      if (!(damping >= 0.0)) throw Error(ErrorKind::ConfigError, "key 'fisher_damping' must be >= 0");
      o.covariance = CovarianceSpec::fisher_adaptive(
          damping, rule == "fisher" ? FisherRule::Fisher : FisherRule::Inverse, sigma2_init);
    }
  } else if (name == "rsam") {
    o.perturbation = Perturbation::Gaussian;
    o.covariance = CovarianceSpec::isotropic(rho);
  } else if (name == "mfvi") {
    o.perturbation = Perturbation::Gaussian;
    learned();
  } else {
    o.perturbation = Perturbation::WorstCase;
    learned();
  }
  try {
    validate(o);
  } catch (const Error& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  return s;
}

/// Deterministic epoch permutation (Fisher-Yates on a counter stream).
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const CounterRng rng(seed ^ 0x5eed0f0dULL, static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i, i)]);
  return order;
}

/// Trains per the resolved config; the record's config is `c` itself.
inline RunRecord run_training(const Config& c) {
  TrainSetup s = build_setup(c);
  const auto train = std::make_shared<const Dataset>(s.train);
  const MlpObjective model(s.widths, c.real("label_smoothing"), train);
  OptimizerState state = init_state(s.optimizer, model.init_params(s.seed));

  RunRecord r;
  r.config = c;
  r.summary.seed = s.seed;
  r.summary.version = version_string();
  for (int epoch = 0; epoch < s.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr_scale = apply_schedule(s.optimizer.schedule, epoch);
    const auto order = epoch_order(train->n, s.seed, epoch);
    for (std::size_t start = 0; start < order.size(); start += s.batch_size) {
      const std::size_t stop = std::min(order.size(), start + s.batch_size);
      step(state, model, Batch(order.data() + start, stop - start), s.optimizer, lr_scale);
    }
    if (!vec::all_finite(state.mu.values()))
      throw Error(ErrorKind::NonFiniteValue, "parameters diverged at epoch " + std::to_string(epoch));
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = model.loss_on(state.mu, s.train);
    row.train_acc = model.accuracy(state.mu, s.train);
    row.test_loss = model.loss_on(state.mu, s.test);
    row.test_acc = model.accuracy(state.mu, s.test);
    row.mean_sigma2 = mean_sigma2(state);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    r.epochs.push_back(row);
    r.summary.best_test_acc = std::max(r.summary.best_test_acc, row.test_acc);
  }
  if (!r.epochs.empty()) {
    r.summary.final_train_acc = r.epochs.back().train_acc;
    r.summary.final_test_acc = r.epochs.back().test_acc;
  }
  return r;
}

}  // namespace flatopt::harness
