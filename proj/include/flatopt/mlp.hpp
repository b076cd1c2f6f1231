#pragma once

// Fully connected tanh network with a softmax cross-entropy head and label
// smoothing. Parameters are packed layer by layer as [W (out x in, row-major), b].

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "flatopt/dataset.hpp"
#include "flatopt/objective.hpp"

namespace flatopt {

/// Cross-entropy of softmax(logits) against (1 - ls) onehot(label) + ls / K.
/// Writes d loss / d logits into grad when it is non-empty.
inline double smoothed_cross_entropy(std::span<const double> logits, int label, double label_smoothing,
                                     std::span<double> grad = {}) {
  const std::size_t k = logits.size();
  const double top = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - top);
  const double log_z = top + std::log(z);
  const double off = label_smoothing / static_cast<double>(k);
  double loss = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double target = off + (static_cast<int>(c) == label ? 1.0 - label_smoothing : 0.0);
    const double log_p = logits[c] - log_z;
    loss -= target * log_p;
    if (!grad.empty()) grad[c] = std::exp(log_p) - target;
  }
  return loss;
}

class MlpObjective final : public Objective {
 public:
  MlpObjective(std::vector<std::size_t> widths, double label_smoothing, std::shared_ptr<const Dataset> data)
      : widths_(std::move(widths)), label_smoothing_(label_smoothing), data_(std::move(data)) {
    if (widths_.size() < 2 || std::any_of(widths_.begin(), widths_.end(), [](std::size_t w) { return w == 0; }))
      throw Error(ErrorKind::ShapeMismatch, "MLP needs at least two positive layer widths");
    if (!(label_smoothing_ >= 0.0 && label_smoothing_ < 1.0))
      throw Error(ErrorKind::ShapeMismatch, "label smoothing must lie in [0, 1)");
    if (!data_) throw Error(ErrorKind::ShapeMismatch, "MLP needs a data set");
    if (widths_.front() != data_->d)
      throw Error(ErrorKind::ShapeMismatch, "MLP input width differs from data dimension");
    if (widths_.back() < static_cast<std::size_t>(std::max(data_->num_classes, 2)))
      throw Error(ErrorKind::ShapeMismatch, "MLP output width smaller than the number of classes");
    offsets_.push_back(0);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
      offsets_.push_back(offsets_.back() + widths_[l + 1] * widths_[l] + widths_[l + 1]);
  }

  std::size_t dim() const override { return offsets_.back(); }
  std::size_t num_classes() const noexcept { return widths_.back(); }
  const Dataset& data() const noexcept { return *data_; }
  double label_smoothing() const noexcept { return label_smoothing_; }

  double value(std::span<const double> theta, Batch batch = {}) const override {
    check_dim(theta);
    Workspace ws(*this);
    double total = 0.0;
    const std::size_t count = for_each_index(batch, [&](std::size_t i) { total += example(theta, i, ws, {}); });
    return total / static_cast<double>(count);
  }

  Vec gradient(std::span<const double> theta, Batch batch = {}) const override {
    check_dim(theta);
    Workspace ws(*this);
    Vec g(dim(), 0.0);
    Vec scratch(dim());
    const std::size_t count = for_each_index(batch, [&](std::size_t i) {
      example(theta, i, ws, scratch);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += scratch[k];
    });
    for (auto& x : g) x /= static_cast<double>(count);
    return g;
  }

  std::vector<Vec> per_example_gradients(std::span<const double> theta, Batch batch = {}) const override {
    check_dim(theta);
    Workspace ws(*this);
    std::vector<Vec> out;
    for_each_index(batch, [&](std::size_t i) {
      Vec g(dim());
      example(theta, i, ws, g);
      out.push_back(std::move(g));
    });
    return out;
  }

  Vec logits(std::span<const double> theta, std::span<const double> x) const {
    check_dim(theta);
    Workspace ws(*this);
    forward(theta, x, ws);
    return ws.act.back();
  }

  /// Fraction of examples whose arg-max logit equals the label.
  double accuracy(std::span<const double> theta, const Dataset& ds) const {
    check_dim(theta);
    Workspace ws(*this);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      forward(theta, ds.row(i), ws);
      const auto& out = ws.act.back();
      const auto best = std::max_element(out.begin(), out.end()) - out.begin();
      correct += (best == ds.targets[i]);
    }
    return static_cast<double>(correct) / static_cast<double>(ds.n);
  }

  /// Mean smoothed cross-entropy on an arbitrary data set.
  double loss_on(std::span<const double> theta, const Dataset& ds) const {
    check_dim(theta);
    Workspace ws(*this);
    double total = 0.0;
    for (std::size_t i = 0; i < ds.n; ++i) {
      forward(theta, ds.row(i), ws);
      total += smoothed_cross_entropy(ws.act.back(), ds.targets[i], label_smoothing_);
    }
    return total / static_cast<double>(ds.n);
  }

  /// Weights ~ N(0, 1/fan_in), biases zero.
  ParamVector init_params(std::uint64_t seed) const {
    const CounterRng rng(seed, 0x1417);
    Vec theta(dim(), 0.0);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      const std::size_t n_w = widths_[l + 1] * widths_[l];
      for (std::size_t k = 0; k < n_w; ++k) theta[offsets_[l] + k] = scale * rng.normal(offsets_[l] + k);
    }
    return ParamVector(std::move(theta));
  }

 private:
  struct Workspace {
    std::vector<Vec> act;    // act[0] = input, act[l] = layer-l output (logits last)
    std::vector<Vec> delta;  // backprop signals per layer
    explicit Workspace(const MlpObjective& m) {
      for (std::size_t w : m.widths_) {
        act.emplace_back(w);
        delta.emplace_back(w);
      }
    }
  };

  template <typename F>
  std::size_t for_each_index(Batch batch, F&& f) const {
    if (batch.empty()) {
      for (std::size_t i = 0; i < data_->n; ++i) f(i);
      return data_->n;
    }
    for (std::size_t i : batch) {
      if (i >= data_->n) throw Error(ErrorKind::ShapeMismatch, "batch index out of range");
      f(i);
    }
    return batch.size();
  }

  void forward(std::span<const double> theta, std::span<const double> x, Workspace& ws) const {
    std::copy(x.begin(), x.end(), ws.act[0].begin());
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double* w = theta.data() + offsets_[l];
      const double* b = w + out * in;
      const Vec& a = ws.act[l];
      Vec& z = ws.act[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * a[i];
        z[o] = (l + 1 < layers) ? std::tanh(s) : s;
      }
    }
  }

  // Loss of example i; when grad is non-empty it receives d loss / d theta.
  double example(std::span<const double> theta, std::size_t i, Workspace& ws, std::span<double> grad) const {
    forward(theta, data_->row(i), ws);
    const std::size_t layers = widths_.size() - 1;
    if (grad.empty()) return smoothed_cross_entropy(ws.act.back(), data_->targets[i], label_smoothing_);
    const double loss = smoothed_cross_entropy(ws.act.back(), data_->targets[i], label_smoothing_, ws.delta.back());
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double* w = theta.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + out * in;
      const Vec& a = ws.act[l];
      const Vec& d = ws.delta[l + 1];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] = d[o];
        for (std::size_t k = 0; k < in; ++k) gw[o * in + k] = d[o] * a[k];
      }
      if (l > 0) {
        Vec& prev = ws.delta[l];
        for (std::size_t k = 0; k < in; ++k) {
          double s = 0.0;
          for (std::size_t o = 0; o < out; ++o) s += w[o * in + k] * d[o];
          prev[k] = s * (1.0 - a[k] * a[k]);  // tanh'
        }
      }
    }
    return loss;
  }

  std::vector<std::size_t> widths_;
  double label_smoothing_;
  std::shared_ptr<const Dataset> data_;
  std::vector<std::size_t> offsets_;
};

inline MlpObjective mlp_objective(std::vector<std::size_t> widths, double label_smoothing,
                                  std::shared_ptr<const Dataset> data) {
  return MlpObjective(std::move(widths), label_smoothing, std::move(data));
}

}  // namespace flatopt
