#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sls/data.hpp"
#include "sls/errors.hpp"
#include "sls/net.hpp"
#include "sls/uncertainty.hpp"

namespace sls {

struct TrainConfig {
  int stage1_steps = 400;
  int stage2_steps = 100;
  double lr = 0.05;
  double momentum = 0.9;
  int batch_size = 4;
  int t_train = 6;  // MC samples per stage-2 uncertainty estimate
  std::uint64_t seed = 1;
  UncertaintyKind uncertainty_kind = UncertaintyKind::variance;
  double weight_floor = 1.0;
  bool force_zero_uncertainty = false;  // diagnostic: stage 2 degenerates to stage 1
  int checkpoint_every = 0;             // 0 = final checkpoint only

  void validate() const {
    if (lr < 0.0) throw UsageError("train config: lr must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw UsageError("train config: momentum must be in [0,1)");
    if (batch_size < 1) throw UsageError("train config: batch_size must be >= 1");
    if (stage1_steps < 0 || stage2_steps < 0) throw UsageError("train config: step counts must be >= 0");
    if (stage2_steps > 0 && t_train < 2)
      throw UsageError("train config: t_train must be >= 2 for stage 2, got " +
                       std::to_string(t_train));
    if (weight_floor < 0.0) throw UsageError("train config: weight_floor must be >= 0");
  }
};

struct TrainStepRecord {
  int step = 0;
  int stage = 1;
  double loss = 0.0;
  std::string mask;
  double wall_ms = 0.0;
};

// Step numbering is strictly monotone and the 1 -> 2 stage transition
// happens at most once. Wall time stays out of the CSV so reruns with the
// same seed emit identical bytes; it is reported via the run manifest.
class TrainLog {
 public:
  void append(TrainStepRecord r) {
    if (!records_.empty()) {
      const auto& prev = records_.back();
      if (r.step != prev.step + 1)
        throw UsageError("train log: non-monotone step " + std::to_string(r.step) + " after " +
                         std::to_string(prev.step));
      if (r.stage < prev.stage)
        throw UsageError("train log: stage cannot go back from " + std::to_string(prev.stage) +
                         " to " + std::to_string(r.stage));
    }
    if (r.stage != 1 && r.stage != 2) throw UsageError("train log: stage must be 1 or 2");
    records_.push_back(std::move(r));
  }

  const std::vector<TrainStepRecord>& records() const { return records_; }

  void extend(const TrainLog& other) {
    for (const auto& r : other.records()) append(r);
  }

  void write_csv(const std::string& path) const;

 private:
  std::vector<TrainStepRecord> records_;
};

template <class T>
class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(T(lr)), momentum_(T(momentum)) {}

  // v <- mu*v + g; w <- w - lr*v. Only the given tensors are touched, so
  // unselected candidates keep both weights and velocity bit-unchanged.
  void step(const std::vector<TensorPtr<T>>& params) {
    for (const auto& p : params) {
      auto& v = velocity_[p.get()];
      if (v.empty()) v.assign(p->data.size(), T(0));
      for (std::size_t i = 0; i < p->data.size(); ++i) {
        v[i] = momentum_ * v[i] + p->grad[i];
        p->data[i] -= lr_ * v[i];
      }
    }
  }

 private:
  T lr_;
  T momentum_;
  std::unordered_map<const Tensor<T>*, std::vector<T>> velocity_;
};

// Mean over non-ignored pixels of (weight_floor + u_norm[p]) * CE_p. The
// uncertainty enters as a constant: gradients flow through logits only.
// Maps must be normalized to [0,1] (one per batch sample).
template <class T>
TensorPtr<T> pixel_uncertainty_loss(Graph<T>& g, const TensorPtr<T>& logits,
                                    const LabelMap& labels,
                                    const std::vector<UncertaintyMap>& u_norm,
                                    double weight_floor, int ignore_index = kIgnoreIndex) {
  const int N = logits->dim(0), H = logits->dim(2), W = logits->dim(3);
  if (static_cast<int>(u_norm.size()) != N)
    throw UsageError("pixel_uncertainty_loss: " + std::to_string(u_norm.size()) +
                     " uncertainty maps for batch of " + std::to_string(N));
  std::vector<T> weights;
  weights.reserve(static_cast<std::size_t>(N) * H * W);
  for (const auto& map : u_norm) {
    if (map.h != H || map.w != W)
      throw UsageError("pixel_uncertainty_loss: map " + std::to_string(map.h) + "x" +
                       std::to_string(map.w) + " does not match logits " + std::to_string(H) +
                       "x" + std::to_string(W));
    for (double v : map.values) {
      if (v < -1e-6 || v > 1.0 + 1e-6)
        throw UsageError("pixel_uncertainty_loss: map not normalized to [0,1], saw " +
                         std::to_string(v));
      weights.push_back(T(weight_floor + v));
    }
  }
  return g.cross_entropy_weighted(logits, labels, weights, ignore_index);
}

template <class T>
TensorPtr<T> pixel_uncertainty_loss(Graph<T>& g, const TensorPtr<T>& logits,
                                    const LabelMap& labels, const UncertaintyMap& u_norm,
                                    double weight_floor, int ignore_index = kIgnoreIndex) {
  return pixel_uncertainty_loss(g, logits, labels, std::vector<UncertaintyMap>{u_norm},
                                weight_floor, ignore_index);
}

template <class T>
using TrainStepCallback = std::function<void(int step, const StochasticSegNet<T>& net)>;

namespace detail {

// Two independent streams: `update_rng` drives batch choice and the trained
// mask, `mc_rng` drives the stage-2 uncertainty sampling. Stage 2 with a
// zero uncertainty map therefore replays stage 1's parameter trajectory.
inline constexpr std::uint64_t kUpdateStream = 1;
inline constexpr std::uint64_t kMcStream = 2;

template <class T>
void train_steps(StochasticSegNet<T>& net, const Dataset& ds, const TrainConfig& cfg, int stage,
                 int steps, int& step_counter, Rng& update_rng, Rng& mc_rng, SgdMomentum<T>& opt,
                 TrainLog& log, const TrainStepCallback<T>& on_step) {
  const auto n_samples = static_cast<std::uint64_t>(ds.samples.size());
  for (int s = 0; s < steps; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    ++step_counter;

    std::vector<int> indices;
    indices.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b)
      indices.push_back(static_cast<int>(update_rng.bounded(n_samples)));
    auto input = images_to_batch<T>(ds, indices);
    const LabelMap labels = labels_to_map(ds, indices);

    std::vector<UncertaintyMap> maps;
    if (stage == 2) {
      auto stacks = mc_sample_stacks(net, input, cfg.t_train, mc_rng);
      for (auto& stack : stacks) {
        if (cfg.force_zero_uncertainty) {
          UncertaintyMap zero;
          zero.h = stack.h;
          zero.w = stack.w;
          zero.kind = cfg.uncertainty_kind;
          zero.normalized = true;
          zero.values.assign(static_cast<std::size_t>(stack.h) * stack.w, 0.0);
          maps.push_back(std::move(zero));
        } else {
          maps.push_back(normalize_uncertainty(uncertainty_from_stack(stack, cfg.uncertainty_kind)));
        }
      }
    }

    const SelectionMask mask = sample_selection(update_rng, net);
    Graph<T> g;
    auto logits = net.forward(g, input, mask);
    auto loss = stage == 2
                    ? pixel_uncertainty_loss(g, logits, labels, maps, cfg.weight_floor)
                    : g.cross_entropy(logits, labels, kIgnoreIndex);
    const double loss_value = static_cast<double>(loss->data[0]);
    if (!std::isfinite(loss_value))
      throw NumericError("non-finite loss at step " + std::to_string(step_counter));
    g.backward(loss);

    const auto params = net.parameters_for(mask);
    opt.step(params);
    for (const auto& p : params) p->zero_grad();

    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0).count();
    log.append({step_counter, stage, loss_value, mask.str(), ms});
    if (on_step) on_step(step_counter, net);
  }
}

}  // namespace detail

// Stage 1: plain cross-entropy under stochastic selection. Each step updates
// only the selected path plus shared layers.
template <class T>
TrainLog train_stage1(StochasticSegNet<T>& net, const Dataset& ds, const TrainConfig& cfg,
                      const TrainStepCallback<T>& on_step = {}) {
  cfg.validate();
  if (ds.samples.empty()) throw UsageError("train: empty dataset");
  Rng root(cfg.seed);
  Rng update_rng = root.derive(detail::kUpdateStream);
  Rng mc_rng = root.derive(detail::kMcStream);
  SgdMomentum<T> opt(cfg.lr, cfg.momentum);
  TrainLog log;
  int step = 0;
  detail::train_steps(net, ds, cfg, 1, cfg.stage1_steps, step, update_rng, mc_rng, opt, log,
                      on_step);
  return log;
}

// Stage 2: per batch, freeze weights, estimate per-pixel uncertainty with
// t_train sampled sub-models, then optimize the uncertainty-weighted loss.
// Assumes a stage-1 trained net (callers may override deliberately).
template <class T>
TrainLog train_stage2(StochasticSegNet<T>& net, const Dataset& ds, const TrainConfig& cfg,
                      const TrainStepCallback<T>& on_step = {}) {
  cfg.validate();
  if (ds.samples.empty()) throw UsageError("train: empty dataset");
  Rng root(cfg.seed);
  Rng update_rng = root.derive(detail::kUpdateStream);
  Rng mc_rng = root.derive(detail::kMcStream);
  SgdMomentum<T> opt(cfg.lr, cfg.momentum);
  TrainLog log;
  int step = 0;
  detail::train_steps(net, ds, cfg, 2, cfg.stage2_steps, step, update_rng, mc_rng, opt, log,
                      on_step);
  return log;
}

// Both stages back to back with shared optimizer state and random streams;
// step numbering continues across the transition.
template <class T>
TrainLog train_full(StochasticSegNet<T>& net, const Dataset& ds, const TrainConfig& cfg,
                    const TrainStepCallback<T>& on_step = {}) {
  cfg.validate();
  if (ds.samples.empty()) throw UsageError("train: empty dataset");
  Rng root(cfg.seed);
  Rng update_rng = root.derive(detail::kUpdateStream);
  Rng mc_rng = root.derive(detail::kMcStream);
  SgdMomentum<T> opt(cfg.lr, cfg.momentum);
  TrainLog log;
  int step = 0;
  detail::train_steps(net, ds, cfg, 1, cfg.stage1_steps, step, update_rng, mc_rng, opt, log,
                      on_step);
  detail::train_steps(net, ds, cfg, 2, cfg.stage2_steps, step, update_rng, mc_rng, opt, log,
                      on_step);
  return log;
}

}  // namespace sls
