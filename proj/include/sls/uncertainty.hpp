#pragma once

#include <string>
#include <vector>

#include "sls/errors.hpp"
#include "sls/net.hpp"
#include "sls/rng.hpp"

namespace sls {

// Softmax outputs of T sampled sub-models over a single image.
struct PredictionSampleStack {
  int t = 0;
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> probs;  // t*c*h*w, row-major
  std::vector<SelectionMask> masks;

  std::int64_t plane() const { return static_cast<std::int64_t>(c) * h * w; }
};

enum class UncertaintyKind { variance, entropy };

std::string uncertainty_kind_name(UncertaintyKind kind);
UncertaintyKind parse_uncertainty_kind(const std::string& name);

inline constexpr int kDefaultMcSamples = 50;

// Per-pixel nonnegative scalar field.
struct UncertaintyMap {
  int h = 0;
  int w = 0;
  std::vector<double> values;
  UncertaintyKind kind = UncertaintyKind::variance;
  bool normalized = false;
};

// Per pixel: population variance of the class probabilities across the T
// samples, averaged over channels. Requires T >= 2.
UncertaintyMap variance_map(const PredictionSampleStack& stack);

// Per pixel: -sum_c p_c ln p_c of the given mean distribution, 0 ln 0 := 0.
UncertaintyMap entropy_map(const std::vector<double>& mean_probs, int c, int h, int w);

// Min-max rescale to [0,1]; a constant map normalizes to all zeros.
// Idempotent on already-normalized non-constant maps.
UncertaintyMap normalize_uncertainty(const UncertaintyMap& map);

std::vector<double> stack_mean(const PredictionSampleStack& stack);

UncertaintyMap uncertainty_from_stack(const PredictionSampleStack& stack, UncertaintyKind kind);

// Map export: P5 graymap of the normalized map scaled to 0..255, and a raw
// full-precision CSV with header row,col,value in row-major order.
void write_uncertainty_pgm(const UncertaintyMap& map, const std::string& path);
void write_uncertainty_csv(const UncertaintyMap& map, const std::string& path);

template <class T>
struct McPrediction {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> mean_probs;  // c*h*w
  PredictionSampleStack stack;
};

// One stack per batch sample; each of the T draws uses a single mask shared
// across the batch. Weights are read-only throughout.
template <class T>
std::vector<PredictionSampleStack> mc_sample_stacks(const StochasticSegNet<T>& net,
                                                    const TensorPtr<T>& batch, int t_samples,
                                                    Rng& rng) {
  if (t_samples < 1)
    throw UsageError("mc_predict: sample count must be >= 1, got " + std::to_string(t_samples));
  const int N = batch->dim(0);
  std::vector<PredictionSampleStack> stacks(static_cast<std::size_t>(N));
  for (int t = 0; t < t_samples; ++t) {
    const SelectionMask mask = sample_selection(rng, net);
    Graph<T> g;
    auto probs = g.softmax_channels(net.forward(g, batch, mask));
    const int C = probs->dim(1), H = probs->dim(2), W = probs->dim(3);
    const std::int64_t plane = static_cast<std::int64_t>(C) * H * W;
    for (int n = 0; n < N; ++n) {
      auto& st = stacks[static_cast<std::size_t>(n)];
      if (t == 0) {
        st.t = t_samples;
        st.c = C;
        st.h = H;
        st.w = W;
        st.probs.reserve(static_cast<std::size_t>(t_samples) * plane);
      }
      const T* src = probs->data.data() + n * plane;
      for (std::int64_t i = 0; i < plane; ++i) st.probs.push_back(static_cast<double>(src[i]));
      st.masks.push_back(mask);
    }
  }
  return stacks;
}

// Monte-Carlo predictive distribution over sampled sub-models for a single
// image (batch of one): arithmetic mean of the T softmax outputs plus the
// raw sample stack.
template <class T>
McPrediction<T> mc_predict(const StochasticSegNet<T>& net, const TensorPtr<T>& input,
                           int t_samples, Rng& rng) {
  if (input->ndim() != 4 || input->dim(0) != 1)
    throw UsageError("mc_predict: expected a single [1,C,H,W] image, got shape " +
                     shape_str(input->shape));
  auto stacks = mc_sample_stacks(net, input, t_samples, rng);
  McPrediction<T> out;
  out.stack = std::move(stacks[0]);
  out.c = out.stack.c;
  out.h = out.stack.h;
  out.w = out.stack.w;
  out.mean_probs = stack_mean(out.stack);
  return out;
}

std::vector<int> argmax_labels(const std::vector<double>& probs, int c, int h, int w);

}  // namespace sls
