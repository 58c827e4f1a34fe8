#pragma once

#include <vector>

#include "sls/errors.hpp"
#include "sls/net.hpp"
#include "sls/uncertainty.hpp"

namespace sls {

// Baseline: K independently trained copies of the plain (single sub-model)
// network, averaged at inference, with prediction variance across members.
template <class T>
struct EnsemblePrediction {
  int c = 0;
  int h = 0;
  int w = 0;
  std::vector<double> mean_probs;
  UncertaintyMap variance;
};

template <class T>
EnsemblePrediction<T> vanilla_ensemble_predict(const std::vector<StochasticSegNet<T>>& nets,
                                               const TensorPtr<T>& input) {
  if (nets.empty()) throw UsageError("vanilla_ensemble_predict: needs >= 1 network");
  if (input->ndim() != 4 || input->dim(0) != 1)
    throw UsageError("vanilla_ensemble_predict: expected a single [1,C,H,W] image, got shape " +
                     shape_str(input->shape));
  const auto& topo0 = nets[0].topology();
  for (const auto& net : nets) {
    const auto& t = net.topology();
    if (t.in_channels != topo0.in_channels || t.num_classes != topo0.num_classes ||
        t.width != topo0.width || t.depth != topo0.depth || t.mid_blocks != topo0.mid_blocks ||
        t.bank_m != topo0.bank_m)
      throw UsageError("vanilla_ensemble_predict: ensemble members have different topologies");
    if (count_submodels(net) != 1)
      throw UsageError("vanilla_ensemble_predict: members must be single sub-model networks "
                       "(all banks M=1), got " +
                       std::to_string(count_submodels(net)) + " sub-models");
  }

  PredictionSampleStack stack;
  SelectionMask mask;
  mask.choices.assign(static_cast<std::size_t>(nets[0].num_banks()), 0);
  for (std::size_t k = 0; k < nets.size(); ++k) {
    Graph<T> g;
    auto probs = g.softmax_channels(nets[k].forward(g, input, mask));
    if (k == 0) {
      stack.t = static_cast<int>(nets.size());
      stack.c = probs->dim(1);
      stack.h = probs->dim(2);
      stack.w = probs->dim(3);
      stack.probs.reserve(static_cast<std::size_t>(stack.t) * stack.plane());
    }
    for (const T v : probs->data) stack.probs.push_back(static_cast<double>(v));
    stack.masks.push_back(mask);
  }

  EnsemblePrediction<T> out;
  out.c = stack.c;
  out.h = stack.h;
  out.w = stack.w;
  out.mean_probs = stack_mean(stack);
  if (stack.t >= 2) {
    out.variance = variance_map(stack);
  } else {
    out.variance.h = stack.h;
    out.variance.w = stack.w;
    out.variance.kind = UncertaintyKind::variance;
    out.variance.values.assign(static_cast<std::size_t>(stack.h) * stack.w, 0.0);
  }
  return out;
}

}  // namespace sls
