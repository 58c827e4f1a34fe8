#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sls/errors.hpp"
#include "sls/graph.hpp"
#include "sls/rng.hpp"
#include "sls/tensor.hpp"

namespace sls {

// One concrete sub-model of the ensemble: choices[i] selects a candidate at
// banked position i. Length must equal the number of banks in the network.
struct SelectionMask {
  std::vector<int> choices;
  std::optional<std::uint64_t> seed_provenance;

  bool operator==(const SelectionMask& o) const { return choices == o.choices; }

  std::string str() const {
    std::string s;
    for (std::size_t i = 0; i < choices.size(); ++i) {
      if (i) s += ":";
      s += std::to_string(choices[i]);
    }
    return s.empty() ? "-" : s;
  }
};

// Encoder-decoder family: stem, `depth` stride-2 encoder blocks, `mid_blocks`
// bottleneck blocks, `depth` decoder blocks (nearest upsample + conv, with an
// additive skip from the matching encoder resolution), 1x1 head.
// Every block is a position; bank_m[p] = 0 keeps position p a fixed layer,
// m >= 1 makes it a bank of m candidates with independent parameters.
struct SegNetTopology {
  int in_channels = 1;
  int num_classes = 2;
  int width = 8;
  int depth = 1;
  int mid_blocks = 1;
  std::vector<int> bank_m;

  int positions() const { return 2 + 2 * depth + mid_blocks; }

  static SegNetTopology uniform_banks(int in_ch, int classes, int width, int depth,
                                      int mid_blocks, int m) {
    SegNetTopology t{in_ch, classes, width, depth, mid_blocks, {}};
    t.bank_m.assign(static_cast<std::size_t>(t.positions()), m);
    return t;
  }

  static SegNetTopology plain(int in_ch, int classes, int width, int depth, int mid_blocks) {
    return uniform_banks(in_ch, classes, width, depth, mid_blocks, 0);
  }

  void validate() const {
    if (in_channels < 1 || num_classes < 2 || width < 1 || depth < 0 || mid_blocks < 0)
      throw UsageError("invalid topology: in=" + std::to_string(in_channels) + " classes=" +
                       std::to_string(num_classes) + " width=" + std::to_string(width) +
                       " depth=" + std::to_string(depth) + " mid=" + std::to_string(mid_blocks));
    if (static_cast<int>(bank_m.size()) != positions())
      throw UsageError("topology bank_m has " + std::to_string(bank_m.size()) + " entries, expected " +
                       std::to_string(positions()));
    for (int m : bank_m)
      if (m < 0) throw UsageError("bank_m entries must be >= 0");
  }
};

// Conv [+ channel norm] [+ relu]; the interchangeable unit held by banks.
struct BlockSpec {
  int in_ch = 0;
  int out_ch = 0;
  int ksize = 3;
  int stride = 1;
  int pad = 1;
  bool norm = true;
  bool act = true;
};

template <class T>
struct BlockParams {
  TensorPtr<T> weight;
  TensorPtr<T> bias;
  TensorPtr<T> gamma;  // null when spec.norm is false
  TensorPtr<T> beta;
};

inline std::uint64_t block_scalar_count(const BlockSpec& s) {
  std::uint64_t n = static_cast<std::uint64_t>(s.out_ch) * s.in_ch * s.ksize * s.ksize + s.out_ch;
  if (s.norm) n += 2 * static_cast<std::uint64_t>(s.out_ch);
  return n;
}

template <class T>
struct Position {
  BlockSpec spec;
  bool banked = false;
  std::vector<BlockParams<T>> candidates;  // size 1 when fixed, M when banked
};

template <class T>
class StochasticSegNet {
 public:
  static StochasticSegNet build(const SegNetTopology& topo, Rng& init_rng) {
    topo.validate();
    StochasticSegNet net;
    net.topo_ = topo;
    for (int p = 0; p < topo.positions(); ++p) {
      Position<T> pos;
      pos.spec = net.position_spec(p);
      pos.banked = topo.bank_m[static_cast<std::size_t>(p)] >= 1;
      const int count = pos.banked ? topo.bank_m[static_cast<std::size_t>(p)] : 1;
      for (int c = 0; c < count; ++c) pos.candidates.push_back(net.init_block(pos.spec, init_rng));
      net.positions_.push_back(std::move(pos));
    }
    return net;
  }

  const SegNetTopology& topology() const { return topo_; }

  int num_banks() const {
    int n = 0;
    for (const auto& p : positions_) n += p.banked ? 1 : 0;
    return n;
  }

  std::vector<int> bank_sizes() const {
    std::vector<int> m;
    for (const auto& p : positions_)
      if (p.banked) m.push_back(static_cast<int>(p.candidates.size()));
    return m;
  }

  Position<T>& position(int i) { return positions_[static_cast<std::size_t>(i)]; }
  const Position<T>& position(int i) const { return positions_[static_cast<std::size_t>(i)]; }
  int position_count() const { return static_cast<int>(positions_.size()); }

  // Pure in (weights, input, mask); output spatial dims equal the input's.
  TensorPtr<T> forward(Graph<T>& g, const TensorPtr<T>& x, const SelectionMask& mask) const {
    if (x->ndim() != 4)
      throw UsageError("forward: input must be 4-d, got shape " + shape_str(x->shape));
    if (x->dim(1) != topo_.in_channels)
      throw UsageError("forward: input channels " + std::to_string(x->dim(1)) + " != expected " +
                       std::to_string(topo_.in_channels));
    const int div = 1 << topo_.depth;
    if (x->dim(2) % div != 0 || x->dim(3) % div != 0 || x->dim(2) < div || x->dim(3) < div)
      throw UsageError("forward: spatial dims " + std::to_string(x->dim(2)) + "x" +
                       std::to_string(x->dim(3)) + " incompatible with depth " +
                       std::to_string(topo_.depth));
    if (static_cast<int>(mask.choices.size()) != num_banks())
      throw UsageError("forward: mask length " + std::to_string(mask.choices.size()) +
                       " != bank count " + std::to_string(num_banks()));

    int bank_idx = 0;
    auto pick = [&](const Position<T>& pos) -> const BlockParams<T>& {
      if (!pos.banked) return pos.candidates[0];
      const int c = mask.choices[static_cast<std::size_t>(bank_idx)];
      if (c < 0 || c >= static_cast<int>(pos.candidates.size()))
        throw UsageError("forward: mask entry " + std::to_string(bank_idx) + " = " +
                         std::to_string(c) + " out of range [0," +
                         std::to_string(pos.candidates.size()) + ")");
      ++bank_idx;
      return pos.candidates[static_cast<std::size_t>(c)];
    };

    const int D = topo_.depth;
    int p = 0;
    auto cur = apply_block(g, positions_[static_cast<std::size_t>(p)].spec,
                           pick(positions_[static_cast<std::size_t>(p)]), x);
    ++p;
    std::vector<TensorPtr<T>> skips{cur};
    for (int i = 0; i < D; ++i, ++p) {
      cur = apply_block(g, positions_[static_cast<std::size_t>(p)].spec,
                        pick(positions_[static_cast<std::size_t>(p)]), cur);
      if (i + 1 < D) skips.push_back(cur);
    }
    for (int i = 0; i < topo_.mid_blocks; ++i, ++p)
      cur = apply_block(g, positions_[static_cast<std::size_t>(p)].spec,
                        pick(positions_[static_cast<std::size_t>(p)]), cur);
    for (int i = D - 1; i >= 0; --i, ++p) {
      cur = g.nearest_upsample(cur, 2);
      cur = apply_block(g, positions_[static_cast<std::size_t>(p)].spec,
                        pick(positions_[static_cast<std::size_t>(p)]), cur);
      cur = g.add(cur, skips.back());
      skips.pop_back();
    }
    cur = apply_block(g, positions_[static_cast<std::size_t>(p)].spec,
                      pick(positions_[static_cast<std::size_t>(p)]), cur);
    return cur;
  }

  // All parameter tensors in declaration order: by position, then candidate,
  // then weight, bias, gamma, beta. This order is the checkpoint order.
  std::vector<TensorPtr<T>> parameters() const {
    std::vector<TensorPtr<T>> out;
    for (const auto& pos : positions_)
      for (const auto& cand : pos.candidates) append_block_params(cand, out);
    return out;
  }

  // Parameters touched by a forward pass under `mask`: every fixed layer
  // plus the selected candidate of each bank.
  std::vector<TensorPtr<T>> parameters_for(const SelectionMask& mask) const {
    if (static_cast<int>(mask.choices.size()) != num_banks())
      throw UsageError("parameters_for: mask length " + std::to_string(mask.choices.size()) +
                       " != bank count " + std::to_string(num_banks()));
    std::vector<TensorPtr<T>> out;
    int bank_idx = 0;
    for (const auto& pos : positions_) {
      const int c = pos.banked ? mask.choices[static_cast<std::size_t>(bank_idx++)] : 0;
      if (c < 0 || c >= static_cast<int>(pos.candidates.size()))
        throw UsageError("parameters_for: mask entry out of range");
      append_block_params(pos.candidates[static_cast<std::size_t>(c)], out);
    }
    return out;
  }

  StochasticSegNet clone() const {
    StochasticSegNet net;
    net.topo_ = topo_;
    for (const auto& pos : positions_) {
      Position<T> copy;
      copy.spec = pos.spec;
      copy.banked = pos.banked;
      for (const auto& cand : pos.candidates) {
        BlockParams<T> c;
        c.weight = std::make_shared<Tensor<T>>(*cand.weight);
        c.bias = std::make_shared<Tensor<T>>(*cand.bias);
        if (cand.gamma) c.gamma = std::make_shared<Tensor<T>>(*cand.gamma);
        if (cand.beta) c.beta = std::make_shared<Tensor<T>>(*cand.beta);
        copy.candidates.push_back(std::move(c));
      }
      net.positions_.push_back(std::move(copy));
    }
    return net;
  }

 private:
  BlockSpec position_spec(int p) const {
    const int D = topo_.depth;
    const int w = topo_.width;
    if (p == 0) return BlockSpec{topo_.in_channels, w, 3, 1, 1, true, true};
    if (p <= D) {
      const int i = p - 1;
      return BlockSpec{w << i, w << (i + 1), 3, 2, 1, true, true};
    }
    if (p <= D + topo_.mid_blocks) return BlockSpec{w << D, w << D, 3, 1, 1, true, true};
    if (p <= 2 * D + topo_.mid_blocks) {
      const int i = D - 1 - (p - D - topo_.mid_blocks - 1);  // decode order, deepest first
      return BlockSpec{w << (i + 1), w << i, 3, 1, 1, true, true};
    }
    return BlockSpec{w, topo_.num_classes, 1, 1, 0, false, false};
  }

  BlockParams<T> init_block(const BlockSpec& spec, Rng& rng) const {
    BlockParams<T> bp;
    bp.weight = make_tensor<T>({spec.out_ch, spec.in_ch, spec.ksize, spec.ksize});
    const double fan_in = static_cast<double>(spec.in_ch) * spec.ksize * spec.ksize;
    const double stddev = std::sqrt(2.0 / fan_in);
    for (auto& v : bp.weight->data) v = T(rng.normal(0.0, stddev));
    bp.bias = make_tensor<T>({spec.out_ch});
    if (spec.norm) {
      bp.gamma = make_tensor<T>({spec.out_ch}, T(1));
      bp.beta = make_tensor<T>({spec.out_ch});
    }
    return bp;
  }

  TensorPtr<T> apply_block(Graph<T>& g, const BlockSpec& spec, const BlockParams<T>& bp,
                           const TensorPtr<T>& x) const {
    auto out = g.conv2d(x, bp.weight, bp.bias, spec.stride, spec.pad);
    if (spec.norm) out = g.channel_norm(out, bp.gamma, bp.beta);
    if (spec.act) out = g.relu(out);
    return out;
  }

  static void append_block_params(const BlockParams<T>& bp, std::vector<TensorPtr<T>>& out) {
    out.push_back(bp.weight);
    out.push_back(bp.bias);
    if (bp.gamma) out.push_back(bp.gamma);
    if (bp.beta) out.push_back(bp.beta);
  }

  SegNetTopology topo_;
  std::vector<Position<T>> positions_;
};

// choices[i] ~ Uniform[0, M_i), independent per position.
template <class T>
SelectionMask sample_selection(Rng& rng, const StochasticSegNet<T>& net) {
  SelectionMask mask;
  mask.seed_provenance = rng.seed();
  for (int m : net.bank_sizes())
    mask.choices.push_back(static_cast<int>(rng.bounded(static_cast<std::uint64_t>(m))));
  return mask;
}

// prod M_i with explicit overflow detection.
template <class T>
std::uint64_t count_submodels(const StochasticSegNet<T>& net) {
  std::uint64_t total = 1;
  for (int m : net.bank_sizes()) {
    const auto mu = static_cast<std::uint64_t>(m);
    if (mu != 0 && total > UINT64_MAX / mu)
      throw NumericError("count_submodels: product exceeds 64-bit unsigned range");
    total *= mu;
  }
  return total;
}

template <class T>
std::uint64_t count_parameters(const StochasticSegNet<T>& net) {
  std::uint64_t total = 0;
  for (const auto& t : net.parameters()) total += static_cast<std::uint64_t>(t->numel());
  return total;
}

inline constexpr std::uint64_t kEnumerationGuard = 4096;

// All masks in lexicographic order; refuses ensembles larger than the guard.
template <class T>
std::vector<SelectionMask> enumerate_selections(const StochasticSegNet<T>& net) {
  const std::uint64_t total = count_submodels(net);
  if (total > kEnumerationGuard)
    throw UsageError("enumerate_selections: " + std::to_string(total) +
                     " sub-models exceed the enumeration guard of " +
                     std::to_string(kEnumerationGuard));
  const std::vector<int> sizes = net.bank_sizes();
  std::vector<SelectionMask> out;
  out.reserve(static_cast<std::size_t>(total));
  SelectionMask cur;
  cur.choices.assign(sizes.size(), 0);
  for (std::uint64_t i = 0; i < total; ++i) {
    out.push_back(cur);
    for (int p = static_cast<int>(sizes.size()) - 1; p >= 0; --p) {
      auto& c = cur.choices[static_cast<std::size_t>(p)];
      if (++c < sizes[static_cast<std::size_t>(p)]) break;
      c = 0;
    }
  }
  return out;
}

}  // namespace sls
