#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sls/errors.hpp"
#include "sls/tensor.hpp"

namespace sls {

namespace detail {

inline std::int64_t nchw(int C, int H, int W, int n, int c, int h, int w) {
  return ((static_cast<std::int64_t>(n) * C + c) * H + h) * W + w;
}

}  // namespace detail

// Define-by-run tape. Each op executes its forward pass immediately and
// records a backward rule; backward() replays the rules in exact reverse
// execution order. Gradients accumulate in graph-owned buffers and flush
// into each tensor's grad with a single addition per tensor, so repeating
// forward+backward doubles leaf gradients bit-exactly.
//
// A graph is confined to one thread. Calling backward() twice on the same
// tape is an error; rebuild the forward pass instead.
template <class T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  TensorPtr<T> conv2d(const TensorPtr<T>& x, const TensorPtr<T>& w, const TensorPtr<T>& b,
                      int stride, int pad) {
    if (x->ndim() != 4) throw UsageError("conv2d: input must be 4-d, got shape " + shape_str(x->shape));
    if (w->ndim() != 4) throw UsageError("conv2d: weight must be 4-d, got shape " + shape_str(w->shape));
    if (b->ndim() != 1) throw UsageError("conv2d: bias must be 1-d, got shape " + shape_str(b->shape));
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int K = w->dim(0), KC = w->dim(1), KH = w->dim(2), KW = w->dim(3);
    if (KC != C)
      throw UsageError("conv2d: input channels " + std::to_string(C) + " != weight channels " +
                       std::to_string(KC));
    if (b->dim(0) != K)
      throw UsageError("conv2d: bias size " + std::to_string(b->dim(0)) + " != output channels " +
                       std::to_string(K));
    if (stride < 1) throw UsageError("conv2d: stride must be >= 1, got " + std::to_string(stride));
    if (pad < 0) throw UsageError("conv2d: pad must be >= 0, got " + std::to_string(pad));
    if (KH > H + 2 * pad || KW > W + 2 * pad)
      throw UsageError("conv2d: kernel " + std::to_string(KH) + "x" + std::to_string(KW) +
                       " larger than padded input " + std::to_string(H + 2 * pad) + "x" +
                       std::to_string(W + 2 * pad));
    const int OH = (H + 2 * pad - KH) / stride + 1;
    const int OW = (W + 2 * pad - KW) / stride + 1;

    auto out = make_tensor<T>({N, K, OH, OW});
    const T* xd = x->data.data();
    const T* wd = w->data.data();
    const T* bd = b->data.data();
    T* od = out->data.data();
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow) {
            T acc = bd[k];
            for (int c = 0; c < C; ++c)
              for (int kh = 0; kh < KH; ++kh) {
                const int ih = oh * stride + kh - pad;
                if (ih < 0 || ih >= H) continue;
                for (int kw = 0; kw < KW; ++kw) {
                  const int iw = ow * stride + kw - pad;
                  if (iw < 0 || iw >= W) continue;
                  acc += xd[detail::nchw(C, H, W, n, c, ih, iw)] *
                         wd[detail::nchw(C, KH, KW, k, c, kh, kw)];
                }
              }
            od[detail::nchw(K, OH, OW, n, k, oh, ow)] = acc;
          }

    record([=, this]() {
      const T* gd = grad_of(out);
      const T* xd2 = x->data.data();
      const T* wd2 = w->data.data();
      T* dx = grad_of(x);
      T* dw = grad_of(w);
      T* db = grad_of(b);
      for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
          for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow) {
              const T gv = gd[detail::nchw(K, OH, OW, n, k, oh, ow)];
              db[k] += gv;
              for (int c = 0; c < C; ++c)
                for (int kh = 0; kh < KH; ++kh) {
                  const int ih = oh * stride + kh - pad;
                  if (ih < 0 || ih >= H) continue;
                  for (int kw = 0; kw < KW; ++kw) {
                    const int iw = ow * stride + kw - pad;
                    if (iw < 0 || iw >= W) continue;
                    const std::int64_t xi = detail::nchw(C, H, W, n, c, ih, iw);
                    const std::int64_t wi = detail::nchw(C, KH, KW, k, c, kh, kw);
                    dw[wi] += gv * xd2[xi];
                    dx[xi] += gv * wd2[wi];
                  }
                }
            }
    });
    return out;
  }

  // Nearest-neighbour upsampling; backward is the matching f x f sum pool.
  TensorPtr<T> nearest_upsample(const TensorPtr<T>& x, int factor) {
    if (x->ndim() != 4) throw UsageError("nearest_upsample: input must be 4-d, got shape " + shape_str(x->shape));
    if (factor < 2) throw UsageError("nearest_upsample: factor must be >= 2, got " + std::to_string(factor));
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    const int OH = H * factor, OW = W * factor;
    auto out = make_tensor<T>({N, C, OH, OW});
    const T* xd = x->data.data();
    T* od = out->data.data();
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int oh = 0; oh < OH; ++oh)
          for (int ow = 0; ow < OW; ++ow)
            od[detail::nchw(C, OH, OW, n, c, oh, ow)] =
                xd[detail::nchw(C, H, W, n, c, oh / factor, ow / factor)];

    record([=, this]() {
      const T* gd = grad_of(out);
      T* dx = grad_of(x);
      for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
          for (int oh = 0; oh < OH; ++oh)
            for (int ow = 0; ow < OW; ++ow)
              dx[detail::nchw(C, H, W, n, c, oh / factor, ow / factor)] +=
                  gd[detail::nchw(C, OH, OW, n, c, oh, ow)];
    });
    return out;
  }

  TensorPtr<T> relu(const TensorPtr<T>& x) {
    auto out = make_tensor<T>(x->shape);
    const std::int64_t n = x->numel();
    for (std::int64_t i = 0; i < n; ++i) out->data[i] = x->data[i] > T(0) ? x->data[i] : T(0);
    record([=, this]() {
      const T* gd = grad_of(out);
      T* dx = grad_of(x);
      for (std::int64_t i = 0; i < n; ++i)
        if (x->data[i] > T(0)) dx[i] += gd[i];
    });
    return out;
  }

  TensorPtr<T> add(const TensorPtr<T>& a, const TensorPtr<T>& b) {
    if (a->shape != b->shape)
      throw UsageError("add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = make_tensor<T>(a->shape);
    const std::int64_t n = a->numel();
    for (std::int64_t i = 0; i < n; ++i) out->data[i] = a->data[i] + b->data[i];
    record([=, this]() {
      const T* gd = grad_of(out);
      T* da = grad_of(a);
      T* db = grad_of(b);
      for (std::int64_t i = 0; i < n; ++i) {
        da[i] += gd[i];
        db[i] += gd[i];
      }
    });
    return out;
  }

  // Normalizes each sample over its full (C,H,W) extent, then applies a
  // per-channel affine. Inference is independent of the rest of the batch,
  // so MC passes are well defined at batch size 1.
  TensorPtr<T> channel_norm(const TensorPtr<T>& x, const TensorPtr<T>& gamma,
                            const TensorPtr<T>& beta, T eps = T(1e-5)) {
    if (x->ndim() != 4) throw UsageError("channel_norm: input must be 4-d, got shape " + shape_str(x->shape));
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    if (gamma->numel() != C || beta->numel() != C)
      throw UsageError("channel_norm: affine size " + std::to_string(gamma->numel()) + "/" +
                       std::to_string(beta->numel()) + " != channels " + std::to_string(C));
    const std::int64_t m = static_cast<std::int64_t>(C) * H * W;
    const std::int64_t hw = static_cast<std::int64_t>(H) * W;
    auto out = make_tensor<T>(x->shape);
    auto xhat = std::make_shared<std::vector<T>>(x->data.size());
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
      const T* xs = x->data.data() + n * m;
      double mean = 0.0;
      for (std::int64_t i = 0; i < m; ++i) mean += xs[i];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        const double d = xs[i] - mean;
        var += d * d;
      }
      var /= static_cast<double>(m);
      const T inv = T(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*inv_std)[static_cast<std::size_t>(n)] = inv;
      T* xh = xhat->data() + n * m;
      T* os = out->data.data() + n * m;
      for (int c = 0; c < C; ++c) {
        const T gm = gamma->data[c], bt = beta->data[c];
        for (std::int64_t i = 0; i < hw; ++i) {
          const std::int64_t j = c * hw + i;
          xh[j] = (xs[j] - T(mean)) * inv;
          os[j] = gm * xh[j] + bt;
        }
      }
    }

    record([=, this]() {
      const T* gall = grad_of(out);
      T* dxall = grad_of(x);
      T* dgamma = grad_of(gamma);
      T* dbeta = grad_of(beta);
      for (int n = 0; n < N; ++n) {
        const T* gd = gall + n * m;
        const T* xh = xhat->data() + n * m;
        const T inv = (*inv_std)[static_cast<std::size_t>(n)];
        // dxhat = g * gamma_c; dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
        for (int c = 0; c < C; ++c) {
          const T gm = gamma->data[c];
          for (std::int64_t i = 0; i < hw; ++i) {
            const std::int64_t j = c * hw + i;
            const T dxh = gd[j] * gm;
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh[j];
          }
        }
        const T mean_dxh = T(sum_dxh / static_cast<double>(m));
        const T mean_dxh_xh = T(sum_dxh_xh / static_cast<double>(m));
        T* dx = dxall + n * m;
        for (int c = 0; c < C; ++c) {
          const T gm = gamma->data[c];
          T dg = T(0), db = T(0);
          for (std::int64_t i = 0; i < hw; ++i) {
            const std::int64_t j = c * hw + i;
            const T dxh = gd[j] * gm;
            dx[j] += inv * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
            dg += gd[j] * xh[j];
            db += gd[j];
          }
          dgamma[c] += dg;
          dbeta[c] += db;
        }
      }
    });
    return out;
  }

  // Softmax over the channel dimension at every pixel, max-subtracted.
  TensorPtr<T> softmax_channels(const TensorPtr<T>& x) {
    if (x->ndim() != 4) throw UsageError("softmax_channels: input must be 4-d, got shape " + shape_str(x->shape));
    const int N = x->dim(0), C = x->dim(1), H = x->dim(2), W = x->dim(3);
    auto out = make_tensor<T>(x->shape);
    const T* xd = x->data.data();
    T* od = out->data.data();
    for (int n = 0; n < N; ++n)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          T mx = xd[detail::nchw(C, H, W, n, 0, h, w)];
          for (int c = 1; c < C; ++c) mx = std::max(mx, xd[detail::nchw(C, H, W, n, c, h, w)]);
          T denom = T(0);
          for (int c = 0; c < C; ++c) {
            const T e = std::exp(xd[detail::nchw(C, H, W, n, c, h, w)] - mx);
            od[detail::nchw(C, H, W, n, c, h, w)] = e;
            denom += e;
          }
          for (int c = 0; c < C; ++c) od[detail::nchw(C, H, W, n, c, h, w)] /= denom;
        }

    record([=, this]() {
      const T* gd = grad_of(out);
      const T* pd = out->data.data();
      T* dx = grad_of(x);
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            T dot = T(0);
            for (int c = 0; c < C; ++c) {
              const std::int64_t j = detail::nchw(C, H, W, n, c, h, w);
              dot += gd[j] * pd[j];
            }
            for (int c = 0; c < C; ++c) {
              const std::int64_t j = detail::nchw(C, H, W, n, c, h, w);
              dx[j] += pd[j] * (gd[j] - dot);
            }
          }
    });
    return out;
  }

  // Mean of -log p(true class) over non-ignored pixels, computed in
  // log-space. Fused softmax keeps the backward rule exact.
  TensorPtr<T> cross_entropy(const TensorPtr<T>& logits, const LabelMap& labels, int ignore_index) {
    return ce_impl(logits, labels, nullptr, ignore_index);
  }

  // Per-pixel weighted variant: sum_p weight_p * CE_p / #non-ignored.
  // weights has one entry per (n,h,w) pixel and is treated as a constant.
  TensorPtr<T> cross_entropy_weighted(const TensorPtr<T>& logits, const LabelMap& labels,
                                      const std::vector<T>& weights, int ignore_index) {
    if (static_cast<std::int64_t>(weights.size()) != labels.size())
      throw UsageError("cross_entropy_weighted: weight count " + std::to_string(weights.size()) +
                       " != pixel count " + std::to_string(labels.size()));
    return ce_impl(logits, labels, &weights, ignore_index);
  }

  // sum_i coeffs[i] * x[i]; test scalarizer for grad checks.
  TensorPtr<T> weighted_sum(const TensorPtr<T>& x, const std::vector<T>& coeffs) {
    if (static_cast<std::int64_t>(coeffs.size()) != x->numel())
      throw UsageError("weighted_sum: coeff count " + std::to_string(coeffs.size()) +
                       " != numel " + std::to_string(x->numel()));
    auto out = make_tensor<T>({1});
    double acc = 0.0;
    for (std::int64_t i = 0; i < x->numel(); ++i) acc += static_cast<double>(coeffs[i]) * x->data[i];
    out->data[0] = T(acc);
    auto co = std::make_shared<std::vector<T>>(coeffs);
    record([=, this]() {
      const T g = grad_of(out)[0];
      T* dx = grad_of(x);
      for (std::int64_t i = 0; i < x->numel(); ++i) dx[i] += g * (*co)[i];
    });
    return out;
  }

  void backward(const TensorPtr<T>& loss) {
    if (backward_run_)
      throw UsageError("graph backward already run; re-run the forward pass first");
    if (loss->numel() != 1)
      throw UsageError("backward: loss must be scalar, got shape " + shape_str(loss->shape));
    backward_run_ = true;
    grad_of(loss)[0] = T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    // Single += per tensor keeps cross-pass accumulation exact.
    for (auto& [tensor, buf] : gradbuf_)
      for (std::size_t i = 0; i < buf.size(); ++i) tensor->grad[i] += buf[i];
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  TensorPtr<T> ce_impl(const TensorPtr<T>& logits, const LabelMap& labels,
                       const std::vector<T>* weights, int ignore_index) {
    if (logits->ndim() != 4)
      throw UsageError("cross_entropy: logits must be 4-d, got shape " + shape_str(logits->shape));
    const int N = logits->dim(0), C = logits->dim(1), H = logits->dim(2), W = logits->dim(3);
    if (labels.n != N || labels.h != H || labels.w != W)
      throw UsageError("cross_entropy: label map " + std::to_string(labels.n) + "x" +
                       std::to_string(labels.h) + "x" + std::to_string(labels.w) +
                       " does not match logits " + shape_str(logits->shape));
    const T* xd = logits->data.data();
    auto probs = std::make_shared<std::vector<T>>(logits->data.size());
    std::int64_t counted = 0;
    double total = 0.0;
    for (int n = 0; n < N; ++n)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          const std::int64_t p = (static_cast<std::int64_t>(n) * H + h) * W + w;
          const int y = labels.v[static_cast<std::size_t>(p)];
          if (y == ignore_index) continue;
          if (y < 0 || y >= C)
            throw UsageError("cross_entropy: label " + std::to_string(y) + " out of range [0," +
                             std::to_string(C) + ") at pixel " + std::to_string(p));
          T mx = xd[detail::nchw(C, H, W, n, 0, h, w)];
          for (int c = 1; c < C; ++c) mx = std::max(mx, xd[detail::nchw(C, H, W, n, c, h, w)]);
          T sum_exp = T(0);
          for (int c = 0; c < C; ++c)
            sum_exp += std::exp(xd[detail::nchw(C, H, W, n, c, h, w)] - mx);
          const T lse = mx + std::log(sum_exp);
          for (int c = 0; c < C; ++c) {
            const std::int64_t j = detail::nchw(C, H, W, n, c, h, w);
            (*probs)[static_cast<std::size_t>(j)] = std::exp(xd[j] - lse);
          }
          const T ce_p = lse - xd[detail::nchw(C, H, W, n, y, h, w)];
          const T wp = weights ? (*weights)[static_cast<std::size_t>(p)] : T(1);
          total += static_cast<double>(wp) * static_cast<double>(ce_p);
          ++counted;
        }
    if (counted == 0) throw UsageError("cross_entropy: no non-ignored pixels");
    auto out = make_tensor<T>({1});
    out->data[0] = T(total / static_cast<double>(counted));

    auto wcopy = weights ? std::make_shared<std::vector<T>>(*weights) : nullptr;
    const std::int64_t cnt = counted;
    const LabelMap labels_copy = labels;
    record([=, this]() {
      const T g = grad_of(out)[0];
      T* dx = grad_of(logits);
      for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            const std::int64_t p = (static_cast<std::int64_t>(n) * H + h) * W + w;
            const int y = labels_copy.v[static_cast<std::size_t>(p)];
            if (y == ignore_index) continue;
            const T wp = wcopy ? (*wcopy)[static_cast<std::size_t>(p)] : T(1);
            const T scale = g * wp / T(cnt);
            for (int c = 0; c < C; ++c) {
              const std::int64_t j = detail::nchw(C, H, W, n, c, h, w);
              dx[j] += scale * ((*probs)[static_cast<std::size_t>(j)] - (c == y ? T(1) : T(0)));
            }
          }
    });
    return out;
  }

  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

  // Graph-local gradient buffer; references stay valid across inserts.
  T* grad_of(const TensorPtr<T>& t) {
    auto& buf = gradbuf_[t.get()];
    if (buf.empty()) buf.assign(t->data.size(), T(0));
    return buf.data();
  }

  std::vector<std::function<void()>> nodes_;
  std::unordered_map<Tensor<T>*, std::vector<T>> gradbuf_;
  bool backward_run_ = false;
};

}  // namespace sls
