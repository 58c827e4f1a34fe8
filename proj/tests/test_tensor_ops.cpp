#include <doctest.h>

#include <cmath>
#include <vector>

#include "sls/gradcheck.hpp"
#include "sls/graph.hpp"
#include "sls/rng.hpp"
#include "sls/tensor.hpp"

using namespace sls;

namespace {

// Independent six-loop convolution oracle: materializes the zero-padded
// input, then accumulates products per output position.
std::vector<double> naive_conv2d(const std::vector<double>& x, int N, int C, int H, int W,
                                 const std::vector<double>& w, int K, int KH, int KW,
                                 const std::vector<double>& b, int stride, int pad, int& OH,
                                 int& OW) {
  const int PH = H + 2 * pad, PW = W + 2 * pad;
  std::vector<double> padded(static_cast<std::size_t>(N) * C * PH * PW, 0.0);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int ww = 0; ww < W; ++ww)
          padded[((static_cast<std::size_t>(n) * C + c) * PH + h + pad) * PW + ww + pad] =
              x[((static_cast<std::size_t>(n) * C + c) * H + h) * W + ww];
  OH = (PH - KH) / stride + 1;
  OW = (PW - KW) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(N) * K * OH * OW, 0.0);
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = b[static_cast<std::size_t>(k)];
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw)
                acc += padded[((static_cast<std::size_t>(n) * C + c) * PH + oh * stride + kh) * PW +
                              ow * stride + kw] *
                       w[((static_cast<std::size_t>(k) * C + c) * KH + kh) * KW + kw];
          out[((static_cast<std::size_t>(n) * K + k) * OH + oh) * OW + ow] = acc;
        }
  return out;
}

TensorPtr<double> random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                                double hi = 1.0) {
  auto t = make_tensor<double>(std::move(shape));
  for (auto& v : t->data) v = rng.uniform(lo, hi);
  return t;
}

std::vector<double> random_coeffs(std::int64_t n, Rng& rng) {
  std::vector<double> c(static_cast<std::size_t>(n));
  for (auto& v : c) v = rng.uniform(-1.0, 1.0);
  return c;
}

}  // namespace

TEST_CASE("conv2d all-ones 3x3 kernel sums the window") {
  Graph<double> g;
  auto x = make_tensor<double>({1, 1, 3, 3}, 1.0);
  auto w = make_tensor<double>({1, 1, 3, 3}, 1.0);
  auto b = make_tensor<double>({1});
  auto out = g.conv2d(x, w, b, 1, 0);
  REQUIRE(out->shape == std::vector<int>{1, 1, 1, 1});
  CHECK(out->data[0] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("conv2d identity kernel with pad 1 reproduces the input") {
  Rng rng(7);
  auto x = random_tensor({2, 1, 4, 5}, rng);
  auto w = make_tensor<double>({1, 1, 3, 3});
  w->data[4] = 1.0;  // center tap
  auto b = make_tensor<double>({1});
  Graph<double> g;
  auto out = g.conv2d(x, w, b, 1, 1);
  REQUIRE(out->shape == x->shape);
  for (std::int64_t i = 0; i < x->numel(); ++i) CHECK(out->data[i] == x->data[i]);
}

TEST_CASE("conv2d matches the naive six-loop oracle") {
  Rng rng(11);
  for (int stride : {1, 2})
    for (int pad : {0, 1}) {
      auto x = random_tensor({2, 3, 5, 5}, rng);
      auto w = random_tensor({4, 3, 3, 3}, rng);
      auto b = random_tensor({4}, rng);
      Graph<double> g;
      auto out = g.conv2d(x, w, b, stride, pad);
      int oh = 0, ow = 0;
      auto expected = naive_conv2d(x->data, 2, 3, 5, 5, w->data, 4, 3, 3, b->data, stride, pad,
                                   oh, ow);
      REQUIRE(out->shape == std::vector<int>{2, 4, oh, ow});
      for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(std::abs(out->data[i] - expected[i]) < 1e-12);
    }
}

TEST_CASE("conv2d rejects mismatched shapes with named dimensions") {
  Graph<double> g;
  auto x = make_tensor<double>({1, 3, 5, 5});
  auto w = make_tensor<double>({4, 2, 3, 3});
  auto b = make_tensor<double>({4});
  CHECK_THROWS_WITH_AS(g.conv2d(x, w, b, 1, 0),
                       doctest::Contains("input channels 3 != weight channels 2"), UsageError);
  auto w2 = make_tensor<double>({4, 3, 3, 3});
  auto b2 = make_tensor<double>({5});
  CHECK_THROWS_AS(g.conv2d(x, w2, b2, 1, 0), UsageError);
  CHECK_THROWS_AS(g.conv2d(x, w2, b, 0, 0), UsageError);
  auto wbig = make_tensor<double>({1, 3, 7, 7});
  auto b1 = make_tensor<double>({1});
  CHECK_THROWS_AS(g.conv2d(x, wbig, b1, 1, 0), UsageError);
}

TEST_CASE("nearest_upsample block-repeats and pools gradients") {
  auto x = make_tensor<double>({1, 1, 2, 2});
  x->data = {1, 2, 3, 4};
  x->grad = {0, 0, 0, 0};
  Graph<double> g;
  auto out = g.nearest_upsample(x, 2);
  const std::vector<double> expected = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  REQUIRE(out->shape == std::vector<int>{1, 1, 4, 4});
  CHECK(out->data == expected);

  // all-ones upstream grad: each input cell receives factor^2
  auto loss = g.weighted_sum(out, std::vector<double>(16, 1.0));
  g.backward(loss);
  for (double v : x->grad) CHECK(v == 4.0);

  CHECK_THROWS_AS(Graph<double>().nearest_upsample(x, 1), UsageError);
}

TEST_CASE("nearest_upsample gradient matches finite differences") {
  Rng rng(3);
  auto x = random_tensor({1, 2, 3, 3}, rng);
  auto coeffs = random_coeffs(2 * 6 * 6, rng);
  auto report = grad_check(
      [&](Graph<double>& g) { return g.weighted_sum(g.nearest_upsample(x, 2), coeffs); }, {x},
      1e-6);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("relu gradient away from the kink") {
  Rng rng(5);
  auto x = make_tensor<double>({1, 2, 4, 4});
  for (auto& v : x->data) {
    v = rng.uniform(-1.0, 1.0);
    v += v >= 0.0 ? 0.1 : -0.1;  // keep |x| >= 0.1
  }
  auto coeffs = random_coeffs(x->numel(), rng);
  auto report = grad_check([&](Graph<double>& g) { return g.weighted_sum(g.relu(x), coeffs); },
                           {x}, 1e-6);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("softmax of zero logits is uniform") {
  Graph<double> g;
  auto x = make_tensor<double>({1, 4, 2, 2});
  auto p = g.softmax_channels(x);
  for (double v : p->data) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax sums to one with values in [0,1]") {
  Rng rng(13);
  auto x = random_tensor({2, 5, 4, 4}, rng, -30.0, 30.0);
  Graph<double> g;
  auto p = g.softmax_channels(x);
  for (int n = 0; n < 2; ++n)
    for (int h = 0; h < 4; ++h)
      for (int w = 0; w < 4; ++w) {
        double sum = 0.0;
        for (int c = 0; c < 5; ++c) {
          const double v = p->data[detail::nchw(5, 4, 4, n, c, h, w)];
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
      }
}

TEST_CASE("cross_entropy of a one-hot prediction is zero") {
  Graph<double> g;
  auto logits = make_tensor<double>({1, 2, 1, 1});
  logits->data = {0.0, 60.0};  // softmax saturates to the true class
  LabelMap labels{1, 1, 1, {1}};
  auto loss = g.cross_entropy(logits, labels, kIgnoreIndex);
  CHECK(loss->data[0] == 0.0);
}

TEST_CASE("cross_entropy closed-form value at logits (0, ln 2)") {
  Graph<double> g;
  auto logits = make_tensor<double>({1, 2, 1, 1});
  logits->data = {0.0, std::log(2.0)};
  LabelMap labels{1, 1, 1, {1}};
  auto loss = g.cross_entropy(logits, labels, kIgnoreIndex);
  CHECK(loss->data[0] == doctest::Approx(-std::log(2.0 / 3.0)).epsilon(1e-12));
  CHECK(loss->data[0] == doctest::Approx(0.405465).epsilon(1e-6));
}

TEST_CASE("cross_entropy rejects out-of-range labels, honors ignore") {
  Graph<double> g;
  auto logits = make_tensor<double>({1, 3, 1, 2});
  LabelMap bad{1, 1, 2, {0, 3}};
  CHECK_THROWS_WITH_AS(g.cross_entropy(logits, bad, kIgnoreIndex), doctest::Contains("label 3"),
                       UsageError);

  LabelMap with_ignore{1, 1, 2, {1, kIgnoreIndex}};
  Graph<double> g2;
  auto loss = g2.cross_entropy(logits, with_ignore, kIgnoreIndex);
  CHECK(loss->data[0] == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  LabelMap all_ignored{1, 1, 2, {kIgnoreIndex, kIgnoreIndex}};
  CHECK_THROWS_AS(Graph<double>().cross_entropy(logits, all_ignored, kIgnoreIndex), UsageError);
}

TEST_CASE("conv2d gradient battery over 5 seeds") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    auto x = random_tensor({2, 2, 4, 4}, rng);
    auto w = random_tensor({3, 2, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto coeffs = random_coeffs(2 * 3 * 4 * 4, rng);
    auto report = grad_check(
        [&](Graph<double>& g) {
          return g.weighted_sum(g.conv2d(x, w, b, 1, 1), coeffs);
        },
        {x, w, b}, 1e-4);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("softmax + cross_entropy composite gradient") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 31);
    auto logits = random_tensor({1, 3, 3, 3}, rng, -2.0, 2.0);
    LabelMap labels{1, 3, 3, {}};
    for (int i = 0; i < 9; ++i) labels.v.push_back(static_cast<int>(rng.bounded(3)));
    labels.v[4] = kIgnoreIndex;
    auto report = grad_check(
        [&](Graph<double>& g) { return g.cross_entropy(logits, labels, kIgnoreIndex); },
        {logits}, 1e-5);
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("softmax_channels gradient") {
  Rng rng(41);
  auto x = random_tensor({1, 4, 2, 3}, rng, -2.0, 2.0);
  auto coeffs = random_coeffs(x->numel(), rng);
  auto report = grad_check(
      [&](Graph<double>& g) { return g.weighted_sum(g.softmax_channels(x), coeffs); }, {x}, 1e-4);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("channel_norm gradient w.r.t. input and affine") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 7);
    auto x = random_tensor({2, 3, 3, 3}, rng, -2.0, 2.0);
    auto gamma = random_tensor({3}, rng, 0.5, 1.5);
    auto beta = random_tensor({3}, rng, -0.5, 0.5);
    auto coeffs = random_coeffs(x->numel(), rng);
    auto report = grad_check(
        [&](Graph<double>& g) {
          return g.weighted_sum(g.channel_norm(x, gamma, beta), coeffs);
        },
        {x, gamma, beta}, 1e-4);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("add gradient flows to both operands") {
  Rng rng(19);
  auto a = random_tensor({1, 2, 2, 2}, rng);
  auto b = random_tensor({1, 2, 2, 2}, rng);
  auto coeffs = random_coeffs(a->numel(), rng);
  auto report = grad_check(
      [&](Graph<double>& g) { return g.weighted_sum(g.add(a, b), coeffs); }, {a, b}, 1e-6);
  CHECK(report.max_rel_error < 1e-6);
  CHECK_THROWS_AS(Graph<double>().add(a, make_tensor<double>({1, 2, 2, 3})), UsageError);
}

TEST_CASE("backward twice on one graph is an error") {
  auto x = make_tensor<double>({1, 1, 2, 2}, 1.0);
  Graph<double> g;
  auto loss = g.weighted_sum(g.relu(x), {1, 1, 1, 1});
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), UsageError);
}

TEST_CASE("gradient accumulation is exactly additive") {
  Rng rng(23);
  auto x = random_tensor({1, 2, 3, 3}, rng);
  auto w = random_tensor({2, 2, 3, 3}, rng);
  auto b = random_tensor({2}, rng);
  auto coeffs = random_coeffs(2, rng);  // conv output is 1x2x1x1

  auto run = [&]() {
    Graph<double> g;
    auto loss = g.weighted_sum(g.conv2d(x, w, b, 1, 0), coeffs);
    g.backward(loss);
  };
  run();
  const auto gx = x->grad, gw = w->grad, gb = b->grad;
  run();  // second forward+backward without zero_grad
  for (std::int64_t i = 0; i < x->numel(); ++i) CHECK(x->grad[i] == 2.0 * gx[i]);
  for (std::int64_t i = 0; i < w->numel(); ++i) CHECK(w->grad[i] == 2.0 * gw[i]);
  for (std::int64_t i = 0; i < b->numel(); ++i) CHECK(b->grad[i] == 2.0 * gb[i]);
}

TEST_CASE("forward execution is bit-deterministic in both precisions") {
  Rng rng(29);
  auto xd = random_tensor({1, 2, 4, 4}, rng);
  auto wd = random_tensor({2, 2, 3, 3}, rng);
  auto bd = random_tensor({2}, rng);
  Graph<double> g1, g2;
  auto o1 = g1.conv2d(xd, wd, bd, 1, 1);
  auto o2 = g2.conv2d(xd, wd, bd, 1, 1);
  CHECK(o1->data == o2->data);

  auto xf = make_tensor<float>({1, 2, 4, 4});
  auto wf = make_tensor<float>({2, 2, 3, 3});
  auto bf = make_tensor<float>({2});
  for (std::int64_t i = 0; i < xd->numel(); ++i) xf->data[i] = static_cast<float>(xd->data[i]);
  for (std::int64_t i = 0; i < wd->numel(); ++i) wf->data[i] = static_cast<float>(wd->data[i]);
  bf->data[0] = static_cast<float>(bd->data[0]);
  bf->data[1] = static_cast<float>(bd->data[1]);
  Graph<float> f1, f2;
  auto p1 = f1.softmax_channels(f1.conv2d(xf, wf, bf, 1, 1));
  auto p2 = f2.softmax_channels(f2.conv2d(xf, wf, bf, 1, 1));
  CHECK(p1->data == p2->data);
}

TEST_CASE("grad_check reports non-finite gradients") {
  auto x = make_tensor<double>({1}, 2.0);
  CHECK_THROWS_AS(
      grad_check([&](Graph<double>& g) { return g.weighted_sum(x, {1e308}); }, {x}, 1e-4),
      NumericError);
}

TEST_CASE("tensor invariants: grad zero after creation and zero_grad") {
  auto t = make_tensor<double>({2, 3}, 5.0);
  CHECK(t->numel() == 6);
  CHECK(t->data.size() == t->grad.size());
  for (double v : t->grad) CHECK(v == 0.0);
  t->grad[2] = 1.5;
  t->zero_grad();
  for (double v : t->grad) CHECK(v == 0.0);
  CHECK_THROWS_AS(make_tensor<double>({2, 0}), UsageError);
}
