#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "sls/checkpoint.hpp"
#include "sls/net.hpp"
#include "sls/rng.hpp"

using namespace sls;

namespace {

StochasticSegNet<double> toy_net(int m, int depth = 1, int mid = 1, std::uint64_t seed = 42,
                                 int width = 4, int classes = 2) {
  Rng rng(seed);
  return StochasticSegNet<double>::build(
      SegNetTopology::uniform_banks(1, classes, width, depth, mid, m), rng);
}

TensorPtr<double> toy_input(int h = 8, int w = 8, std::uint64_t seed = 5) {
  Rng rng(seed);
  auto x = make_tensor<double>({1, 1, h, w});
  for (auto& v : x->data) v = rng.uniform(0.0, 1.0);
  return x;
}

}  // namespace

TEST_CASE("sample_selection with single candidates is all zeros") {
  auto net = toy_net(1);
  for (std::uint64_t seed : {1ull, 7ull, 99ull}) {
    Rng rng(seed);
    auto mask = sample_selection(rng, net);
    REQUIRE(mask.choices.size() == 5);
    for (int c : mask.choices) CHECK(c == 0);
  }
}

TEST_CASE("sample_selection is reproducible from its seed") {
  auto net = toy_net(2);
  Rng a(42), b(42);
  auto ma = sample_selection(a, net);
  auto mb = sample_selection(b, net);
  CHECK(ma == mb);
  CHECK(ma.seed_provenance == 42ull);
}

TEST_CASE("sample_selection is uniform per position") {
  // M=2, L=11: depth 2 + 5 mid blocks + stem/head = 11 positions.
  Rng init(3);
  auto net = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 2, 2, 5, 2), init);
  REQUIRE(net.num_banks() == 11);
  constexpr int kDraws = 100000;
  std::vector<int> zeros(11, 0);
  Rng rng(1234);
  for (int i = 0; i < kDraws; ++i) {
    auto mask = sample_selection(rng, net);
    for (int p = 0; p < 11; ++p) zeros[static_cast<std::size_t>(p)] += mask.choices[static_cast<std::size_t>(p)] == 0;
  }
  for (int p = 0; p < 11; ++p) {
    const double rate = static_cast<double>(zeros[static_cast<std::size_t>(p)]) / kDraws;
    CHECK(rate > 0.49);
    CHECK(rate < 0.51);
  }
}

TEST_CASE("sample_selection chi-squared uniformity below the 0.999 quantile") {
  constexpr int kDraws = 100000;
  // df=1 and df=2 chi-squared 0.999 quantiles
  const double q999[] = {10.828, 13.816};
  for (int m : {2, 3}) {
    Rng init(8);
    auto net = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 2, 0, 1, m), init);
    const int banks = net.num_banks();
    std::vector<std::vector<int>> counts(static_cast<std::size_t>(banks),
                                         std::vector<int>(static_cast<std::size_t>(m), 0));
    Rng rng(777 + static_cast<std::uint64_t>(m));
    for (int i = 0; i < kDraws; ++i) {
      auto mask = sample_selection(rng, net);
      for (int p = 0; p < banks; ++p)
        counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(mask.choices[static_cast<std::size_t>(p)])]++;
    }
    const double expected = static_cast<double>(kDraws) / m;
    for (int p = 0; p < banks; ++p) {
      double chi2 = 0.0;
      for (int c = 0; c < m; ++c) {
        const double d = counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(c)] - expected;
        chi2 += d * d / expected;
      }
      CHECK(chi2 < q999[m - 2]);
    }
  }
}

TEST_CASE("forward is a pure function of weights, input and mask") {
  auto net = toy_net(2);
  auto x = toy_input();
  Rng rng(9);
  auto mask = sample_selection(rng, net);
  Graph<double> g1, g2;
  auto o1 = net.forward(g1, x, mask);
  auto o2 = net.forward(g2, x, mask);
  CHECK(o1->data == o2->data);
  CHECK(o1->shape == std::vector<int>{1, 2, 8, 8});
}

TEST_CASE("copying candidate weights makes mask choice irrelevant") {
  // L=1: only the mid position is banked.
  Rng init(21);
  SegNetTopology topo = SegNetTopology::plain(1, 2, 4, 1, 1);
  topo.bank_m[2] = 2;  // positions: stem, down, mid, up, head
  auto net = StochasticSegNet<double>::build(topo, init);
  REQUIRE(net.num_banks() == 1);

  auto& bank = net.position(2);
  bank.candidates[1].weight->data = bank.candidates[0].weight->data;
  bank.candidates[1].bias->data = bank.candidates[0].bias->data;
  bank.candidates[1].gamma->data = bank.candidates[0].gamma->data;
  bank.candidates[1].beta->data = bank.candidates[0].beta->data;

  auto x = toy_input();
  Graph<double> g1, g2;
  auto o0 = net.forward(g1, x, SelectionMask{{0}, {}});
  auto o1 = net.forward(g2, x, SelectionMask{{1}, {}});
  CHECK(o0->data == o1->data);
}

TEST_CASE("forward equals the explicitly assembled sub-network") {
  // L=2 toy: down and mid positions banked with M=2.
  Rng init(17);
  SegNetTopology topo = SegNetTopology::plain(1, 2, 4, 1, 1);
  topo.bank_m[1] = 2;
  topo.bank_m[2] = 2;
  auto net = StochasticSegNet<double>::build(topo, init);
  REQUIRE(net.num_banks() == 2);
  auto x = toy_input();

  auto block = [](Graph<double>& g, const BlockParams<double>& bp, const TensorPtr<double>& in,
                  int stride, int pad, bool norm_relu) {
    auto out = g.conv2d(in, bp.weight, bp.bias, stride, pad);
    if (norm_relu) {
      out = g.channel_norm(out, bp.gamma, bp.beta);
      out = g.relu(out);
    }
    return out;
  };

  for (const auto& mask : enumerate_selections(net)) {
    Graph<double> g;
    auto got = net.forward(g, x, mask);

    // hand-composed pipeline using exactly the chosen candidates
    Graph<double> h;
    auto cur = block(h, net.position(0).candidates[0], x, 1, 1, true);
    auto skip = cur;
    cur = block(h, net.position(1).candidates[static_cast<std::size_t>(mask.choices[0])], cur, 2, 1, true);
    cur = block(h, net.position(2).candidates[static_cast<std::size_t>(mask.choices[1])], cur, 1, 1, true);
    cur = h.nearest_upsample(cur, 2);
    cur = block(h, net.position(3).candidates[0], cur, 1, 1, true);
    cur = h.add(cur, skip);
    auto expected = block(h, net.position(4).candidates[0], cur, 1, 0, false);

    REQUIRE(got->shape == expected->shape);
    for (std::int64_t i = 0; i < got->numel(); ++i)
      CHECK(std::abs(got->data[i] - expected->data[i]) < 1e-12);
  }
}

TEST_CASE("count_submodels matches the M^L law") {
  // M=2, L=11 and M=2, L=18
  Rng r1(1), r2(2), r3(3);
  auto net11 = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 2, 2, 5, 2), r1);
  REQUIRE(net11.num_banks() == 11);
  CHECK(count_submodels(net11) == 2048);

  auto net18 = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 2, 2, 12, 2), r2);
  REQUIRE(net18.num_banks() == 18);
  CHECK(count_submodels(net18) == 262144);

  auto net1 = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 2, 2, 5, 1), r3);
  CHECK(count_submodels(net1) == 1);
}

TEST_CASE("count_submodels reports 64-bit overflow") {
  Rng init(4);
  auto net = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 1, 2, 58, 2), init);
  REQUIRE(net.num_banks() == 64);
  CHECK_THROWS_AS(count_submodels(net), NumericError);
}

TEST_CASE("count_parameters: conv block rule and hand summation") {
  CHECK(block_scalar_count(BlockSpec{1, 1, 3, 1, 0, false, false}) == 10);  // 9 weights + 1 bias

  Rng init(5);
  const auto topo = SegNetTopology::plain(1, 3, 4, 1, 2);
  auto net = StochasticSegNet<double>::build(topo, init);
  // stem 1->4, down 4->8, mid 8->8 x2, up 8->4, head 4->3
  std::uint64_t manual = 0;
  manual += block_scalar_count(BlockSpec{1, 4, 3, 1, 1, true, true});
  manual += block_scalar_count(BlockSpec{4, 8, 3, 2, 1, true, true});
  manual += 2 * block_scalar_count(BlockSpec{8, 8, 3, 1, 1, true, true});
  manual += block_scalar_count(BlockSpec{8, 4, 3, 1, 1, true, true});
  manual += block_scalar_count(BlockSpec{4, 3, 1, 1, 0, false, false});
  CHECK(count_parameters(net) == manual);
}

TEST_CASE("banking every layer with M=2 exactly doubles the parameter count") {
  Rng r1(6), r2(7);
  auto plain = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 3, 6, 2, 1, 1), r1);
  auto banked = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 3, 6, 2, 1, 2), r2);
  CHECK(count_parameters(banked) == 2 * count_parameters(plain));
}

TEST_CASE("enumerate_selections: lexicographic order and counts") {
  Rng init(9);
  SegNetTopology topo = SegNetTopology::plain(1, 2, 2, 1, 1);
  topo.bank_m[1] = 2;
  topo.bank_m[2] = 2;
  auto net = StochasticSegNet<double>::build(topo, init);
  auto masks = enumerate_selections(net);
  REQUIRE(masks.size() == 4);
  CHECK(masks[0].choices == std::vector<int>{0, 0});
  CHECK(masks[1].choices == std::vector<int>{0, 1});
  CHECK(masks[2].choices == std::vector<int>{1, 0});
  CHECK(masks[3].choices == std::vector<int>{1, 1});

  Rng init3(10);
  auto net3 = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 2, 0, 1, 2), init3);
  REQUIRE(net3.num_banks() == 3);
  auto masks3 = enumerate_selections(net3);
  CHECK(masks3.size() == 8);
  std::set<std::vector<int>> distinct;
  for (const auto& m : masks3) distinct.insert(m.choices);
  CHECK(distinct.size() == 8);
}

TEST_CASE("enumerate_selections: mixed bank sizes match the Cartesian product") {
  Rng init(11);
  SegNetTopology topo = SegNetTopology::plain(1, 2, 2, 0, 1);
  topo.bank_m[0] = 2;
  topo.bank_m[1] = 3;
  auto net = StochasticSegNet<double>::build(topo, init);
  auto masks = enumerate_selections(net);
  std::vector<std::vector<int>> expected;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 3; ++b) expected.push_back({a, b});
  REQUIRE(masks.size() == expected.size());
  for (std::size_t i = 0; i < masks.size(); ++i) CHECK(masks[i].choices == expected[i]);
  CHECK(count_submodels(net) == 6);
}

TEST_CASE("enumerate_selections refuses ensembles over the guard") {
  Rng init(12);
  auto net = StochasticSegNet<double>::build(SegNetTopology::uniform_banks(1, 2, 1, 2, 7, 2), init);
  REQUIRE(net.num_banks() == 13);  // 8192 sub-models
  CHECK_THROWS_WITH_AS(enumerate_selections(net), doctest::Contains("8192"), UsageError);
}

TEST_CASE("mutating a candidate changes only the masks that select it") {
  Rng init(13);
  SegNetTopology topo = SegNetTopology::plain(1, 2, 4, 1, 1);
  topo.bank_m[1] = 2;
  topo.bank_m[2] = 2;
  auto net = StochasticSegNet<double>::build(topo, init);
  auto x = toy_input();

  const auto masks = enumerate_selections(net);
  std::vector<std::vector<double>> before;
  for (const auto& m : masks) {
    Graph<double> g;
    before.push_back(net.forward(g, x, m)->data);
  }

  // perturb candidate 1 of the first bank (position 1)
  net.position(1).candidates[1].weight->data[0] += 0.5;

  for (std::size_t i = 0; i < masks.size(); ++i) {
    Graph<double> g;
    auto after = net.forward(g, x, masks[i])->data;
    if (masks[i].choices[0] == 1) {
      CHECK(after != before[i]);
    } else {
      CHECK(after == before[i]);
    }
  }
}

TEST_CASE("forward validates mask length and input compatibility") {
  auto net = toy_net(2, 2, 1);
  auto x = toy_input(8, 8);
  Graph<double> g;
  CHECK_THROWS_WITH_AS(net.forward(g, x, SelectionMask{{0, 1}, {}}),
                       doctest::Contains("mask length"), UsageError);
  Rng rng(1);
  auto mask = sample_selection(rng, net);
  auto bad = toy_input(6, 6);  // not divisible by 2^2
  CHECK_THROWS_WITH_AS(net.forward(g, bad, mask), doctest::Contains("incompatible"), UsageError);
  auto bad_ch = make_tensor<double>({1, 2, 8, 8});
  CHECK_THROWS_AS(net.forward(g, bad_ch, mask), UsageError);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Rng init(14);
  SegNetTopology topo = SegNetTopology::uniform_banks(1, 3, 4, 1, 2, 2);
  topo.bank_m[0] = 0;  // mix of fixed and banked positions
  auto net = StochasticSegNet<float>::build(topo, init);

  const std::string bytes = serialize_checkpoint(net);
  auto loaded = deserialize_checkpoint<float>(bytes);
  const auto a = net.parameters();
  const auto b = loaded.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->data == b[i]->data);
  CHECK(serialize_checkpoint(loaded) == bytes);
  CHECK(loaded.topology().bank_m == topo.bank_m);

  // file-level round trip for a double-precision net (params stored as f32)
  Rng init2(15);
  auto dnet = StochasticSegNet<double>::build(topo, init2);
  const std::string dbytes = serialize_checkpoint(dnet);
  auto dloaded = deserialize_checkpoint<double>(dbytes);
  CHECK(serialize_checkpoint(dloaded) == dbytes);
}

TEST_CASE("checkpoint rejects bad magic, version and truncation") {
  Rng init(16);
  auto net = StochasticSegNet<float>::build(SegNetTopology::uniform_banks(1, 2, 2, 0, 1, 2), init);
  std::string bytes = serialize_checkpoint(net);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint<float>(bad_magic), FormatError);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_WITH_AS(deserialize_checkpoint<float>(bad_version),
                       doctest::Contains("version"), FormatError);

  std::string truncated = bytes.substr(0, bytes.size() - 3);
  CHECK_THROWS_WITH_AS(deserialize_checkpoint<float>(truncated), doctest::Contains("truncated"),
                       FormatError);

  std::string trailing = bytes + "xx";
  CHECK_THROWS_WITH_AS(deserialize_checkpoint<float>(trailing), doctest::Contains("trailing"),
                       FormatError);
}

TEST_CASE("clone produces an independent copy") {
  auto net = toy_net(2);
  auto copy = net.clone();
  net.position(0).candidates[0].weight->data[0] += 1.0;
  CHECK(copy.position(0).candidates[0].weight->data[0] !=
        net.position(0).candidates[0].weight->data[0]);
}
