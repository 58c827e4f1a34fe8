#include "sls/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sls/csv.hpp"
#include "sls/pgm.hpp"

namespace sls {

std::string uncertainty_kind_name(UncertaintyKind kind) {
  return kind == UncertaintyKind::variance ? "variance" : "entropy";
}

UncertaintyKind parse_uncertainty_kind(const std::string& name) {
  if (name == "variance") return UncertaintyKind::variance;
  if (name == "entropy") return UncertaintyKind::entropy;
  throw UsageError("unknown uncertainty kind '" + name + "' (expected variance or entropy)");
}

UncertaintyMap variance_map(const PredictionSampleStack& stack) {
  if (stack.t < 2)
    throw UsageError("variance_map: needs >= 2 samples, got " + std::to_string(stack.t));
  const std::int64_t plane = stack.plane();
  const std::int64_t hw = static_cast<std::int64_t>(stack.h) * stack.w;
  UncertaintyMap map;
  map.h = stack.h;
  map.w = stack.w;
  map.kind = UncertaintyKind::variance;
  map.values.assign(static_cast<std::size_t>(hw), 0.0);
  for (std::int64_t p = 0; p < hw; ++p) {
    double acc = 0.0;
    for (int c = 0; c < stack.c; ++c) {
      const std::int64_t j = static_cast<std::int64_t>(c) * hw + p;
      double mean = 0.0;
      for (int t = 0; t < stack.t; ++t) mean += stack.probs[static_cast<std::size_t>(t * plane + j)];
      mean /= stack.t;
      double var = 0.0;
      for (int t = 0; t < stack.t; ++t) {
        const double d = stack.probs[static_cast<std::size_t>(t * plane + j)] - mean;
        var += d * d;
      }
      acc += var / stack.t;  // population variance
    }
    map.values[static_cast<std::size_t>(p)] = acc / stack.c;
  }
  return map;
}

UncertaintyMap entropy_map(const std::vector<double>& mean_probs, int c, int h, int w) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  if (static_cast<std::int64_t>(mean_probs.size()) != static_cast<std::int64_t>(c) * hw)
    throw UsageError("entropy_map: prob size " + std::to_string(mean_probs.size()) +
                     " != " + std::to_string(c) + "*" + std::to_string(h) + "*" + std::to_string(w));
  UncertaintyMap map;
  map.h = h;
  map.w = w;
  map.kind = UncertaintyKind::entropy;
  map.values.assign(static_cast<std::size_t>(hw), 0.0);
  for (std::int64_t p = 0; p < hw; ++p) {
    double e = 0.0;
    for (int ci = 0; ci < c; ++ci) {
      const double v = mean_probs[static_cast<std::size_t>(ci * hw + p)];
      if (v > 0.0) e -= v * std::log(v);
    }
    map.values[static_cast<std::size_t>(p)] = e;
  }
  return map;
}

UncertaintyMap normalize_uncertainty(const UncertaintyMap& map) {
  UncertaintyMap out = map;
  out.normalized = true;
  if (map.values.empty()) return out;
  const auto [mn_it, mx_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double mn = *mn_it, mx = *mx_it;
  if (mx == mn) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  const double range = mx - mn;
  for (auto& v : out.values) v = (v - mn) / range;
  return out;
}

std::vector<double> stack_mean(const PredictionSampleStack& stack) {
  const std::int64_t plane = stack.plane();
  std::vector<double> mean(static_cast<std::size_t>(plane), 0.0);
  for (int t = 0; t < stack.t; ++t)
    for (std::int64_t j = 0; j < plane; ++j)
      mean[static_cast<std::size_t>(j)] += stack.probs[static_cast<std::size_t>(t * plane + j)];
  for (auto& v : mean) v /= stack.t;
  return mean;
}

UncertaintyMap uncertainty_from_stack(const PredictionSampleStack& stack, UncertaintyKind kind) {
  if (kind == UncertaintyKind::variance) return variance_map(stack);
  return entropy_map(stack_mean(stack), stack.c, stack.h, stack.w);
}

void write_uncertainty_pgm(const UncertaintyMap& map, const std::string& path) {
  const UncertaintyMap norm = map.normalized ? map : normalize_uncertainty(map);
  GrayImage img;
  img.h = map.h;
  img.w = map.w;
  img.pixels.resize(norm.values.size());
  for (std::size_t i = 0; i < norm.values.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(norm.values[i] * 255.0));
  write_pgm(img, path);
}

void write_uncertainty_csv(const UncertaintyMap& map, const std::string& path) {
  CsvWriter csv(path);
  csv.row({"row", "col", "value"});
  for (int r = 0; r < map.h; ++r)
    for (int c = 0; c < map.w; ++c)
      csv.row({std::to_string(r), std::to_string(c),
               fmt_full(map.values[static_cast<std::size_t>(r) * map.w + c])});
}

std::vector<int> argmax_labels(const std::vector<double>& probs, int c, int h, int w) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  std::vector<int> labels(static_cast<std::size_t>(hw), 0);
  for (std::int64_t p = 0; p < hw; ++p) {
    int best = 0;
    double bv = probs[static_cast<std::size_t>(p)];
    for (int ci = 1; ci < c; ++ci) {
      const double v = probs[static_cast<std::size_t>(ci * hw + p)];
      if (v > bv) {
        bv = v;
        best = ci;
      }
    }
    labels[static_cast<std::size_t>(p)] = best;
  }
  return labels;
}

}  // namespace sls
