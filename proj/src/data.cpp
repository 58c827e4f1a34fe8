#include "sls/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "sls/errors.hpp"
#include "sls/rng.hpp"

namespace fs = std::filesystem;

namespace sls {

namespace {

// Band intensity model: both band classes sit near kBandBase separated by
// 2*kBandDelta under kBandSigma noise, far off the shape gray levels.
constexpr double kBandBase = 0.95;
constexpr double kBandDelta = 0.03;
constexpr double kBandSigma = 0.06;

double class_gray(int cls, int class_count) {
  return 0.05 + 0.7 * (cls + 0.5) / class_count;
}

void paint_shapes(GrayImage& labels, const SyntheticTaskSpec& spec, Rng& rng) {
  const int h = spec.h, w = spec.w;
  const auto n_shapes =
      std::max<long>(1, std::lround(spec.shape_density * (static_cast<double>(h) * w) / 512.0));
  const int max_r = std::max(2, std::min(h, w) / 4);
  for (long s = 0; s < n_shapes; ++s) {
    const int cls = 1 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(spec.class_count - 1)));
    const bool disc = rng.bounded(2) == 0;
    const int cy = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(h)));
    const int cx = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(w)));
    const int ry = 2 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(max_r)));
    const int rx = 2 + static_cast<int>(rng.bounded(static_cast<std::uint64_t>(max_r)));
    for (int y = std::max(0, cy - ry); y <= std::min(h - 1, cy + ry); ++y)
      for (int x = std::max(0, cx - rx); x <= std::min(w - 1, cx + rx); ++x) {
        if (disc) {
          const double dy = static_cast<double>(y - cy) / ry;
          const double dx = static_cast<double>(x - cx) / rx;
          if (dy * dy + dx * dx > 1.0) continue;
        }
        labels.pixels[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(cls);
      }
  }
}

SegSample generate_sample(const SyntheticTaskSpec& spec, Rng& rng) {
  const int h = spec.h, w = spec.w;
  SegSample sample;
  sample.labels.h = h;
  sample.labels.w = w;

  int band_a = 0, band_b = 0;
  band_classes(spec.class_count, band_a, band_b);

  for (int attempt = 0; attempt < 16; ++attempt) {
    sample.labels.pixels.assign(static_cast<std::size_t>(h) * w, 0);
    paint_shapes(sample.labels, spec, rng);
    std::set<std::uint8_t> distinct(sample.labels.pixels.begin(), sample.labels.pixels.end());
    if (distinct.size() >= 2 || spec.band_width > 0) break;
  }

  int band_row0 = -1;
  if (spec.band_width > 0) {
    band_row0 = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(h - spec.band_width + 1)));
    for (int y = band_row0; y < band_row0 + spec.band_width; ++y)
      for (int x = 0; x < w; ++x)
        sample.labels.pixels[static_cast<std::size_t>(y) * w + x] =
            static_cast<std::uint8_t>((x / 4) % 2 == 0 ? band_a : band_b);
    sample.ambiguity.h = h;
    sample.ambiguity.w = w;
    sample.ambiguity.pixels.assign(static_cast<std::size_t>(h) * w, 0);
    for (int y = band_row0; y < band_row0 + spec.band_width; ++y)
      for (int x = 0; x < w; ++x)
        sample.ambiguity.pixels[static_cast<std::size_t>(y) * w + x] = 255;
  }

  sample.image.h = h;
  sample.image.w = w;
  sample.image.pixels.assign(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const int cls = sample.labels.pixels[i];
      double v;
      if (band_row0 >= 0 && y >= band_row0 && y < band_row0 + spec.band_width) {
        v = kBandBase + (cls == band_a ? -kBandDelta : kBandDelta) + rng.normal(0.0, kBandSigma);
      } else {
        v = class_gray(cls, spec.class_count) + rng.normal(0.0, spec.noise_sigma);
      }
      v = std::clamp(v, 0.0, 1.0);
      sample.image.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  return sample;
}

std::string sample_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", index);
  return buf;
}

}  // namespace

void band_classes(int class_count, int& a, int& b) {
  if (class_count >= 3) {
    a = 1;
    b = 2;
  } else {
    a = 0;
    b = 1;
  }
}

std::vector<SegSample> generate_dataset(const SyntheticTaskSpec& spec, int n) {
  if (n < 1) throw UsageError("generate_dataset: n must be >= 1, got " + std::to_string(n));
  if (spec.h < 4 || spec.w < 4)
    throw UsageError("generate_dataset: image size must be >= 4x4, got " + std::to_string(spec.h) +
                     "x" + std::to_string(spec.w));
  if (spec.class_count < 2 || spec.class_count > 254)
    throw UsageError("generate_dataset: class count must be in [2,254], got " +
                     std::to_string(spec.class_count));
  if (spec.noise_sigma < 0.0)
    throw UsageError("generate_dataset: noise sigma must be >= 0");
  if (spec.band_width < 0 || spec.band_width > spec.h)
    throw UsageError("generate_dataset: band width " + std::to_string(spec.band_width) +
                     " does not fit image height " + std::to_string(spec.h));

  const Rng root(spec.seed);
  std::vector<SegSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i) + 1);
    out.push_back(generate_sample(spec, rng));
  }
  return out;
}

void write_dataset(const std::string& dir, const std::vector<SegSample>& samples,
                   int class_count) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  fs::create_directories(fs::path(dir) / "labels", ec);
  const bool any_ambiguity =
      std::any_of(samples.begin(), samples.end(),
                  [](const SegSample& s) { return !s.ambiguity.pixels.empty(); });
  if (any_ambiguity) fs::create_directories(fs::path(dir) / "ambiguity", ec);

  std::ofstream manifest(fs::path(dir) / "manifest.txt", std::ios::binary);
  if (!manifest) throw IoError("cannot write manifest in " + dir);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const std::string name = sample_name(static_cast<int>(i)) + ".pgm";
    write_pgm(s.image, (fs::path(dir) / "images" / name).string());
    write_label_map(s.labels, (fs::path(dir) / "labels" / name).string());
    if (!s.ambiguity.pixels.empty())
      write_pgm(s.ambiguity, (fs::path(dir) / "ambiguity" / name).string());
    manifest << i << "," << s.image.h << "," << s.image.w << "," << class_count << "\n";
  }
  if (!manifest) throw IoError("failed writing manifest in " + dir);
}

Dataset read_dataset(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt", std::ios::binary);
  if (!manifest) throw IoError("cannot open manifest in " + dir);
  Dataset ds;
  ds.class_count = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<long> fields;
    while (std::getline(ss, cell, ',')) fields.push_back(std::strtol(cell.c_str(), nullptr, 10));
    if (fields.size() != 4)
      throw FormatError(dir + "/manifest.txt: line " + std::to_string(line_no) +
                        " has " + std::to_string(fields.size()) + " fields, expected 4");
    const int index = static_cast<int>(fields[0]);
    const int classes = static_cast<int>(fields[3]);
    if (ds.class_count == 0) ds.class_count = classes;
    if (classes != ds.class_count)
      throw FormatError(dir + "/manifest.txt: inconsistent class count at line " +
                        std::to_string(line_no));
    const std::string name = sample_name(index) + ".pgm";
    SegSample s;
    s.image = read_pgm((fs::path(dir) / "images" / name).string());
    s.labels = read_label_map((fs::path(dir) / "labels" / name).string());
    const auto amb_path = fs::path(dir) / "ambiguity" / name;
    if (fs::exists(amb_path)) s.ambiguity = read_pgm(amb_path.string());
    if (s.image.h != fields[1] || s.image.w != fields[2])
      throw FormatError(dir + "/manifest.txt: size mismatch for sample " + std::to_string(index));
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw FormatError(dir + "/manifest.txt: no samples listed");
  return ds;
}

LabelMap labels_to_map(const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw UsageError("labels_to_map: empty index list");
  const auto& first = ds.samples.at(static_cast<std::size_t>(indices[0])).labels;
  LabelMap map;
  map.n = static_cast<int>(indices.size());
  map.h = first.h;
  map.w = first.w;
  map.v.reserve(static_cast<std::size_t>(map.n) * first.h * first.w);
  for (int idx : indices) {
    const auto& lab = ds.samples.at(static_cast<std::size_t>(idx)).labels;
    if (lab.h != first.h || lab.w != first.w)
      throw UsageError("labels_to_map: mixed sample sizes in batch");
    for (auto px : lab.pixels) map.v.push_back(static_cast<int>(px));
  }
  return map;
}

}  // namespace sls
