#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sls/pgm.hpp"
#include "sls/tensor.hpp"

namespace sls {

// One segmentation sample. Intensities are 8-bit (value/255 gives the [0,1]
// real); labels hold class ids with 255 = ignore. The ambiguity image is the
// generator's ground truth of the confusable band (0 or 255), empty when the
// task has no band.
struct SegSample {
  GrayImage image;
  GrayImage labels;
  GrayImage ambiguity;
};

// Desk-scale synthetic segmentation task: random shapes on background with
// class-coded gray levels, plus an optional horizontal band in which two
// classes are drawn from heavily overlapping intensity distributions, so a
// Bayes-optimal classifier keeps an irreducible error there.
struct SyntheticTaskSpec {
  int h = 64;
  int w = 64;
  int class_count = 3;
  double shape_density = 1.0;
  double noise_sigma = 0.02;
  int band_width = 0;
  std::uint64_t seed = 1;
};

std::vector<SegSample> generate_dataset(const SyntheticTaskSpec& spec, int n);

// The two classes that share the ambiguity band for a given class count.
void band_classes(int class_count, int& a, int& b);

struct Dataset {
  std::vector<SegSample> samples;
  int class_count = 2;
};

// Layout: images/NNNN.pgm, labels/NNNN.pgm, manifest.txt (one line per
// sample: index,h,w,class_count), plus ambiguity/NNNN.pgm when present.
void write_dataset(const std::string& dir, const std::vector<SegSample>& samples, int class_count);
Dataset read_dataset(const std::string& dir);

template <class T>
TensorPtr<T> images_to_batch(const Dataset& ds, const std::vector<int>& indices) {
  if (indices.empty()) throw UsageError("images_to_batch: empty index list");
  const auto& first = ds.samples.at(static_cast<std::size_t>(indices[0])).image;
  auto batch = make_tensor<T>({static_cast<int>(indices.size()), 1, first.h, first.w});
  const std::int64_t hw = static_cast<std::int64_t>(first.h) * first.w;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const auto& img = ds.samples.at(static_cast<std::size_t>(indices[n])).image;
    if (img.h != first.h || img.w != first.w)
      throw UsageError("images_to_batch: mixed sample sizes in batch");
    for (std::int64_t i = 0; i < hw; ++i)
      batch->data[static_cast<std::size_t>(n) * hw + static_cast<std::size_t>(i)] =
          T(img.pixels[static_cast<std::size_t>(i)] / 255.0);
  }
  return batch;
}

LabelMap labels_to_map(const Dataset& ds, const std::vector<int>& indices);

}  // namespace sls
