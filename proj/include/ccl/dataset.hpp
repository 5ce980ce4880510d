#pragma once

#include "ccl/augment.hpp"
#include "ccl/interval.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ccl {

struct DatasetBundle {
  std::vector<Vector> train_inputs;
  std::vector<int> train_labels;
  std::vector<Vector> test_inputs;
  std::vector<int> test_labels;
  std::vector<Interval> feature_ranges;
  std::vector<std::string> label_names;  // optional

  Index input_dim() const;
  int num_labels() const;
};

// IDX image/label file pair (big-endian headers, magic 0x00000803 for images
// and 0x00000801 for labels). Pixels are scaled to [0, 1]; samples land in
// the train slots, feature ranges are [0, 1].
DatasetBundle load_idx(const std::string& images_path, const std::string& labels_path);

// Header-first CSV with one numeric label column; all other columns are
// features in file order. Rows load in file order; feature ranges are the
// observed min/max.
DatasetBundle load_csv(const std::string& path, const std::string& label_column);

// Deterministic image-like stand-in: one random prototype per class in
// [0, 1]^dim, samples are the prototype plus uniform noise, clamped.
struct SyntheticSpec {
  Index dim = 784;
  int classes = 2;
  int train_per_class = 500;
  int test_per_class = 100;
  double noise = 0.12;
  std::uint64_t seed = 7;
};
DatasetBundle make_synthetic(const SyntheticSpec& spec);

// Samples of the given labels as LabeledSamples with the given origin.
std::vector<LabeledSample> collect_samples(const std::vector<Vector>& inputs,
                                           const std::vector<int>& labels,
                                           const std::vector<int>& keep, SampleOrigin origin);

}  // namespace ccl
