#include <doctest.h>

#include "ccl/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>

using namespace ccl;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ccl_dataset_" + name);
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  // big-endian, most significant byte first
  for (int shift = 24; shift >= 0; shift -= 8)
    out.put(static_cast<char>((v >> shift) & 0xff));
}

std::filesystem::path write_idx_images(const std::string& name, std::uint32_t count,
                                       std::uint32_t rows, std::uint32_t cols,
                                       const std::vector<std::uint8_t>& pixels,
                                       std::uint32_t magic = 0x00000803) {
  const auto path = temp_file(name);
  std::ofstream out(path, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  return path;
}

std::filesystem::path write_idx_labels(const std::string& name, std::uint32_t count,
                                       const std::vector<std::uint8_t>& labels,
                                       std::uint32_t magic = 0x00000801) {
  const auto path = temp_file(name);
  std::ofstream out(path, std::ios::binary);
  put_be32(out, magic);
  put_be32(out, count);
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size()));
  return path;
}

}  // namespace

TEST_CASE("load_idx reads big-endian headers and scales pixels to unit range") {
  // two 2x3 images with hand-picked bytes
  const std::vector<std::uint8_t> pixels = {0,  51,  102, 153, 204, 255,
                                            10, 120, 130, 140, 250, 5};
  const auto img = write_idx_images("ok-images", 2, 2, 3, pixels);
  const auto lab = write_idx_labels("ok-labels", 2, {4, 1});

  const DatasetBundle ds = load_idx(img.string(), lab.string());
  REQUIRE(ds.train_inputs.size() == 2);
  CHECK(ds.train_labels == std::vector<int>{4, 1});
  CHECK(ds.test_inputs.empty());
  CHECK(ds.input_dim() == 6);
  CHECK(ds.num_labels() == 5);  // labels run 0..4

  // row-major flattening, scaled by 1/255
  CHECK(ds.train_inputs[0](0) == 0.0);
  CHECK(ds.train_inputs[0](1) == doctest::Approx(51.0 / 255.0));
  CHECK(ds.train_inputs[0](5) == 1.0);
  CHECK(ds.train_inputs[1](4) == doctest::Approx(250.0 / 255.0));

  REQUIRE(ds.feature_ranges.size() == 6);
  for (const Interval& iv : ds.feature_ranges) {
    CHECK(iv.lw == 0.0);
    CHECK(iv.up == 1.0);
  }

  std::filesystem::remove(img);
  std::filesystem::remove(lab);
}

TEST_CASE("load_idx rejects bad magics, truncation, and count mismatches") {
  const std::vector<std::uint8_t> pixels(2 * 2 * 2, 7);
  const auto img = write_idx_images("m-images", 2, 2, 2, pixels);
  const auto lab = write_idx_labels("m-labels", 2, {0, 1});

  SUBCASE("wrong image magic") {
    const auto bad = write_idx_images("badmagic", 2, 2, 2, pixels, 0x00000801);
    CHECK_THROWS(load_idx(bad.string(), lab.string()));
    std::filesystem::remove(bad);
  }
  SUBCASE("wrong label magic") {
    const auto bad = write_idx_labels("badlabmagic", 2, {0, 1}, 0x00000803);
    CHECK_THROWS(load_idx(img.string(), bad.string()));
    std::filesystem::remove(bad);
  }
  SUBCASE("truncated pixel data") {
    const std::vector<std::uint8_t> short_pixels(2 * 2 * 2 - 1, 7);
    const auto bad = write_idx_images("short", 2, 2, 2, short_pixels);
    CHECK_THROWS(load_idx(bad.string(), lab.string()));
    std::filesystem::remove(bad);
  }
  SUBCASE("image/label count mismatch") {
    const auto bad = write_idx_labels("count", 3, {0, 1, 0});
    CHECK_THROWS(load_idx(img.string(), bad.string()));
    std::filesystem::remove(bad);
  }
  SUBCASE("missing file") {
    CHECK_THROWS(load_idx((temp_file("no_dir") / "images").string(), lab.string()));
  }

  std::filesystem::remove(img);
  std::filesystem::remove(lab);
}

TEST_CASE("load_csv picks the label column by name and tracks feature ranges") {
  const auto path = temp_file("ok.csv");
  std::ofstream(path) << "sepal,species,petal\n"
                         "1.5,0,4.0\n"
                         "2.5,1,-1.0\n"
                         "0.5,2,0.25\n";

  const DatasetBundle ds = load_csv(path.string(), "species");
  REQUIRE(ds.train_inputs.size() == 3);
  CHECK(ds.input_dim() == 2);
  CHECK(ds.train_labels == std::vector<int>{0, 1, 2});
  // features keep file order with the label column removed
  CHECK(ds.train_inputs[0](0) == 1.5);
  CHECK(ds.train_inputs[0](1) == 4.0);
  CHECK(ds.train_inputs[2](1) == 0.25);

  REQUIRE(ds.feature_ranges.size() == 2);
  CHECK(ds.feature_ranges[0].lw == 0.5);
  CHECK(ds.feature_ranges[0].up == 2.5);
  CHECK(ds.feature_ranges[1].lw == -1.0);
  CHECK(ds.feature_ranges[1].up == 4.0);

  std::filesystem::remove(path);
}

TEST_CASE("load_csv rejects malformed input") {
  const auto path = temp_file("bad.csv");

  std::ofstream(path) << "a,label\n1.0,0\n";
  CHECK_THROWS(load_csv(path.string(), "target"));  // no such label column

  std::ofstream(path) << "a,label\nxyz,0\n";
  CHECK_THROWS(load_csv(path.string(), "label"));  // non-numeric feature

  std::ofstream(path) << "a,label\n1.0,0\n2.0\n";
  CHECK_THROWS(load_csv(path.string(), "label"));  // short row

  std::ofstream(path) << "a,label\n-1.5,-2\n";
  CHECK_THROWS(load_csv(path.string(), "label"));  // negative label

  std::ofstream(path) << "a,label\n";  // header only: legal, just empty
  const DatasetBundle empty = load_csv(path.string(), "label");
  CHECK(empty.train_inputs.empty());
  CHECK(empty.num_labels() == 0);

  std::filesystem::remove(path);
  CHECK_THROWS(load_csv((temp_file("no_dir") / "none.csv").string(), "label"));
}

TEST_CASE("make_synthetic is deterministic, balanced, and clamped") {
  SyntheticSpec spec;
  spec.dim = 12;
  spec.classes = 3;
  spec.train_per_class = 40;
  spec.test_per_class = 10;
  spec.noise = 0.3;
  spec.seed = 99;

  const DatasetBundle a = make_synthetic(spec);
  REQUIRE(a.train_inputs.size() == 120);
  REQUIRE(a.test_inputs.size() == 30);
  CHECK(a.input_dim() == 12);
  CHECK(a.num_labels() == 3);

  std::vector<int> train_counts(3, 0), test_counts(3, 0);
  for (int l : a.train_labels) train_counts[static_cast<std::size_t>(l)]++;
  for (int l : a.test_labels) test_counts[static_cast<std::size_t>(l)]++;
  CHECK(train_counts == std::vector<int>{40, 40, 40});
  CHECK(test_counts == std::vector<int>{10, 10, 10});

  for (const Vector& x : a.train_inputs) {
    CHECK(x.minCoeff() >= 0.0);
    CHECK(x.maxCoeff() <= 1.0);
  }
  REQUIRE(a.feature_ranges.size() == 12);
  CHECK(a.feature_ranges[0].lw == 0.0);
  CHECK(a.feature_ranges[0].up == 1.0);

  // same seed reproduces bit-for-bit; another seed diverges
  const DatasetBundle b = make_synthetic(spec);
  for (std::size_t i = 0; i < a.train_inputs.size(); ++i)
    CHECK(a.train_inputs[i] == b.train_inputs[i]);
  CHECK(a.train_labels == b.train_labels);

  spec.seed = 100;
  const DatasetBundle c = make_synthetic(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.train_inputs.size() && !any_diff; ++i)
    any_diff = a.train_inputs[i] != c.train_inputs[i];
  CHECK(any_diff);

  // samples of one class cluster around a shared prototype: the spread of a
  // coordinate within a class stays within the noise amplitude
  double max_spread = 0.0;
  for (int cls = 0; cls < 3; ++cls) {
    double lo = 2.0, hi = -1.0;
    for (std::size_t i = 0; i < a.train_inputs.size(); ++i) {
      if (a.train_labels[i] != cls) continue;
      lo = std::min(lo, a.train_inputs[i](0));
      hi = std::max(hi, a.train_inputs[i](0));
    }
    max_spread = std::max(max_spread, hi - lo);
  }
  CHECK(max_spread <= 2.0 * spec.noise + 1e-12);
}

TEST_CASE("collect_samples filters by label and stamps the origin") {
  std::vector<Vector> inputs;
  for (int i = 0; i < 6; ++i) inputs.push_back(Vector::Constant(2, double(i)));
  const std::vector<int> labels = {0, 1, 2, 1, 0, 2};

  const auto picked = collect_samples(inputs, labels, {1, 2}, SampleOrigin::OldTask);
  REQUIRE(picked.size() == 4);
  for (const LabeledSample& s : picked) {
    CHECK((s.label == 1 || s.label == 2));
    CHECK(s.origin == SampleOrigin::OldTask);
  }
  // file order is preserved
  CHECK(picked[0].input(0) == 1.0);
  CHECK(picked[1].input(0) == 2.0);
  CHECK(picked[2].input(0) == 3.0);
  CHECK(picked[3].input(0) == 5.0);

  CHECK(collect_samples(inputs, labels, {7}, SampleOrigin::NewTask).empty());
  CHECK_THROWS(collect_samples(inputs, {0, 1}, {0}, SampleOrigin::NewTask));
}
