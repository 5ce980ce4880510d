#include "ccl/dataset.hpp"

#include "ccl/rng.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ccl {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off) {
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

[[noreturn]] void bad_magic(const std::string& path, std::uint32_t found, std::uint32_t want) {
  std::ostringstream msg;
  msg << path << ": bad magic 0x" << std::hex << found << ", expected 0x" << want;
  throw std::runtime_error(msg.str());
}

}  // namespace

Index DatasetBundle::input_dim() const {
  if (!train_inputs.empty()) return train_inputs.front().size();
  if (!test_inputs.empty()) return test_inputs.front().size();
  return 0;
}

int DatasetBundle::num_labels() const {
  int m = -1;
  for (int y : train_labels) m = std::max(m, y);
  for (int y : test_labels) m = std::max(m, y);
  return m + 1;
}

DatasetBundle load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_bytes(images_path);
  if (img.size() < 16) throw std::runtime_error(images_path + ": truncated IDX header");
  if (be32(img, 0) != kImageMagic) bad_magic(images_path, be32(img, 0), kImageMagic);
  const std::size_t count = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t pixels = rows * cols;
  if (img.size() != 16 + count * pixels)
    throw std::runtime_error(images_path + ": truncated payload (expected " +
                             std::to_string(16 + count * pixels) + " bytes, found " +
                             std::to_string(img.size()) + ")");

  const auto lab = read_bytes(labels_path);
  if (lab.size() < 8) throw std::runtime_error(labels_path + ": truncated IDX header");
  if (be32(lab, 0) != kLabelMagic) bad_magic(labels_path, be32(lab, 0), kLabelMagic);
  const std::size_t lab_count = be32(lab, 4);
  if (lab.size() != 8 + lab_count)
    throw std::runtime_error(labels_path + ": truncated payload");
  if (lab_count != count)
    throw std::runtime_error("IDX pair mismatch: " + std::to_string(count) + " images vs " +
                             std::to_string(lab_count) + " labels");

  DatasetBundle ds;
  ds.train_inputs.reserve(count);
  ds.train_labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Vector x(static_cast<Index>(pixels));
    const std::size_t base = 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p)
      x(static_cast<Index>(p)) = static_cast<double>(img[base + p]) / 255.0;
    ds.train_inputs.push_back(std::move(x));
    ds.train_labels.push_back(static_cast<int>(lab[8 + i]));
  }
  ds.feature_ranges.assign(pixels, Interval{0.0, 1.0});
  return ds;
}

DatasetBundle load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header row");

  const auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream stream(s);
    while (std::getline(stream, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };

  const auto header = split(line);
  std::size_t label_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == label_column) label_col = i;
  if (label_col == header.size())
    throw std::runtime_error(path + ": no column named '" + label_column + "'");

  DatasetBundle ds;
  const std::size_t n_features = header.size() - 1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(header.size()));
    Vector x(static_cast<Index>(n_features));
    Index f = 0;
    int y = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double value = 0.0;
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      const auto res = std::from_chars(first, last, value);
      if (res.ec != std::errc{} || res.ptr != last)
        throw std::runtime_error(path + ": row " + std::to_string(row) + " column '" +
                                 header[c] + "' is not numeric: '" + cells[c] + "'");
      if (c == label_col) {
        y = static_cast<int>(value);
        if (static_cast<double>(y) != value || y < 0)
          throw std::runtime_error(path + ": row " + std::to_string(row) +
                                   " label must be a non-negative integer");
      } else {
        x(f++) = value;
      }
    }
    ds.train_inputs.push_back(std::move(x));
    ds.train_labels.push_back(y);
  }

  ds.feature_ranges.assign(n_features, Interval{0.0, 0.0});
  for (std::size_t f = 0; f < n_features; ++f) {
    for (std::size_t i = 0; i < ds.train_inputs.size(); ++i) {
      const double v = ds.train_inputs[i](static_cast<Index>(f));
      if (i == 0) {
        ds.feature_ranges[f] = {v, v};
      } else {
        ds.feature_ranges[f].lw = std::min(ds.feature_ranges[f].lw, v);
        ds.feature_ranges[f].up = std::max(ds.feature_ranges[f].up, v);
      }
    }
  }
  return ds;
}

DatasetBundle make_synthetic(const SyntheticSpec& spec) {
  if (spec.dim <= 0 || spec.classes < 1 || spec.train_per_class < 0 || spec.test_per_class < 0 ||
      spec.noise < 0)
    throw std::invalid_argument("make_synthetic: bad spec");
  Rng rng(spec.seed);
  std::vector<Vector> prototypes;
  prototypes.reserve(spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    Vector p(spec.dim);
    for (Index i = 0; i < spec.dim; ++i) p(i) = rng.uniform01();
    prototypes.push_back(std::move(p));
  }
  const auto draw = [&](const Vector& proto) {
    Vector x(spec.dim);
    for (Index i = 0; i < spec.dim; ++i) {
      const double v = proto(i) + rng.uniform(-spec.noise, spec.noise);
      x(i) = std::clamp(v, 0.0, 1.0);
    }
    return x;
  };
  DatasetBundle ds;
  for (int c = 0; c < spec.classes; ++c)
    for (int i = 0; i < spec.train_per_class; ++i) {
      ds.train_inputs.push_back(draw(prototypes[c]));
      ds.train_labels.push_back(c);
    }
  for (int c = 0; c < spec.classes; ++c)
    for (int i = 0; i < spec.test_per_class; ++i) {
      ds.test_inputs.push_back(draw(prototypes[c]));
      ds.test_labels.push_back(c);
    }
  ds.feature_ranges.assign(static_cast<std::size_t>(spec.dim), Interval{0.0, 1.0});
  return ds;
}

std::vector<LabeledSample> collect_samples(const std::vector<Vector>& inputs,
                                           const std::vector<int>& labels,
                                           const std::vector<int>& keep, SampleOrigin origin) {
  if (inputs.size() != labels.size())
    throw std::invalid_argument("collect_samples: input/label count mismatch");
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (std::find(keep.begin(), keep.end(), labels[i]) != keep.end())
      out.push_back({inputs[i], labels[i], origin, {}});
  return out;
}

}  // namespace ccl
