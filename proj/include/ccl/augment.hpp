#pragma once

#include "ccl/certificate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ccl {

enum class SampleOrigin { NewTask, OldTask, Synthesized };

struct LabeledSample {
  Vector input;
  int label = 0;
  SampleOrigin origin = SampleOrigin::NewTask;
  std::string origin_property;  // set for synthesized samples
};

// n points uniform in the box, coordinate-wise independent. Degenerate
// coordinates always yield their single value. Deterministic in the seed.
std::vector<Vector> sample_box(const LayerBox& box, std::size_t n, std::uint64_t seed);

// per_cert points from each certificate's input box, labeled by the old
// network. Certificate i uses the seed derived from (seed, i), so adding or
// reordering certificates does not perturb other certificates' samples.
std::vector<LabeledSample> augment(const Network& old_net, const std::vector<Certificate>& certs,
                                   std::size_t per_cert, std::uint64_t seed);

}  // namespace ccl
