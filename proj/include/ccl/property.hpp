#pragma once

#include "ccl/interval.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ccl {

// Output conditions decided from an output box alone, both sound and
// incomplete: a true answer is a proof, false means "could not conclude".
struct NotLabel {
  int label = 0;
};
struct IsLabel {
  int label = 0;
};
using PostCondition = std::variant<NotLabel, IsLabel>;

// NotLabel(c): some j != c surely beats c (lw_j > up_c).
// IsLabel(c):  c surely beats every j != c (lw_c > up_j for all j != c).
bool check_post(const LayerBox& out_box, const PostCondition& post);

struct ReachabilityProperty {
  LayerBox pre;
  PostCondition post;
};

// Classification stays at y0_label over the epsilon-ball around x0,
// intersected with the clamp when one is given. y0_label is the network's
// prediction recorded when the property was created, so re-checking after
// retraining compares against the original label.
struct RobustnessProperty {
  Vector x0;
  int y0_label = 0;
  double epsilon = 0.0;
  std::optional<Interval> clamp;
};

// One box per sensitive value: the sensitive coordinate pinned to the value,
// every other coordinate an epsilon_other-ball around x. The property asks
// that all variants provably map to one common label.
struct FairnessProperty {
  Vector x;
  int sensitive_index = 0;
  std::vector<double> sensitive_values;
  double epsilon_other = 0.0;
};

using Property = std::variant<ReachabilityProperty, RobustnessProperty, FairnessProperty>;

struct PreBox {
  std::optional<double> variant_tag;  // set for fairness variants
  LayerBox box;
};

// Input boxes a property induces, one per variant. default_clamp applies to
// robustness properties without their own clamp and bounds fairness boxes.
std::vector<PreBox> pre_boxes(const Property& prop, Index input_dim,
                              const std::optional<Interval>& default_clamp = {});

std::string post_to_string(const PostCondition& post);

}  // namespace ccl
