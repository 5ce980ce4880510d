#include "ccl/property.hpp"

#include <algorithm>
#include <stdexcept>

namespace ccl {

namespace {

void check_index(int c, Index width, const char* what) {
  if (c < 0 || c >= width)
    throw std::invalid_argument(std::string(what) + ": label " + std::to_string(c) +
                                " out of range for width " + std::to_string(width));
}

LayerBox clamped_ball(const Vector& x, double eps, const std::optional<Interval>& clamp) {
  Vector lo = x.array() - eps;
  Vector hi = x.array() + eps;
  if (clamp) {
    lo = lo.cwiseMax(clamp->lw);
    hi = hi.cwiseMin(clamp->up);
  }
  for (Index i = 0; i < lo.size(); ++i)
    if (lo(i) > hi(i))
      throw std::invalid_argument("pre_boxes: clamp leaves an empty box at coordinate " +
                                  std::to_string(i));
  return LayerBox(std::move(lo), std::move(hi));
}

}  // namespace

bool check_post(const LayerBox& out_box, const PostCondition& post) {
  if (const auto* nl = std::get_if<NotLabel>(&post)) {
    check_index(nl->label, out_box.size(), "check_post(NotLabel)");
    for (Index j = 0; j < out_box.size(); ++j) {
      if (j == nl->label) continue;
      if (out_box.lw(j) > out_box.up(nl->label)) return true;
    }
    return false;
  }
  const auto& il = std::get<IsLabel>(post);
  check_index(il.label, out_box.size(), "check_post(IsLabel)");
  for (Index j = 0; j < out_box.size(); ++j) {
    if (j == il.label) continue;
    if (!(out_box.lw(il.label) > out_box.up(j))) return false;
  }
  return true;
}

std::vector<PreBox> pre_boxes(const Property& prop, Index input_dim,
                              const std::optional<Interval>& default_clamp) {
  if (const auto* reach = std::get_if<ReachabilityProperty>(&prop)) {
    if (reach->pre.size() != input_dim)
      throw std::invalid_argument("pre_boxes: reachability box width " +
                                  std::to_string(reach->pre.size()) + " vs input_dim " +
                                  std::to_string(input_dim));
    return {{std::nullopt, reach->pre}};
  }
  if (const auto* rob = std::get_if<RobustnessProperty>(&prop)) {
    if (rob->x0.size() != input_dim)
      throw std::invalid_argument("pre_boxes: robustness x0 width mismatch");
    if (rob->epsilon < 0) throw std::invalid_argument("pre_boxes: negative epsilon");
    const auto& clamp = rob->clamp ? rob->clamp : default_clamp;
    return {{std::nullopt, clamped_ball(rob->x0, rob->epsilon, clamp)}};
  }
  const auto& fair = std::get<FairnessProperty>(prop);
  if (fair.x.size() != input_dim) throw std::invalid_argument("pre_boxes: fairness x width mismatch");
  if (fair.sensitive_index < 0 || fair.sensitive_index >= input_dim)
    throw std::invalid_argument("pre_boxes: sensitive_index out of range");
  if (fair.sensitive_values.empty())
    throw std::invalid_argument("pre_boxes: fairness needs at least one sensitive value");
  if (fair.epsilon_other < 0) throw std::invalid_argument("pre_boxes: negative epsilon_other");
  std::vector<PreBox> out;
  out.reserve(fair.sensitive_values.size());
  for (double v : fair.sensitive_values) {
    if (default_clamp && !default_clamp->contains(v))
      throw std::invalid_argument("pre_boxes: sensitive value " + std::to_string(v) +
                                  " lies outside the input clamp");
    LayerBox box = clamped_ball(fair.x, fair.epsilon_other, default_clamp);
    box.lw(fair.sensitive_index) = v;
    box.up(fair.sensitive_index) = v;
    out.push_back({v, std::move(box)});
  }
  return out;
}

std::string post_to_string(const PostCondition& post) {
  if (const auto* nl = std::get_if<NotLabel>(&post))
    return "not_label(" + std::to_string(nl->label) + ")";
  return "is_label(" + std::to_string(std::get<IsLabel>(post).label) + ")";
}

}  // namespace ccl
