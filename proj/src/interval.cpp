#include "ccl/interval.hpp"

#include <stdexcept>
#include <string>

namespace ccl {

LayerBox::LayerBox(Vector lo, Vector hi) : lw(std::move(lo)), up(std::move(hi)) {
  if (lw.size() != up.size())
    throw std::invalid_argument("LayerBox: bound vectors differ in length");
  for (Index i = 0; i < lw.size(); ++i)
    if (!(lw(i) <= up(i)))
      throw std::invalid_argument("LayerBox: lw > up at coordinate " + std::to_string(i));
}

bool LayerBox::contains(const Vector& x) const {
  if (x.size() != size()) return false;
  for (Index i = 0; i < size(); ++i)
    if (x(i) < lw(i) || x(i) > up(i)) return false;
  return true;
}

LayerBox propagate_affine(const LayerBox& box, const AffineLayer& layer) {
  if (box.size() != layer.weights.cols())
    throw std::invalid_argument("propagate_affine: box width " + std::to_string(box.size()) +
                                " does not match layer input width " +
                                std::to_string(layer.weights.cols()));
  LayerBox out;
  out.lw.resize(layer.weights.rows());
  out.up.resize(layer.weights.rows());
  for (Index r = 0; r < layer.weights.rows(); ++r) {
    const Interval iv = row_image(layer.weights.row(r), box.size(), layer.bias(r), box);
    out.lw(r) = iv.lw;
    out.up(r) = iv.up;
  }
  return out;
}

LayerBox propagate_relu(const LayerBox& box) {
  LayerBox out;
  out.lw = box.lw.cwiseMax(0.0);
  out.up = box.up.cwiseMax(0.0);
  return out;
}

LayerBox propagate(const LayerBox& box, const Layer& layer) {
  if (const auto* aff = std::get_if<AffineLayer>(&layer)) return propagate_affine(box, *aff);
  return propagate_relu(box);
}

bool propagate_restricted(const AffineLayer& layer, const LayerBox& box, Index out_width,
                          LayerBox& out) {
  const Index in_width = box.size();
  if (in_width > layer.weights.cols() || out_width > layer.weights.rows())
    throw std::invalid_argument("propagate_restricted: restriction wider than the layer");
  for (Index r = 0; r < out_width; ++r)
    for (Index c = in_width; c < layer.weights.cols(); ++c)
      if (layer.weights(r, c) != 0.0) return false;
  out.lw.resize(out_width);
  out.up.resize(out_width);
  for (Index r = 0; r < out_width; ++r) {
    const Interval iv = row_image(layer.weights.row(r), in_width, layer.bias(r), box);
    out.lw(r) = iv.lw;
    out.up(r) = iv.up;
  }
  return true;
}

std::vector<LayerBox> analyze(const Network& net, const LayerBox& input_box) {
  if (input_box.size() != net.input_dim)
    throw std::invalid_argument("analyze: input box width " + std::to_string(input_box.size()) +
                                " does not match input_dim " + std::to_string(net.input_dim));
  std::vector<LayerBox> boxes;
  boxes.reserve(net.layers.size() + 1);
  boxes.push_back(input_box);
  for (const Layer& layer : net.layers) boxes.push_back(propagate(boxes.back(), layer));
  return boxes;
}

}  // namespace ccl
