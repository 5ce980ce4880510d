#pragma once

#include "ccl/network.hpp"

#include <vector>

namespace ccl {

struct Interval {
  double lw = 0.0;
  double up = 0.0;

  bool contains(double v) const { return lw <= v && v <= up; }
  double mid() const { return (lw + up) / 2.0; }
  double width() const { return up - lw; }
};

// Axis-aligned box over one layer's activation vector.
struct LayerBox {
  Vector lw;
  Vector up;

  LayerBox() = default;
  LayerBox(Vector lo, Vector hi);

  static LayerBox point(const Vector& x) { return LayerBox(x, x); }

  Index size() const { return lw.size(); }
  Interval interval(Index i) const { return {lw(i), up(i)}; }
  void set(Index i, const Interval& iv) {
    lw(i) = iv.lw;
    up(i) = iv.up;
  }
  // coordinate-wise, inclusive at both bounds
  bool contains(const Vector& x) const;
};

// Image of one affine row over a box, bias included. The accumulation order
// (bias first, then inputs in index order, lower and upper interleaved) is
// the single definition of this arithmetic; every sound-bounds computation in
// the library goes through it so results can be compared bit-for-bit.
template <typename RowLike>
Interval row_image(const RowLike& w, Index n, double bias, const LayerBox& box) {
  double lo = bias;
  double hi = bias;
  for (Index k = 0; k < n; ++k) {
    const double wk = w(k);
    if (wk >= 0.0) {
      lo += wk * box.lw(k);
      hi += wk * box.up(k);
    } else {
      lo += wk * box.up(k);
      hi += wk * box.lw(k);
    }
  }
  return {lo, hi};
}

LayerBox propagate_affine(const LayerBox& box, const AffineLayer& layer);
LayerBox propagate_relu(const LayerBox& box);
LayerBox propagate(const LayerBox& box, const Layer& layer);

// Restriction of an affine layer to the first `out_width` rows and the first
// box.size() columns. Returns false when some kept row reads a dropped column
// through a nonzero weight (the image is then unbounded and nothing useful
// can be said).
bool propagate_restricted(const AffineLayer& layer, const LayerBox& box, Index out_width,
                          LayerBox& out);

// Boxes at every layer boundary for a full-width input box, input box first.
std::vector<LayerBox> analyze(const Network& net, const LayerBox& input_box);

}  // namespace ccl
