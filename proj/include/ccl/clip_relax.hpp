#pragma once

#include "ccl/certificate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ccl {

struct CannotInterpolateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Image of w . x + b over in_box, reusing the shared row arithmetic.
Interval preactivation_bounds(const Vector& w, double b, const LayerBox& in_box);

// Per-neuron feasibility of one affine layer against a set of certificates:
// the bias may be moved anywhere in (max_lw, min_up), where max_lw maximizes
// lw_j - min(w . x) and min_up minimizes up_j - max(w . x) over the
// certificates constraining the neuron (each with its own previous-layer
// box). Unconstrained neurons report an infinite window.
struct NeuronFeasibility {
  std::size_t layer = 0;  // index into Network::layers
  Index neuron = 0;
  double max_lw = -std::numeric_limits<double>::infinity();
  double min_up = std::numeric_limits<double>::infinity();
  bool constrained = false;

  // The window arithmetic excludes the bias while certificate validation
  // includes it, so the two accumulations can round differently; a tiny
  // relative tolerance keeps that noise from inverting a degenerate window.
  // Placements are always re-validated exactly, so this cannot unsound a clip.
  static double tolerance(double lo, double hi) {
    return 1e-9 * std::max({1.0, std::abs(lo), std::abs(hi)});
  }

  // closed window: a degenerate window still admits its single bias value
  bool feasible() const { return max_lw <= min_up + tolerance(max_lw, min_up); }
};

std::vector<NeuronFeasibility> feasibility_intervals(const Network& net,
                                                     const std::vector<Certificate>& certs,
                                                     std::size_t layer_index);

enum class ClipStatus { Untouched, Clipped, Dropped };

struct BiasDelta {
  std::size_t layer = 0;
  Index neuron = 0;
  double old_bias = 0.0;
  double new_bias = 0.0;
};

struct CertClipRecord {
  std::string key;
  ClipStatus status = ClipStatus::Untouched;
  std::vector<BiasDelta> deltas;  // bias moves kept for this certificate
  std::string drop_reason;
};

struct ClipOutcome {
  std::vector<CertClipRecord> per_certificate;
  std::vector<std::string> surviving_keys() const;
};

// Bias-only repair: walks the certificates in order, each time scanning every
// affine neuron and moving its bias into the feasibility window of all
// certificates accepted so far plus the candidate. An infeasible neuron, or a
// placement that fails re-validation, drops the candidate and restores every
// bias to its value at the start of that candidate's iteration, bit for bit.
// Weights are never modified. Every surviving certificate validates against
// the returned network. With strict_alg2 the bias is centered in the window
// even when already inside; otherwise an already-valid certificate is
// accepted untouched and a feasible bias is kept as is.
std::pair<Network, ClipOutcome> clip(const Network& net, const std::vector<Certificate>& certs,
                                     bool strict_alg2 = false);

// Same loop restricted to the neurons of a single affine layer.
std::pair<Network, ClipOutcome> clip_layer(const Network& net,
                                           const std::vector<Certificate>& certs,
                                           std::size_t layer_index, bool strict_alg2 = false);

// Separating constraints extracted from an output box that satisfies its
// post-condition: winner/loser label pairs with the margin delta = lw_winner
// - up_loser > 0. NotLabel(c) yields the single strongest pair against c;
// IsLabel(c) yields one pair per rival.
struct InterpolantConstraint {
  int winner = 0;
  int loser = 0;
  double delta = 0.0;
};

struct Interpolant {
  std::vector<InterpolantConstraint> constraints;
};

Interpolant interpolate(const LayerBox& out_box, const PostCondition& post);

// Relaxation floor: bounds at or below this magnitude are widened by a fixed
// K * kRelaxFloor instead of a proportional amount.
inline constexpr double kRelaxFloor = 0.1;

// Widens only the non-critical output bounds (each winner's up, each loser's
// lw, once per distinct bound) by K * max(|bound|, kRelaxFloor), so the
// post-condition keeps holding on the relaxed box. Only the last box changes.
Certificate relax(const Certificate& cert, const Interpolant& itp, double K);

enum class RepairStatus { Untouched, Clipped, RelaxedAndClipped, Dropped };

struct RepairResult {
  Network net;
  RepairStatus status = RepairStatus::Dropped;
  double k_used = 0.0;              // meaningful for RelaxedAndClipped
  Certificate certificate;          // possibly relaxed
  std::vector<BiasDelta> deltas;
};

// Tries to restore one broken certificate without invalidating the accepted
// ones: first plain clipping, then, for each K in k_schedule, output-box
// relaxation followed by clipping restricted to the last affine layer. On
// failure the returned network is the input, bit for bit.
RepairResult repair(const Network& net, const Certificate& broken,
                    const std::vector<Certificate>& accepted, const std::vector<double>& k_schedule,
                    bool strict_alg2 = false);

}  // namespace ccl
