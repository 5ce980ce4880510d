#include "ccl/clip_relax.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ccl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Window contribution of one certificate to one neuron, or nothing when the
// certificate does not constrain it. The w . x image is taken over the
// certificate's own previous-layer box, bias excluded.
struct WindowTerm {
  double lw_term;
  double up_term;
};

std::optional<WindowTerm> window_term(const AffineLayer& layer, std::size_t layer_pos, Index r,
                                      const Certificate& cert) {
  const LayerBox& in = cert.boxes[layer_pos];
  const LayerBox& target = cert.boxes[layer_pos + 1];
  if (r >= target.size()) return std::nullopt;
  for (Index c = in.size(); c < layer.weights.cols(); ++c)
    if (layer.weights(r, c) != 0.0) return WindowTerm{kInf, -kInf};  // unbounded image
  const Interval img = row_image(layer.weights.row(r), in.size(), 0.0, in);
  return WindowTerm{target.lw(r) - img.lw, target.up(r) - img.up};
}

void check_alignment(const Network& net, const Certificate& cert) {
  const auto widths = layer_widths(net);
  if (cert.boxes.size() != widths.size())
    throw CertificateStructureError("clip: certificate box count does not match the network");
  for (std::size_t l = 0; l < cert.boxes.size(); ++l)
    if (cert.boxes[l].size() > widths[l])
      throw CertificateStructureError("clip: certificate box " + std::to_string(l) +
                                      " wider than the layer");
}

std::vector<Vector> snapshot_biases(const Network& net) {
  std::vector<Vector> biases;
  for (const Layer& layer : net.layers)
    if (const auto* aff = std::get_if<AffineLayer>(&layer)) biases.push_back(aff->bias);
  return biases;
}

void restore_biases(Network& net, const std::vector<Vector>& biases) {
  std::size_t a = 0;
  for (Layer& layer : net.layers)
    if (auto* aff = std::get_if<AffineLayer>(&layer)) aff->bias = biases[a++];
}

std::pair<Network, ClipOutcome> clip_impl(const Network& net, const std::vector<Certificate>& certs,
                                          std::optional<std::size_t> only_layer, bool strict_alg2) {
  validate_structure(net);
  for (const Certificate& cert : certs) check_alignment(net, cert);

  std::vector<std::size_t> layer_positions;
  if (only_layer) {
    if (!std::holds_alternative<AffineLayer>(net.layers.at(*only_layer)))
      throw std::invalid_argument("clip: restricted layer is not affine");
    layer_positions.push_back(*only_layer);
  } else {
    layer_positions = affine_layer_indices(net);
  }

  Network cur = net;
  ClipOutcome outcome;
  std::vector<std::size_t> accepted;
  for (std::size_t ci = 0; ci < certs.size(); ++ci) {
    CertClipRecord record;
    record.key = certificate_key(certs[ci]);

    // A certificate that already validates needs no bias moves; accepting it
    // without a scan also keeps exactly-tight chains (whose windows collapse
    // to a point) from being perturbed. Strict mode always recentres instead.
    if (!strict_alg2 && validate_certificate(cur, certs[ci])) {
      accepted.push_back(ci);
      record.status = ClipStatus::Untouched;
      outcome.per_certificate.push_back(std::move(record));
      continue;
    }

    const auto saved = snapshot_biases(cur);
    accepted.push_back(ci);
    bool feasible = true;
    for (std::size_t p : layer_positions) {
      auto& layer = std::get<AffineLayer>(cur.layers[p]);
      for (Index r = 0; r < layer.weights.rows() && feasible; ++r) {
        double max_lw = -kInf;
        double min_up = kInf;
        bool constrained = false;
        for (std::size_t cj : accepted) {
          const auto term = window_term(layer, p, r, certs[cj]);
          if (!term) continue;
          constrained = true;
          max_lw = std::max(max_lw, term->lw_term);
          min_up = std::min(min_up, term->up_term);
        }
        if (!constrained) continue;
        const double tol = NeuronFeasibility::tolerance(max_lw, min_up);
        if (max_lw <= min_up + tol) {  // closed window: touching is feasible
          double& b = layer.bias(r);
          const bool inside = max_lw - tol <= b && b <= min_up + tol;
          if (strict_alg2 || !inside) {
            const double nb = (max_lw + min_up) / 2.0;
            if (nb != b) {
              record.deltas.push_back({p, r, b, nb});
              b = nb;
            }
          }
        } else {
          feasible = false;
          record.drop_reason = "no feasible bias for layer " + std::to_string(p) + " neuron " +
                               std::to_string(r);
        }
      }
      if (!feasible) break;
    }

    // The window arithmetic excludes the bias while validation includes it,
    // so the two can disagree by rounding; validation is the ground truth.
    // Re-checking the candidate and (after any move) the accepted set means a
    // surviving certificate always validates against the returned network.
    if (feasible) {
      if (!validate_certificate(cur, certs[ci])) {
        feasible = false;
        record.drop_reason = "bias placement failed validation";
      }
      for (std::size_t cj : accepted)
        if (feasible && !record.deltas.empty() && cj != ci &&
            !validate_certificate(cur, certs[cj])) {
          feasible = false;
          record.drop_reason = "bias placement invalidated " + certificate_key(certs[cj]);
        }
    }

    if (!feasible) {
      restore_biases(cur, saved);
      accepted.pop_back();
      record.status = ClipStatus::Dropped;
      record.deltas.clear();
    } else {
      record.status = record.deltas.empty() ? ClipStatus::Untouched : ClipStatus::Clipped;
    }
    outcome.per_certificate.push_back(std::move(record));
  }
  return {std::move(cur), std::move(outcome)};
}

}  // namespace

Interval preactivation_bounds(const Vector& w, double b, const LayerBox& in_box) {
  if (w.size() != in_box.size())
    throw std::invalid_argument("preactivation_bounds: weight/box width mismatch");
  return row_image(w, w.size(), b, in_box);
}

std::vector<NeuronFeasibility> feasibility_intervals(const Network& net,
                                                     const std::vector<Certificate>& certs,
                                                     std::size_t layer_index) {
  validate_structure(net);
  const auto* layer = std::get_if<AffineLayer>(&net.layers.at(layer_index));
  if (!layer) throw std::invalid_argument("feasibility_intervals: layer is not affine");
  for (const Certificate& cert : certs) check_alignment(net, cert);

  std::vector<NeuronFeasibility> out;
  for (Index r = 0; r < layer->weights.rows(); ++r) {
    NeuronFeasibility nf;
    nf.layer = layer_index;
    nf.neuron = r;
    for (const Certificate& cert : certs) {
      const auto term = window_term(*layer, layer_index, r, cert);
      if (!term) continue;
      nf.constrained = true;
      nf.max_lw = std::max(nf.max_lw, term->lw_term);
      nf.min_up = std::min(nf.min_up, term->up_term);
    }
    out.push_back(nf);
  }
  return out;
}

std::vector<std::string> ClipOutcome::surviving_keys() const {
  std::vector<std::string> keys;
  for (const CertClipRecord& r : per_certificate)
    if (r.status != ClipStatus::Dropped) keys.push_back(r.key);
  return keys;
}

std::pair<Network, ClipOutcome> clip(const Network& net, const std::vector<Certificate>& certs,
                                     bool strict_alg2) {
  return clip_impl(net, certs, std::nullopt, strict_alg2);
}

std::pair<Network, ClipOutcome> clip_layer(const Network& net,
                                           const std::vector<Certificate>& certs,
                                           std::size_t layer_index, bool strict_alg2) {
  return clip_impl(net, certs, layer_index, strict_alg2);
}

Interpolant interpolate(const LayerBox& out_box, const PostCondition& post) {
  if (!check_post(out_box, post))
    throw CannotInterpolateError("interpolate: post-condition does not hold on the box");
  Interpolant itp;
  if (const auto* nl = std::get_if<NotLabel>(&post)) {
    const int c = nl->label;
    Index best = -1;
    double best_delta = -kInf;
    for (Index j = 0; j < out_box.size(); ++j) {
      if (j == c) continue;
      const double delta = out_box.lw(j) - out_box.up(c);
      if (delta > best_delta) {
        best_delta = delta;
        best = j;
      }
    }
    itp.constraints.push_back({static_cast<int>(best), c, best_delta});
  } else {
    const int c = std::get<IsLabel>(post).label;
    for (Index j = 0; j < out_box.size(); ++j) {
      if (j == c) continue;
      itp.constraints.push_back({c, static_cast<int>(j), out_box.lw(c) - out_box.up(j)});
    }
  }
  return itp;
}

Certificate relax(const Certificate& cert, const Interpolant& itp, double K) {
  if (!(K > 0)) throw std::invalid_argument("relax: K must be positive");
  if (cert.boxes.empty()) throw std::invalid_argument("relax: certificate has no boxes");
  Certificate out = cert;
  LayerBox& box = out.boxes.back();
  std::set<int> winners, losers;
  for (const InterpolantConstraint& c : itp.constraints) {
    if (c.winner < 0 || c.winner >= box.size() || c.loser < 0 || c.loser >= box.size())
      throw std::invalid_argument("relax: constraint label out of range");
    winners.insert(c.winner);
    losers.insert(c.loser);
  }
  for (int j : winners) box.up(j) += K * std::max(std::abs(box.up(j)), kRelaxFloor);
  for (int c : losers) box.lw(c) -= K * std::max(std::abs(box.lw(c)), kRelaxFloor);
  return out;
}

RepairResult repair(const Network& net, const Certificate& broken,
                    const std::vector<Certificate>& accepted, const std::vector<double>& k_schedule,
                    bool strict_alg2) {
  for (const Certificate& c : accepted)
    if (!validate_certificate(net, c))
      throw std::invalid_argument("repair: accepted certificate " + certificate_key(c) +
                                  " is not valid against the network");
  if (validate_certificate(net, broken))
    return {net, RepairStatus::Untouched, 0.0, broken, {}};

  // clip validates every certificate it keeps, so repair only has to insist
  // that nothing was dropped: the candidate must be restored and no accepted
  // certificate may be sacrificed for it.
  const auto everything_kept = [](const ClipOutcome& outcome) {
    for (const CertClipRecord& rec : outcome.per_certificate)
      if (rec.status == ClipStatus::Dropped) return false;
    return true;
  };

  std::vector<Certificate> with_candidate = accepted;
  with_candidate.push_back(broken);
  {
    auto [clipped, outcome] = clip(net, with_candidate, strict_alg2);
    if (everything_kept(outcome))
      return {std::move(clipped), RepairStatus::Clipped, 0.0, broken,
              outcome.per_certificate.back().deltas};
  }

  Interpolant itp;
  try {
    itp = interpolate(broken.boxes.back(), broken.post);
  } catch (const CannotInterpolateError&) {
    return {net, RepairStatus::Dropped, 0.0, broken, {}};
  }
  const std::size_t last_affine = affine_layer_indices(net).back();
  for (double K : k_schedule) {
    Certificate relaxed = relax(broken, itp, K);
    with_candidate.back() = relaxed;
    auto [clipped, outcome] = clip_layer(net, with_candidate, last_affine, strict_alg2);
    if (!everything_kept(outcome)) continue;
    return {std::move(clipped), RepairStatus::RelaxedAndClipped, K, std::move(relaxed),
            outcome.per_certificate.back().deltas};
  }
  return {net, RepairStatus::Dropped, 0.0, broken, {}};
}

}  // namespace ccl
