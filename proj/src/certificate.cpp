#include "ccl/certificate.hpp"

#include <cstdio>

namespace ccl {

namespace {

bool contained(const LayerBox& inner, const LayerBox& target) {
  for (Index i = 0; i < target.size(); ++i)
    if (inner.lw(i) < target.lw(i) || inner.up(i) > target.up(i)) return false;
  return true;
}

}  // namespace

std::string certificate_key(const Certificate& cert) {
  if (!cert.variant_tag) return cert.property_id;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", *cert.variant_tag);
  return cert.property_id + "@" + buf;
}

VerifyResult verify(const Network& net, const Property& prop, const std::string& property_id,
                    const std::optional<Interval>& default_clamp) {
  validate_structure(net);
  const auto variants = pre_boxes(prop, net.input_dim, default_clamp);

  VerifyResult result;
  result.verified = true;
  int common_label = -1;
  for (const PreBox& variant : variants) {
    PostCondition post;
    if (const auto* reach = std::get_if<ReachabilityProperty>(&prop)) {
      post = reach->post;
    } else if (const auto* rob = std::get_if<RobustnessProperty>(&prop)) {
      post = IsLabel{rob->y0_label};
    } else {
      const auto& fair = std::get<FairnessProperty>(prop);
      Vector x = fair.x;
      x(fair.sensitive_index) = *variant.variant_tag;
      const int pred = label(forward(net, x).output());
      if (common_label < 0) common_label = pred;
      if (pred != common_label) result.verified = false;
      post = IsLabel{pred};
    }
    auto boxes = analyze(net, variant.box);
    if (!check_post(boxes.back(), post)) result.verified = false;
    if (!result.verified) break;
    Certificate cert;
    cert.property_id = property_id;
    cert.property = prop;
    cert.variant_tag = variant.variant_tag;
    cert.post = post;
    cert.boxes = std::move(boxes);
    result.certificates.push_back(std::move(cert));
  }
  if (!result.verified) result.certificates.clear();
  return result;
}

bool validate_certificate(const Network& net, const Certificate& cert) {
  const auto widths = layer_widths(net);
  if (cert.boxes.size() != widths.size())
    throw CertificateStructureError(
        "certificate has " + std::to_string(cert.boxes.size()) + " boxes, network has " +
        std::to_string(widths.size()) + " layer boundaries");
  if (cert.boxes.front().size() != net.input_dim)
    throw CertificateStructureError("certificate input box width " +
                                    std::to_string(cert.boxes.front().size()) +
                                    " does not match input_dim " + std::to_string(net.input_dim));
  for (std::size_t l = 0; l < cert.boxes.size(); ++l)
    if (cert.boxes[l].size() > widths[l])
      throw CertificateStructureError("certificate box " + std::to_string(l) + " is wider (" +
                                      std::to_string(cert.boxes[l].size()) + ") than the layer (" +
                                      std::to_string(widths[l]) + ")");

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerBox& in = cert.boxes[l];
    const LayerBox& target = cert.boxes[l + 1];
    if (const auto* aff = std::get_if<AffineLayer>(&net.layers[l])) {
      LayerBox image;
      if (!propagate_restricted(*aff, in, target.size(), image)) return false;
      if (!contained(image, target)) return false;
    } else {
      if (target.size() != in.size())
        throw CertificateStructureError("certificate box widths change across a ReLU layer");
      if (!contained(propagate_relu(in), target)) return false;
    }
  }
  return check_post(cert.boxes.back(), cert.post);
}

}  // namespace ccl
