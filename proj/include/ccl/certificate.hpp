#pragma once

#include "ccl/interval.hpp"
#include "ccl/property.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace ccl {

// A certificate file or in-memory certificate that does not line up with the
// network it is checked against (wrong box count, boxes wider than layers).
// Distinct from validate_certificate returning false, which means the chain
// of implications genuinely fails.
struct CertificateStructureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Layer-by-layer proof object: boxes[0] is the property's input box (the
// variant's box for fairness) and each following box encloses the image of
// its predecessor under the corresponding layer. `post` holds over the final
// box. On grown networks the boxes keep their original widths and address
// the old prefix of each layer.
struct Certificate {
  std::string property_id;
  Property property;
  std::optional<double> variant_tag;
  PostCondition post;
  std::vector<LayerBox> boxes;
};

// property_id plus the fairness variant suffix; unique within one run
std::string certificate_key(const Certificate& cert);

struct VerifyResult {
  bool verified = false;
  std::vector<Certificate> certificates;  // empty unless verified
};

// Sound, incomplete property check by interval propagation. Certificates are
// attached only on success, one per variant. Fairness additionally requires
// every variant to agree on the predicted label.
VerifyResult verify(const Network& net, const Property& prop, const std::string& property_id,
                    const std::optional<Interval>& default_clamp = {});

// Re-checks the stored chain against the network: every propagated box must
// be contained in the stored successor (bit-level comparison, no tolerance)
// and the post-condition must hold on the last box. Boxes narrower than a
// layer are treated as a restriction to the old prefix; a kept row reading a
// dropped column through a nonzero weight makes the certificate fail.
bool validate_certificate(const Network& net, const Certificate& cert);

}  // namespace ccl
