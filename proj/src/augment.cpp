#include "ccl/augment.hpp"

#include "ccl/rng.hpp"

#include <stdexcept>

namespace ccl {

std::vector<Vector> sample_box(const LayerBox& box, std::size_t n, std::uint64_t seed) {
  if (box.size() == 0) throw std::invalid_argument("sample_box: empty box");
  Rng rng(seed);
  std::vector<Vector> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    Vector x(box.size());
    for (Index i = 0; i < box.size(); ++i)
      x(i) = box.lw(i) + (box.up(i) - box.lw(i)) * rng.uniform01();
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<LabeledSample> augment(const Network& old_net, const std::vector<Certificate>& certs,
                                   std::size_t per_cert, std::uint64_t seed) {
  std::vector<LabeledSample> out;
  out.reserve(per_cert * certs.size());
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const Certificate& cert = certs[i];
    if (cert.boxes.empty()) throw std::invalid_argument("augment: certificate has no boxes");
    const bool robust_valid = std::holds_alternative<RobustnessProperty>(cert.property) &&
                              validate_certificate(old_net, cert);
    for (Vector& x : sample_box(cert.boxes.front(), per_cert, derive_seed(seed, i))) {
      const int y = label(forward(old_net, x).output());
      if (robust_valid && y != std::get<RobustnessProperty>(cert.property).y0_label)
        throw std::logic_error("augment: sample from a valid robustness box left label " +
                               std::to_string(std::get<RobustnessProperty>(cert.property).y0_label));
      out.push_back({std::move(x), y, SampleOrigin::Synthesized, certificate_key(cert)});
    }
  }
  return out;
}

}  // namespace ccl
