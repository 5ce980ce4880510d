#pragma once

#include "ccl/augment.hpp"
#include "ccl/certificate.hpp"
#include "ccl/clip_relax.hpp"

#include <span>
#include <string>
#include <vector>

namespace ccl {

struct TrainConfig {
  double lr = 0.01;
  int epochs = 20;
  int batch_size = 32;
  double alpha = 0.001;  // certificate regularizer weight
  double beta = 0.001;   // anchor weight
  int per_cert_samples = 10;
  std::uint64_t seed = 0;
  std::vector<double> k_schedule = {1, 2, 3, 4, 5};
  double old_data_fraction = 0.2;
  bool strict_alg2 = false;
  bool repair_broken = true;
};

void validate_config(const TrainConfig& cfg);

// Squared distance to the interval midpoint outside the interval, zero
// inside (boundary included). The derivative is zero inside and at the exact
// boundary.
double dist(double v, const Interval& iv);
double dist_grad(double v, const Interval& iv);

// Certificate penalty for one sample: gated on the input lying in the
// certificate's input box, then summed over every boundary after the input
// and every certified coordinate. Boxes narrower than the trace address the
// old prefix of each layer; new neurons contribute nothing.
double rho(const ForwardTrace& trace, const Vector& input, const Certificate& cert);

// Sum of rho over all certificate/sample pairs.
double reg(const Network& net, const std::vector<Vector>& inputs,
           const std::vector<Certificate>& certs);

// Squared drift of the masked (copied) parameters from their values at
// retraining start. Zero without a mask.
double anchor(const Vector& theta, const Vector& theta0, const std::vector<std::uint8_t>* mask);

struct LossResult {
  double loss = 0.0;
  Vector grad;
};

// Mean cross-entropy over the batch + alpha * (batch-mean certificate
// penalty) + beta * anchor, with the exact reverse-mode gradient (penalty
// terms are injected as adjoints at their layer boundaries).
LossResult composite_loss(const Network& net, std::span<const LabeledSample> batch,
                          const std::vector<Certificate>& certs, const Vector& theta0,
                          const TrainConfig& cfg);

double accuracy(const Network& net, const std::vector<LabeledSample>& samples);

// Seeded minibatch SGD, one shuffle per epoch, structurally-zero weights
// frozen, checkpoint with the best eval accuracy kept (first best on ties;
// eval falls back to the training data). Certificates only matter when
// alpha > 0; theta0 is captured from the incoming network.
Network train_epochs(Network net, const std::vector<LabeledSample>& data,
                     const std::vector<Certificate>& certs, const TrainConfig& cfg,
                     const std::vector<LabeledSample>& eval_data);

// Plain SGD baseline: same loop with the certificate and anchor terms off.
Network sgd_train(const Network& net, const std::vector<LabeledSample>& data,
                  const TrainConfig& cfg, const std::vector<LabeledSample>& eval_data = {});

struct GrowSpec {
  std::vector<int> hidden_add;
  int output_add = 0;
  double init_scale = 0.1;
};

enum class CertOutcome { Untouched, Reverified, Clipped, RelaxedAndClipped, Dropped };

struct CertRecord {
  std::string key;
  CertOutcome outcome = CertOutcome::Untouched;
  double k_used = 0.0;
  std::size_t bias_moves = 0;
  std::string note;
};

struct RoundRecord {
  int round = 0;
  std::string mode;
  std::size_t initial_certificates = 0;
  std::vector<CertRecord> certificates;
  double accuracy = 0.0;
  std::vector<int> labels;              // label ids covered by the eval set
  std::vector<double> per_label_accuracy;
  std::vector<std::size_t> per_label_counts;
  double wall_time_s = 0.0;

  std::size_t surviving() const;
  std::vector<std::string> surviving_keys() const;
  std::vector<std::string> dropped_keys() const;
};

struct CclResult {
  Network net;
  std::vector<Certificate> certificates;  // surviving, possibly refreshed/relaxed
  RoundRecord record;
};

// One continual-learning round: optionally grow, synthesize per-certificate
// samples labeled by the old network, train on new + synthesized + old data,
// then walk the certificates: still valid -> kept; else re-verified against
// the trained network -> refreshed; else (when repair_broken) clip/relax
// repair; else dropped. Every returned certificate validates against the
// returned network.
CclResult ccl_retrain(const Network& old_net, const std::vector<Certificate>& certs,
                      const std::vector<LabeledSample>& new_data,
                      const std::vector<LabeledSample>& old_data,
                      const std::optional<GrowSpec>& grow_spec, const TrainConfig& cfg,
                      const std::vector<LabeledSample>& eval_data = {});

}  // namespace ccl
