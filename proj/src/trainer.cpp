#include "ccl/trainer.hpp"

#include "ccl/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace ccl {

namespace {

// stream tags for seeds derived from TrainConfig::seed
constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kGrowStream = 0x67726f77ULL;
constexpr std::uint64_t kAugmentStream = 0x6175676dULL;

void add_sample_loss(const Network& net, const LabeledSample& sample, double inv_batch,
                     const std::vector<Certificate>& certs, const TrainConfig& cfg, double& loss,
                     Vector& grad) {
  const ForwardTrace trace = forward(net, sample.input);
  const Vector& z = trace.output();
  if (sample.label < 0 || sample.label >= z.size())
    throw std::invalid_argument("loss: label " + std::to_string(sample.label) +
                                " out of range for " + std::to_string(z.size()) + " outputs");

  std::vector<Vector> adjoints;
  adjoints.reserve(trace.activations.size());
  for (const Vector& act : trace.activations) adjoints.emplace_back(Vector::Zero(act.size()));

  // softmax cross-entropy
  const double zmax = z.maxCoeff();
  const Vector e = (z.array() - zmax).exp();
  const double zsum = e.sum();
  loss += -(z(sample.label) - zmax - std::log(zsum)) * inv_batch;
  adjoints.back() = e * (inv_batch / zsum);
  adjoints.back()(sample.label) -= inv_batch;

  if (cfg.alpha > 0) {
    const std::size_t k = trace.activations.size() - 1;
    for (const Certificate& cert : certs) {
      if (cert.boxes.size() != k + 1)
        throw std::invalid_argument("loss: certificate depth does not match the network");
      if (!cert.boxes.front().contains(sample.input)) continue;
      for (std::size_t l = 1; l <= k; ++l) {
        const LayerBox& box = cert.boxes[l];
        if (box.size() > trace.activations[l].size())
          throw std::invalid_argument("loss: certificate box " + std::to_string(l) +
                                      " wider than the activation vector");
        for (Index i = 0; i < box.size(); ++i) {
          const double v = trace.activations[l](i);
          const Interval iv = box.interval(i);
          const double d = dist(v, iv);
          if (d > 0) {
            loss += cfg.alpha * inv_batch * d;
            adjoints[l](i) += cfg.alpha * inv_batch * dist_grad(v, iv);
          }
        }
      }
    }
  }
  grad += gradient(net, trace, adjoints);
}

void add_anchor_loss(const Network& net, const Vector& theta0, double beta, double& loss,
                     Vector& grad) {
  if (beta <= 0 || !net.old_param_mask) return;
  const Vector theta = flatten_params(net);
  if (theta.size() != theta0.size())
    throw std::invalid_argument("loss: theta0 does not match the parameter count");
  const auto& mask = *net.old_param_mask;
  for (Index i = 0; i < theta.size(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    const double d = theta(i) - theta0(i);
    loss += beta * d * d;
    grad(i) += 2.0 * beta * d;
  }
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
  if (!(cfg.lr > 0)) throw std::invalid_argument("config: lr must be positive");
  if (cfg.epochs < 0) throw std::invalid_argument("config: epochs must be non-negative");
  if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be at least 1");
  if (cfg.alpha < 0 || cfg.beta < 0)
    throw std::invalid_argument("config: alpha and beta must be non-negative");
  if (cfg.per_cert_samples < 0)
    throw std::invalid_argument("config: per_cert_samples must be non-negative");
  if (cfg.old_data_fraction < 0 || cfg.old_data_fraction > 1)
    throw std::invalid_argument("config: old_data_fraction must lie in [0, 1]");
  for (double k : cfg.k_schedule)
    if (!(k > 0)) throw std::invalid_argument("config: k_schedule entries must be positive");
}

double dist(double v, const Interval& iv) {
  if (v < iv.lw || v > iv.up) {
    const double d = v - iv.mid();
    return d * d;
  }
  return 0.0;
}

double dist_grad(double v, const Interval& iv) {
  if (v < iv.lw || v > iv.up) return 2.0 * (v - iv.mid());
  return 0.0;
}

double rho(const ForwardTrace& trace, const Vector& input, const Certificate& cert) {
  if (cert.boxes.size() != trace.activations.size())
    throw std::invalid_argument("rho: certificate depth does not match the trace");
  if (!cert.boxes.front().contains(input)) return 0.0;
  double sum = 0.0;
  for (std::size_t l = 1; l < cert.boxes.size(); ++l) {
    const LayerBox& box = cert.boxes[l];
    if (box.size() > trace.activations[l].size())
      throw std::invalid_argument("rho: certificate box " + std::to_string(l) +
                                  " wider than the activation vector");
    for (Index i = 0; i < box.size(); ++i)
      sum += dist(trace.activations[l](i), box.interval(i));
  }
  return sum;
}

double reg(const Network& net, const std::vector<Vector>& inputs,
           const std::vector<Certificate>& certs) {
  double sum = 0.0;
  for (const Certificate& cert : certs)
    for (const Vector& x : inputs) sum += rho(forward(net, x), x, cert);
  return sum;
}

double anchor(const Vector& theta, const Vector& theta0, const std::vector<std::uint8_t>* mask) {
  if (!mask) return 0.0;
  if (theta.size() != theta0.size() ||
      static_cast<std::size_t>(theta.size()) != mask->size())
    throw std::invalid_argument("anchor: vector/mask length mismatch");
  double sum = 0.0;
  for (Index i = 0; i < theta.size(); ++i) {
    if (!(*mask)[static_cast<std::size_t>(i)]) continue;
    const double d = theta0(i) - theta(i);
    sum += d * d;
  }
  return sum;
}

LossResult composite_loss(const Network& net, std::span<const LabeledSample> batch,
                          const std::vector<Certificate>& certs, const Vector& theta0,
                          const TrainConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("composite_loss: empty batch");
  LossResult result;
  result.grad = Vector::Zero(param_count(net));
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const LabeledSample& sample : batch)
    add_sample_loss(net, sample, inv_batch, certs, cfg, result.loss, result.grad);
  add_anchor_loss(net, theta0, cfg.beta, result.loss, result.grad);
  return result;
}

double accuracy(const Network& net, const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("accuracy: no samples");
  std::size_t hits = 0;
  for (const LabeledSample& s : samples)
    if (label(forward(net, s.input).output()) == s.label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

Network train_epochs(Network net, const std::vector<LabeledSample>& data,
                     const std::vector<Certificate>& certs, const TrainConfig& cfg,
                     const std::vector<LabeledSample>& eval_data) {
  validate_config(cfg);
  validate_structure(net);
  if (data.empty() || cfg.epochs == 0) return net;

  const Vector theta0 = flatten_params(net);
  const std::vector<std::uint8_t> frozen = frozen_zero_mask(net);
  const std::vector<LabeledSample>& eval = eval_data.empty() ? data : eval_data;

  Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  Network best = net;
  double best_acc = -1.0;
  Vector grad(theta0.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      const double inv_batch = 1.0 / static_cast<double>(count);
      grad.setZero();
      double loss = 0.0;
      for (std::size_t b = 0; b < count; ++b)
        add_sample_loss(net, data[order[start + b]], inv_batch, certs, cfg, loss, grad);
      add_anchor_loss(net, theta0, cfg.beta, loss, grad);
      for (std::size_t i = 0; i < frozen.size(); ++i)
        if (frozen[i]) grad(static_cast<Index>(i)) = 0.0;
      sgd_step_inplace(net, grad, cfg.lr);
    }
    const double acc = accuracy(net, eval);
    if (acc > best_acc) {
      best_acc = acc;
      best = net;
    }
  }
  return best;
}

Network sgd_train(const Network& net, const std::vector<LabeledSample>& data,
                  const TrainConfig& cfg, const std::vector<LabeledSample>& eval_data) {
  TrainConfig plain = cfg;
  plain.alpha = 0.0;
  plain.beta = 0.0;
  return train_epochs(net, data, {}, plain, eval_data);
}

std::size_t RoundRecord::surviving() const {
  std::size_t n = 0;
  for (const CertRecord& c : certificates)
    if (c.outcome != CertOutcome::Dropped) ++n;
  return n;
}

std::vector<std::string> RoundRecord::surviving_keys() const {
  std::vector<std::string> keys;
  for (const CertRecord& c : certificates)
    if (c.outcome != CertOutcome::Dropped) keys.push_back(c.key);
  return keys;
}

std::vector<std::string> RoundRecord::dropped_keys() const {
  std::vector<std::string> keys;
  for (const CertRecord& c : certificates)
    if (c.outcome == CertOutcome::Dropped) keys.push_back(c.key);
  return keys;
}

CclResult ccl_retrain(const Network& old_net, const std::vector<Certificate>& certs,
                      const std::vector<LabeledSample>& new_data,
                      const std::vector<LabeledSample>& old_data,
                      const std::optional<GrowSpec>& grow_spec, const TrainConfig& cfg,
                      const std::vector<LabeledSample>& eval_data) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_config(cfg);
  validate_structure(old_net);
  for (const Certificate& cert : certs)
    if (!validate_certificate(old_net, cert))
      throw std::invalid_argument("ccl_retrain: certificate " + certificate_key(cert) +
                                  " is not valid against the input network");

  Network net = grow_spec ? grow(old_net, grow_spec->hidden_add, grow_spec->output_add,
                                 grow_spec->init_scale, derive_seed(cfg.seed, kGrowStream))
                          : old_net;

  const Index out_width = net.output_dim();
  for (const auto* set : {&new_data, &old_data})
    for (const LabeledSample& s : *set)
      if (s.label < 0 || s.label >= out_width)
        throw std::invalid_argument(
            "ccl_retrain: sample label " + std::to_string(s.label) + " does not fit " +
            std::to_string(out_width) + " outputs (missing growth spec?)");

  std::vector<LabeledSample> data = new_data;
  if (cfg.per_cert_samples > 0) {
    auto synth = augment(old_net, certs, static_cast<std::size_t>(cfg.per_cert_samples),
                         derive_seed(cfg.seed, kAugmentStream));
    data.insert(data.end(), std::make_move_iterator(synth.begin()),
                std::make_move_iterator(synth.end()));
  }
  data.insert(data.end(), old_data.begin(), old_data.end());

  net = train_epochs(std::move(net), data, certs, cfg, eval_data);

  // certificate pass: keep / re-verify / repair
  CclResult result;
  result.record.initial_certificates = certs.size();
  std::vector<Certificate> surviving;
  std::vector<std::pair<std::size_t, Certificate>> broken;  // original index
  std::map<std::string, VerifyResult> reverified;
  std::vector<CertRecord> records(certs.size());

  for (std::size_t i = 0; i < certs.size(); ++i) {
    const Certificate& cert = certs[i];
    records[i].key = certificate_key(cert);
    if (validate_certificate(net, cert)) {
      records[i].outcome = CertOutcome::Untouched;
      surviving.push_back(cert);
      continue;
    }
    auto it = reverified.find(cert.property_id);
    if (it == reverified.end())
      it = reverified.emplace(cert.property_id, verify(net, cert.property, cert.property_id))
               .first;
    const VerifyResult& vr = it->second;
    bool replaced = false;
    if (vr.verified) {
      for (const Certificate& fresh : vr.certificates) {
        if (fresh.variant_tag == cert.variant_tag) {
          records[i].outcome = CertOutcome::Reverified;
          surviving.push_back(fresh);
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) broken.emplace_back(i, cert);
  }

  for (auto& [i, cert] : broken) {
    if (!cfg.repair_broken) {
      records[i].outcome = CertOutcome::Dropped;
      records[i].note = "validation and re-verification failed";
      continue;
    }
    RepairResult r = repair(net, cert, surviving, cfg.k_schedule, cfg.strict_alg2);
    switch (r.status) {
      case RepairStatus::Untouched:
        records[i].outcome = CertOutcome::Untouched;
        records[i].note = "restored by an earlier repair";
        surviving.push_back(r.certificate);
        break;
      case RepairStatus::Clipped:
        records[i].outcome = CertOutcome::Clipped;
        records[i].bias_moves = r.deltas.size();
        surviving.push_back(r.certificate);
        break;
      case RepairStatus::RelaxedAndClipped:
        records[i].outcome = CertOutcome::RelaxedAndClipped;
        records[i].k_used = r.k_used;
        records[i].bias_moves = r.deltas.size();
        surviving.push_back(r.certificate);
        break;
      case RepairStatus::Dropped:
        records[i].outcome = CertOutcome::Dropped;
        records[i].note = "repair failed at every K";
        break;
    }
    if (r.status != RepairStatus::Dropped) net = std::move(r.net);
  }

  for (const Certificate& cert : surviving)
    if (!validate_certificate(net, cert))
      throw std::logic_error("ccl_retrain: surviving certificate " + certificate_key(cert) +
                             " does not validate against the final network");

  const std::vector<LabeledSample>& eval = eval_data.empty() ? data : eval_data;
  result.record.accuracy = accuracy(net, eval);
  std::map<int, std::pair<std::size_t, std::size_t>> per_label;  // label -> (hits, count)
  for (const LabeledSample& s : eval) {
    auto& [hits, count] = per_label[s.label];
    ++count;
    if (label(forward(net, s.input).output()) == s.label) ++hits;
  }
  for (const auto& [lab, hc] : per_label) {
    result.record.labels.push_back(lab);
    result.record.per_label_accuracy.push_back(static_cast<double>(hc.first) /
                                               static_cast<double>(hc.second));
    result.record.per_label_counts.push_back(hc.second);
  }

  result.record.certificates = std::move(records);
  result.record.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.net = std::move(net);
  result.certificates = std::move(surviving);
  return result;
}

}  // namespace ccl
