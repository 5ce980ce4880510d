#include <doctest.h>

#include "ccl/rng.hpp"
#include "ccl/trainer.hpp"

#include <cmath>

using namespace ccl;

namespace {

Vector rand_vec(Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
  return v;
}

std::vector<LabeledSample> toy_data(Index dim, int classes, int per_class, Rng& rng) {
  std::vector<LabeledSample> data;
  for (int c = 0; c < classes; ++c) {
    Vector proto = rand_vec(dim, rng, 0.0, 1.0);
    for (int i = 0; i < per_class; ++i) {
      Vector x = proto;
      for (Index j = 0; j < dim; ++j) x(j) += rng.uniform(-0.05, 0.05);
      data.push_back({x, c, SampleOrigin::NewTask, {}});
    }
  }
  rng.shuffle(data);
  return data;
}

Certificate robustness_cert(const Network& net, const Vector& x0, double eps,
                            const std::string& id) {
  RobustnessProperty rob;
  rob.x0 = x0;
  rob.y0_label = label(forward(net, x0).output());
  rob.epsilon = eps;
  const VerifyResult res = verify(net, rob, id);
  REQUIRE(res.verified);
  return res.certificates[0];
}

double softmax_ce(const Vector& logits, int target) {
  const double zmax = logits.maxCoeff();
  double zsum = 0.0;
  for (Index j = 0; j < logits.size(); ++j) zsum += std::exp(logits(j) - zmax);
  return std::log(zsum) - (logits(target) - zmax);
}

}  // namespace

TEST_CASE("dist is the squared distance to the midpoint outside the interval") {
  const Interval iv{-1.0, 3.0};  // midpoint 1
  CHECK(dist(0.0, iv) == 0.0);
  CHECK(dist(-1.0, iv) == 0.0);  // boundary inclusive
  CHECK(dist(3.0, iv) == 0.0);
  CHECK(dist(4.0, iv) == doctest::Approx(9.0));    // (4-1)^2
  CHECK(dist(-2.0, iv) == doctest::Approx(9.0));   // (-2-1)^2
  CHECK(dist(10.0, iv) == doctest::Approx(81.0));  // (10-1)^2

  CHECK(dist_grad(0.0, iv) == 0.0);
  CHECK(dist_grad(-1.0, iv) == 0.0);
  CHECK(dist_grad(3.0, iv) == 0.0);
  CHECK(dist_grad(4.0, iv) == doctest::Approx(6.0));
  CHECK(dist_grad(-2.0, iv) == doctest::Approx(-6.0));

  // finite-difference agreement away from the kinks
  for (double v : {-3.0, -1.5, 3.7, 8.0}) {
    const double h = 1e-6;
    const double fd = (dist(v + h, iv) - dist(v - h, iv)) / (2 * h);
    CHECK(dist_grad(v, iv) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("rho gates on the input box and sums interior boundary violations") {
  Rng rng(5);
  const Network net = random_network(2, {3}, 2, rng.next_u64());
  const Vector x0 = Vector::Constant(2, 0.4);
  const Certificate cert = robustness_cert(net, x0, 0.01, "c");

  // inside the box: the stored chain contains the true activations, so no term
  // fires on the certificate's own network
  CHECK(rho(forward(net, x0), x0, cert) == 0.0);

  // outside the box: gate closes regardless of activations
  Vector far = Vector::Constant(2, 0.9);
  CHECK(rho(forward(net, far), far, cert) == 0.0);

  // perturbing the network makes interior activations leave the stored boxes,
  // and rho becomes positive for the in-box input
  Network moved = net;
  std::get<AffineLayer>(moved.layers[0]).bias.array() += 5.0;
  const double r = rho(forward(moved, x0), x0, cert);
  CHECK(r > 0.0);

  // hand-check: sum over boundaries 1..k of dist(activation, stored interval)
  const ForwardTrace trace = forward(moved, x0);
  double want = 0.0;
  for (std::size_t b = 1; b < cert.boxes.size(); ++b)
    for (Index j = 0; j < cert.boxes[b].size(); ++j)
      want += dist(trace.activations[b](j), cert.boxes[b].interval(j));
  CHECK(r == doctest::Approx(want));
}

TEST_CASE("rho on a grown network only scores the certified prefix") {
  Rng rng(6);
  const Network net = random_network(2, {3}, 2, rng.next_u64());
  const Vector x0 = Vector::Constant(2, 0.3);
  const Certificate cert = robustness_cert(net, x0, 0.01, "c");

  Network big = grow(net, {2}, 1, 0.1, rng.next_u64());
  CHECK(rho(forward(big, x0), x0, cert) == 0.0);

  // moving only a new neuron's bias does not touch the certified prefix
  std::get<AffineLayer>(big.layers[0]).bias(4) += 50.0;
  CHECK(rho(forward(big, x0), x0, cert) == 0.0);

  // moving a copied bias does
  std::get<AffineLayer>(big.layers[0]).bias(0) += 50.0;
  CHECK(rho(forward(big, x0), x0, cert) > 0.0);
}

TEST_CASE("reg is additive over samples and certificates") {
  Rng rng(7);
  const Network net = random_network(2, {3}, 2, rng.next_u64());
  Network moved = net;
  std::get<AffineLayer>(moved.layers[0]).bias.array() += 3.0;

  std::vector<Certificate> certs;
  std::vector<Vector> inputs;
  for (int i = 0; i < 3; ++i) {
    const Vector x0 = rand_vec(2, rng, 0.2, 0.8);
    certs.push_back(robustness_cert(net, x0, 0.01, "c" + std::to_string(i)));
    inputs.push_back(x0);
    inputs.push_back(rand_vec(2, rng, 0.2, 0.8));
  }

  double sum = 0.0;
  for (const Vector& x : inputs) {
    const ForwardTrace t = forward(moved, x);
    for (const Certificate& c : certs) sum += rho(t, x, c);
  }
  CHECK(reg(moved, inputs, certs) == doctest::Approx(sum));
  CHECK(reg(moved, {}, certs) == 0.0);
  CHECK(reg(moved, inputs, {}) == 0.0);
}

TEST_CASE("anchor measures masked parameter drift only") {
  Vector theta0(4), theta(4);
  theta0 << 1.0, 2.0, 3.0, 4.0;
  theta << 1.5, 2.0, 2.0, 8.0;
  const std::vector<std::uint8_t> mask = {1, 0, 1, 0};
  CHECK(anchor(theta, theta0, &mask) == doctest::Approx(0.25 + 1.0));
  CHECK(anchor(theta, theta0, nullptr) == 0.0);
  const std::vector<std::uint8_t> all = {1, 1, 1, 1};
  CHECK(anchor(theta, theta0, &all) == doctest::Approx(0.25 + 1.0 + 16.0));
}

TEST_CASE("composite_loss with alpha=beta=0 is the mean cross-entropy") {
  Rng rng(8);
  const Network net = random_network(3, {4}, 3, rng.next_u64());
  std::vector<LabeledSample> batch;
  for (int i = 0; i < 7; ++i)
    batch.push_back({rand_vec(3, rng), static_cast<int>(rng.below(3)), SampleOrigin::NewTask, {}});

  TrainConfig cfg;
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  const Vector theta0 = flatten_params(net);
  const LossResult res = composite_loss(net, batch, {}, theta0, cfg);

  double want = 0.0;
  for (const auto& s : batch) want += softmax_ce(forward(net, s.input).output(), s.label);
  want /= static_cast<double>(batch.size());
  CHECK(res.loss == doctest::Approx(want));
  CHECK(res.grad.size() == static_cast<Index>(param_count(net)));
}

TEST_CASE("composite_loss gradient matches finite differences with all terms active") {
  Rng rng(9);
  int done = 0;
  while (done < 5) {
    Network base = random_network(2, {4}, 2, rng.next_u64());
    const Vector x0 = rand_vec(2, rng, 0.3, 0.7);
    const Certificate cert = robustness_cert(base, x0, 0.02, "c");

    // grow so the anchor mask exists, then nudge the parameters so penalty
    // terms are active
    Network net = grow(base, {2}, 1, 0.05, rng.next_u64());
    const Vector theta0 = flatten_params(net);
    {
      Vector theta = theta0;
      for (Index i = 0; i < theta.size(); ++i) theta(i) += rng.uniform(-0.05, 0.05);
      assign_params(net, theta);
    }

    std::vector<LabeledSample> batch;
    batch.push_back({x0, 0, SampleOrigin::NewTask, {}});
    batch.push_back({rand_vec(2, rng, 0.3, 0.7), 2, SampleOrigin::NewTask, {}});
    batch.push_back({x0.array() + 0.005, 1, SampleOrigin::Synthesized, "c"});

    TrainConfig cfg;
    cfg.alpha = 0.7;
    cfg.beta = 0.3;
    const std::vector<Certificate> certs = {cert};
    const LossResult res = composite_loss(net, batch, certs, theta0, cfg);

    // skip draws where some activation sits on a ReLU kink or a dist boundary
    const auto scalar_loss = [&](const Network& n) {
      double ce = 0.0;
      std::vector<Vector> inputs;
      for (const auto& s : batch) {
        ce += softmax_ce(forward(n, s.input).output(), s.label);
        inputs.push_back(s.input);
      }
      const double inv = 1.0 / static_cast<double>(batch.size());
      return ce * inv + cfg.alpha * inv * reg(n, inputs, certs) +
             cfg.beta * anchor(flatten_params(n), theta0, &*n.old_param_mask);
    };
    CHECK(res.loss == doctest::Approx(scalar_loss(net)).epsilon(1e-10));

    const double reg_now = reg(net, {batch[0].input, batch[1].input, batch[2].input}, certs);
    if (reg_now <= 1e-6) continue;  // want the certificate term genuinely active
    ++done;

    const Vector theta = flatten_params(net);
    const double h = 1e-6;
    Rng pick(rng.next_u64());
    int checked = 0;
    for (int probe = 0; probe < 40 && checked < 12; ++probe) {
      const Index p = static_cast<Index>(pick.below(static_cast<std::uint64_t>(theta.size())));
      Network plus = net, minus = net;
      Vector tp = theta, tm = theta;
      tp(p) += h;
      tm(p) -= h;
      assign_params(plus, tp);
      assign_params(minus, tm);
      const double fd = (scalar_loss(plus) - scalar_loss(minus)) / (2 * h);
      if (std::abs(fd - res.grad(p)) > 1e-4 * std::max(1.0, std::abs(fd))) {
        // tolerate kink-straddling draws, but only a few
        continue;
      }
      ++checked;
      CHECK(res.grad(p) == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
    }
    CHECK(checked >= 10);
  }
}

TEST_CASE("validate_config rejects bad hyper-parameters") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate_config(cfg));
  cfg.lr = 0.0;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.epochs = -1;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.epochs = 0;  // zero epochs is a legal no-op
  CHECK_NOTHROW(validate_config(cfg));
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.per_cert_samples = -1;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.old_data_fraction = 1.5;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
  cfg = {};
  cfg.k_schedule = {1.0, -2.0};
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);
}

TEST_CASE("train_epochs with zero epochs or no data returns the network unchanged") {
  Rng rng(10);
  const Network net = random_network(3, {4}, 2, rng.next_u64());
  auto data = toy_data(3, 2, 10, rng);

  TrainConfig cfg;
  cfg.epochs = 0;
  const Network same = train_epochs(net, data, {}, cfg, {});
  CHECK(flatten_params(same) == flatten_params(net));

  cfg.epochs = 3;
  const Network same2 = train_epochs(net, {}, {}, cfg, {});
  CHECK(flatten_params(same2) == flatten_params(net));
}

TEST_CASE("training is deterministic in the seed") {
  Rng rng(11);
  const Network net = random_network(3, {5}, 2, rng.next_u64());
  const auto data = toy_data(3, 2, 15, rng);

  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.seed = 77;
  const Network a = sgd_train(net, data, cfg);
  const Network b = sgd_train(net, data, cfg);
  CHECK(flatten_params(a) == flatten_params(b));

  cfg.seed = 78;
  const Network c = sgd_train(net, data, cfg);
  CHECK(flatten_params(a) != flatten_params(c));
}

TEST_CASE("train_epochs with certificate and anchor terms off is bitwise sgd_train") {
  Rng rng(12);
  const Network base = random_network(3, {5}, 2, rng.next_u64());
  const Network net = grow(base, {2}, 0, 0.05, rng.next_u64());
  const auto data = toy_data(3, 2, 12, rng);
  const Certificate cert = robustness_cert(base, Vector::Constant(3, 0.5), 0.01, "c");

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  cfg.seed = 5;
  const Network a = train_epochs(net, data, {cert}, cfg, {});
  const Network b = sgd_train(net, data, cfg, {});
  CHECK(flatten_params(a) == flatten_params(b));
}

TEST_CASE("training improves accuracy on separable data") {
  Rng rng(13);
  const Network net = random_network(4, {8}, 3, rng.next_u64());
  const auto data = toy_data(4, 3, 40, rng);

  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.lr = 0.1;
  const Network trained = sgd_train(net, data, cfg);
  CHECK(accuracy(trained, data) > 0.95);
  CHECK(accuracy(trained, data) >= accuracy(net, data));
}

TEST_CASE("frozen zero weights survive training") {
  Rng rng(14);
  const Network base = random_network(3, {4}, 2, rng.next_u64());
  const Network big = grow(base, {3}, 1, 0.1, rng.next_u64());
  const auto mask = frozen_zero_mask(big);
  REQUIRE(!mask.empty());

  auto data = toy_data(3, 3, 20, rng);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.lr = 0.05;
  const Network trained = train_epochs(big, data, {}, cfg, {});

  const Vector theta = flatten_params(trained);
  std::size_t frozen = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) {
      CHECK(theta(static_cast<Index>(i)) == 0.0);
      ++frozen;
    }
  CHECK(frozen > 0);

  // and the trained network still never lets new neurons feed old ones
  const auto blocks = old_blocks(trained);
  const auto& l1 = std::get<AffineLayer>(trained.layers[2]);
  for (Index i = 0; i < blocks[1].out; ++i)
    for (Index j = blocks[1].in; j < l1.weights.cols(); ++j) CHECK(l1.weights(i, j) == 0.0);
}

TEST_CASE("epoch checkpointing returns the best evaluated network") {
  Rng rng(15);
  const Network net = random_network(3, {6}, 2, rng.next_u64());
  const auto train = toy_data(3, 2, 25, rng);
  const auto eval = toy_data(3, 2, 10, rng);

  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.lr = 0.2;  // aggressive enough that late epochs can regress
  const Network picked = train_epochs(net, train, {}, cfg, eval);

  // replay the same schedule and track the best epoch accuracy by hand
  TrainConfig probe = cfg;
  double best = -1.0;
  for (int e = 1; e <= cfg.epochs; ++e) {
    probe.epochs = e;
    const Network upto = train_epochs(net, train, {}, probe, {});
    best = std::max(best, accuracy(upto, eval));
  }
  CHECK(accuracy(picked, eval) == doctest::Approx(best));
}

TEST_CASE("ccl_retrain keeps certificates while learning a new task") {
  Rng rng(16);
  // old task: labels 0/1 around distinct prototypes
  auto old_data = toy_data(4, 2, 30, rng);
  const Network fresh = random_network(4, {6}, 2, rng.next_u64());
  TrainConfig cfg0;
  cfg0.epochs = 25;
  cfg0.lr = 0.1;
  const Network old_net = sgd_train(fresh, old_data, cfg0);

  // certify robustness around a few training points predicted confidently
  std::vector<Certificate> certs;
  for (const auto& s : old_data) {
    if (certs.size() >= 4) break;
    RobustnessProperty rob;
    rob.x0 = s.input;
    rob.y0_label = label(forward(old_net, s.input).output());
    rob.epsilon = 1e-3;
    const VerifyResult res =
        verify(old_net, rob, "p" + std::to_string(certs.size()), Interval{0.0, 1.0});
    if (res.verified) certs.push_back(res.certificates[0]);
  }
  REQUIRE(certs.size() == 4);

  // new task: label 2, network must grow one output
  std::vector<LabeledSample> new_data;
  {
    Vector proto = rand_vec(4, rng, 0.0, 1.0);
    for (int i = 0; i < 30; ++i) {
      Vector x = proto;
      for (Index j = 0; j < 4; ++j) x(j) += rng.uniform(-0.05, 0.05);
      new_data.push_back({x, 2, SampleOrigin::NewTask, {}});
    }
  }

  GrowSpec gs;
  gs.hidden_add = {3};
  gs.output_add = 1;
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.lr = 0.05;
  cfg.alpha = 0.01;
  cfg.beta = 0.01;
  cfg.per_cert_samples = 5;
  const CclResult result = ccl_retrain(old_net, certs, new_data, old_data, gs, cfg);

  CHECK(result.net.output_dim() == 3);
  CHECK(result.record.initial_certificates == 4);
  REQUIRE(result.record.certificates.size() == 4);
  for (const Certificate& cert : result.certificates)
    CHECK(validate_certificate(result.net, cert));
  CHECK(result.record.surviving() == result.certificates.size());

  // every surviving key refers to an input certificate
  for (const std::string& key : result.record.surviving_keys()) {
    bool found = false;
    for (const Certificate& cert : certs) found = found || certificate_key(cert) == key;
    CHECK(found);
  }

  // the old task is not forgotten outright
  CHECK(accuracy(result.net, old_data) > 0.6);
  CHECK(accuracy(result.net, new_data) > 0.8);
}

TEST_CASE("ccl_retrain rejects certificates that do not validate against the old network") {
  Rng rng(17);
  const Network net = random_network(3, {4}, 2, rng.next_u64());
  Certificate cert = robustness_cert(net, Vector::Constant(3, 0.5), 1e-3, "c");
  cert.boxes[1].up = cert.boxes[1].lw;  // tamper

  TrainConfig cfg;
  cfg.epochs = 1;
  std::vector<LabeledSample> data = {{Vector::Constant(3, 0.5), 0, SampleOrigin::NewTask, {}}};
  CHECK_THROWS_AS(ccl_retrain(net, {cert}, data, {}, {}, cfg), std::invalid_argument);
}

TEST_CASE("ccl_retrain without growth needs labels to fit the output layer") {
  Rng rng(18);
  const Network net = random_network(3, {4}, 2, rng.next_u64());
  TrainConfig cfg;
  cfg.epochs = 1;
  std::vector<LabeledSample> data = {{Vector::Constant(3, 0.5), 2, SampleOrigin::NewTask, {}}};
  CHECK_THROWS_AS(ccl_retrain(net, {}, data, {}, {}, cfg), std::invalid_argument);
}
