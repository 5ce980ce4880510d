#include "ccl/network.hpp"

#include "ccl/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace ccl {

namespace {

using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

}  // namespace

Index Network::output_dim() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (const auto* aff = std::get_if<AffineLayer>(&*it)) return aff->weights.rows();
  }
  return input_dim;  // no affine layer; callers reject this via validate_structure
}

void validate_structure(const Network& net) {
  if (net.input_dim <= 0) fail("network: input_dim must be positive");
  if (net.layers.empty()) fail("network: layer list is empty");
  Index width = net.input_dim;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const bool want_affine = (i % 2 == 0);
    if (want_affine != std::holds_alternative<AffineLayer>(net.layers[i]))
      fail("network: layers must alternate affine and ReLU starting with affine (layer " +
           std::to_string(i) + ")");
    if (const auto* aff = std::get_if<AffineLayer>(&net.layers[i])) {
      if (aff->weights.rows() == 0 || aff->weights.cols() == 0)
        fail("network: empty affine layer " + std::to_string(i));
      if (aff->weights.cols() != width)
        fail("network: layer " + std::to_string(i) + " expects " +
             std::to_string(aff->weights.cols()) + " inputs, previous width is " +
             std::to_string(width));
      if (aff->bias.size() != aff->weights.rows())
        fail("network: layer " + std::to_string(i) + " bias/weight row mismatch");
      width = aff->weights.rows();
    }
  }
  if (!std::holds_alternative<AffineLayer>(net.layers.back()))
    fail("network: last layer must be affine");
  if (net.old_param_mask) {
    if (net.old_param_mask->size() != param_count(net))
      fail("network: old_param_mask length " + std::to_string(net.old_param_mask->size()) +
           " does not match parameter count " + std::to_string(param_count(net)));
    old_blocks(net);  // validates the block pattern
  }
}

ForwardTrace forward(const Network& net, const Vector& input) {
  if (input.size() != net.input_dim)
    fail("forward: input has " + std::to_string(input.size()) + " entries, network expects " +
         std::to_string(net.input_dim));
  ForwardTrace trace;
  trace.activations.reserve(net.layers.size() + 1);
  trace.activations.push_back(input);
  for (const Layer& layer : net.layers) {
    const Vector& x = trace.activations.back();
    if (const auto* aff = std::get_if<AffineLayer>(&layer)) {
      if (aff->weights.cols() != x.size()) fail("forward: layer width mismatch");
      trace.activations.emplace_back(aff->weights * x + aff->bias);
    } else {
      trace.activations.emplace_back(x.cwiseMax(0.0));
    }
  }
  return trace;
}

int label(const Vector& logits) {
  if (logits.size() == 0) fail("label: empty logit vector");
  Index best = 0;
  for (Index i = 1; i < logits.size(); ++i)
    if (logits(i) > logits(best)) best = i;
  return static_cast<int>(best);
}

std::vector<Index> layer_widths(const Network& net) {
  std::vector<Index> widths;
  widths.reserve(net.layers.size() + 1);
  Index w = net.input_dim;
  widths.push_back(w);
  for (const Layer& layer : net.layers) {
    if (const auto* aff = std::get_if<AffineLayer>(&layer)) w = aff->weights.rows();
    widths.push_back(w);
  }
  return widths;
}

std::vector<std::size_t> affine_layer_indices(const Network& net) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (std::holds_alternative<AffineLayer>(net.layers[i])) idx.push_back(i);
  return idx;
}

Network grow(const Network& net, const std::vector<int>& hidden_add, int output_add,
             double init_scale, std::uint64_t seed) {
  validate_structure(net);
  const auto affine_idx = affine_layer_indices(net);
  if (hidden_add.size() != affine_idx.size() - 1)
    fail("grow: hidden_add has " + std::to_string(hidden_add.size()) + " entries, network has " +
         std::to_string(affine_idx.size() - 1) + " hidden affine layers");
  if (output_add < 0) fail("grow: output_add must be non-negative");
  for (int h : hidden_add)
    if (h < 0) fail("grow: hidden_add entries must be non-negative");
  if (init_scale < 0) fail("grow: init_scale must be non-negative");

  Rng rng(seed);
  Network out;
  out.input_dim = net.input_dim;
  out.layers.reserve(net.layers.size());

  std::vector<OldBlock> copied;  // old dims per affine layer, for the mask
  std::size_t a = 0;
  Index add_in = 0;
  for (const Layer& layer : net.layers) {
    if (std::holds_alternative<ReluLayer>(layer)) {
      out.layers.emplace_back(ReluLayer{});
      continue;
    }
    const auto& old = std::get<AffineLayer>(layer);
    const Index add_out = (a + 1 == affine_idx.size()) ? output_add : hidden_add[a];
    const Index r = old.weights.rows();
    const Index c = old.weights.cols();
    AffineLayer grown;
    grown.weights = Matrix::Zero(r + add_out, c + add_in);
    grown.weights.topLeftCorner(r, c) = old.weights;
    for (Index i = r; i < r + add_out; ++i)
      for (Index j = 0; j < c + add_in; ++j)
        grown.weights(i, j) = rng.uniform(-init_scale, init_scale);
    grown.bias.resize(r + add_out);
    grown.bias.head(r) = old.bias;
    for (Index i = r; i < r + add_out; ++i) grown.bias(i) = rng.uniform(-init_scale, init_scale);
    out.layers.emplace_back(std::move(grown));
    copied.push_back({r, c});
    add_in = add_out;
    ++a;
  }

  std::vector<std::uint8_t> mask;
  mask.reserve(param_count(out));
  std::size_t aff = 0;
  for (const Layer& layer : out.layers) {
    const auto* grown = std::get_if<AffineLayer>(&layer);
    if (!grown) continue;
    const OldBlock blk = copied[aff++];
    for (Index i = 0; i < grown->weights.rows(); ++i)
      for (Index j = 0; j < grown->weights.cols(); ++j)
        mask.push_back(i < blk.out && j < blk.in ? 1 : 0);
    for (Index i = 0; i < grown->bias.size(); ++i) mask.push_back(i < blk.out ? 1 : 0);
  }
  out.old_param_mask = std::move(mask);
  validate_structure(out);
  return out;
}

std::size_t param_count(const Network& net) {
  std::size_t n = 0;
  for (const Layer& layer : net.layers)
    if (const auto* aff = std::get_if<AffineLayer>(&layer))
      n += static_cast<std::size_t>(aff->weights.size() + aff->bias.size());
  return n;
}

Vector flatten_params(const Network& net) {
  Vector theta(param_count(net));
  Index off = 0;
  for (const Layer& layer : net.layers) {
    const auto* aff = std::get_if<AffineLayer>(&layer);
    if (!aff) continue;
    RowMajorMap(theta.data() + off, aff->weights.rows(), aff->weights.cols()) = aff->weights;
    off += aff->weights.size();
    theta.segment(off, aff->bias.size()) = aff->bias;
    off += aff->bias.size();
  }
  return theta;
}

void assign_params(Network& net, const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != param_count(net))
    fail("assign_params: parameter vector has " + std::to_string(theta.size()) +
         " entries, network needs " + std::to_string(param_count(net)));
  Index off = 0;
  for (Layer& layer : net.layers) {
    auto* aff = std::get_if<AffineLayer>(&layer);
    if (!aff) continue;
    aff->weights = ConstRowMajorMap(theta.data() + off, aff->weights.rows(), aff->weights.cols());
    off += aff->weights.size();
    aff->bias = theta.segment(off, aff->bias.size());
    off += aff->bias.size();
  }
}

std::vector<OldBlock> old_blocks(const Network& net) {
  std::vector<OldBlock> blocks;
  if (!net.old_param_mask) {
    for (const Layer& layer : net.layers)
      if (const auto* aff = std::get_if<AffineLayer>(&layer))
        blocks.push_back({aff->weights.rows(), aff->weights.cols()});
    return blocks;
  }
  const auto& mask = *net.old_param_mask;
  if (mask.size() != param_count(net)) fail("old_blocks: mask length mismatch");
  std::size_t off = 0;
  Index prev_out = net.input_dim;
  for (const Layer& layer : net.layers) {
    const auto* aff = std::get_if<AffineLayer>(&layer);
    if (!aff) continue;
    const Index rows = aff->weights.rows();
    const Index cols = aff->weights.cols();
    const std::size_t bias_off = off + static_cast<std::size_t>(aff->weights.size());
    Index blk_out = 0;
    for (Index i = 0; i < rows; ++i)
      if (mask[bias_off + static_cast<std::size_t>(i)]) ++blk_out;
    const Index blk_in = prev_out;
    for (Index i = 0; i < rows; ++i) {
      if (static_cast<bool>(mask[bias_off + static_cast<std::size_t>(i)]) != (i < blk_out))
        fail("old_blocks: bias mask is not a prefix block");
      for (Index j = 0; j < cols; ++j) {
        const bool want = i < blk_out && j < blk_in;
        if (static_cast<bool>(mask[off + static_cast<std::size_t>(i * cols + j)]) != want)
          fail("old_blocks: weight mask is not the grow() block pattern");
      }
    }
    blocks.push_back({blk_out, blk_in});
    off = bias_off + static_cast<std::size_t>(rows);
    prev_out = blk_out;
  }
  return blocks;
}

std::vector<std::uint8_t> frozen_zero_mask(const Network& net) {
  if (!net.old_param_mask) return {};
  const auto blocks = old_blocks(net);
  std::vector<std::uint8_t> frozen(param_count(net), 0);
  std::size_t off = 0;
  std::size_t a = 0;
  for (const Layer& layer : net.layers) {
    const auto* aff = std::get_if<AffineLayer>(&layer);
    if (!aff) continue;
    const OldBlock blk = blocks[a++];
    const Index cols = aff->weights.cols();
    for (Index i = 0; i < blk.out; ++i)
      for (Index j = 0; j < cols; ++j)
        if (aff->weights(i, j) == 0.0) frozen[off + static_cast<std::size_t>(i * cols + j)] = 1;
    off += static_cast<std::size_t>(aff->weights.size() + aff->bias.size());
  }
  return frozen;
}

Vector gradient(const Network& net, const ForwardTrace& trace,
                const std::vector<Vector>& boundary_adjoints) {
  const std::size_t k = net.layers.size();
  if (trace.activations.size() != k + 1) fail("gradient: trace does not match network depth");
  if (boundary_adjoints.size() != k + 1)
    fail("gradient: expected one adjoint per layer boundary (" + std::to_string(k + 1) + ")");
  for (std::size_t i = 0; i <= k; ++i)
    if (boundary_adjoints[i].size() != trace.activations[i].size())
      fail("gradient: adjoint " + std::to_string(i) + " width mismatch");

  // flat offsets of each affine layer's weight block
  std::vector<Index> offsets(k, -1);
  Index off = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (const auto* aff = std::get_if<AffineLayer>(&net.layers[i])) {
      offsets[i] = off;
      off += aff->weights.size() + aff->bias.size();
    }
  }

  Vector grad = Vector::Zero(off);
  Vector adj = boundary_adjoints[k];
  for (std::size_t i = k; i-- > 0;) {
    const Vector& in_act = trace.activations[i];
    if (const auto* aff = std::get_if<AffineLayer>(&net.layers[i])) {
      RowMajorMap(grad.data() + offsets[i], aff->weights.rows(), aff->weights.cols()) +=
          adj * in_act.transpose();
      grad.segment(offsets[i] + aff->weights.size(), aff->bias.size()) += adj;
      adj = aff->weights.transpose() * adj;
    } else {
      for (Index j = 0; j < adj.size(); ++j)
        if (in_act(j) <= 0.0) adj(j) = 0.0;
    }
    adj += boundary_adjoints[i];
  }
  return grad;
}

Network sgd_step(const Network& net, const Vector& grad, double lr) {
  Network out = net;
  sgd_step_inplace(out, grad, lr);
  return out;
}

void sgd_step_inplace(Network& net, const Vector& grad, double lr) {
  if (static_cast<std::size_t>(grad.size()) != param_count(net))
    fail("sgd_step: gradient has " + std::to_string(grad.size()) + " entries, network needs " +
         std::to_string(param_count(net)));
  Index off = 0;
  for (Layer& layer : net.layers) {
    auto* aff = std::get_if<AffineLayer>(&layer);
    if (!aff) continue;
    aff->weights -=
        lr * ConstRowMajorMap(grad.data() + off, aff->weights.rows(), aff->weights.cols());
    off += aff->weights.size();
    aff->bias -= lr * grad.segment(off, aff->bias.size());
    off += aff->bias.size();
  }
}

Network random_network(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                       std::uint64_t seed, std::optional<double> weight_scale) {
  if (input_dim <= 0 || output_dim <= 0) fail("random_network: dimensions must be positive");
  for (Index h : hidden)
    if (h <= 0) fail("random_network: hidden widths must be positive");
  Rng rng(seed);
  Network net;
  net.input_dim = input_dim;
  std::vector<Index> outs(hidden);
  outs.push_back(output_dim);
  Index in = input_dim;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    if (i > 0) net.layers.emplace_back(ReluLayer{});
    AffineLayer aff;
    aff.weights.resize(outs[i], in);
    const double s = weight_scale ? *weight_scale : 1.0 / std::sqrt(static_cast<double>(in));
    for (Index r = 0; r < outs[i]; ++r)
      for (Index c = 0; c < in; ++c) aff.weights(r, c) = rng.uniform(-s, s);
    aff.bias = Vector::Zero(outs[i]);
    net.layers.emplace_back(std::move(aff));
    in = outs[i];
  }
  validate_structure(net);
  return net;
}

}  // namespace ccl
