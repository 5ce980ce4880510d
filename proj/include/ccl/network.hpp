#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

namespace ccl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

struct AffineLayer {
  Matrix weights;  // n_out x n_in
  Vector bias;     // n_out
};

struct ReluLayer {};

using Layer = std::variant<AffineLayer, ReluLayer>;

// Dense feed-forward classifier. A well-formed network alternates affine and
// ReLU layers, starting and ending with an affine layer; validate_structure
// enforces this. forward() itself only needs dimension consistency.
//
// Parameters live conceptually in one flat vector: for each affine layer in
// order, the weight matrix row-major, then the bias. old_param_mask (present
// only after grow()) marks the entries copied from the predecessor network
// over that flat vector.
struct Network {
  Index input_dim = 0;
  std::vector<Layer> layers;
  std::optional<std::vector<std::uint8_t>> old_param_mask;

  Index output_dim() const;
};

// Throws std::invalid_argument on malformed structure: empty layer list,
// broken affine/ReLU alternation, inconsistent dimensions, or a mask that is
// not the block pattern produced by grow().
void validate_structure(const Network& net);

struct ForwardTrace {
  // activations[0] is the input, activations[k] the logits
  std::vector<Vector> activations;

  const Vector& output() const { return activations.back(); }
};

ForwardTrace forward(const Network& net, const Vector& input);

// argmax with lowest-index tie-break
int label(const Vector& logits);

// Widths of the activation vectors at every layer boundary, input included
// (size = layer count + 1).
std::vector<Index> layer_widths(const Network& net);

std::vector<std::size_t> affine_layer_indices(const Network& net);

// Widens every hidden layer and the output layer while preserving the old
// network's behaviour on the old output coordinates: copied rows keep their
// weights and get exact zeros on new-neuron columns, new rows are drawn
// uniformly from [-init_scale, init_scale]. hidden_add needs one entry per
// hidden affine layer. The result carries old_param_mask.
Network grow(const Network& net, const std::vector<int>& hidden_add, int output_add,
             double init_scale, std::uint64_t seed);

std::size_t param_count(const Network& net);
Vector flatten_params(const Network& net);
void assign_params(Network& net, const Vector& theta);

// Sub-block of each affine layer carried over from the predecessor network,
// derived from old_param_mask (full dimensions when the mask is absent).
struct OldBlock {
  Index out = 0;
  Index in = 0;
};
std::vector<OldBlock> old_blocks(const Network& net);

// Flat-vector mask of weight entries that must stay exactly zero during
// training so that old neurons never read from newer neurons. Rule: an entry
// is frozen iff its row is a copied row and its current value is exactly 0.0.
// Copied rows' exact zeros are the no-connect blocks accumulated over all
// growth rounds (a trained weight does not land on 0.0). Empty when the
// network has no mask.
std::vector<std::uint8_t> frozen_zero_mask(const Network& net);

// Reverse-mode parameter gradient. boundary_adjoints holds, per layer
// boundary (aligned with the trace), the partial derivative of the loss with
// respect to that activation vector, excluding contributions flowing back
// from later boundaries; entry 0 is accepted but cannot reach any parameter.
Vector gradient(const Network& net, const ForwardTrace& trace,
                const std::vector<Vector>& boundary_adjoints);

Network sgd_step(const Network& net, const Vector& grad, double lr);
void sgd_step_inplace(Network& net, const Vector& grad, double lr);

// Fresh network with the given hidden widths. Weights uniform in
// [-s, s] with s = weight_scale if given, else 1/sqrt(fan_in) per layer;
// biases zero.
Network random_network(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                       std::uint64_t seed, std::optional<double> weight_scale = {});

}  // namespace ccl
