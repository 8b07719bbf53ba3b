#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "advstego/ctc.hpp"
#include "advstego/dsp.hpp"
#include "advstego/linalg.hpp"

namespace advstego {

struct ModelArchitecture {
  FeatureConfig features;
  Alphabet alphabet;
  int context_radius = 3;
  std::vector<int> hidden = {128, 128};
};

/// Context-window MLP acoustic model: each frame sees its 2r+1 neighbours
/// (edge frames replicated), tanh hidden layers, linear output over the
/// alphabet plus blank. The trained parameters are the extraction key.
struct AcousticModel {
  FeatureConfig features;
  Alphabet alphabet;
  int context_radius = 3;
  /// {input width, hidden..., classes}; input width = n_mels * (2r + 1).
  std::vector<int> layer_sizes;
  /// Fixed per-mel-bin input standardization: (x - mean) * scale.
  RowVector feature_mean;
  RowVector feature_scale;
  /// Interleaved weight (out x in) and bias (1 x out) per layer.
  std::vector<Matrix> params;
  std::uint64_t seed = 0;

  int num_layers() const noexcept { return static_cast<int>(layer_sizes.size()) - 1; }
  Matrix& weight(int layer) { return params[static_cast<std::size_t>(2 * layer)]; }
  const Matrix& weight(int layer) const { return params[static_cast<std::size_t>(2 * layer)]; }
  Matrix& bias(int layer) { return params[static_cast<std::size_t>(2 * layer + 1)]; }
  const Matrix& bias(int layer) const { return params[static_cast<std::size_t>(2 * layer + 1)]; }

  /// Throws ShapeError/InvalidArgument when shapes do not chain or values are non-finite.
  void validate() const;
};

/// Parameters drawn from uniform(-0.05, 0.05) with a seeded generator;
/// identity input normalization.
AcousticModel init_model(const ModelArchitecture& arch, std::uint64_t seed);

/// Cached activations from one forward pass. backward() consumes it.
struct ActivationTape {
  const AcousticModel* model = nullptr;
  std::vector<Matrix> activations;  // stacked input, then each hidden layer's tanh output
  bool consumed = false;
};

struct ForwardResult {
  Matrix logits;  // T x classes
  ActivationTape tape;
};

struct BackwardResult {
  std::vector<Matrix> param_grads;  // same layout as AcousticModel::params
  Matrix grad_features;             // T x n_mels
};

ForwardResult forward(const AcousticModel& model, const FeatureMatrix& feats);
Matrix forward_logits(const AcousticModel& model, const FeatureMatrix& feats);
BackwardResult backward(const AcousticModel& model, ActivationTape& tape, const Matrix& grad_logits);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// Fresh optimizer state with zero moments shaped like `params`.
AdamState make_adam(std::span<const Matrix> params, double learning_rate);

/// One bias-corrected Adam update in place. Rejects shape mismatches and
/// non-finite gradients without touching params or state.
void adam_step(AdamState& state, std::span<Matrix> params, std::span<const Matrix> grads);

}  // namespace advstego
