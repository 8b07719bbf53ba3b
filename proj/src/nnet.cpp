#include "advstego/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "advstego/error.hpp"

namespace advstego {

namespace {

constexpr double kInitRange = 0.05;

std::string shape_str(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

// Concatenate frames [i-r, i+r] (edge frames replicated) and standardize.
Matrix stack_context(const AcousticModel& model, const Matrix& feats) {
  const Eigen::Index t = feats.rows();
  const Eigen::Index f = feats.cols();
  const int r = model.context_radius;
  const Matrix norm = ((feats.rowwise() - model.feature_mean).array().rowwise() * model.feature_scale.array()).matrix();
  Matrix stacked(t, f * (2 * r + 1));
  for (Eigen::Index i = 0; i < t; ++i) {
    for (int j = -r; j <= r; ++j) {
      const Eigen::Index src = std::clamp<Eigen::Index>(i + j, 0, t - 1);
      stacked.block(i, (j + r) * f, 1, f) = norm.row(src);
    }
  }
  return stacked;
}

}  // namespace

void AcousticModel::validate() const {
  const int width = features.n_mels * (2 * context_radius + 1);
  if (context_radius < 0) throw InvalidArgument("context radius must be non-negative");
  if (layer_sizes.size() < 2) throw ShapeError("model needs at least one layer");
  if (layer_sizes.front() != width) {
    throw ShapeError("input width " + std::to_string(layer_sizes.front()) + " != " + std::to_string(width));
  }
  if (layer_sizes.back() != alphabet.num_classes()) throw ShapeError("output width must equal alphabet classes");
  if (params.size() != 2 * (layer_sizes.size() - 1)) throw ShapeError("parameter count does not match layers");
  for (int l = 0; l < num_layers(); ++l) {
    const auto in = layer_sizes[static_cast<std::size_t>(l)];
    const auto out = layer_sizes[static_cast<std::size_t>(l + 1)];
    if (weight(l).rows() != out || weight(l).cols() != in) throw ShapeError("weight " + std::to_string(l) + " is " + shape_str(weight(l)));
    if (bias(l).rows() != 1 || bias(l).cols() != out) throw ShapeError("bias " + std::to_string(l) + " is " + shape_str(bias(l)));
  }
  if (feature_mean.size() != features.n_mels || feature_scale.size() != features.n_mels) {
    throw ShapeError("normalization vectors must have n_mels entries");
  }
  for (const auto& p : params) {
    if (!p.allFinite()) throw InvalidArgument("model parameters must be finite");
  }
  if (!feature_mean.allFinite() || !feature_scale.allFinite()) throw InvalidArgument("normalization must be finite");
}

AcousticModel init_model(const ModelArchitecture& arch, std::uint64_t seed) {
  AcousticModel m;
  m.features = arch.features;
  m.alphabet = arch.alphabet;
  m.context_radius = arch.context_radius;
  m.seed = seed;
  m.layer_sizes.push_back(arch.features.n_mels * (2 * arch.context_radius + 1));
  for (int h : arch.hidden) m.layer_sizes.push_back(h);
  m.layer_sizes.push_back(arch.alphabet.num_classes());
  m.feature_mean = RowVector::Zero(arch.features.n_mels);
  m.feature_scale = RowVector::Ones(arch.features.n_mels);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-kInitRange, kInitRange);
  for (int l = 0; l + 1 < static_cast<int>(m.layer_sizes.size()); ++l) {
    Matrix w(m.layer_sizes[static_cast<std::size_t>(l + 1)], m.layer_sizes[static_cast<std::size_t>(l)]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng);
    Matrix b(1, m.layer_sizes[static_cast<std::size_t>(l + 1)]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = uniform(rng);
    m.params.push_back(std::move(w));
    m.params.push_back(std::move(b));
  }
  m.validate();
  return m;
}

ForwardResult forward(const AcousticModel& model, const FeatureMatrix& feats) {
  if (feats.values.cols() != model.features.n_mels) {
    throw ShapeError("feature width " + std::to_string(feats.values.cols()) + " != " + std::to_string(model.features.n_mels));
  }
  if (feats.values.rows() < 1) throw ShapeError("forward needs at least one frame");

  ForwardResult out;
  out.tape.model = &model;
  out.tape.activations.push_back(stack_context(model, feats.values));
  const int layers = model.num_layers();
  for (int l = 0; l < layers; ++l) {
    Matrix z = out.tape.activations.back() * model.weight(l).transpose();
    z.rowwise() += model.bias(l).row(0);
    if (l + 1 < layers) {
      out.tape.activations.push_back(z.array().tanh().matrix());
    } else {
      out.logits = std::move(z);
    }
  }
  return out;
}

Matrix forward_logits(const AcousticModel& model, const FeatureMatrix& feats) {
  return forward(model, feats).logits;
}

BackwardResult backward(const AcousticModel& model, ActivationTape& tape, const Matrix& grad_logits) {
  if (tape.consumed) throw InvalidArgument("activation tape was already consumed by a backward pass");
  if (tape.model != &model) throw InvalidArgument("activation tape belongs to a different model");
  const int layers = model.num_layers();
  if (static_cast<int>(tape.activations.size()) != layers) throw ShapeError("tape depth does not match model");
  const Eigen::Index t = tape.activations.front().rows();
  if (grad_logits.rows() != t || grad_logits.cols() != model.layer_sizes.back()) {
    throw ShapeError("logit gradient is " + shape_str(grad_logits) + ", expected " + std::to_string(t) + "x" +
                     std::to_string(model.layer_sizes.back()));
  }
  tape.consumed = true;

  BackwardResult out;
  out.param_grads.resize(model.params.size());
  Matrix g = grad_logits;
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& input = tape.activations[static_cast<std::size_t>(l)];
    out.param_grads[static_cast<std::size_t>(2 * l)] = g.transpose() * input;
    out.param_grads[static_cast<std::size_t>(2 * l + 1)] = g.colwise().sum();
    Matrix g_input = g * model.weight(l);
    if (l > 0) {
      g = (g_input.array() * (1.0 - input.array().square())).matrix();
    } else {
      g = std::move(g_input);
    }
  }

  // Un-stack the context windows back onto frames.
  const Eigen::Index f = model.features.n_mels;
  const int r = model.context_radius;
  out.grad_features = Matrix::Zero(t, f);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (int j = -r; j <= r; ++j) {
      const Eigen::Index src = std::clamp<Eigen::Index>(i + j, 0, t - 1);
      out.grad_features.row(src) += g.block(i, (j + r) * f, 1, f);
    }
  }
  out.grad_features = (out.grad_features.array().rowwise() * model.feature_scale.array()).matrix();
  return out;
}

AdamState make_adam(std::span<const Matrix> params, double learning_rate) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  AdamState s;
  s.learning_rate = learning_rate;
  for (const auto& p : params) {
    s.first_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
    s.second_moment.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return s;
}

void adam_step(AdamState& state, std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw ShapeError("Adam tensor count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        state.first_moment[i].rows() != params[i].rows() || state.first_moment[i].cols() != params[i].cols()) {
      throw ShapeError("Adam tensor " + std::to_string(i) + " shape mismatch");
    }
    if (!grads[i].allFinite()) throw NonFiniteGradient("non-finite gradient in tensor " + std::to_string(i));
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state.first_moment[i].array();
    auto v = state.second_moment[i].array();
    const auto g = grads[i].array();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    params[i].array() -= state.learning_rate * (m / c1) / ((v / c2).sqrt() + state.epsilon);
  }
}

}  // namespace advstego
