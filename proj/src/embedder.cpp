#include "advstego/embedder.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

#include "advstego/dsp.hpp"
#include "advstego/error.hpp"

namespace advstego {

namespace {

// One differentiable forward pass, kept so the following loss evaluation
// can reuse it.
struct ChainForward {
  FeatureJacobianContext features;
  ForwardResult net;
};

ChainForward chain_forward(const AcousticModel& model, const AudioClip& clip) {
  ChainForward out;
  const auto feats = front_end_for(model.features)->forward(clip, &out.features);
  out.net = forward(model, feats);
  return out;
}

ChainEvaluation chain_backward(const AcousticModel& model, ChainForward& fwd, std::span<const int> labels) {
  ChainEvaluation ev;
  ev.decoded = greedy_decode(fwd.net.logits, model.alphabet);
  const auto ctc = ctc_loss(fwd.net.logits, labels, model.alphabet.blank());
  ev.loss = ctc.loss;
  ev.feasible = ctc.feasible;
  if (!ctc.feasible) {
    ev.grad.assign(fwd.features.num_samples, 0.0);
    return ev;
  }
  const auto net_grads = backward(model, fwd.net.tape, ctc.grad);
  ev.grad = features_backward(fwd.features, net_grads.grad_features);
  return ev;
}

AudioClip with_delta(const AudioClip& carrier, const Matrix& delta) {
  std::vector<double> x = carrier.samples();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += delta(0, static_cast<Eigen::Index>(i));
  return AudioClip(std::move(x), carrier.sample_rate());
}

}  // namespace

void EmbedConfig::validate() const {
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
  if (!(tau0 > 0.0)) throw InvalidArgument("tau0 must be positive");
  if (!(shrink > 0.0 && shrink < 1.0)) throw InvalidArgument("shrink must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw InvalidArgument("attack learning rate must be positive");
}

ChainEvaluation evaluate_chain(const AcousticModel& model, const AudioClip& clip, const Transcript& target) {
  const auto labels = model.alphabet.encode(target);
  auto fwd = chain_forward(model, clip);
  return chain_backward(model, fwd, labels);
}

Transcript extract(const AcousticModel& model, const AudioClip& clip) {
  const auto feats = front_end_for(model.features)->forward(clip);
  return greedy_decode(forward_logits(model, feats), model.alphabet);
}

void check_feasible(const AcousticModel& model, std::size_t num_samples, const Transcript& hidden) {
  const auto labels = model.alphabet.encode(hidden);
  const std::size_t frames = model.features.num_frames(num_samples);
  if (frames == 0) throw InvalidArgument("carrier is shorter than one analysis window");
  const std::size_t needed = ctc_min_frames(labels);
  if (needed > frames) {
    throw InfeasibleTarget("hidden text needs " + std::to_string(needed) + " frames but the carrier has only " +
                           std::to_string(frames) + " (at most " +
                           std::to_string(static_cast<int>(model.features.frame_rate())) + " characters per second)");
  }
}

EmbedResult embed(const AcousticModel& model, const AudioClip& carrier, const Transcript& hidden,
                  const EmbedConfig& cfg) {
  cfg.validate();
  check_feasible(model, carrier.size(), hidden);
  const auto labels = model.alphabet.encode(hidden);
  const auto n = static_cast<Eigen::Index>(carrier.size());

  EmbedResult result{carrier, {}};
  EmbedReport& report = result.report;
  report.hidden = hidden;
  report.best_loss = std::numeric_limits<double>::infinity();

  std::vector<Matrix> delta{Matrix::Zero(1, n)};
  AdamState adam = make_adam(delta, cfg.learning_rate);
  double tau = cfg.tau0;
  bool have_candidate = false;

  ChainForward current = chain_forward(model, carrier);
  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    report.iterations = iter;
    const ChainEvaluation ev = chain_backward(model, current, labels);
    report.loss_trajectory.push_back(ev.loss);
    report.best_loss = std::min(report.best_loss, ev.loss);

    const std::vector<Matrix> grad{Eigen::Map<const Matrix>(ev.grad.data(), 1, n)};
    adam_step(adam, delta, grad);
    delta[0] = delta[0].cwiseMax(-tau).cwiseMin(tau);

    const AudioClip stego = with_delta(carrier, delta[0]);
    current = chain_forward(model, stego);
    if (greedy_decode(current.net.logits, model.alphabet) != hidden) continue;

    // The file on disk is int16, so success only counts if it survives rounding.
    AudioClip rounded = quantized(stego, /*clamp=*/true);
    if (extract(model, rounded) != hidden) continue;

    const double max_delta = linf_norm(std::span<const double>(delta[0].data(), static_cast<std::size_t>(n)));
    tau = cfg.shrink * std::min(tau, max_delta);
    report.success_iterations.push_back(iter);
    report.success_max_delta.push_back(max_delta);
    report.tau_trajectory.push_back(tau);
    result.stego = std::move(rounded);
    have_candidate = true;
    if (cfg.reset_adam_on_shrink) adam = make_adam(delta, cfg.learning_rate);
    if (cfg.early_stop) break;
  }

  report.success = have_candidate;
  if (!have_candidate) {
    report.failure_reason = "no verified success within " + std::to_string(cfg.max_iterations) +
                            " iterations (best loss " + std::to_string(report.best_loss) + ")";
  }
  report.final_delta.resize(carrier.size());
  for (std::size_t i = 0; i < carrier.size(); ++i) {
    report.final_delta[i] = result.stego.samples()[i] - carrier.samples()[i];
  }
  report.final_max_delta = carrier.empty() ? 0.0 : linf_norm(report.final_delta);
  return result;
}

std::string report_to_json(const EmbedReport& report, const EmbedConfig& cfg) {
  nlohmann::ordered_json j;
  j["hidden"] = report.hidden;
  j["success"] = report.success;
  if (!report.success) j["failure_reason"] = report.failure_reason;
  j["iterations"] = report.iterations;
  j["final_max_delta"] = report.final_max_delta;
  std::size_t nonzero = 0;
  for (double d : report.final_delta) nonzero += d != 0.0;
  j["final_delta_nonzero"] = nonzero;
  j["final_delta_length"] = report.final_delta.size();
  j["success_iterations"] = report.success_iterations;
  j["success_max_delta"] = report.success_max_delta;
  j["tau_trajectory"] = report.tau_trajectory;
  j["best_loss"] = std::isfinite(report.best_loss) ? nlohmann::ordered_json(report.best_loss) : nlohmann::ordered_json();
  j["loss_trajectory"] = report.loss_trajectory;
  j["config"] = {{"iterations", cfg.max_iterations},
                 {"tau0", cfg.tau0},
                 {"shrink", cfg.shrink},
                 {"attack_lr", cfg.learning_rate},
                 {"early_stop", cfg.early_stop},
                 {"reset_adam_on_shrink", cfg.reset_adam_on_shrink}};
  return j.dump(2);
}

}  // namespace advstego
