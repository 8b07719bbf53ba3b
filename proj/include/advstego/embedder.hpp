#pragma once

#include <string>
#include <vector>

#include "advstego/audio_io.hpp"
#include "advstego/ctc.hpp"
#include "advstego/nnet.hpp"

namespace advstego {

struct EmbedConfig {
  int max_iterations = 500;
  double tau0 = 3000.0;        // initial L-inf bound, int16 scale
  double shrink = 0.8;         // tau <- shrink * min(tau, max|delta|) on success
  double learning_rate = 100.0;
  bool early_stop = false;     // return at the first verified success
  bool reset_adam_on_shrink = false;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

struct EmbedReport {
  Transcript hidden;
  bool success = false;
  std::string failure_reason;
  int iterations = 0;
  /// Iteration (1-based) of every verified success.
  std::vector<int> success_iterations;
  /// Continuous max|delta| at each verified success.
  std::vector<double> success_max_delta;
  /// tau after every success event, strictly decreasing.
  std::vector<double> tau_trajectory;
  std::vector<double> loss_trajectory;
  double best_loss = 0.0;
  /// Integer perturbation actually carried by the returned stego (stego - carrier).
  std::vector<double> final_delta;
  double final_max_delta = 0.0;
};

struct EmbedResult {
  AudioClip stego;  // integer-valued; equals the carrier on failure
  EmbedReport report;
};

/// Loss and waveform gradient of the full chain
/// samples -> log-mel -> acoustic model -> CTC(target).
struct ChainEvaluation {
  double loss = 0.0;
  bool feasible = true;
  std::vector<double> grad;  // d loss / d samples
  Transcript decoded;        // greedy transcript of the same forward pass
};

ChainEvaluation evaluate_chain(const AcousticModel& model, const AudioClip& clip, const Transcript& target);

/// Hides `hidden` in `carrier` by optimizing an L-inf bounded additive
/// perturbation against `model` with the clip-and-shrink threshold schedule.
/// Throws AlphabetError / InfeasibleTarget / InvalidArgument for bad inputs;
/// non-convergence is reported through EmbedReport::success.
EmbedResult embed(const AcousticModel& model, const AudioClip& carrier, const Transcript& hidden,
                  const EmbedConfig& cfg = {});

/// Greedy transcript of `clip` under `model`.
Transcript extract(const AcousticModel& model, const AudioClip& clip);

/// Throws InfeasibleTarget if `hidden` cannot fit the frames of a clip of
/// `num_samples` samples.
void check_feasible(const AcousticModel& model, std::size_t num_samples, const Transcript& hidden);

/// JSON text of the report (the per-sample delta is summarized, not listed).
std::string report_to_json(const EmbedReport& report, const EmbedConfig& cfg);

}  // namespace advstego
