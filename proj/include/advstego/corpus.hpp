#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "advstego/audio_io.hpp"
#include "advstego/ctc.hpp"
#include "advstego/nnet.hpp"

namespace advstego {

struct Utterance {
  AudioClip clip;
  Transcript transcript;
};

/// Tone synthesis parameters. Character k of the alphabet sounds as two
/// sines at 400 + 35k Hz and 1500 + 60k Hz.
struct SynthConfig {
  int sample_rate = 16000;
  double char_seconds = 0.100;
  double pad_seconds = 0.100;
  double ramp_seconds = 0.005;
  double amplitude = 6000.0;
  double noise_snr_db = 30.0;
};

/// The two tone frequencies for alphabet index k.
std::pair<double, double> tone_pair(int k);

/// Renders `text` as a tone sequence with 30 dB seeded background noise;
/// samples are rounded to integers so the clip is exactly representable as
/// 16-bit PCM. Throws InvalidArgument on empty text.
Utterance synth_utterance(const Transcript& text, std::uint64_t seed, const Alphabet& alphabet = {},
                          const SynthConfig& cfg = {});

/// Either an explicit transcript list repeated `repetitions` times, or (when
/// `transcripts` is empty) `random_count` random strings.
struct CorpusSpec {
  std::vector<Transcript> transcripts;
  int repetitions = 1;
  int random_count = 500;
  int min_length = 5;
  int max_length = 15;
};

struct Corpus {
  std::vector<Utterance> train;
  std::vector<Utterance> heldout;
};

/// Per-item seed derived from (seed, index) so items are independent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Deterministic generation; the last 10% (rounded down) is held out.
Corpus gen_corpus(const CorpusSpec& spec, std::uint64_t seed, const Alphabet& alphabet = {},
                  const SynthConfig& synth = {});

struct TrainConfig {
  std::uint64_t seed = 1;
  int epochs = 30;
  double learning_rate = 1e-3;
  ModelArchitecture architecture;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double heldout_exact_match = 0.0;
};

struct TrainResult {
  AcousticModel model;
  std::vector<EpochStats> log;
  /// Exact-match rate of the returned (float32-rounded) model on held-out data.
  double heldout_exact_match = 0.0;
};

/// Per-utterance Adam training on CTC loss with a seeded shuffle each epoch.
/// Parameters are rounded to float32 at the end so that the model file
/// round trip is exact. Throws TrainingDiverged on non-finite epoch loss.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

/// Fraction of utterances whose greedy transcript matches exactly.
double exact_match_rate(const AcousticModel& model, const std::vector<Utterance>& utterances);

// --- model file --------------------------------------------------------------

void save_model(const AcousticModel& model, const std::filesystem::path& path);
AcousticModel load_model(const std::filesystem::path& path);
std::string serialize_model(const AcousticModel& model);
AcousticModel deserialize_model(const std::string& bytes);

// --- manifests ---------------------------------------------------------------

struct ManifestEntry {
  std::filesystem::path wav;  // resolved against the manifest's directory
  Transcript transcript;
};

/// One "relative/path.wav<TAB>transcript" line per utterance.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::vector<Utterance> load_utterances(const std::vector<ManifestEntry>& entries);

}  // namespace advstego
