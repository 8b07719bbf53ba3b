#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "advstego/audio_io.hpp"
#include "advstego/linalg.hpp"

namespace advstego {

struct FeatureConfig {
  int sample_rate = 16000;
  int win_len = 512;
  int hop = 320;
  int n_mels = 26;
  double f_min = 0.0;
  double f_max = 8000.0;
  double log_floor = 1e-6;

  int n_bins() const noexcept { return win_len / 2 + 1; }
  double frame_rate() const noexcept { return static_cast<double>(sample_rate) / hop; }
  /// 1 + floor((len - win_len) / hop), or 0 when the clip is shorter than a window.
  std::size_t num_frames(std::size_t num_samples) const noexcept;

  friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

struct FeatureMatrix {
  Matrix values;  // T x n_mels log-mel energies
  double frame_rate = 0.0;

  Eigen::Index frames() const noexcept { return values.rows(); }
};

class FeatureFrontEnd;

/// Everything features_backward needs to pull a feature gradient back onto
/// the waveform. Immutable once built.
struct FeatureJacobianContext {
  std::shared_ptr<const FeatureFrontEnd> front_end;
  Matrix spectrum;     // T x 2K: real parts then imaginary parts
  Matrix mel_energy;   // T x n_mels, before the log floor
  std::size_t num_samples = 0;
};

/// Log-mel front end: Hann-windowed frames, real DFT as explicit cosine/sine
/// matrices, power, triangular mel bank, floored natural log.
class FeatureFrontEnd : public std::enable_shared_from_this<FeatureFrontEnd> {
public:
  explicit FeatureFrontEnd(const FeatureConfig& cfg);

  const FeatureConfig& config() const noexcept { return cfg_; }
  /// HTK-mel spaced centre frequency of every filter, in Hz.
  const std::vector<double>& mel_centers() const noexcept { return centers_; }
  const Matrix& mel_bank() const noexcept { return mel_; }

  FeatureMatrix forward(const AudioClip& clip, FeatureJacobianContext* ctx = nullptr) const;
  std::vector<double> backward(const FeatureJacobianContext& ctx, const Matrix& grad_features) const;

private:
  FeatureConfig cfg_;
  Matrix basis_;  // win_len x 2K, window folded in
  Matrix mel_;    // K x n_mels
  std::vector<double> centers_;
};

/// Shared, lazily built front end for a configuration. Thread-safe.
std::shared_ptr<const FeatureFrontEnd> front_end_for(const FeatureConfig& cfg);

struct FeatureResult {
  FeatureMatrix features;
  FeatureJacobianContext context;
};

FeatureResult features_forward(const AudioClip& clip, const FeatureConfig& cfg);
std::vector<double> features_backward(const FeatureJacobianContext& ctx, const Matrix& grad_features);

// --- channel attacks -------------------------------------------------------

AudioClip attack_awgn(const AudioClip& clip, double snr_db, std::uint64_t seed);
AudioClip attack_resample(const AudioClip& clip);
AudioClip attack_lowpass(const AudioClip& clip, double cutoff_hz = 6000.0);
AudioClip attack_echo(const AudioClip& clip, double delay_seconds = 0.030, double gain = 0.5);

struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Second-order Butterworth low-pass via the bilinear transform with the
/// cutoff pre-warped, so the -3 dB point lands exactly on cutoff_hz.
Biquad butterworth_lowpass(double cutoff_hz, double sample_rate);

std::vector<double> apply_biquad(const Biquad& f, std::span<const double> x);

// --- objective metrics -----------------------------------------------------

inline constexpr double kSnrCapDb = 99.0;

double snr_db(const AudioClip& reference, const AudioClip& test);
double linf_norm(std::span<const double> delta);

}  // namespace advstego
