#include "advstego/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <tuple>

#include "advstego/error.hpp"

namespace advstego {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void check_config(const FeatureConfig& cfg) {
  if (cfg.sample_rate != 16000) {
    throw InvalidArgument("feature front end supports 16000 Hz only, got " + std::to_string(cfg.sample_rate));
  }
  if (cfg.win_len < 2 || cfg.hop < 1 || cfg.n_mels < 1) throw InvalidArgument("invalid feature framing");
  if (!(cfg.f_min >= 0.0 && cfg.f_max > cfg.f_min && cfg.f_max <= cfg.sample_rate / 2.0)) {
    throw InvalidArgument("invalid mel band edges");
  }
  if (!(cfg.log_floor > 0.0)) throw InvalidArgument("log floor must be positive");
}

}  // namespace

std::size_t FeatureConfig::num_frames(std::size_t num_samples) const noexcept {
  const auto win = static_cast<std::size_t>(win_len);
  if (num_samples < win) return 0;
  return 1 + (num_samples - win) / static_cast<std::size_t>(hop);
}

FeatureFrontEnd::FeatureFrontEnd(const FeatureConfig& cfg) : cfg_(cfg) {
  check_config(cfg_);
  const int n = cfg_.win_len;
  const int k_bins = cfg_.n_bins();

  basis_.resize(n, 2 * k_bins);
  for (int i = 0; i < n; ++i) {
    // Periodic Hann.
    const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
    for (int k = 0; k < k_bins; ++k) {
      // Reduce the phase index mod n so large i*k keeps full precision.
      const double phase = 2.0 * M_PI * static_cast<double>((static_cast<long>(i) * k) % n) / n;
      basis_(i, k) = w * std::cos(phase);
      basis_(i, k_bins + k) = -w * std::sin(phase);
    }
  }

  const int m = cfg_.n_mels;
  const double lo = hz_to_mel(cfg_.f_min);
  const double hi = hz_to_mel(cfg_.f_max);
  std::vector<double> edges(static_cast<std::size_t>(m + 2));
  for (int j = 0; j < m + 2; ++j) edges[static_cast<std::size_t>(j)] = mel_to_hz(lo + (hi - lo) * j / (m + 1));
  centers_.assign(edges.begin() + 1, edges.end() - 1);

  mel_ = Matrix::Zero(k_bins, m);
  for (int k = 0; k < k_bins; ++k) {
    const double f = static_cast<double>(k) * cfg_.sample_rate / n;
    for (int j = 0; j < m; ++j) {
      const double left = edges[static_cast<std::size_t>(j)];
      const double centre = edges[static_cast<std::size_t>(j + 1)];
      const double right = edges[static_cast<std::size_t>(j + 2)];
      double weight = 0.0;
      if (f > left && f <= centre) {
        weight = (f - left) / (centre - left);
      } else if (f > centre && f < right) {
        weight = (right - f) / (right - centre);
      }
      mel_(k, j) = weight;
    }
  }
}

FeatureMatrix FeatureFrontEnd::forward(const AudioClip& clip, FeatureJacobianContext* ctx) const {
  if (clip.sample_rate() != cfg_.sample_rate) {
    throw InvalidArgument("clip sample rate " + std::to_string(clip.sample_rate()) +
                          " does not match feature rate " + std::to_string(cfg_.sample_rate));
  }
  const std::size_t frames = cfg_.num_frames(clip.size());
  if (frames == 0) throw InvalidArgument("clip is shorter than one analysis window");
  const int n = cfg_.win_len;
  const int k_bins = cfg_.n_bins();
  const auto t = static_cast<Eigen::Index>(frames);

  Matrix framed(t, n);
  const double* x = clip.samples().data();
  for (Eigen::Index r = 0; r < t; ++r) {
    framed.row(r) = Eigen::Map<const RowVector>(x + r * cfg_.hop, n);
  }
  Matrix spectrum = framed * basis_;
  const Matrix power = spectrum.leftCols(k_bins).array().square() + spectrum.rightCols(k_bins).array().square();
  Matrix energy = power * mel_;

  FeatureMatrix out;
  out.frame_rate = cfg_.frame_rate();
  out.values = energy.array().max(cfg_.log_floor).log();

  if (ctx != nullptr) {
    ctx->front_end = weak_from_this().lock();
    ctx->spectrum = std::move(spectrum);
    ctx->mel_energy = std::move(energy);
    ctx->num_samples = clip.size();
  }
  return out;
}

std::vector<double> FeatureFrontEnd::backward(const FeatureJacobianContext& ctx, const Matrix& grad) const {
  const Eigen::Index t = ctx.mel_energy.rows();
  if (grad.rows() != t || grad.cols() != cfg_.n_mels) {
    throw ShapeError("feature gradient is " + std::to_string(grad.rows()) + "x" + std::to_string(grad.cols()) +
                     ", expected " + std::to_string(t) + "x" + std::to_string(cfg_.n_mels));
  }
  const int k_bins = cfg_.n_bins();

  // d log(max(E, floor)) / dE is 1/E above the floor and 0 below it.
  const Matrix grad_energy =
      (ctx.mel_energy.array() > cfg_.log_floor).select(grad.array() / ctx.mel_energy.array(), 0.0);
  const Matrix grad_power = grad_energy * mel_.transpose();
  Matrix grad_spectrum(t, 2 * k_bins);
  grad_spectrum.leftCols(k_bins) = 2.0 * ctx.spectrum.leftCols(k_bins).array() * grad_power.array();
  grad_spectrum.rightCols(k_bins) = 2.0 * ctx.spectrum.rightCols(k_bins).array() * grad_power.array();
  const Matrix grad_frames = grad_spectrum * basis_.transpose();

  std::vector<double> out(ctx.num_samples, 0.0);
  for (Eigen::Index r = 0; r < t; ++r) {
    Eigen::Map<RowVector>(out.data() + r * cfg_.hop, cfg_.win_len) += grad_frames.row(r);
  }
  return out;
}

std::shared_ptr<const FeatureFrontEnd> front_end_for(const FeatureConfig& cfg) {
  using Key = std::tuple<int, int, int, int, double, double, double>;
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const FeatureFrontEnd>> cache;
  const Key key{cfg.sample_rate, cfg.win_len, cfg.hop, cfg.n_mels, cfg.f_min, cfg.f_max, cfg.log_floor};
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_shared<const FeatureFrontEnd>(cfg)).first;
  return it->second;
}

FeatureResult features_forward(const AudioClip& clip, const FeatureConfig& cfg) {
  FeatureResult result;
  result.features = front_end_for(cfg)->forward(clip, &result.context);
  return result;
}

std::vector<double> features_backward(const FeatureJacobianContext& ctx, const Matrix& grad_features) {
  if (!ctx.front_end) throw InvalidArgument("feature context was not produced by features_forward");
  return ctx.front_end->backward(ctx, grad_features);
}

// --- attacks ---------------------------------------------------------------

AudioClip attack_awgn(const AudioClip& clip, double snr_db, std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw InvalidArgument("AWGN target SNR must be finite");
  const auto& x = clip.samples();
  double signal_power = 0.0;
  for (double v : x) signal_power += v * v;
  if (!(signal_power > 0.0)) throw InvalidArgument("AWGN requires a non-silent clip");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> noise(x.size());
  double noise_power = 0.0;
  for (double& v : noise) {
    v = gauss(rng);
    noise_power += v * v;
  }
  const double scale = std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0) / noise_power);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + scale * noise[i];
  return AudioClip(std::move(y), clip.sample_rate());
}

AudioClip attack_resample(const AudioClip& clip) {
  const int rate = clip.sample_rate();
  const AudioClip up = resample(clip, 2 * rate);
  std::vector<double> y = resample(up, rate).samples();
  y.resize(clip.size(), 0.0);
  return AudioClip(std::move(y), rate);
}

Biquad butterworth_lowpass(double cutoff_hz, double sample_rate) {
  if (!(cutoff_hz > 0.0) || cutoff_hz >= sample_rate / 2.0) {
    throw InvalidArgument("low-pass cutoff must lie strictly between 0 and Nyquist");
  }
  const double k = std::tan(M_PI * cutoff_hz / sample_rate);
  const double k2 = k * k;
  const double norm = 1.0 / (1.0 + M_SQRT2 * k + k2);
  Biquad f{};
  f.b0 = k2 * norm;
  f.b1 = 2.0 * f.b0;
  f.b2 = f.b0;
  f.a1 = 2.0 * (k2 - 1.0) * norm;
  f.a2 = (1.0 - M_SQRT2 * k + k2) * norm;
  return f;
}

std::vector<double> apply_biquad(const Biquad& f, std::span<const double> x) {
  std::vector<double> y(x.size());
  // Direct form II transposed, zero initial state.
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double out = f.b0 * x[n] + s1;
    s1 = f.b1 * x[n] - f.a1 * out + s2;
    s2 = f.b2 * x[n] - f.a2 * out;
    y[n] = out;
  }
  return y;
}

AudioClip attack_lowpass(const AudioClip& clip, double cutoff_hz) {
  const Biquad f = butterworth_lowpass(cutoff_hz, clip.sample_rate());
  return AudioClip(apply_biquad(f, clip.samples()), clip.sample_rate());
}

AudioClip attack_echo(const AudioClip& clip, double delay_seconds, double gain) {
  const auto delay = static_cast<std::size_t>(std::lround(delay_seconds * clip.sample_rate()));
  if (clip.size() <= delay) throw InvalidArgument("clip is shorter than the echo delay");
  std::vector<double> y = clip.samples();
  const auto& x = clip.samples();
  for (std::size_t n = delay; n < x.size(); ++n) y[n] = x[n] + gain * x[n - delay];
  return AudioClip(std::move(y), clip.sample_rate());
}

// --- metrics ---------------------------------------------------------------

double snr_db(const AudioClip& reference, const AudioClip& test) {
  if (reference.size() != test.size() || reference.sample_rate() != test.sample_rate()) {
    throw ShapeError("SNR needs clips of equal length and rate");
  }
  double signal = 0.0, error = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double r = reference.samples()[i];
    const double e = r - test.samples()[i];
    signal += r * r;
    error += e * e;
  }
  if (!(signal > 0.0)) throw InvalidArgument("SNR reference is silent");
  if (error == 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(signal / error));
}

double linf_norm(std::span<const double> delta) {
  if (delta.empty()) throw InvalidArgument("L-infinity norm of an empty sequence");
  double m = 0.0;
  for (double v : delta) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace advstego
