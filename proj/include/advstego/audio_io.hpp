#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace advstego {

inline constexpr double kInt16Min = -32768.0;
inline constexpr double kInt16Max = 32767.0;

/// Mono waveform. Samples live on the signed 16-bit integer scale but are
/// stored as doubles so perturbations can be optimized continuously.
class AudioClip {
public:
  AudioClip() = default;
  /// Throws InvalidArgument if sample_rate <= 0 or any sample is non-finite.
  AudioClip(std::vector<double> samples, int sample_rate);

  const std::vector<double>& samples() const noexcept { return samples_; }
  int sample_rate() const noexcept { return sample_rate_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration_seconds() const noexcept {
    return sample_rate_ > 0 ? static_cast<double>(samples_.size()) / sample_rate_ : 0.0;
  }

  friend bool operator==(const AudioClip&, const AudioClip&) = default;

private:
  std::vector<double> samples_;
  int sample_rate_ = 16000;
};

/// Round-half-even to the int16 grid. Out-of-range values throw RangeError
/// unless `clamp` is set, in which case they saturate.
std::vector<std::int16_t> quantize_int16(const std::vector<double>& samples, bool clamp);

/// Same as quantize_int16 but stays in the double domain.
AudioClip quantized(const AudioClip& clip, bool clamp);

/// Reads a mono 16-bit PCM RIFF/WAVE file. Unknown chunks are skipped.
AudioClip read_wav(const std::filesystem::path& path);

/// Writes a canonical 44-byte-header mono 16-bit PCM file.
void write_wav(const AudioClip& clip, const std::filesystem::path& path, bool clamp = false);

/// Polyphase windowed-sinc sample-rate conversion (Kaiser beta 8.6, 64 taps
/// per phase, unity DC gain per phase). Same-rate requests pass through.
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace advstego
