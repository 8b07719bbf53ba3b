#include "advstego/audio_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "advstego/error.hpp"

namespace advstego {

namespace {

constexpr int kTapsPerPhase = 64;
constexpr double kKaiserBeta = 8.6;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace

AudioClip::AudioClip(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  if (sample_rate_ <= 0) throw InvalidArgument("sample rate must be positive");
  for (double s : samples_) {
    if (!std::isfinite(s)) throw InvalidArgument("audio samples must be finite");
  }
}

std::vector<std::int16_t> quantize_int16(const std::vector<double>& samples, bool clamp) {
  std::vector<std::int16_t> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    // nearbyint honours the default FE_TONEAREST mode: round half to even.
    double v = std::nearbyint(samples[i]);
    if (v < kInt16Min || v > kInt16Max) {
      if (!clamp) {
        throw RangeError("sample " + std::to_string(i) + " = " + std::to_string(samples[i]) +
                         " is outside the int16 range");
      }
      v = std::clamp(v, kInt16Min, kInt16Max);
    }
    out[i] = static_cast<std::int16_t>(v);
  }
  return out;
}

AudioClip quantized(const AudioClip& clip, bool clamp) {
  const auto ints = quantize_int16(clip.samples(), clamp);
  return AudioClip(std::vector<double>(ints.begin(), ints.end()), clip.sample_rate());
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(where + "not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  int rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw FormatError(where + "truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      const auto format = read_u16(f);
      const auto channels = read_u16(f + 2);
      rate = static_cast<int>(read_u32(f + 4));
      const auto bits = read_u16(f + 14);
      if (format != 1) throw FormatError(where + "unsupported format code " + std::to_string(format));
      if (bits != 16) throw FormatError(where + "unsupported bit depth " + std::to_string(bits));
      if (channels != 1) throw FormatError(where + "expected mono, got " + std::to_string(channels) + " channels");
      if (rate <= 0) throw FormatError(where + "invalid sample rate");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (body + size > bytes.size()) throw FormatError(where + "truncated data chunk");
      if (size % 2 != 0) throw FormatError(where + "data chunk holds a partial sample");
      data = bytes.data() + body;
      data_size = size;
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw FormatError(where + "missing fmt chunk");
  if (data == nullptr) throw FormatError(where + "missing data chunk");

  std::vector<double> samples(data_size / 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::int16_t>(read_u16(data + 2 * i));
  }
  return AudioClip(std::move(samples), rate);
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path, bool clamp) {
  const auto pcm = quantize_int16(clip.samples(), clamp);
  const auto data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
  const auto rate = static_cast<std::uint32_t>(clip.sample_rate());

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);          // PCM
  put_u16(out, 1);          // mono
  put_u32(out, rate);
  put_u32(out, rate * 2);   // byte rate
  put_u16(out, 2);          // block align
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (std::int16_t s : pcm) put_u16(out, static_cast<std::uint16_t>(s));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path.string());
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw InvalidArgument("target sample rate must be positive");
  const int rate = clip.sample_rate();
  if (target_rate == rate) return clip;

  const long g = std::gcd(static_cast<long>(rate), static_cast<long>(target_rate));
  const long up = target_rate / g;    // L
  const long down = rate / g;         // M
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  constexpr int half = kTapsPerPhase / 2;

  // taps[p][j] weights input sample (base - half + 1 + j) for output phase p.
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
  std::vector<std::array<double, kTapsPerPhase>> taps(static_cast<std::size_t>(up));
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    double sum = 0.0;
    for (int j = 0; j < kTapsPerPhase; ++j) {
      const double d = static_cast<double>(j - half + 1) - frac;
      const double r = d / half;
      const double window =
          std::abs(r) >= 1.0 ? 0.0 : std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
      const double h = cutoff * sinc(cutoff * d) * window;
      taps[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)] = h;
      sum += h;
    }
    for (double& h : taps[static_cast<std::size_t>(p)]) h /= sum;
  }

  const auto& x = clip.samples();
  const long n_in = static_cast<long>(x.size());
  const long n_out = (n_in * up + down / 2) / down;
  std::vector<double> y(static_cast<std::size_t>(n_out));
  for (long n = 0; n < n_out; ++n) {
    const long pos = n * down;
    const long base = pos / up;
    const auto& h = taps[static_cast<std::size_t>(pos % up)];
    double acc = 0.0;
    for (int j = 0; j < kTapsPerPhase; ++j) {
      const long k = base - half + 1 + j;
      if (k >= 0 && k < n_in) acc += h[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(k)];
    }
    y[static_cast<std::size_t>(n)] = acc;
  }
  return AudioClip(std::move(y), target_rate);
}

}  // namespace advstego
