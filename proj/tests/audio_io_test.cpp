#include <doctest.h>

#include <cstring>
#include <fstream>

#include "advstego/audio_io.hpp"
#include "advstego/error.hpp"
#include "test_support.hpp"

using namespace advstego;
namespace fs = std::filesystem;

namespace {

void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string chunk(const char* id, const std::string& body) {
  std::string s(id, 4);
  put32(s, static_cast<std::uint32_t>(body.size()));
  s += body;
  if (body.size() % 2) s.push_back('\0');
  return s;
}

std::string fmt_body(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits) {
  std::string b;
  put16(b, format);
  put16(b, channels);
  put32(b, rate);
  put32(b, rate * channels * bits / 8);
  put16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put16(b, bits);
  return b;
}

std::string riff(const std::string& chunks) {
  std::string s = "RIFF";
  put32(s, static_cast<std::uint32_t>(4 + chunks.size()));
  return s + "WAVE" + chunks;
}

fs::path write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
  return p;
}

std::string samples_body(std::initializer_list<std::int16_t> v) {
  std::string b;
  for (auto s : v) put16(b, static_cast<std::uint16_t>(s));
  return b;
}

}  // namespace

TEST_CASE("AudioClip validates its inputs") {
  CHECK_THROWS_AS(AudioClip({0.0}, 0), InvalidArgument);
  CHECK_THROWS_AS(AudioClip({0.0, std::nan("")}, 16000), InvalidArgument);
  CHECK_THROWS_AS(AudioClip({INFINITY}, 16000), InvalidArgument);
  const AudioClip c({1.0, 2.0, 3.0, 4.0}, 4);
  CHECK(c.size() == 4);
  CHECK(c.duration_seconds() == doctest::Approx(1.0));
}

TEST_CASE("quantize_int16 rounds half to even and guards the range") {
  const auto q = quantize_int16({0.5, 1.5, 2.5, -0.5, -1.5, 0.49, -32768.0, 32767.0}, false);
  CHECK(q == std::vector<std::int16_t>{0, 2, 2, 0, -2, 0, -32768, 32767});
  CHECK_THROWS_AS(quantize_int16({32767.6}, false), RangeError);
  CHECK_THROWS_AS(quantize_int16({-40000.0}, false), RangeError);
  const auto clamped = quantize_int16({40000.0, -40000.0}, true);
  CHECK(clamped == std::vector<std::int16_t>{32767, -32768});
}

TEST_CASE("WAV write/read round trip is exact for integer samples") {
  const auto dir = testing::tmp_dir("wav_roundtrip");
  const AudioClip clip({0.0, 1.0, -1.0, 32767.0, -32768.0, 1234.0}, 16000);
  write_wav(clip, dir / "a.wav");
  CHECK(fs::file_size(dir / "a.wav") == 44 + 2 * clip.size());
  CHECK(read_wav(dir / "a.wav") == clip);

  // Non-integer samples are rounded on write.
  write_wav(AudioClip({0.5, 1.5, -2.6}, 8000), dir / "b.wav");
  const auto b = read_wav(dir / "b.wav");
  CHECK(b.samples() == std::vector<double>{0.0, 2.0, -3.0});
  CHECK(b.sample_rate() == 8000);

  CHECK_THROWS_AS(write_wav(AudioClip({50000.0}, 16000), dir / "c.wav"), RangeError);
  write_wav(AudioClip({50000.0}, 16000), dir / "c.wav", /*clamp=*/true);
  CHECK(read_wav(dir / "c.wav").samples() == std::vector<double>{32767.0});
}

TEST_CASE("read_wav skips unknown chunks") {
  const auto dir = testing::tmp_dir("wav_chunks");
  const auto p = write_bytes(dir / "list.wav", riff(chunk("fmt ", fmt_body(1, 1, 16000, 16)) + chunk("LIST", "abc") +
                                                    chunk("data", samples_body({7, -7, 300}))));
  const auto clip = read_wav(p);
  CHECK(clip.samples() == std::vector<double>{7.0, -7.0, 300.0});
}

TEST_CASE("read_wav rejects unsupported or damaged files") {
  const auto dir = testing::tmp_dir("wav_bad");
  const auto data = chunk("data", samples_body({1, 2}));
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "junk.wav", "hello world, not audio")), FormatError);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "stereo.wav", riff(chunk("fmt ", fmt_body(1, 2, 16000, 16)) + data))),
                  FormatError);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "u8.wav", riff(chunk("fmt ", fmt_body(1, 1, 16000, 8)) + data))),
                  FormatError);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "float.wav", riff(chunk("fmt ", fmt_body(3, 1, 16000, 16)) + data))),
                  FormatError);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "nodata.wav", riff(chunk("fmt ", fmt_body(1, 1, 16000, 16))))),
                  FormatError);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "nofmt.wav", riff(data))), FormatError);

  std::string truncated = riff(chunk("fmt ", fmt_body(1, 1, 16000, 16)) + data);
  truncated.resize(truncated.size() - 2);
  CHECK_THROWS_AS(read_wav(write_bytes(dir / "short.wav", truncated)), FormatError);
}

TEST_CASE("resample: identity, lengths and DC preservation") {
  const auto x = testing::noise_clip(1000, 1000.0, 3);
  CHECK(resample(x, 16000) == x);
  CHECK(resample(x, 32000).size() == 2000);
  CHECK(resample(x, 8000).size() == 500);
  CHECK(resample(x, 22050).size() == 1378);
  CHECK_THROWS_AS(resample(x, 0), InvalidArgument);

  // Every polyphase branch sums to one, so a constant survives away from the edges.
  const AudioClip dc(std::vector<double>(2000, 1000.0), 16000);
  for (int rate : {32000, 8000, 22050}) {
    const auto y = resample(dc, rate);
    const std::size_t edge = y.size() / 8;
    for (std::size_t i = edge; i + edge < y.size(); ++i) REQUIRE(y.samples()[i] == doctest::Approx(1000.0).epsilon(1e-12));
  }
}

TEST_CASE("resample keeps passband tones and removes aliases") {
  // 1 kHz survives a 2x round trip.
  const auto x = testing::sine(1000.0, 8000.0, 4000);
  const auto back = resample(resample(x, 32000), 16000);
  REQUIRE(back.size() == x.size());
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 200; i < 3800; ++i) {
    err += std::pow(back.samples()[i] - x.samples()[i], 2);
    ref += std::pow(x.samples()[i], 2);
  }
  CHECK(10.0 * std::log10(ref / err) > 60.0);

  // 7 kHz is above the 4 kHz Nyquist of an 8 kHz target.
  const auto hi = resample(testing::sine(7000.0, 8000.0, 8000), 8000);
  double peak = 0.0;
  for (std::size_t i = 500; i + 500 < hi.size(); ++i) peak = std::max(peak, std::abs(hi.samples()[i]));
  CHECK(peak < 8000.0 * 0.01);
}
