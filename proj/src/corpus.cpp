#include "advstego/corpus.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "advstego/error.hpp"

namespace advstego {

// --- synthesis ---------------------------------------------------------------

std::pair<double, double> tone_pair(int k) { return {400.0 + 35.0 * k, 1500.0 + 60.0 * k}; }

Utterance synth_utterance(const Transcript& text, std::uint64_t seed, const Alphabet& alphabet,
                          const SynthConfig& cfg) {
  if (text.empty()) throw InvalidArgument("cannot synthesize an empty transcript");
  const auto labels = alphabet.encode(text);
  const double rate = cfg.sample_rate;
  const auto char_len = static_cast<std::size_t>(std::lround(cfg.char_seconds * rate));
  const auto pad_len = static_cast<std::size_t>(std::lround(cfg.pad_seconds * rate));
  const auto ramp_len = static_cast<std::size_t>(std::lround(cfg.ramp_seconds * rate));

  std::vector<double> tone(2 * pad_len + labels.size() * char_len, 0.0);
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto [f1, f2] = tone_pair(labels[c]);
    const std::size_t start = pad_len + c * char_len;
    for (std::size_t i = 0; i < char_len; ++i) {
      double env = 1.0;
      if (i < ramp_len) {
        env = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(i) / ramp_len);
      } else if (char_len - 1 - i < ramp_len) {
        env = 0.5 - 0.5 * std::cos(M_PI * static_cast<double>(char_len - 1 - i) / ramp_len);
      }
      const double t = static_cast<double>(i) / rate;
      tone[start + i] = env * cfg.amplitude * (std::sin(2.0 * M_PI * f1 * t) + std::sin(2.0 * M_PI * f2 * t));
    }
  }

  double power = 0.0;
  for (double v : tone) power += v * v;
  power /= static_cast<double>(tone.size());
  const double noise_std = std::sqrt(power / std::pow(10.0, cfg.noise_snr_db / 10.0));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise_std);
  for (double& v : tone) v = std::nearbyint(std::clamp(v + gauss(rng), kInt16Min, kInt16Max));
  return Utterance{AudioClip(std::move(tone), cfg.sample_rate), text};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over a combination of both inputs.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Corpus gen_corpus(const CorpusSpec& spec, std::uint64_t seed, const Alphabet& alphabet, const SynthConfig& synth) {
  std::vector<Transcript> texts;
  if (!spec.transcripts.empty()) {
    if (spec.repetitions < 1) throw InvalidArgument("repetition count must be at least 1");
    for (int r = 0; r < spec.repetitions; ++r) texts.insert(texts.end(), spec.transcripts.begin(), spec.transcripts.end());
  } else {
    if (spec.random_count < 1 || spec.min_length < 1 || spec.max_length < spec.min_length) {
      throw InvalidArgument("invalid random corpus specification");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> length(spec.min_length, spec.max_length);
    std::uniform_int_distribution<int> symbol(0, alphabet.blank() - 1);
    for (int i = 0; i < spec.random_count; ++i) {
      Transcript t(static_cast<std::size_t>(length(rng)), ' ');
      for (char& c : t) c = alphabet.symbol(symbol(rng));
      texts.push_back(std::move(t));
    }
  }
  const std::size_t held = texts.size() / 10;
  if (held == 0) throw InvalidArgument("corpus needs at least 10 utterances to hold out 10%");

  Corpus corpus;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto utt = synth_utterance(texts[i], derive_seed(seed, i), alphabet, synth);
    (i < texts.size() - held ? corpus.train : corpus.heldout).push_back(std::move(utt));
  }
  return corpus;
}

// --- training ----------------------------------------------------------------

double exact_match_rate(const AcousticModel& model, const std::vector<Utterance>& utterances) {
  if (utterances.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& u : utterances) {
    const auto feats = front_end_for(model.features)->forward(u.clip);
    if (greedy_decode(forward_logits(model, feats), model.alphabet) == u.transcript) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(utterances.size());
}

namespace {

void round_to_float(Matrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
}

void round_to_float(RowVector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(v[i]);
}

}  // namespace

TrainResult train(const Corpus& corpus, const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
  if (corpus.train.empty()) throw InvalidArgument("training corpus is empty");
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be at least 1");
  const auto& arch = cfg.architecture;
  const auto front = front_end_for(arch.features);

  std::vector<FeatureMatrix> feats;
  std::vector<std::vector<int>> targets;
  feats.reserve(corpus.train.size());
  for (const auto& u : corpus.train) {
    feats.push_back(front->forward(u.clip));
    targets.push_back(arch.alphabet.encode(u.transcript));
  }

  TrainResult result;
  AcousticModel& model = result.model;
  model = init_model(arch, cfg.seed);

  // Per-bin standardization from the training frames.
  const int bins = arch.features.n_mels;
  RowVector sum = RowVector::Zero(bins), sq = RowVector::Zero(bins);
  double count = 0.0;
  for (const auto& f : feats) {
    sum += f.values.colwise().sum();
    sq += f.values.array().square().matrix().colwise().sum();
    count += static_cast<double>(f.values.rows());
  }
  model.feature_mean = sum / count;
  const RowVector var = (sq / count).array() - model.feature_mean.array().square();
  model.feature_scale = var.array().max(1e-12).sqrt().inverse();
  round_to_float(model.feature_mean);
  round_to_float(model.feature_scale);

  AdamState adam = make_adam(model.params, cfg.learning_rate);
  std::vector<std::size_t> order(feats.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffler(derive_seed(cfg.seed, 0xC0FFEE));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffler);
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t idx : order) {
      auto fwd = forward(model, feats[idx]);
      const auto ctc = ctc_loss(fwd.logits, targets[idx], arch.alphabet.blank());
      if (!ctc.feasible) continue;
      const auto grads = backward(model, fwd.tape, ctc.grad);
      total += ctc.loss;
      ++used;
      try {
        adam_step(adam, model.params, grads.param_grads);
      } catch (const NonFiniteGradient& e) {
        throw TrainingDiverged("epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = used > 0 ? total / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN();
    if (!std::isfinite(stats.mean_loss)) {
      throw TrainingDiverged("epoch " + std::to_string(epoch) + " mean loss is not finite (" +
                             std::to_string(used) + " usable utterances)");
    }
    stats.heldout_exact_match = exact_match_rate(model, corpus.heldout);
    result.log.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }

  for (auto& p : model.params) round_to_float(p);
  model.validate();
  result.heldout_exact_match = exact_match_rate(model, corpus.heldout);
  return result;
}

// --- model file --------------------------------------------------------------

namespace {

constexpr char kMagic[] = "SWAM1";
constexpr std::size_t kMagicLen = 5;

class Writer {
public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::string& str() { return buf_; }

private:
  std::string buf_;
};

class Reader {
public:
  Reader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}
  const char* take(std::size_t n) {
    if (pos_ + n > end_) throw FormatError("model file is truncated");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4));
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  double f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }

private:
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::string& bytes, std::size_t len) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(len)));
}

}  // namespace

std::string serialize_model(const AcousticModel& model) {
  model.validate();
  Writer w;
  w.bytes(kMagic, kMagicLen);
  const auto& f = model.features;
  w.u32(static_cast<std::uint32_t>(f.sample_rate));
  w.u32(static_cast<std::uint32_t>(f.win_len));
  w.u32(static_cast<std::uint32_t>(f.hop));
  w.u32(static_cast<std::uint32_t>(f.n_mels));
  w.f64(f.f_min);
  w.f64(f.f_max);
  w.f64(f.log_floor);
  w.u32(static_cast<std::uint32_t>(model.context_radius));
  w.u32(static_cast<std::uint32_t>(model.layer_sizes.size()));
  for (int s : model.layer_sizes) w.u32(static_cast<std::uint32_t>(s));
  w.u32(static_cast<std::uint32_t>(model.alphabet.symbols().size()));
  w.bytes(model.alphabet.symbols().data(), model.alphabet.symbols().size());
  for (Eigen::Index i = 0; i < model.feature_mean.size(); ++i) w.f32(model.feature_mean[i]);
  for (Eigen::Index i = 0; i < model.feature_scale.size(); ++i) w.f32(model.feature_scale[i]);
  for (const auto& p : model.params) {
    for (Eigen::Index i = 0; i < p.size(); ++i) w.f32(p.data()[i]);
  }
  w.u64(model.seed);
  const std::uint32_t crc = crc32_of(w.str(), w.str().size());
  w.u32(crc);
  return std::move(w.str());
}

AcousticModel deserialize_model(const std::string& bytes) {
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), "SWAM", 4) != 0) {
    throw FormatError("not a model file (bad magic)");
  }
  if (bytes[4] != kMagic[4]) throw VersionError("unsupported model file version '" + bytes.substr(0, kMagicLen) + "'");
  if (bytes.size() < kMagicLen + 4) throw FormatError("model file is truncated");
  const std::size_t body = bytes.size() - 4;
  Reader trailer(bytes, bytes.size());
  trailer.take(body);
  if (trailer.u32() != crc32_of(bytes, body)) throw ChecksumError("model file checksum mismatch (corrupted or truncated)");

  Reader r(bytes, body);
  r.take(kMagicLen);
  AcousticModel m;
  m.features.sample_rate = static_cast<int>(r.u32());
  m.features.win_len = static_cast<int>(r.u32());
  m.features.hop = static_cast<int>(r.u32());
  m.features.n_mels = static_cast<int>(r.u32());
  m.features.f_min = r.f64();
  m.features.f_max = r.f64();
  m.features.log_floor = r.f64();
  m.context_radius = static_cast<int>(r.u32());
  const auto n_sizes = r.u32();
  if (n_sizes < 2 || n_sizes > 64) throw FormatError("implausible layer count");
  for (std::uint32_t i = 0; i < n_sizes; ++i) m.layer_sizes.push_back(static_cast<int>(r.u32()));
  const auto n_symbols = r.u32();
  if (n_symbols == 0 || n_symbols > 256) throw FormatError("implausible alphabet size");
  m.alphabet = Alphabet(std::string(r.take(n_symbols), n_symbols));
  if (m.features.n_mels <= 0 || m.features.n_mels > 4096) throw FormatError("implausible mel count");
  m.feature_mean.resize(m.features.n_mels);
  m.feature_scale.resize(m.features.n_mels);
  for (Eigen::Index i = 0; i < m.feature_mean.size(); ++i) m.feature_mean[i] = r.f32();
  for (Eigen::Index i = 0; i < m.feature_scale.size(); ++i) m.feature_scale[i] = r.f32();
  for (std::size_t l = 0; l + 1 < m.layer_sizes.size(); ++l) {
    const int in = m.layer_sizes[l];
    const int out = m.layer_sizes[l + 1];
    if (in <= 0 || out <= 0) throw FormatError("non-positive layer size");
    Matrix w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = r.f32();
    Matrix b(1, out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = r.f32();
    m.params.push_back(std::move(w));
    m.params.push_back(std::move(b));
  }
  m.seed = r.u64();
  if (r.pos() != body) throw FormatError("model file has trailing bytes");
  try {
    m.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("model file describes an invalid model: ") + e.what());
  }
  return m;
}

void save_model(const AcousticModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

AcousticModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

// --- manifests ---------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected <path>TAB<transcript>");
    }
    std::filesystem::path wav = line.substr(0, tab);
    if (wav.is_relative()) wav = base / wav;
    entries.push_back({wav, line.substr(tab + 1)});
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  // Paths are stored relative to the manifest so the directory can move.
  const auto base = std::filesystem::absolute(path).parent_path();
  for (const auto& e : entries) {
    if (e.transcript.find_first_of("\t\n") != Transcript::npos) throw InvalidArgument("transcript contains a tab or newline");
    out << std::filesystem::absolute(e.wav).lexically_relative(base).generic_string() << '\t' << e.transcript << '\n';
  }
  if (!out) throw IoError("write failed for manifest " + path.string());
}

std::vector<Utterance> load_utterances(const std::vector<ManifestEntry>& entries) {
  std::vector<Utterance> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back({read_wav(e.wav), e.transcript});
  return out;
}

}  // namespace advstego
