#include "advstego/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "advstego/corpus.hpp"
#include "advstego/dsp.hpp"
#include "advstego/error.hpp"

namespace advstego {

namespace {

constexpr std::array<std::pair<Metric, std::string_view>, 9> kMetricNames = {{
    {Metric::capacity_cps, "capacity_cps"},
    {Metric::snr_db, "snr_db"},
    {Metric::max_delta, "max_delta"},
    {Metric::extract_ok, "extract_ok"},
    {Metric::attack_awgn_ok, "attack_awgn_ok"},
    {Metric::attack_resample_ok, "attack_resample_ok"},
    {Metric::attack_lowpass_ok, "attack_lowpass_ok"},
    {Metric::attack_echo_ok, "attack_echo_ok"},
    {Metric::cross_model_ok, "cross_model_ok"},
}};

EvalRecord flag_record(const StegoItem& item, Metric metric, bool ok, std::string model = {}) {
  return EvalRecord{item.carrier_id, item.group, item.hidden, metric, ok ? 1.0 : 0.0, ok, std::move(model)};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::string_view metric_name(Metric m) {
  for (const auto& [metric, name] : kMetricNames) {
    if (metric == m) return name;
  }
  return "unknown";
}

Metric metric_from_name(std::string_view name) {
  for (const auto& [metric, n] : kMetricNames) {
    if (n == name) return metric;
  }
  throw InvalidArgument("unknown metric '" + std::string(name) + "'");
}

std::string group_name(std::size_t index) { return "G" + std::to_string(index + 1); }

std::string carrier_group(std::size_t index, std::size_t count) {
  if (index >= count) throw InvalidArgument("carrier index out of range");
  return group_name(index * kGroupTexts.size() / count);
}

std::string_view group_text(const std::string& group) {
  for (std::size_t k = 0; k < kGroupTexts.size(); ++k) {
    if (group_name(k) == group) return kGroupTexts[k];
  }
  throw InvalidArgument("unknown group '" + group + "'");
}

std::vector<Carrier> make_carriers(std::size_t count, double seconds, std::uint64_t seed) {
  const SynthConfig synth;
  const auto chars = static_cast<long>(std::lround((seconds - 2 * synth.pad_seconds) / synth.char_seconds));
  if (chars < 1) throw InvalidArgument("carrier duration too short for a synthetic utterance");
  const Alphabet alphabet;
  std::vector<Carrier> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_int_distribution<int> symbol(0, alphabet.blank() - 1);
    Transcript text(static_cast<std::size_t>(chars), ' ');
    for (char& c : text) c = alphabet.symbol(symbol(rng));
    const std::string id = (i < 10 ? "A0" : "A") + std::to_string(i);
    out.push_back({id, carrier_group(i, count), synth_utterance(text, derive_seed(seed ^ 0x5EED, i)).clip});
  }
  return out;
}

std::vector<StegoItem> build_stego_set(const AcousticModel& model, const std::vector<Carrier>& carriers,
                                       const EmbedConfig& cfg) {
  std::vector<StegoItem> out;
  for (std::size_t i = 0; i < carriers.size(); ++i) {
    const auto& c = carriers[i];
    const Transcript hidden(group_text(c.group));
    auto result = embed(model, c.clip, hidden, cfg);
    out.push_back({c.id, c.group, hidden, c.clip, std::move(result.stego), std::move(result.report)});
  }
  return out;
}

Transcript capacity_payload(double seconds) {
  static const std::string block = "hide hide hide hide hide hide hide hide hide hide";
  const auto length = static_cast<std::size_t>(std::floor(static_cast<double>(block.size()) * seconds));
  Transcript out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) out.push_back(block[i % block.size()]);
  return out;
}

Transcript drop_last_word(const Transcript& payload) {
  const auto space = payload.find_last_of(' ');
  if (space == Transcript::npos) return {};
  return payload.substr(0, payload.find_last_not_of(' ', space) + 1);
}

std::vector<EvalRecord> eval_capacity(const AcousticModel& model, const std::vector<Carrier>& carriers,
                                      const EmbedConfig& cfg, std::vector<CapacityOutcome>* outcomes) {
  std::vector<EvalRecord> records;
  for (const auto& c : carriers) {
    const double duration = c.clip.duration_seconds();
    if (duration < 1.0) throw InvalidArgument("capacity carriers must be at least 1 s long");
    CapacityOutcome outcome{c.id, 0, 0, 0.0};
    Transcript achieved;
    // Full payload first, then one word shorter per failed attempt.
    for (Transcript payload = capacity_payload(duration); !payload.empty(); payload = drop_last_word(payload)) {
      ++outcome.attempts;
      const auto result = embed(model, c.clip, payload, cfg);
      if (result.report.success && extract(model, result.stego) == payload) {
        outcome.length = payload.size();
        achieved = payload;
        break;
      }
    }
    outcome.capacity_cps = static_cast<double>(achieved.size()) / duration;
    records.push_back({c.id, c.group, achieved, Metric::capacity_cps, outcome.capacity_cps, !achieved.empty(), {}});
    if (outcomes != nullptr) outcomes->push_back(outcome);
  }
  return records;
}

std::vector<EvalRecord> eval_imperceptibility(const std::vector<StegoItem>& pairs,
                                              const std::optional<std::filesystem::path>& plot_dir) {
  std::vector<EvalRecord> records;
  if (plot_dir) std::filesystem::create_directories(*plot_dir);
  for (const auto& p : pairs) {
    if (p.carrier.size() != p.stego.size()) throw ShapeError("carrier and stego " + p.carrier_id + " differ in length");
    std::vector<double> delta(p.carrier.size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = p.stego.samples()[i] - p.carrier.samples()[i];
    const double max_delta = delta.empty() ? 0.0 : linf_norm(delta);
    records.push_back({p.carrier_id, p.group, p.hidden, Metric::snr_db, snr_db(p.carrier, p.stego), {}, {}});
    records.push_back({p.carrier_id, p.group, p.hidden, Metric::max_delta, max_delta, {}, {}});
    if (plot_dir) {
      std::ofstream out(*plot_dir / (p.carrier_id + ".diff.tsv"));
      if (!out) throw IoError("cannot write difference waveform for " + p.carrier_id);
      out << "index\tcarrier\tstego\tdelta\n";
      for (std::size_t i = 0; i < delta.size(); ++i) {
        out << i << '\t' << p.carrier.samples()[i] << '\t' << p.stego.samples()[i] << '\t' << delta[i] << '\n';
      }
    }
  }
  return records;
}

std::vector<EvalRecord> eval_security(const AcousticModel& private_model, const std::vector<NamedModel>& variants,
                                      const std::vector<StegoItem>& stego_set) {
  std::vector<NamedModel> rows{{"private", &private_model}};
  rows.insert(rows.end(), variants.begin(), variants.end());
  std::vector<EvalRecord> records;
  for (const auto& row : rows) {
    if (row.model == nullptr) throw InvalidArgument("security variant '" + row.name + "' has no model");
    row.model->validate();
    for (const auto& item : stego_set) {
      records.push_back(flag_record(item, Metric::cross_model_ok, extract(*row.model, item.stego) == item.hidden, row.name));
    }
  }
  return records;
}

std::vector<EvalRecord> eval_robustness(const AcousticModel& model, const std::vector<StegoItem>& stego_set,
                                        std::uint64_t seed, double awgn_snr_db) {
  std::vector<EvalRecord> records;
  for (const auto& item : stego_set) {
    records.push_back(flag_record(item, Metric::extract_ok, extract(model, item.stego) == item.hidden));
  }
  for (std::size_t i = 0; i < stego_set.size(); ++i) {
    const auto& item = stego_set[i];
    const auto ok = [&](const AudioClip& attacked) { return extract(model, attacked) == item.hidden; };
    records.push_back(flag_record(item, Metric::attack_awgn_ok, ok(attack_awgn(item.stego, awgn_snr_db, derive_seed(seed, i)))));
    records.push_back(flag_record(item, Metric::attack_resample_ok, ok(attack_resample(item.stego))));
    records.push_back(flag_record(item, Metric::attack_lowpass_ok, ok(attack_lowpass(item.stego))));
    records.push_back(flag_record(item, Metric::attack_echo_ok, ok(attack_echo(item.stego))));
  }
  return records;
}

std::map<std::string, MetricSummary> summarize(const std::vector<EvalRecord>& records) {
  std::map<std::string, MetricSummary> out;
  for (const auto& r : records) {
    auto& s = out[std::string(metric_name(r.metric))];
    if (s.count == 0) {
      s.min = s.max = r.value;
    } else {
      s.min = std::min(s.min, r.value);
      s.max = std::max(s.max, r.value);
    }
    s.mean += r.value;
    ++s.count;
  }
  for (auto& [name, s] : out) s.mean /= static_cast<double>(s.count);
  return out;
}

std::map<std::string, double> success_rates(const std::vector<EvalRecord>& records) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    if (!r.success) continue;
    auto& a = acc[r.model + "/" + std::string(metric_name(r.metric))];
    a.first += *r.success ? 1.0 : 0.0;
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [k, a] : acc) out[k] = a.first / static_cast<double>(a.second);
  return out;
}

std::map<std::string, double> group_rates(const std::vector<EvalRecord>& records, Metric metric,
                                          const std::string& model) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    if (r.metric != metric || r.model != model || !r.success) continue;
    auto& a = acc[r.group];
    a.first += *r.success ? 1.0 : 0.0;
    ++a.second;
  }
  std::map<std::string, double> out;
  for (const auto& [k, a] : acc) out[k] = a.first / static_cast<double>(a.second);
  return out;
}

void write_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "carrier_id,group,hidden_text,metric,value,success\n";
  for (const auto& r : records) {
    const std::string id = r.model.empty() ? r.carrier_id : r.carrier_id + "@" + r.model;
    out << quote(id) << ',' << quote(r.group) << ',' << quote(r.hidden_text) << ',' << metric_name(r.metric) << ','
        << format_double(r.value) << ',' << (r.success ? (*r.success ? "true" : "false") : "") << '\n';
  }
}

std::vector<EvalRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "carrier_id,group,hidden_text,metric,value,success") {
    throw FormatError(path.string() + ": unexpected CSV header");
  }
  std::vector<EvalRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw FormatError(path.string() + ": expected 6 fields in '" + line + "'");
    EvalRecord r;
    r.carrier_id = f[0];
    if (const auto at = f[0].find('@'); at != std::string::npos) {
      r.carrier_id = f[0].substr(0, at);
      r.model = f[0].substr(at + 1);
    }
    r.group = f[1];
    r.hidden_text = f[2];
    try {
      r.metric = metric_from_name(f[3]);
      std::size_t used = 0;
      r.value = std::stod(f[4], &used);
      if (used != f[4].size()) throw std::invalid_argument(f[4]);
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ": bad row '" + line + "': " + e.what());
    }
    if (f[5] == "true") {
      r.success = true;
    } else if (f[5] == "false") {
      r.success = false;
    } else if (!f[5].empty()) {
      throw FormatError(path.string() + ": bad success flag '" + f[5] + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::ordered_json summary_json(const std::vector<EvalRecord>& records, const nlohmann::ordered_json& config) {
  nlohmann::ordered_json j;
  j["config"] = config;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [name, s] : summarize(records)) {
    metrics[name] = {{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"count", s.count}};
  }
  j["metrics"] = metrics;
  nlohmann::ordered_json rates = nlohmann::ordered_json::object();
  for (const auto& [key, rate] : success_rates(records)) rates[key] = rate;
  j["success_rates"] = rates;
  return j;
}

void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace advstego
