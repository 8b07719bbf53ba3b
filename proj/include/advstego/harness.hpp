#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "advstego/audio_io.hpp"
#include "advstego/embedder.hpp"
#include "advstego/nnet.hpp"

namespace advstego {

enum class Metric {
  capacity_cps,
  snr_db,
  max_delta,
  extract_ok,
  attack_awgn_ok,
  attack_resample_ok,
  attack_lowpass_ok,
  attack_echo_ok,
  cross_model_ok,
};

std::string_view metric_name(Metric m);
/// Throws InvalidArgument for unknown names.
Metric metric_from_name(std::string_view name);

/// One cell of a results table.
struct EvalRecord {
  std::string carrier_id;
  std::string group;
  Transcript hidden_text;
  Metric metric = Metric::extract_ok;
  double value = 0.0;
  std::optional<bool> success;
  /// Model that produced the row, for per-model tables. Written into the
  /// CSV as "<carrier_id>@<model>".
  std::string model;
};

/// The ten hidden sentences used for groups G1..G10.
inline constexpr std::array<std::string_view, 10> kGroupTexts = {
    "be quiet",        "sing louder",           "close the door", "the key is one one nine",
    "call the police", "happy birthday to you", "be careful",     "bob is the spy",
    "help me",         "see you at five pm"};

std::string group_name(std::size_t index);  // "G1".."G10"
/// Group of carrier `index` out of `count`: contiguous blocks, so with 20
/// carriers A00-A01 are G1, A02-A03 are G2, and so on.
std::string carrier_group(std::size_t index, std::size_t count);
/// The hidden sentence of a group name; throws InvalidArgument if unknown.
std::string_view group_text(const std::string& group);

struct Carrier {
  std::string id;
  std::string group;
  AudioClip clip;
};

struct StegoItem {
  std::string carrier_id;
  std::string group;
  Transcript hidden;
  AudioClip carrier;
  AudioClip stego;
  EmbedReport report;
};

/// Synthetic carriers of `seconds` duration: tone utterances of random text.
std::vector<Carrier> make_carriers(std::size_t count, double seconds, std::uint64_t seed);

/// Embeds each carrier's group sentence into it.
std::vector<StegoItem> build_stego_set(const AcousticModel& model, const std::vector<Carrier>& carriers,
                                       const EmbedConfig& cfg);

/// The 49-character block "hide hide ... hide" (ten words) tiled to the
/// carrier duration: floor(49 * seconds) characters.
Transcript capacity_payload(double seconds);
/// Drops the trailing word (and its separator); empty when one word is left.
Transcript drop_last_word(const Transcript& payload);

struct CapacityOutcome {
  std::string carrier_id;
  std::size_t length = 0;      // characters in the payload that finally embedded
  std::size_t attempts = 0;
  double capacity_cps = 0.0;
};

std::vector<EvalRecord> eval_capacity(const AcousticModel& model, const std::vector<Carrier>& carriers,
                                      const EmbedConfig& cfg, std::vector<CapacityOutcome>* outcomes = nullptr);

/// snr_db and max_delta per pair; when `plot_dir` is set also writes one
/// "<carrier_id>.diff.tsv" file per pair (index, carrier, stego, delta).
std::vector<EvalRecord> eval_imperceptibility(const std::vector<StegoItem>& pairs,
                                              const std::optional<std::filesystem::path>& plot_dir = {});

struct NamedModel {
  std::string name;
  const AcousticModel* model = nullptr;
};

/// cross_model_ok rows for the private model (named "private") and every variant.
std::vector<EvalRecord> eval_security(const AcousticModel& private_model, const std::vector<NamedModel>& variants,
                                      const std::vector<StegoItem>& stego_set);

/// Identity-channel extract_ok rows first, then one row per item for each
/// of the four channel attacks.
std::vector<EvalRecord> eval_robustness(const AcousticModel& model, const std::vector<StegoItem>& stego_set,
                                        std::uint64_t seed = 1, double awgn_snr_db = 20.0);

struct MetricSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

std::map<std::string, MetricSummary> summarize(const std::vector<EvalRecord>& records);
/// Mean success per (model, metric) pair; the key is "<model>/<metric>".
std::map<std::string, double> success_rates(const std::vector<EvalRecord>& records);
/// Mean success per group for one model and metric.
std::map<std::string, double> group_rates(const std::vector<EvalRecord>& records, Metric metric,
                                          const std::string& model = {});

void write_csv(const std::vector<EvalRecord>& records, const std::filesystem::path& path);
std::vector<EvalRecord> read_csv(const std::filesystem::path& path);
/// Per-metric mean/min/max plus the echoed configuration.
nlohmann::ordered_json summary_json(const std::vector<EvalRecord>& records, const nlohmann::ordered_json& config);
void write_json(const nlohmann::ordered_json& j, const std::filesystem::path& path);

}  // namespace advstego
