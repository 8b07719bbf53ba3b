#include "advstego/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>

#include "advstego/corpus.hpp"
#include "advstego/dsp.hpp"
#include "advstego/embedder.hpp"
#include "advstego/error.hpp"
#include "advstego/harness.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace advstego {

namespace {

struct EmbedOptions {
  EmbedConfig cfg;

  void add_to(CLI::App* app) {
    app->add_option("--iterations", cfg.max_iterations, "Iteration budget N")->capture_default_str();
    app->add_option("--tau0", cfg.tau0, "Initial L-inf bound (int16 scale)")->capture_default_str();
    app->add_option("--shrink", cfg.shrink, "Shrink factor applied on success")->capture_default_str();
    app->add_option("--attack-lr", cfg.learning_rate, "Adam learning rate for the perturbation")->capture_default_str();
    app->add_flag("--early-stop", cfg.early_stop, "Stop at the first verified success");
    app->add_flag("--reset-adam", cfg.reset_adam_on_shrink, "Reset Adam moments whenever tau shrinks");
  }

  ordered_json to_json() const {
    return {{"iterations", cfg.max_iterations}, {"tau0", cfg.tau0},
            {"shrink", cfg.shrink},             {"attack_lr", cfg.learning_rate},
            {"early_stop", cfg.early_stop},     {"reset_adam_on_shrink", cfg.reset_adam_on_shrink}};
  }
};

struct CarrierOptions {
  std::size_t count = 10;
  double seconds = 3.0;
  std::uint64_t seed = 2024;
  std::string manifest;

  void add_to(CLI::App* app, std::size_t default_count) {
    count = default_count;
    app->add_option("--carriers", count, "Number of synthetic carriers")->capture_default_str();
    app->add_option("--seconds", seconds, "Synthetic carrier duration")->capture_default_str();
    app->add_option("--carrier-seed", seed, "Seed for synthetic carriers")->capture_default_str();
    app->add_option("--carrier-manifest", manifest, "Use the WAVs of this manifest instead of synthetic carriers");
  }

  std::vector<Carrier> load() const {
    if (manifest.empty()) return make_carriers(count, seconds, seed);
    std::vector<Carrier> out;
    const auto entries = read_manifest(manifest);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      out.push_back({entries[i].wav.stem().string(), carrier_group(i, entries.size()), read_wav(entries[i].wav)});
    }
    return out;
  }

  ordered_json to_json() const {
    if (!manifest.empty()) return {{"manifest", fs::absolute(manifest).string()}};
    return {{"count", count}, {"seconds", seconds}, {"seed", seed}};
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// Directory outputs get "config.json" inside; file outputs a sibling
// "<name>.config.json".
void echo_config(const ordered_json& cfg, const fs::path& output, bool is_directory) {
  const fs::path target = is_directory ? output / "config.json" : fs::path(output.string() + ".config.json");
  if (is_directory) {
    fs::create_directories(output);
  } else {
    ensure_parent(output);
  }
  write_text(target, cfg.dump(2) + "\n");
}

CorpusSpec read_corpus_spec(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open corpus spec " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corpus spec " + path.string() + ": " + e.what());
  }
  CorpusSpec spec;
  for (const auto& [key, value] : j.items()) {
    if (key == "transcripts") {
      spec.transcripts = value.get<std::vector<Transcript>>();
    } else if (key == "repetitions") {
      spec.repetitions = value.get<int>();
    } else if (key == "random_count") {
      spec.random_count = value.get<int>();
    } else if (key == "min_length") {
      spec.min_length = value.get<int>();
    } else if (key == "max_length") {
      spec.max_length = value.get<int>();
    } else {
      throw FormatError("corpus spec: unknown key '" + key + "'");
    }
  }
  return spec;
}

ordered_json corpus_spec_json(const CorpusSpec& spec) {
  return {{"transcripts", spec.transcripts}, {"repetitions", spec.repetitions}, {"random_count", spec.random_count},
          {"min_length", spec.min_length},   {"max_length", spec.max_length}};
}

std::vector<ManifestEntry> write_split(const std::vector<Utterance>& utts, const fs::path& dir,
                                       const std::string& split) {
  fs::create_directories(dir / split);
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 0; i < utts.size(); ++i) {
    const std::string digits = std::to_string(i);
    const fs::path wav = dir / split / (std::string(5 - std::min<std::size_t>(5, digits.size()), '0') + digits + ".wav");
    write_wav(utts[i].clip, wav);
    entries.push_back({wav, utts[i].transcript});
  }
  write_manifest(entries, dir / (split + ".tsv"));
  return entries;
}

void write_stego_set(const std::vector<StegoItem>& set, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& item : set) {
    write_wav(item.stego, dir / (item.carrier_id + ".wav"));
  }
}

void write_results(const std::vector<EvalRecord>& records, const ordered_json& config, const fs::path& dir,
                   const std::string& name, std::ostream& out) {
  write_csv(records, dir / (name + ".csv"));
  const auto summary = summary_json(records, config);
  write_json(summary, dir / (name + ".json"));
  for (const auto& [key, rate] : success_rates(records)) out << key << " success " << rate << "\n";
  for (const auto& [metric, s] : summarize(records)) {
    out << metric << " mean " << s.mean << " min " << s.min << " max " << s.max << " (n=" << s.count << ")\n";
  }
}

std::vector<StegoItem> converged(std::vector<StegoItem> set, std::ostream& err) {
  std::vector<StegoItem> ok;
  for (auto& item : set) {
    if (item.report.success) {
      ok.push_back(std::move(item));
    } else {
      err << "warning: " << item.carrier_id << " did not converge: " << item.report.failure_reason << "\n";
    }
  }
  return ok;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hide text in audio as an adversarial perturbation against a private speech recognizer"};
  app.name("advstego");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "Synthesize a tone corpus (WAVs + train/heldout manifests)");
  fs::path gen_out;
  std::string gen_spec;
  std::uint64_t gen_seed = 42;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--spec", gen_spec, "Corpus spec JSON (transcripts, repetitions, random_count, min/max_length)");
  gen->add_option("--seed", gen_seed, "Corpus seed")->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train the acoustic model from a manifest");
  std::string tr_manifest, tr_heldout;
  fs::path tr_out;
  TrainConfig tr_cfg;
  tr->add_option("--manifest", tr_manifest, "Training manifest")->required();
  tr->add_option("--heldout", tr_heldout, "Held-out manifest for per-epoch exact match");
  tr->add_option("--out", tr_out, "Model file to write")->required();
  tr->add_option("--seed", tr_cfg.seed, "Initialization and shuffle seed")->capture_default_str();
  tr->add_option("--epochs", tr_cfg.epochs, "Training epochs")->capture_default_str();
  tr->add_option("--lr", tr_cfg.learning_rate, "Adam learning rate")->capture_default_str();
  tr->add_option("--hidden", tr_cfg.architecture.hidden, "Hidden layer sizes")->delimiter(',')->capture_default_str();
  tr->add_option("--context", tr_cfg.architecture.context_radius, "Context radius in frames")->capture_default_str();

  // embed
  auto* em = app.add_subcommand("embed", "Hide text in a carrier WAV");
  std::string em_model, em_carrier, em_text;
  fs::path em_out;
  EmbedOptions em_opts;
  em->add_option("--model", em_model, "Private model file")->required();
  em->add_option("--carrier", em_carrier, "Carrier WAV")->required();
  em->add_option("--text", em_text, "Hidden text")->required();
  em->add_option("--out", em_out, "Stego WAV to write (report goes to <out>.report.json)")->required();
  em_opts.add_to(em);

  // extract
  auto* ex = app.add_subcommand("extract", "Print the hidden text of a stego WAV");
  std::string ex_model, ex_input;
  ex->add_option("--model", ex_model, "Private model file")->required();
  ex->add_option("input", ex_input, "Stego WAV")->required();

  // attack
  auto* at = app.add_subcommand("attack", "Pass a WAV through a channel attack");
  std::string at_input, at_channel;
  fs::path at_out;
  double at_snr = 20.0;
  std::uint64_t at_seed = 1;
  at->add_option("--input", at_input, "Input WAV")->required();
  at->add_option("--channel", at_channel, "Channel")
      ->required()
      ->check(CLI::IsMember({"awgn", "resample", "lowpass", "echo"}));
  at->add_option("--out", at_out, "Output WAV")->required();
  at->add_option("--snr", at_snr, "AWGN signal-to-noise ratio in dB")->capture_default_str();
  at->add_option("--seed", at_seed, "AWGN seed")->capture_default_str();

  // evaluations
  struct EvalCommon {
    std::string model;
    fs::path out;
    EmbedOptions embed;
    CarrierOptions carriers;
  };
  auto add_eval = [&](const std::string& name, const std::string& help, EvalCommon& c, std::size_t carriers) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--model", c.model, "Private model file")->required();
    sub->add_option("--out", c.out, "Output directory")->required();
    c.embed.add_to(sub);
    c.carriers.add_to(sub, carriers);
    return sub;
  };
  EvalCommon cap_c, imp_c, sec_c, rob_c;
  auto* cap = add_eval("eval-capacity", "Hiding capacity of the 'hide' payload", cap_c, 10);
  auto* imp = add_eval("eval-imperceptibility", "SNR and max|delta| of the group stego set", imp_c, 20);
  auto* sec = add_eval("eval-security", "Extraction success of other models on the stego set", sec_c, 20);
  std::vector<std::string> sec_variants;
  sec->add_option("--variant", sec_variants, "Other model as name=path (repeatable)")->required();
  auto* rob = add_eval("eval-robustness", "Extraction success after channel attacks", rob_c, 20);
  double rob_snr = 20.0;
  std::uint64_t rob_seed = 1;
  rob->add_option("--awgn-snr", rob_snr, "AWGN attack SNR in dB")->capture_default_str();
  rob->add_option("--attack-seed", rob_seed, "AWGN attack seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const CorpusSpec spec = gen_spec.empty() ? CorpusSpec{} : read_corpus_spec(gen_spec);
      echo_config({{"command", "gen-corpus"}, {"seed", gen_seed}, {"spec", corpus_spec_json(spec)}}, gen_out, true);
      const Corpus corpus = gen_corpus(spec, gen_seed);
      write_split(corpus.train, gen_out, "train");
      write_split(corpus.heldout, gen_out, "heldout");
      out << "wrote " << corpus.train.size() << " training and " << corpus.heldout.size() << " held-out utterances to "
          << gen_out.string() << "\n";
      return kExitOk;
    }

    if (tr->parsed()) {
      echo_config({{"command", "train"},
                   {"manifest", fs::absolute(tr_manifest).string()},
                   {"heldout", tr_heldout.empty() ? "" : fs::absolute(tr_heldout).string()},
                   {"seed", tr_cfg.seed},
                   {"epochs", tr_cfg.epochs},
                   {"lr", tr_cfg.learning_rate},
                   {"hidden", tr_cfg.architecture.hidden},
                   {"context", tr_cfg.architecture.context_radius}},
                  tr_out, false);
      Corpus corpus;
      corpus.train = load_utterances(read_manifest(tr_manifest));
      if (!tr_heldout.empty()) corpus.heldout = load_utterances(read_manifest(tr_heldout));
      const auto result = train(corpus, tr_cfg, [&](const EpochStats& s) {
        out << "epoch " << s.epoch << " loss " << s.mean_loss;
        if (!corpus.heldout.empty()) out << " heldout " << s.heldout_exact_match;
        out << "\n";
      });
      ensure_parent(tr_out);
      save_model(result.model, tr_out);
      out << "saved " << tr_out.string() << "\n";
      return kExitOk;
    }

    if (em->parsed()) {
      em_opts.cfg.validate();
      echo_config({{"command", "embed"},
                   {"model", fs::absolute(em_model).string()},
                   {"carrier", fs::absolute(em_carrier).string()},
                   {"text", em_text},
                   {"embed", em_opts.to_json()}},
                  em_out, false);
      const AcousticModel model = load_model(em_model);
      const AudioClip carrier = read_wav(em_carrier);
      const auto result = embed(model, carrier, em_text, em_opts.cfg);
      write_text(em_out.string() + ".report.json", report_to_json(result.report, em_opts.cfg) + "\n");
      if (!result.report.success) {
        err << "embedding failed: " << result.report.failure_reason << "\n";
        return kExitFailure;
      }
      write_wav(result.stego, em_out);
      out << "embedded after " << result.report.success_iterations.back() << " iterations, max|delta| "
          << result.report.final_max_delta << ", SNR " << snr_db(carrier, result.stego) << " dB\n";
      return kExitOk;
    }

    if (ex->parsed()) {
      const AcousticModel model = load_model(ex_model);
      out << extract(model, read_wav(ex_input)) << "\n";
      return kExitOk;
    }

    if (at->parsed()) {
      echo_config({{"command", "attack"},
                   {"input", fs::absolute(at_input).string()},
                   {"channel", at_channel},
                   {"snr", at_snr},
                   {"seed", at_seed}},
                  at_out, false);
      const AudioClip clip = read_wav(at_input);
      AudioClip attacked = clip;
      if (at_channel == "awgn") {
        attacked = attack_awgn(clip, at_snr, at_seed);
      } else if (at_channel == "resample") {
        attacked = attack_resample(clip);
      } else if (at_channel == "lowpass") {
        attacked = attack_lowpass(clip);
      } else {
        attacked = attack_echo(clip);
      }
      write_wav(attacked, at_out, /*clamp=*/true);
      return kExitOk;
    }

    auto eval_config = [](const std::string& command, const EvalCommon& c) {
      return ordered_json{{"command", command},
                          {"model", fs::absolute(c.model).string()},
                          {"carriers", c.carriers.to_json()},
                          {"embed", c.embed.to_json()}};
    };

    if (cap->parsed()) {
      cap_c.embed.cfg.validate();
      const auto config = eval_config("eval-capacity", cap_c);
      echo_config(config, cap_c.out, true);
      const AcousticModel model = load_model(cap_c.model);
      std::vector<CapacityOutcome> outcomes;
      const auto records = eval_capacity(model, cap_c.carriers.load(), cap_c.embed.cfg, &outcomes);
      for (const auto& o : outcomes) {
        out << o.carrier_id << " " << o.capacity_cps << " cps (" << o.length << " chars, " << o.attempts
            << " attempts)\n";
      }
      write_results(records, config, cap_c.out, "capacity", out);
      return kExitOk;
    }

    if (imp->parsed()) {
      imp_c.embed.cfg.validate();
      const auto config = eval_config("eval-imperceptibility", imp_c);
      echo_config(config, imp_c.out, true);
      const AcousticModel model = load_model(imp_c.model);
      const auto set = converged(build_stego_set(model, imp_c.carriers.load(), imp_c.embed.cfg), err);
      write_stego_set(set, imp_c.out / "stego");
      write_results(eval_imperceptibility(set, imp_c.out / "plots"), config, imp_c.out, "imperceptibility", out);
      return kExitOk;
    }

    if (sec->parsed()) {
      sec_c.embed.cfg.validate();
      auto config = eval_config("eval-security", sec_c);
      std::vector<std::pair<std::string, std::string>> named;
      for (const auto& v : sec_variants) {
        const auto eq = v.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == v.size()) {
          err << "--variant expects name=path, got '" << v << "'\n";
          return kExitUsage;
        }
        named.emplace_back(v.substr(0, eq), v.substr(eq + 1));
        config["variants"][named.back().first] = fs::absolute(named.back().second).string();
      }
      echo_config(config, sec_c.out, true);
      const AcousticModel model = load_model(sec_c.model);
      std::vector<AcousticModel> others;
      others.reserve(named.size());
      for (const auto& [name, path] : named) others.push_back(load_model(path));
      std::vector<NamedModel> variants;
      for (std::size_t i = 0; i < named.size(); ++i) variants.push_back({named[i].first, &others[i]});
      const auto set = converged(build_stego_set(model, sec_c.carriers.load(), sec_c.embed.cfg), err);
      write_stego_set(set, sec_c.out / "stego");
      write_results(eval_security(model, variants, set), config, sec_c.out, "security", out);
      return kExitOk;
    }

    if (rob->parsed()) {
      rob_c.embed.cfg.validate();
      auto config = eval_config("eval-robustness", rob_c);
      config["awgn_snr"] = rob_snr;
      config["attack_seed"] = rob_seed;
      echo_config(config, rob_c.out, true);
      const AcousticModel model = load_model(rob_c.model);
      const auto set = converged(build_stego_set(model, rob_c.carriers.load(), rob_c.embed.cfg), err);
      write_stego_set(set, rob_c.out / "stego");
      write_results(eval_robustness(model, set, rob_seed, rob_snr), config, rob_c.out, "robustness", out);
      return kExitOk;
    }
  } catch (const InfeasibleTarget& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace advstego
