#include <doctest.h>

#include <fstream>

#include "advstego/corpus.hpp"
#include "advstego/error.hpp"
#include "advstego/harness.hpp"
#include "test_support.hpp"

using namespace advstego;

namespace {

// Tiny stego set: each carrier hides the text the model already hears, so
// embedding converges on the first step.
std::vector<StegoItem> trivial_set(std::size_t n) {
  const auto& model = testing::small_model().model;
  EmbedConfig cfg;
  cfg.max_iterations = 3;
  std::vector<StegoItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto clip = synth_utterance(i % 2 ? "tone" : "bell", 50 + i).clip;
    const auto hidden = extract(model, clip);
    auto r = embed(model, clip, hidden, cfg);
    out.push_back({"C" + std::to_string(i), group_name(i), hidden, clip, r.stego, r.report});
  }
  return out;
}

}  // namespace

TEST_CASE("metric names round trip") {
  for (Metric m : {Metric::capacity_cps, Metric::snr_db, Metric::max_delta, Metric::extract_ok, Metric::attack_awgn_ok,
                   Metric::attack_resample_ok, Metric::attack_lowpass_ok, Metric::attack_echo_ok,
                   Metric::cross_model_ok}) {
    CHECK(metric_from_name(metric_name(m)) == m);
  }
  CHECK(metric_name(Metric::capacity_cps) == "capacity_cps");
  CHECK_THROWS_AS(metric_from_name("pesq"), InvalidArgument);
}

TEST_CASE("group texts") {
  CHECK(kGroupTexts.front() == "be quiet");
  CHECK(kGroupTexts.back() == "see you at five pm");
  CHECK(group_name(0) == "G1");
  CHECK(group_name(9) == "G10");
  CHECK(group_text("G4") == "the key is one one nine");
  CHECK_THROWS_AS(group_text("G11"), InvalidArgument);
  const Alphabet a;
  for (auto t : kGroupTexts) CHECK_NOTHROW(a.encode(t));
}

TEST_CASE("capacity payload is 49 characters per second") {
  const std::string block = "hide hide hide hide hide hide hide hide hide hide";
  REQUIRE(block.size() == 49);
  CHECK(capacity_payload(1.0) == block);
  const auto three = capacity_payload(3.0);
  CHECK(three.size() == 147);
  CHECK(three == block + block + block);
  CHECK(capacity_payload(1.5).size() == 73);

  CHECK(drop_last_word("hide hide hide") == "hide hide");
  CHECK(drop_last_word("hidehide hi") == "hidehide");
  CHECK(drop_last_word("hide").empty());
  CHECK(drop_last_word(three).size() == 142);
}

TEST_CASE("synthetic carriers") {
  const auto a = make_carriers(12, 3.0, 5), b = make_carriers(12, 3.0, 5);
  REQUIRE(a.size() == 12);
  CHECK(a[0].id == "A00");
  CHECK(a[11].id == "A11");
  CHECK(a[0].group == "G1");
  CHECK(a[1].group == "G1");
  CHECK(a[2].group == "G2");
  CHECK(a[11].group == "G10");
  CHECK(make_carriers(20, 3.0, 5)[19].group == "G10");
  CHECK(carrier_group(5, 10) == "G6");
  CHECK_THROWS_AS(carrier_group(10, 10), InvalidArgument);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].clip.size() == 48000);
    CHECK(a[i].clip == b[i].clip);
  }
  CHECK_FALSE(a[0].clip == a[1].clip);
  CHECK_THROWS_AS(make_carriers(1, 0.2, 1), InvalidArgument);
}

TEST_CASE("imperceptibility rows and difference files") {
  auto set = trivial_set(2);
  set[1].stego = set[1].carrier;  // identity pair
  const auto dir = testing::tmp_dir("imperceptibility");
  const auto rec = eval_imperceptibility(set, dir);
  REQUIRE(rec.size() == 4);
  CHECK(rec[2].metric == Metric::snr_db);
  CHECK(rec[2].value == 99.0);
  CHECK(rec[3].metric == Metric::max_delta);
  CHECK(rec[3].value == 0.0);
  CHECK(rec[1].value == set[0].report.final_max_delta);

  std::ifstream f(dir / "C1.diff.tsv");
  std::string header, row;
  std::getline(f, header);
  CHECK(header == "index\tcarrier\tstego\tdelta");
  std::size_t rows = 0;
  while (std::getline(f, row)) ++rows;
  CHECK(rows == set[1].carrier.size());

  set[0].stego = AudioClip(std::vector<double>(10, 0.0), 16000);
  CHECK_THROWS_AS(eval_imperceptibility(set), ShapeError);
}

TEST_CASE("security and robustness tables") {
  const auto set = trivial_set(3);
  const auto& model = testing::small_model().model;
  const auto other = init_model(ModelArchitecture{.hidden = {8}}, 99);

  const auto sec = eval_security(model, {{"random", &other}}, set);
  REQUIRE(sec.size() == 6);
  CHECK(sec[0].model == "private");
  CHECK(sec[3].model == "random");
  const auto rates = success_rates(sec);
  CHECK(rates.at("private/cross_model_ok") == 1.0);
  CHECK_THROWS_AS(eval_security(model, {{"none", nullptr}}, set), InvalidArgument);

  const auto rob = eval_robustness(model, set);
  REQUIRE(rob.size() == 3 + 3 * 4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rob[i].metric == Metric::extract_ok);
  CHECK(rob[3].metric == Metric::attack_awgn_ok);
  CHECK(rob[6].metric == Metric::attack_echo_ok);
  CHECK(success_rates(rob).at("/extract_ok") == 1.0);
  CHECK(eval_robustness(model, set, 4).size() == rob.size());
}

TEST_CASE("capacity records the longest payload that embedded") {
  const auto& model = testing::small_model().model;
  std::vector<Carrier> carriers{{"K0", "G1", synth_utterance("abcdefgh", 3).clip}};  // 1.0 s
  EmbedConfig cfg;
  cfg.max_iterations = 40;
  std::vector<CapacityOutcome> outcomes;
  const auto rec = eval_capacity(model, carriers, cfg, &outcomes);
  REQUIRE(rec.size() == 1);
  REQUIRE(outcomes.size() == 1);
  CHECK(rec[0].metric == Metric::capacity_cps);
  CHECK(rec[0].value == doctest::Approx(static_cast<double>(rec[0].hidden_text.size())));
  CHECK(*rec[0].success == !rec[0].hidden_text.empty());
  CHECK(outcomes[0].length == rec[0].hidden_text.size());
  CHECK(outcomes[0].attempts >= 1);
  if (!rec[0].hidden_text.empty()) CHECK(capacity_payload(1.0).starts_with(rec[0].hidden_text));

  std::vector<Carrier> short_one{{"S", "G1", AudioClip(std::vector<double>(8000, 1.0), 16000)}};
  CHECK_THROWS_AS(eval_capacity(model, short_one, cfg), InvalidArgument);
}

TEST_CASE("CSV round trip and summaries") {
  std::vector<EvalRecord> rec{
      {"A00", "G1", "be quiet", Metric::snr_db, 31.25, {}, {}},
      {"A01", "G2", "sing, \"louder\"", Metric::snr_db, 28.75, {}, {}},
      {"A00", "G1", "be quiet", Metric::cross_model_ok, 1.0, true, "private"},
      {"A00", "G1", "be quiet", Metric::cross_model_ok, 0.0, false, "seed2"},
      {"A01", "G2", "sing", Metric::cross_model_ok, 1.0, true, "seed2"},
      {"A00", "G1", "x", Metric::capacity_cps, 0.1 + 0.2, false, {}},
  };
  const auto dir = testing::tmp_dir("csv");
  write_csv(rec, dir / "r.csv");
  const auto back = read_csv(dir / "r.csv");
  REQUIRE(back.size() == rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) {
    CHECK(back[i].carrier_id == rec[i].carrier_id);
    CHECK(back[i].group == rec[i].group);
    CHECK(back[i].hidden_text == rec[i].hidden_text);
    CHECK(back[i].metric == rec[i].metric);
    CHECK(back[i].value == rec[i].value);
    CHECK(back[i].success == rec[i].success);
    CHECK(back[i].model == rec[i].model);
  }

  const auto s = summarize(rec);
  CHECK(s.at("snr_db").mean == doctest::Approx(30.0));
  CHECK(s.at("snr_db").min == 28.75);
  CHECK(s.at("snr_db").max == 31.25);
  CHECK(s.at("snr_db").count == 2);
  const auto rates = success_rates(rec);
  CHECK(rates.at("private/cross_model_ok") == 1.0);
  CHECK(rates.at("seed2/cross_model_ok") == 0.5);
  const auto groups = group_rates(rec, Metric::cross_model_ok, "seed2");
  CHECK(groups.at("G1") == 0.0);
  CHECK(groups.at("G2") == 1.0);

  const auto j = summary_json(rec, {{"seed", 42}});
  CHECK(j["config"]["seed"] == 42);
  CHECK(j["metrics"]["snr_db"]["count"] == 2);
  CHECK(j["success_rates"]["seed2/cross_model_ok"] == 0.5);

  std::ofstream(dir / "bad.csv") << "nope\n";
  CHECK_THROWS_AS(read_csv(dir / "bad.csv"), FormatError);
  std::ofstream(dir / "bad2.csv") << "carrier_id,group,hidden_text,metric,value,success\na,b,c,snr_db,zz,\n";
  CHECK_THROWS_AS(read_csv(dir / "bad2.csv"), FormatError);
  CHECK_THROWS_AS(read_csv(dir / "missing.csv"), IoError);
}
