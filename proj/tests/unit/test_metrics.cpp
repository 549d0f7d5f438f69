#include <doctest.h>

#include <memory>
#include <sstream>

#include "datag/metrics.hpp"
#include "support/synth.hpp"

using namespace datag;

namespace {

// Questions and Statements; `word_cue` and `f0_cue` control how much each
// source separates them.
std::vector<Utterance> qs_data(Rng& rng, std::size_t n, double word_cue, double f0_cue) {
  auto schema = std::make_shared<FeatureSchema>();
  schema->names = {"final_f0", "dur"};
  schema->kinds = {FeatureKind::continuous, FeatureKind::continuous};
  schema->levels = {{}, {}};
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool q = i % 3 == 0;
    Utterance u;
    u.conversation_id = "q";
    u.index = i;
    u.da_label = q ? "Question" : "Statement";
    const std::size_t len = 2 + rng.uniform_index(4);
    for (std::size_t k = 0; k < len; ++k) {
      std::string w = "w" + std::to_string(rng.uniform_index(8));
      if (rng.uniform01() < word_cue) w = q ? "qq" + std::to_string(rng.uniform_index(3)) : "ss" + std::to_string(rng.uniform_index(3));
      u.words.push_back(w);
    }
    u.prosody = ProsodicFeatureVector(
        schema, {synth::normal(rng, q ? f0_cue : -f0_cue, 1.0), synth::normal(rng, 0.0, 1.0)});
    out.push_back(std::move(u));
  }
  return out;
}

}  // namespace

TEST_CASE("accuracy identities") {
  const TagSet tags({"S", "B", "Q"});
  const std::vector<std::size_t> ref{0, 0, 1, 2, 0, 1, 2, 2, 0, 1};
  auto same = tagging_accuracy(ref, ref, tags);
  CHECK(same.accuracy == 1.0);
  const std::vector<std::size_t> pred{0, 1, 1, 2, 0, 0, 2, 1, 0, 1};
  auto r = tagging_accuracy(pred, ref, tags);
  std::size_t diag = 0;
  for (std::size_t d = 0; d < 3; ++d) {
    diag += r.confusion[d][d];
    std::size_t row = 0;
    for (auto x : r.confusion[d]) row += x;
    CHECK(row == r.reference_count(d));
  }
  CHECK(r.correct == diag);
  CHECK(r.accuracy == doctest::Approx(static_cast<double>(diag) / 10.0));
  CHECK(*r.precision(1) == doctest::Approx(2.0 / 4.0));
  CHECK(*r.recall(1) == doctest::Approx(2.0 / 3.0));

  const std::vector<std::size_t> never{0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  CHECK_FALSE(tagging_accuracy(never, ref, tags).precision(2).has_value());
  const std::vector<std::size_t> shorter{0, 1};
  CHECK_THROWS_AS(tagging_accuracy(shorter, ref, tags), Error);

  std::ostringstream tsv, text;
  write_report_tsv(tsv, r);
  write_report_text(text, r);
  CHECK(tsv.str().find("S\t") != std::string::npos);
  CHECK(!text.str().empty());
}

TEST_CASE("always predicting the majority label scores the chance rate") {
  const auto tags = TagSet::swbd_damsl();
  std::vector<std::size_t> ref;
  for (int i = 0; i < 100; ++i) ref.push_back(i < 35 ? 0 : 1 + static_cast<std::size_t>(i % 20));
  const std::vector<std::size_t> pred(100, 0);
  auto r = tagging_accuracy(pred, ref, tags);
  CHECK(r.accuracy == doctest::Approx(0.35));
  CHECK(r.chance == doctest::Approx(0.35));
  CHECK(r.chance_label == "Statement");

  const std::vector<std::vector<std::size_t>> nested_ref{{0, 1}, {2}}, nested_pred{{0, 0}, {2}};
  CHECK(tagging_accuracy(nested_pred, nested_ref, tags).accuracy == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("prosody alone separates a prosodic contrast") {
  Rng rng(1);
  auto data = qs_data(rng, 900, 0.0, 1.5);
  auto res = focused_binary_task(data, "Question", "Statement");
  CHECK(res.train_size + res.test_size == 600);
  CHECK(*res.accuracy_of(BinaryClassifier::prosody) > 0.75);
  CHECK(std::abs(*res.accuracy_of(BinaryClassifier::words) - 0.5) < 0.1);
  std::ostringstream out;
  write_binary_task(out, res);
  CHECK(out.str().find("prosody") != std::string::npos);
  CHECK(focused_binary_task(data, "Question", "Statement").accuracy == res.accuracy);
}

TEST_CASE("combining independent cues helps on average") {
  double words = 0.0, prosody = 0.0, combined = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    auto data = qs_data(rng, 600, 0.15, 0.6);
    BinaryTaskConfig cfg;
    cfg.seed = seed;
    cfg.tree.min_leaf = 10;
    auto res = focused_binary_task(data, "Question", "Statement", cfg);
    words += *res.accuracy_of(BinaryClassifier::words);
    prosody += *res.accuracy_of(BinaryClassifier::prosody);
    combined += *res.accuracy_of(BinaryClassifier::combined);
  }
  CHECK(combined >= std::max(words, prosody));
}

TEST_CASE("an absent class is an error") {
  Rng rng(2);
  auto data = qs_data(rng, 60, 0.5, 1.0);
  CHECK_THROWS_AS(focused_binary_task(data, "Question", "Backchannel"), Error);
}
