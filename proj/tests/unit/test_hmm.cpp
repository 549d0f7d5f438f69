#include <doctest.h>

#include <cmath>

#include "datag/hmm.hpp"
#include "support/synth.hpp"

using namespace datag;

namespace {

// Two labels S, Q with end probability 0.5 after every label.
DiscourseGrammar fixture_grammar() {
  const double e = 0.5;
  return synth::bigram_grammar(TagSet({"S", "Q"}), {0.5, 0.5},
                               {{0.8 * (1 - e), 0.2 * (1 - e)}, {0.6 * (1 - e), 0.4 * (1 - e)}}, {e, e});
}

LikelihoodTable fixture_table() {
  LikelihoodTable t;
  t.conversation_id = "fx";
  t.speakers = {Speaker::A, Speaker::B};
  t.log_likelihoods = {{std::log(0.1), std::log(0.3)}, {std::log(0.4), std::log(0.1)}};
  return t;
}

double row_sum(const std::vector<double>& row) {
  double s = 0.0;
  for (double x : row) s += x;
  return s;
}

}  // namespace

TEST_CASE("two-label fixture by hand") {
  auto g = fixture_grammar();
  auto t = fixture_table();
  auto v = viterbi_decode(g, t);
  CHECK(v.labels == std::vector<std::size_t>{1, 0});
  CHECK(v.log_score - std::log(0.5 * 0.5) == doctest::Approx(std::log(0.036)).epsilon(1e-12));
  auto post = forward_backward(g, t);
  CHECK(post[0][1] == doctest::Approx(0.042 / 0.059).epsilon(1e-12));
  CHECK(post[1][0] == doctest::Approx((0.016 + 0.036) / 0.059).epsilon(1e-12));
  auto bf = brute_force_decode(g, t);
  CHECK(bf.labels == v.labels);
  CHECK(bf.log_score == doctest::Approx(v.log_score).epsilon(1e-12));
}

TEST_CASE("uniform grammar decodes each utterance on its own") {
  Rng rng(1);
  const auto tags = synth::numbered_tagset(5);
  auto g = DiscourseGrammar::none(tags, GrammarVariant::U_only);
  auto t = synth::random_table(rng, 12, 5);
  std::vector<std::size_t> expect;
  for (const auto& row : t.log_likelihoods)
    expect.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  CHECK(viterbi_decode(g, t).labels == expect);
  CHECK(argmax_labels(forward_backward(g, t)) == expect);
}

TEST_CASE("single utterance reduces to normalized prior times likelihood") {
  Rng rng(2);
  const auto tags = synth::numbered_tagset(4);
  auto g = synth::random_grammar(rng, tags, 2, GrammarVariant::U_and_T);
  auto t = synth::random_table(rng, 1, 4);
  std::vector<double> joint(4);
  double z = 0.0;
  for (std::size_t d = 0; d < 4; ++d) {
    const DaEvent cur{d, t.speakers[0]};
    const std::vector<DaEvent> one{cur};
    joint[d] = std::exp(g.transition_log_prob({}, cur) + g.end_log_prob(one) + t.log_likelihoods[0][d]);
    z += joint[d];
  }
  auto post = forward_backward(g, t);
  for (std::size_t d = 0; d < 4; ++d) CHECK(post[0][d] == doctest::Approx(joint[d] / z).epsilon(1e-12));
}

TEST_CASE("with a unigram grammar both decoders agree") {
  Rng rng(3);
  const auto tags = synth::numbered_tagset(4);
  for (int k = 0; k < 50; ++k) {
    auto g = synth::random_grammar(rng, tags, 1, GrammarVariant::U_only);
    auto t = synth::random_table(rng, 1 + rng.uniform_index(10), 4);
    CHECK(argmax_labels(forward_backward(g, t)) == viterbi_decode(g, t).labels);
  }
}

TEST_CASE("dynamic programming matches exhaustive enumeration") {
  Rng rng(4);
  for (int k = 0; k < 120; ++k) {
    const std::size_t d = 2 + rng.uniform_index(3);
    const auto tags = synth::numbered_tagset(d);
    const int order = 1 + static_cast<int>(rng.uniform_index(3));
    const auto variant = static_cast<GrammarVariant>(rng.uniform_index(3));
    auto g = synth::random_grammar(rng, tags, order, variant);
    auto t = synth::random_table(rng, 1 + rng.uniform_index(7), d);
    auto bf = brute_force_decode(g, t);
    auto v = viterbi_decode(g, t);
    CHECK(v.labels == bf.labels);
    CHECK(v.log_score == doctest::Approx(bf.log_score).epsilon(1e-9));
    auto post = forward_backward(g, t);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(row_sum(post[i]) == doctest::Approx(1.0).epsilon(1e-9));
      for (std::size_t u = 0; u < d; ++u) CHECK(std::abs(post[i][u] - bf.posteriors[i][u]) < 1e-9);
    }
  }
  auto g = synth::random_grammar(rng, synth::numbered_tagset(4), 2, GrammarVariant::U_only);
  auto big = synth::random_table(rng, 11, 4);
  CHECK_THROWS_AS(brute_force_decode(g, big), Error);
}

TEST_CASE("a per-utterance constant does not change decoding") {
  Rng rng(5);
  const auto tags = synth::numbered_tagset(4);
  auto g = synth::random_grammar(rng, tags, 3, GrammarVariant::U_given_T);
  auto t = synth::random_table(rng, 9, 4);
  auto shifted = t;
  for (auto& row : shifted.log_likelihoods) {
    const double c = 50.0 * (rng.uniform01() - 0.5);
    for (auto& x : row) x += c;
  }
  CHECK(viterbi_decode(g, t).labels == viterbi_decode(g, shifted).labels);
  auto a = forward_backward(g, t);
  auto b = forward_backward(g, shifted);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t u = 0; u < 4; ++u) CHECK(a[i][u] == doctest::Approx(b[i][u]).epsilon(1e-9));
}

TEST_CASE("long conversations do not underflow") {
  Rng rng(6);
  const auto tags = synth::numbered_tagset(4);
  auto g = synth::random_grammar(rng, tags, 3, GrammarVariant::U_and_T);
  auto t = synth::random_table(rng, 10000, 4);
  for (auto& row : t.log_likelihoods)
    for (auto& x : row) x -= 200.0;
  auto v = viterbi_decode(g, t);
  CHECK(std::isfinite(v.log_score));
  CHECK(v.labels.size() == 10000);
  auto post = forward_backward(g, t);
  bool ok = true;
  for (const auto& row : post) ok = ok && std::abs(row_sum(row) - 1.0) < 1e-9 && std::isfinite(row[0]);
  CHECK(ok);
}

TEST_CASE("online posteriors use the past only") {
  Rng rng(7);
  const auto tags = synth::numbered_tagset(3);
  auto g = synth::random_grammar(rng, tags, 2, GrammarVariant::U_given_T);
  auto t = synth::random_table(rng, 6, 3);
  auto off = forward_backward(g, t);
  auto on = forward_backward(g, t, PosteriorMode::online);
  for (std::size_t u = 0; u < 3; ++u) CHECK(on.back()[u] == doctest::Approx(off.back()[u]).epsilon(1e-12));
  // The first online row only sees the first utterance.
  auto first = t;
  first.speakers.resize(1);
  first.log_likelihoods.resize(1);
  auto alone = forward_backward(g, first);
  for (std::size_t u = 0; u < 3; ++u) CHECK(on[0][u] == doctest::Approx(alone[0][u]).epsilon(1e-12));
}

TEST_CASE("combining word and prosody likelihoods") {
  LikelihoodTable w;
  w.conversation_id = "c";
  w.speakers = {Speaker::A};
  w.log_likelihoods = {{-1.0, -3.0}};
  auto p = w;
  p.log_likelihoods = {{-2.0, -0.5}};
  auto plain = combine_likelihoods(w, &p, {1.0, 1.0});
  CHECK(plain.log_likelihoods[0][0] == -3.0);
  CHECK(plain.log_likelihoods[0][1] == -3.5);
  auto scaled = combine_likelihoods(w, &p, {0.5, 2.0});
  CHECK(scaled.log_likelihoods[0][0] == doctest::Approx(-4.0));
  auto words_only = combine_likelihoods(w, &p, {0.0, 3.0});
  CHECK(words_only.log_likelihoods[0][1] == -9.0);
  CHECK(combine_likelihoods(w, nullptr, {1.0, 2.0}).log_likelihoods[0][0] == -2.0);
  auto bad = p;
  bad.log_likelihoods.push_back({0.0, 0.0});
  bad.speakers.push_back(Speaker::B);
  CHECK_THROWS_AS(combine_likelihoods(w, &bad, {1.0, 1.0}), Error);
  CHECK_THROWS_AS(combine_likelihoods(w, &p, {-1.0, 1.0}), Error);
  CHECK_THROWS_AS(combine_likelihoods(w, &p, {1.0, 0.0}), Error);
}

TEST_CASE("a column with no admissible label is rejected") {
  auto g = fixture_grammar();
  auto t = fixture_table();
  t.log_likelihoods[1] = {kNegInf, kNegInf};
  CHECK_THROWS_AS(viterbi_decode(g, t), Error);
  CHECK_THROWS_AS(forward_backward(g, t), Error);
  t.log_likelihoods[1] = {NAN, 0.0};
  CHECK_THROWS_AS(t.validate(2), Error);
}

TEST_CASE("weight tuning breaks ties toward small weights") {
  Rng rng(8);
  const auto tags = synth::numbered_tagset(3);
  auto g = DiscourseGrammar::none(tags, GrammarVariant::U_only);
  std::vector<TuningItem> items;
  for (int c = 0; c < 6; ++c) {
    TuningItem it;
    it.words = synth::random_table(rng, 8, 3, "c" + std::to_string(c));
    it.prosody = it.words;
    for (auto& row : it.prosody->log_likelihoods)
      for (auto& x : row) x = -1.0;
    for (std::size_t i = 0; i < 8; ++i) it.labels.push_back(rng.uniform_index(3));
    items.push_back(std::move(it));
  }
  std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
  auto best = grid_search_weights(g, items, all, WeightGrid{});
  CHECK(best.weights.alpha == 0.0);
  CHECK(best.weights.beta == doctest::Approx(0.1));
  const auto flat = evaluate_weights(g, items, all, {0.0, 1.7});
  CHECK(flat.correct == best.correct);

  auto jk = tune_alpha_beta(g, items, jackknife_indices(items.size(), 3));
  CHECK(jk.total() == 48);
  CHECK(jk.predictions.size() == items.size());
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> empty{{}, all};
  CHECK_THROWS_AS(tune_alpha_beta(g, items, empty), Error);

  WeightGrid grid;
  CHECK(grid.alphas().size() == 21);
  CHECK(grid.betas().size() == 20);
  CHECK(grid.betas().back() == doctest::Approx(2.0));
}

TEST_CASE("informative prosody is picked up by tuning") {
  Rng rng(9);
  const auto tags = synth::numbered_tagset(3);
  auto g = DiscourseGrammar::none(tags, GrammarVariant::U_only);
  std::vector<TuningItem> items;
  for (int c = 0; c < 10; ++c) {
    TuningItem it;
    it.words = synth::random_table(rng, 20, 3, "c" + std::to_string(c));
    it.prosody = it.words;
    for (std::size_t i = 0; i < 20; ++i) {
      const std::size_t y = rng.uniform_index(3);
      it.labels.push_back(y);
      it.words.log_likelihoods[i][y] += 1.0;
      for (std::size_t d = 0; d < 3; ++d) it.prosody->log_likelihoods[i][d] = d == y ? 0.0 : -1.0 - rng.uniform01();
      if (rng.uniform01() < 0.3) it.prosody->log_likelihoods[i] = {0.0, 0.0, 0.0};
    }
    items.push_back(std::move(it));
  }
  auto halves = jackknife_indices(items.size(), 1);
  auto jk = tune_alpha_beta(g, items, halves);
  WeightGrid words_only;
  words_only.alpha_max = 0.0;
  auto base = tune_alpha_beta(g, items, halves, words_only);
  CHECK(jk.correct() >= base.correct());
  CHECK(jk.tuned[0].weights.alpha > 0.0);
}
