#include <doctest.h>

#include <cmath>
#include <sstream>

#include "datag/discourse.hpp"
#include "support/synth.hpp"

using namespace datag;

namespace {

Conversation make_conv(const std::string& id, const std::vector<std::pair<std::string, Speaker>>& turns) {
  Conversation c{id, {}};
  for (const auto& [label, spk] : turns) {
    Utterance u;
    u.conversation_id = id;
    u.index = c.utterances.size();
    u.speaker = spk;
    u.da_label = label;
    c.utterances.push_back(u);
  }
  return c;
}

std::vector<DaEvent> random_history(Rng& rng, std::size_t labels, std::size_t len) {
  std::vector<DaEvent> h;
  for (std::size_t i = 0; i < len; ++i)
    h.push_back({rng.uniform_index(labels), static_cast<Speaker>(rng.uniform_index(2))});
  return h;
}

// Conversations where speaker A and B favour different labels.
std::vector<Conversation> habit_corpus(Rng& rng, const TagSet& tags, std::size_t n, std::size_t len) {
  std::vector<Conversation> out;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::pair<std::string, Speaker>> turns;
    Speaker spk = Speaker::A;
    for (std::size_t i = 0; i < len; ++i) {
      if (rng.uniform01() < 0.6) spk = other_speaker(spk);
      const std::size_t half = tags.size() / 2;
      std::size_t d = rng.uniform01() < 0.85 ? rng.uniform_index(half) : half + rng.uniform_index(tags.size() - half);
      if (spk == Speaker::B) d = tags.size() - 1 - d;
      turns.emplace_back(tags.label(d), spk);
    }
    out.push_back(make_conv("c" + std::to_string(c), turns));
  }
  return symmetrize_speakers(out);
}

}  // namespace

TEST_CASE("event tokens follow the variant") {
  TagSet tags({"Q", "S"});
  auto conv = make_conv("x", {{"Q", Speaker::A}, {"S", Speaker::B}});
  std::vector<Conversation> convs{conv};
  auto joint = DiscourseGrammar::train(convs, tags, 2, GrammarVariant::U_and_T);
  CHECK(joint.event_token({0, Speaker::A}) == "Q\xC2\xB7" "A");
  const auto& v = joint.model()->vocabulary();
  CHECK(v.size() == 6);
  CHECK(v.find("S\xC2\xB7" "B") >= 0);
  const std::vector<std::string> ctx{"Q\xC2\xB7" "A"};
  CHECK(std::exp(joint.model()->cond_log_prob(ctx, "S\xC2\xB7" "B")) == doctest::Approx(0.5));
  auto plain = DiscourseGrammar::train(convs, tags, 2, GrammarVariant::U_only);
  CHECK(plain.event_token({1, Speaker::B}) == "S");
  CHECK(plain.model()->vocabulary().size() == 4);
  const std::vector<DaEvent> hist{{0, Speaker::A}};
  CHECK(joint.transition_log_prob(hist, {1, Speaker::B}) ==
        joint.model()->cond_log_prob(ctx, "S\xC2\xB7" "B"));

  Conversation unlabeled = conv;
  unlabeled.utterances[1].da_label.reset();
  std::vector<Conversation> bad{unlabeled};
  CHECK_THROWS_AS(DiscourseGrammar::train(bad, tags, 2, GrammarVariant::U_only), Error);
}

TEST_CASE("bigram learns a 30 percent follow-up rate") {
  const auto tags = TagSet::swbd_damsl();
  std::vector<Conversation> convs;
  for (int i = 0; i < 1000; ++i) {
    const std::string next = i % 10 < 3 ? "Yes-Answers" : (i % 10 < 6 ? "No-Answers" : "Statement");
    convs.push_back(make_conv("c" + std::to_string(i),
                              {{"Statement", Speaker::A}, {"Yes-No-Question", Speaker::A}, {next, Speaker::B}}));
  }
  auto g = DiscourseGrammar::train(symmetrize_speakers(convs), tags, 2, GrammarVariant::U_only);
  const std::vector<DaEvent> hist{{tags.index("Yes-No-Question"), Speaker::A}};
  const double p = std::exp(g.transition_log_prob(hist, {tags.index("Yes-Answers"), Speaker::B}));
  CHECK(p == doctest::Approx(0.30).epsilon(0.01));
}

TEST_CASE("conditionals are normalized for every variant") {
  Rng rng(3);
  const auto tags = synth::numbered_tagset(5);
  for (auto variant : {GrammarVariant::U_only, GrammarVariant::U_and_T, GrammarVariant::U_given_T}) {
    for (int order = 1; order <= 3; ++order) {
      auto g = synth::random_grammar(rng, tags, order, variant);
      for (int k = 0; k < 30; ++k) {
        auto h = random_history(rng, tags.size(), rng.uniform_index(4));
        for (Speaker s : {Speaker::A, Speaker::B}) {
          std::vector<double> row(tags.size());
          g.transition_row(h, s, row);
          double total = 0.0;
          for (std::size_t d = 0; d < tags.size(); ++d) {
            CHECK(row[d] == doctest::Approx(g.transition_log_prob(h, {d, s})).epsilon(1e-12));
            total += std::exp(row[d]);
          }
          if (variant == GrammarVariant::U_given_T) {
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(g.end_log_prob(h) == 0.0);
          } else if (variant == GrammarVariant::U_only && s == Speaker::A) {
            CHECK(total + std::exp(g.end_log_prob(h)) == doctest::Approx(1.0).epsilon(1e-9));
          }
        }
        if (variant == GrammarVariant::U_and_T) {
          std::vector<double> ra(tags.size()), rb(tags.size());
          g.transition_row(h, Speaker::A, ra);
          g.transition_row(h, Speaker::B, rb);
          double total = std::exp(g.end_log_prob(h));
          for (std::size_t d = 0; d < tags.size(); ++d) total += std::exp(ra[d]) + std::exp(rb[d]);
          CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
      }
    }
  }
}

TEST_CASE("speaker-given scores are joint scores minus a brute-force normalizer") {
  Rng rng(5);
  const auto tags = TagSet::swbd_damsl();
  auto convs = habit_corpus(rng, tags, 30, 25);
  auto joint = DiscourseGrammar::train(convs, tags, 3, GrammarVariant::U_and_T);
  auto given = DiscourseGrammar::from_model(
      std::make_shared<NGramModel>(*joint.model()), tags, GrammarVariant::U_given_T);
  for (int k = 0; k < 40; ++k) {
    auto h = random_history(rng, tags.size(), rng.uniform_index(3));
    const DaEvent cur{rng.uniform_index(tags.size()), static_cast<Speaker>(rng.uniform_index(2))};
    double norm = 0.0;
    for (std::size_t d = 0; d < tags.size(); ++d)
      norm += std::exp(joint.transition_log_prob(h, {d, cur.speaker}));
    CHECK(given.transition_log_prob(h, cur) ==
          doctest::Approx(joint.transition_log_prob(h, cur) - std::log(norm)).epsilon(1e-10));
  }
}

TEST_CASE("no grammar gives the label-count perplexities") {
  Rng rng(9);
  const auto tags = TagSet::swbd_damsl();
  auto convs = habit_corpus(rng, tags, 5, 20);
  CHECK(discourse_perplexity(DiscourseGrammar::none(tags, GrammarVariant::U_only), convs) ==
        doctest::Approx(42.0).epsilon(1e-12));
  CHECK(discourse_perplexity(DiscourseGrammar::none(tags, GrammarVariant::U_and_T), convs) ==
        doctest::Approx(84.0).epsilon(1e-12));
  CHECK(discourse_perplexity(DiscourseGrammar::none(tags, GrammarVariant::U_given_T), convs) ==
        doctest::Approx(42.0).epsilon(1e-12));
}

TEST_CASE("knowing the speaker never hurts") {
  Rng rng(12);
  const auto tags = synth::numbered_tagset(8);
  auto train = habit_corpus(rng, tags, 60, 30);
  auto test = habit_corpus(rng, tags, 20, 30);
  for (int order = 1; order <= 3; ++order) {
    auto joint = DiscourseGrammar::train(train, tags, order, GrammarVariant::U_and_T);
    auto given = DiscourseGrammar::train(train, tags, order, GrammarVariant::U_given_T);
    auto plain = DiscourseGrammar::train(train, tags, order, GrammarVariant::U_only);
    CHECK(discourse_perplexity(given, test) <= discourse_perplexity(joint, test));
    if (order >= 2) CHECK(discourse_perplexity(given, test) < discourse_perplexity(plain, test));
  }
}

TEST_CASE("training-set perplexity does not grow with order") {
  Rng rng(14);
  const auto tags = synth::numbered_tagset(6);
  auto src = synth::make_markov_source(rng, 6);
  auto convs = symmetrize_speakers(synth::sample_markov(src, tags, rng, 40, 40));
  for (auto variant : {GrammarVariant::U_only, GrammarVariant::U_and_T, GrammarVariant::U_given_T}) {
    double prev = INFINITY;
    for (int order = 1; order <= 4; ++order) {
      const double pp = discourse_perplexity(DiscourseGrammar::train(convs, tags, order, variant), convs);
      CHECK(pp <= prev + 1e-9);
      prev = pp;
    }
  }
}

TEST_CASE("grammar serialization round-trips") {
  Rng rng(15);
  const auto tags = synth::numbered_tagset(4);
  for (auto variant : {GrammarVariant::U_only, GrammarVariant::U_and_T, GrammarVariant::U_given_T}) {
    auto g = synth::random_grammar(rng, tags, 3, variant);
    std::ostringstream out;
    g.write(out);
    std::istringstream in(out.str());
    auto back = DiscourseGrammar::read(in, tags);
    CHECK(back.variant() == variant);
    CHECK(back.order() == 3);
    for (int k = 0; k < 50; ++k) {
      auto h = random_history(rng, tags.size(), rng.uniform_index(4));
      const DaEvent cur{rng.uniform_index(tags.size()), static_cast<Speaker>(rng.uniform_index(2))};
      CHECK(back.transition_log_prob(h, cur) == doctest::Approx(g.transition_log_prob(h, cur)).epsilon(1e-10));
    }
    auto none = DiscourseGrammar::none(tags, variant);
    std::ostringstream nout;
    none.write(nout);
    std::istringstream nin(nout.str());
    auto nback = DiscourseGrammar::read(nin, tags);
    CHECK(nback.order() == 0);
    CHECK(nback.variant() == variant);
  }
  std::istringstream bad("\\data\\\n");
  CHECK_THROWS_AS(DiscourseGrammar::read(bad, tags), ParseError);
  CHECK(parse_variant(variant_name(GrammarVariant::U_given_T)) == GrammarVariant::U_given_T);
}
