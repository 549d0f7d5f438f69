// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "datag/da_models.hpp"
#include "datag/discourse.hpp"
#include "datag/hmm.hpp"
#include "datag/ngram.hpp"
#include "datag/rescoring.hpp"
#include "datag/tree.hpp"
#include "support/synth.hpp"

using namespace datag;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::vector<DaEvent> random_history(Rng& rng, std::size_t labels, std::size_t len) {
  std::vector<DaEvent> h;
  for (std::size_t i = 0; i < len; ++i)
    h.push_back({rng.uniform_index(labels), static_cast<Speaker>(rng.uniform_index(2))});
  return h;
}

std::vector<std::vector<std::string>> random_sentences(Rng& rng, std::size_t vocab, std::size_t n) {
  std::vector<std::vector<std::string>> out(n);
  for (auto& s : out) {
    for (std::size_t len = 1 + rng.uniform_index(7); len > 0; --len) {
      const std::size_t k = rng.uniform_index(vocab);
      s.push_back("t" + std::to_string(rng.uniform_index(k + 1)));
    }
  }
  return out;
}

std::vector<std::string> token_list(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("t" + std::to_string(i));
  return v;
}

// ---------------------------------------------------------------------------

Outcome decoder_oracle() {
  Rng rng(101);
  std::size_t bad_seq = 0, bad_score = 0, bad_post = 0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t d = 2 + rng.uniform_index(3);
    const auto tags = synth::numbered_tagset(d);
    const int order = 1 + static_cast<int>(rng.uniform_index(3));
    auto g = synth::random_grammar(rng, tags, order, static_cast<GrammarVariant>(rng.uniform_index(3)));
    auto t = synth::random_table(rng, 1 + rng.uniform_index(8), d);
    auto bf = brute_force_decode(g, t);
    auto v = viterbi_decode(g, t);
    auto fb = forward_backward(g, t);
    bad_seq += v.labels != bf.labels;
    const double ds = std::abs(v.log_score - bf.log_score);
    bad_score += ds > 1e-9;
    worst = std::max(worst, ds);
    for (std::size_t i = 0; i < t.size(); ++i) {
      for (std::size_t u = 0; u < d; ++u) {
        const double dp = std::abs(fb[i][u] - bf.posteriors[i][u]);
        worst = std::max(worst, dp);
        bad_post += dp > 1e-9;
      }
    }
  }
  Outcome o;
  o.pass = bad_seq == 0 && bad_score == 0 && bad_post == 0;
  o.detail = fmt("200 instances, %g sequence / %g score / %g posterior mismatches, max deviation %.2e", double(bad_seq),
                 double(bad_score), double(bad_post), worst);
  return o;
}

Outcome normalization_suite() {
  Rng rng(202);
  std::size_t cases = 0, bad = 0;
  double worst = 0.0;
  auto check = [&](double total, double tol) {
    ++cases;
    const double dev = std::abs(total - 1.0);
    worst = std::max(worst, dev);
    bad += dev > tol;
  };

  // Trained n-gram contexts, stored and random.
  for (int k = 0; k < 60; ++k) {
    const std::size_t nv = 3 + rng.uniform_index(8);
    const int order = 1 + static_cast<int>(rng.uniform_index(4));
    NGramOptions opt{rng.uniform_index(2) == 1, rng.uniform_index(2) == 1};
    auto m = NGramModel::train(random_sentences(rng, nv, 5 + rng.uniform_index(40)), order, token_list(nv), opt);
    const auto ids = m.vocabulary().predictable_ids();
    auto mass = [&](std::span<const int> ctx) {
      double s = 0.0;
      for (int id : ids) s += std::exp(m.cond_log_prob_ids(ctx, id));
      return s;
    };
    for (const auto& ctx : m.stored_contexts()) check(mass(ctx), 1e-9);
    for (int j = 0; j < 10; ++j) {
      std::vector<int> ctx;
      for (int i = 0; i + 1 < order; ++i) ctx.push_back(static_cast<int>(rng.uniform_index(m.vocabulary().size())));
      check(mass(ctx), 1e-9);
    }
  }

  // Discourse conditionals over the full event space of each variant.
  for (int k = 0; k < 60; ++k) {
    const auto tags = synth::numbered_tagset(2 + rng.uniform_index(5));
    const auto variant = static_cast<GrammarVariant>(rng.uniform_index(3));
    auto g = synth::random_grammar(rng, tags, 1 + static_cast<int>(rng.uniform_index(3)), variant);
    for (int j = 0; j < 10; ++j) {
      auto h = random_history(rng, tags.size(), rng.uniform_index(4));
      std::vector<double> ra(tags.size()), rb(tags.size());
      g.transition_row(h, Speaker::A, ra);
      g.transition_row(h, Speaker::B, rb);
      double sa = 0.0, sb = 0.0;
      for (std::size_t d = 0; d < tags.size(); ++d) {
        sa += std::exp(ra[d]);
        sb += std::exp(rb[d]);
      }
      const double end = std::exp(g.end_log_prob(h));
      switch (variant) {
        case GrammarVariant::U_only: check(sa + end, 1e-6); break;
        case GrammarVariant::U_and_T: check(sa + sb + end, 1e-6); break;
        case GrammarVariant::U_given_T:
          check(sa, 1e-6);
          check(sb, 1e-6);
          break;
      }
    }
  }

  // Tree leaves.
  for (int k = 0; k < 40; ++k) {
    auto schema = std::make_shared<FeatureSchema>();
    schema->names = {"x", "y", "c"};
    schema->kinds = {FeatureKind::continuous, FeatureKind::continuous, FeatureKind::categorical};
    schema->levels = {{}, {}, {"a", "b", "c", "d"}};
    const std::size_t nc = 2 + rng.uniform_index(4);
    std::vector<ProsodicFeatureVector> x;
    std::vector<std::string> y;
    for (int i = 0; i < 150; ++i) {
      const std::size_t c = rng.uniform_index(nc);
      std::optional<double> a = synth::normal(rng, static_cast<double>(c), 1.0);
      if (rng.uniform01() < 0.1) a.reset();
      x.emplace_back(schema, std::vector<std::optional<double>>{a, rng.uniform01(), static_cast<double>(rng.uniform_index(4))});
      y.push_back("k" + std::to_string(c));
    }
    TreeConfig cfg;
    cfg.min_leaf = 1 + rng.uniform_index(10);
    cfg.leaf_smoothing = rng.uniform01();
    auto t = DecisionTree::train(x, y, cfg);
    for (const auto& n : t.nodes()) {
      if (!n.leaf) continue;
      double s = 0.0;
      for (double p : n.distribution) s += p;
      check(s, 1e-9);
    }
  }

  // Forward-backward rows.
  for (int k = 0; k < 60; ++k) {
    const auto tags = synth::numbered_tagset(2 + rng.uniform_index(4));
    auto g = synth::random_grammar(rng, tags, 1 + static_cast<int>(rng.uniform_index(3)),
                                   static_cast<GrammarVariant>(rng.uniform_index(3)));
    auto t = synth::random_table(rng, 1 + rng.uniform_index(30), tags.size());
    const auto mode = rng.uniform_index(2) ? PosteriorMode::online : PosteriorMode::offline;
    for (const auto& row : forward_backward(g, t, mode)) {
      double s = 0.0;
      for (double p : row) s += p;
      check(s, 1e-9);
    }
  }

  Outcome o;
  o.pass = bad == 0 && cases >= 1000;
  o.detail = fmt("%g cases, %g outside tolerance, max deviation %.2e", double(cases), double(bad), worst);
  return o;
}

Outcome fb_vs_viterbi() {
  Rng rng(303);
  const std::size_t d = 4, symbols = 6;
  const auto tags = synth::numbered_tagset(d);
  const double end = 0.1;
  auto start = synth::random_distribution(rng, d, 0.05);
  std::vector<std::vector<double>> trans, scaled, emit;
  for (std::size_t p = 0; p < d; ++p) {
    trans.push_back(synth::random_distribution(rng, d, 0.05));
    scaled.push_back(trans.back());
    for (auto& x : scaled.back()) x *= 1.0 - end;
    emit.push_back(synth::random_distribution(rng, symbols, 0.05));
  }
  auto g = synth::bigram_grammar(tags, start, scaled, std::vector<double>(d, end));
  std::size_t total = 0, fb_ok = 0, vit_ok = 0;
  for (int c = 0; c < 10000; ++c) {
    LikelihoodTable t;
    t.conversation_id = "h";
    std::vector<std::size_t> truth;
    std::size_t cur = synth::sample(rng, start);
    while (true) {
      truth.push_back(cur);
      const std::size_t o = synth::sample(rng, emit[cur]);
      std::vector<double> row(d);
      for (std::size_t u = 0; u < d; ++u) row[u] = std::log(emit[u][o]);
      t.log_likelihoods.push_back(std::move(row));
      t.speakers.push_back(Speaker::A);
      if (rng.uniform01() < end) break;
      cur = synth::sample(rng, trans[cur]);
    }
    auto fb = decode_labels(g, t, DecodeMethod::forward_backward);
    auto vit = decode_labels(g, t, DecodeMethod::viterbi);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      fb_ok += fb[i] == truth[i];
      vit_ok += vit[i] == truth[i];
    }
    total += truth.size();
  }
  const double fa = static_cast<double>(fb_ok) / static_cast<double>(total);
  const double va = static_cast<double>(vit_ok) / static_cast<double>(total);
  Outcome o;
  o.pass = fa >= va - 0.002;
  o.detail = fmt("10000 conversations, %g utterances, forward-backward %.4f vs Viterbi %.4f", double(total), fa, va);
  return o;
}

Outcome perplexity_ordering() {
  Rng rng(404);
  const auto tags = synth::numbered_tagset(6);
  auto src = synth::make_markov_source(rng, 6);
  auto train = synth::sample_markov(src, tags, rng, 2000, 50);  // 10^5 events
  auto test = synth::sample_markov(src, tags, rng, 400, 50);
  auto sym = symmetrize_speakers(train);
  double plain[4], given[4];
  for (int order = 1; order <= 3; ++order) {
    plain[order] = discourse_perplexity(DiscourseGrammar::train(sym, tags, order, GrammarVariant::U_only), test);
    given[order] = discourse_perplexity(DiscourseGrammar::train(sym, tags, order, GrammarVariant::U_given_T), test);
  }
  Outcome o;
  o.pass = plain[3] <= plain[2] && plain[2] <= plain[1] && given[2] < plain[2] && given[3] < plain[3];
  o.detail = fmt("U only 1/2/3-gram %.3f / %.3f / %.3f", plain[1], plain[2], plain[3]) +
             fmt(", U given T 2/3-gram %.3f / %.3f", given[2], given[3]);
  return o;
}

Outcome nbest_vs_onebest() {
  int wins = 0;
  double sum_n = 0.0, sum_1 = 0.0;
  const RescoreConfig cfg{1.0, 0.0};
  for (int s = 0; s < 20; ++s) {
    Rng rng(5000 + static_cast<std::uint64_t>(s));
    auto world = synth::make_world(rng);
    synth::SampleOptions opt;
    opt.conversations = 30;
    auto train = synth::sample_world(world, rng, opt);
    opt.conversations = 15;
    opt.channel_error = 0.25;
    opt.max_flips = 3;
    auto test = synth::sample_world(world, rng, opt);
    auto set = DaLmSet::train(train, world.tagset);
    auto g = DiscourseGrammar::train(symmetrize_speakers(train), world.tagset, 2, GrammarVariant::U_only);
    auto acc = [&](WordEvidence mode) {
      auto pred = classify_from_words(set, g, test, mode, cfg);
      std::size_t ok = 0, n = 0;
      for (std::size_t c = 0; c < test.size(); ++c)
        for (std::size_t i = 0; i < test[c].size(); ++i, ++n)
          ok += pred[c][i] == world.tagset.index(*test[c].utterances[i].da_label);
      return static_cast<double>(ok) / static_cast<double>(n);
    };
    const double an = acc(WordEvidence::nbest), a1 = acc(WordEvidence::one_best);
    wins += an >= a1;
    sum_n += an;
    sum_1 += a1;
  }
  Outcome o;
  o.pass = wins >= 16;
  o.detail = fmt("n-best >= 1-best in %g of 20 seeds, mean accuracy %.4f vs %.4f", wins, sum_n / 20, sum_1 / 20);
  return o;
}

Outcome fusion_benefit() {
  int wins = 0;
  double sum_c = 0.0, sum_w = 0.0;
  for (int s = 0; s < 20; ++s) {
    Rng rng(6000 + static_cast<std::uint64_t>(s));
    synth::WorldOptions wo;
    wo.cue_share = 0.3;
    auto world = synth::make_world(rng, wo);
    synth::SampleOptions opt;
    opt.conversations = 30;
    opt.prosody = true;
    auto train = synth::sample_world(world, rng, opt);
    opt.conversations = 20;
    auto test = synth::sample_world(world, rng, opt);
    auto set = DaLmSet::train(train, world.tagset);
    auto g = DiscourseGrammar::train(symmetrize_speakers(train), world.tagset, 2, GrammarVariant::U_only);
    std::vector<ProsodicFeatureVector> x;
    std::vector<std::string> y;
    for (const auto& u : flatten(train)) {
      x.push_back(*u.prosody);
      y.push_back(*u.da_label);
    }
    TreeConfig tc;
    tc.min_leaf = 10;
    tc.leaf_smoothing = 1.0;
    auto tree = DecisionTree::train(x, y, tc, world.tagset.labels());
    std::vector<TuningItem> items;
    for (const auto& c : test) {
      TuningItem it;
      it.words = word_likelihood_table(set, c, WordEvidence::true_words);
      it.prosody = prosody_likelihood_table(tree, c, world.tagset, tree.priors());
      for (const auto& u : c.utterances) it.labels.push_back(world.tagset.index(*u.da_label));
      items.push_back(std::move(it));
    }
    auto jk = tune_alpha_beta(g, items, jackknife_indices(items.size(), static_cast<std::uint64_t>(s)));
    std::vector<std::size_t> all(items.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto words = evaluate_weights(g, items, all, {0.0, 1.0});
    wins += jk.correct() >= words.correct;
    sum_c += jk.accuracy();
    sum_w += words.accuracy();
  }
  Outcome o;
  o.pass = wins >= 16;
  o.detail = fmt("combined >= words only in %g of 20 seeds, mean accuracy %.4f vs %.4f", wins, sum_c / 20, sum_w / 20);
  return o;
}

struct RescoreSetup {
  synth::World world;
  std::vector<Conversation> train, test;
  DaLmSet plain, smooth;
  NGramModel baseline;
  std::vector<std::vector<std::vector<double>>> posteriors;
};

RescoreSetup rescore_setup(std::uint64_t seed, std::size_t test_convs) {
  Rng rng(seed);
  RescoreSetup r;
  r.world = synth::make_world(rng);
  synth::SampleOptions opt;
  opt.conversations = 40;
  r.train = synth::sample_world(r.world, rng, opt);
  opt.conversations = test_convs;
  opt.channel_error = 0.2;
  opt.max_flips = 3;
  r.test = synth::sample_world(r.world, rng, opt);
  r.plain = DaLmSet::train(r.train, r.world.tagset);
  r.smooth = r.plain.smoothed(r.train);
  std::vector<std::vector<std::string>> words;
  for (const auto& u : flatten(r.train)) words.push_back(u.words);
  r.baseline = NGramModel::train(words, 3, r.plain.vocabulary().tokens());
  auto g = DiscourseGrammar::train(symmetrize_speakers(r.train), r.world.tagset, 2, GrammarVariant::U_only);
  const RescoreConfig cfg{1.0, 0.0};
  for (const auto& c : r.test)
    r.posteriors.push_back(forward_backward(g, word_likelihood_table(r.plain, c, WordEvidence::nbest, cfg)));
  return r;
}

Outcome rescoring_dominance() {
  int viol_om = 0, viol_mb = 0;
  double sum_o = 0.0, sum_m = 0.0, sum_b = 0.0;
  const std::vector<RescoreMethod> methods{RescoreMethod::baseline, RescoreMethod::mixture_of_lms, RescoreMethod::oracle};
  for (int s = 0; s < 20; ++s) {
    auto r = rescore_setup(7000 + static_cast<std::uint64_t>(s), 15);
    auto res = rescore_corpus(r.test, r.smooth, r.baseline, r.posteriors, methods, RescoreConfig{1.0, 0.0});
    const double b = *res.summaries[0].wer.rate(), m = *res.summaries[1].wer.rate(), o = *res.summaries[2].wer.rate();
    viol_om += o > m;
    viol_mb += m > b;
    sum_o += o;
    sum_m += m;
    sum_b += b;
  }
  Outcome o;
  o.pass = viol_om <= 4 && viol_mb <= 4 && sum_o <= sum_m && sum_m <= sum_b;
  o.detail = fmt("mean WER oracle %.4f, mixture %.4f, baseline %.4f", sum_o / 20, sum_m / 20, sum_b / 20) +
             fmt("; violations oracle>mixture %g, mixture>baseline %g", viol_om, viol_mb);
  return o;
}

Outcome mixture_equivalence() {
  std::size_t lists = 0, mismatches = 0;
  Rng rng(808);
  for (int s = 0; s < 5; ++s) {
    auto r = rescore_setup(8000 + static_cast<std::uint64_t>(s), 4);
    for (std::size_t c = 0; c < r.test.size(); ++c) {
      for (std::size_t i = 0; i < r.test[c].size(); ++i) {
        const auto& l = *r.test[c].utterances[i].nbest;
        for (int k = 0; k < 2; ++k) {
          std::vector<double> post = k == 0 ? r.posteriors[c][i] : synth::random_distribution(rng, r.smooth.size(), 0.0);
          for (double lambda : {1.0, 8.0}) {
            const RescoreConfig cfg{lambda, 0.5};
            auto a = rank_hypotheses(l, mixture_of_lms_scores(l, r.smooth, post, cfg));
            auto b = rank_hypotheses(l, mixture_of_posteriors_scores(l, r.smooth, post, cfg, PosteriorNormalizer::shared));
            ++lists;
            mismatches += a.order != b.order;
          }
        }
      }
    }
  }
  Outcome o;
  o.pass = mismatches == 0;
  o.detail = fmt("%g rankings compared, %g differ", double(lists), double(mismatches));
  return o;
}

Outcome hand_values() {
  const std::vector<std::vector<std::string>> data{{"a", "a", "b"}};
  const std::vector<std::string> vocab{"a", "b", "c"};
  auto m = NGramModel::train(data, 1, vocab, NGramOptions{false, false});
  const std::vector<std::string> none;
  const double pa = std::exp(m.cond_log_prob(none, "a"));
  const double pb = std::exp(m.cond_log_prob(none, "b"));
  const double pc = std::exp(m.cond_log_prob(none, "c"));
  const std::vector<double> post{0.6, 0.4}, pri{0.8, 0.2};
  auto s = bayes_scaled(post, pri);
  const double dev = std::max({std::abs(pa - 0.4), std::abs(pb - 0.2), std::abs(pc - 0.4), std::abs(s[0] - 3.0 / 11.0),
                               std::abs(s[1] - 8.0 / 11.0)});
  Outcome o;
  o.pass = dev <= 1e-12;
  o.detail = fmt("P(a)=%.15f P(b)=%.15f P(c)=%.15f", pa, pb, pc) + fmt(", scaled %.15f / %.15f", s[0], s[1]);
  return o;
}

Outcome round_trips() {
  Rng rng(1010);
  std::size_t fixtures = 0, failures = 0;
  const auto tags = synth::numbered_tagset(5);
  for (int k = 0; k < 40; ++k) {
    auto schema = std::make_shared<FeatureSchema>();
    schema->names = {"dur", "tone", "f0"};
    schema->kinds = {FeatureKind::continuous, FeatureKind::categorical, FeatureKind::continuous};
    schema->levels = {{}, {"H", "L", "M"}, {}};
    std::vector<Conversation> convs;
    for (std::size_t c = 0, nc = 1 + rng.uniform_index(4); c < nc; ++c) {
      Conversation conv{"conv" + std::to_string(c), {}};
      for (std::size_t i = 0, n = 1 + rng.uniform_index(12); i < n; ++i) {
        Utterance u;
        u.conversation_id = conv.id;
        u.index = i;
        u.speaker = static_cast<Speaker>(rng.uniform_index(2));
        if (rng.uniform01() < 0.9) u.da_label = tags.label(rng.uniform_index(tags.size()));
        for (std::size_t w = rng.uniform_index(6); w > 0; --w) u.words.push_back("w" + std::to_string(rng.uniform_index(30)));
        std::vector<std::optional<double>> v{synth::normal(rng, 0, 1e3), static_cast<double>(rng.uniform_index(3)),
                                             synth::normal(rng, 0, 1e-7)};
        for (auto& x : v)
          if (rng.uniform01() < 0.15) x.reset();
        u.prosody = ProsodicFeatureVector(schema, std::move(v));
        NBestList l;
        for (std::size_t h = 1 + rng.uniform_index(4); h > 0; --h) {
          Hypothesis hyp;
          for (std::size_t w = rng.uniform_index(5); w > 0; --w) hyp.words.push_back("w" + std::to_string(rng.uniform_index(30)));
          hyp.acoustic_log_score = -1e3 * rng.uniform01();
          l.hypotheses.push_back(hyp);
        }
        u.nbest = l;
        conv.utterances.push_back(std::move(u));
      }
      convs.push_back(std::move(conv));
    }
    std::ostringstream co, no, po;
    write_conversations(co, convs);
    write_nbest(no, convs);
    write_prosody(po, convs);
    std::istringstream ci(co.str()), ni(no.str()), pi(po.str());
    auto back = parse_conversations(ci, tags);
    attach_nbest(back, parse_nbest(ni));
    attach_prosody(back, parse_prosody(pi));
    ++fixtures;
    failures += !(back == convs);

    // ARPA
    const std::size_t nv = 3 + rng.uniform_index(8);
    auto m = NGramModel::train(random_sentences(rng, nv, 5 + rng.uniform_index(40)), 1 + static_cast<int>(rng.uniform_index(4)),
                               token_list(nv));
    std::ostringstream ao;
    m.write_arpa(ao);
    std::istringstream ai(ao.str());
    auto mb = NGramModel::read_arpa(ai);
    std::ostringstream ao2;
    mb.write_arpa(ao2);
    bool same = ao.str() == ao2.str() && mb.vocabulary() == m.vocabulary();
    for (int q = 0; q < 50 && same; ++q) {
      std::vector<int> ctx;
      for (int i = 0; i + 1 < m.order(); ++i) ctx.push_back(static_cast<int>(rng.uniform_index(m.vocabulary().size())));
      const auto ids = m.vocabulary().predictable_ids();
      const int tok = ids[rng.uniform_index(ids.size())];
      const double x = m.cond_log_prob_ids(ctx, tok), y = mb.cond_log_prob_ids(ctx, tok);
      same = std::abs(x - y) <= 1e-12 * std::max(1.0, std::abs(x));
    }
    ++fixtures;
    failures += !same;

    // Tree
    std::vector<ProsodicFeatureVector> x;
    std::vector<std::string> y;
    for (const auto& c : convs)
      for (const auto& u : c.utterances) {
        x.push_back(*u.prosody);
        y.push_back(u.da_label.value_or("none"));
      }
    TreeConfig tc;
    tc.min_leaf = 1 + rng.uniform_index(3);
    tc.leaf_smoothing = rng.uniform01();
    auto t = DecisionTree::train(x, y, tc);
    std::ostringstream to;
    t.write(to);
    std::istringstream ti(to.str());
    auto tb = DecisionTree::read(ti);
    bool tsame = tb == t;
    for (const auto& v : x) tsame = tsame && tb.posterior(v) == t.posterior(v);
    ++fixtures;
    failures += !tsame;
  }
  Outcome o;
  o.pass = failures == 0;
  o.detail = fmt("%g fixtures (conversation+n-best+prosody, ARPA, tree), %g failures", double(fixtures), double(failures));
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"decoder oracle equivalence", 10, decoder_oracle},
      {"normalization suite", 30, normalization_suite},
      {"forward-backward vs Viterbi", 120, fb_vs_viterbi},
      {"perplexity ordering", 60, perplexity_ordering},
      {"n-best vs 1-best classification", 300, nbest_vs_onebest},
      {"fusion benefit", 300, fusion_benefit},
      {"rescoring dominance", 300, rescoring_dominance},
      {"mixture equivalence", 10, mixture_equivalence},
      {"Witten-Bell and Bayes hand values", 1, hand_values},
      {"serialization round-trips", 30, round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << "AC" << (i + 1) << ' ' << (pass ? "PASS" : "FAIL") << "  " << c.name << ": " << o.detail
              << fmt(" [%.2fs, limit %gs]", secs, c.limit_seconds) << (in_time ? "" : " time limit exceeded") << '\n'
              << std::flush;
  }
  return failed == 0 ? 0 : 1;
}
