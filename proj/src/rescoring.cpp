#include "datag/rescoring.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "datag/util.hpp"

namespace datag {

std::string_view method_name(RescoreMethod m) {
  switch (m) {
    case RescoreMethod::baseline:
      return "baseline";
    case RescoreMethod::one_best:
      return "one_best";
    case RescoreMethod::mixture_of_posteriors:
      return "mixture_of_posteriors";
    case RescoreMethod::mixture_of_lms:
      return "mixture_of_lms";
    case RescoreMethod::oracle:
      return "oracle";
  }
  return "?";
}

RescoreMethod parse_method(std::string_view text) {
  for (auto m : all_methods()) {
    if (method_name(m) == text) return m;
  }
  throw Error("unknown rescoring method '" + std::string(text) +
              "' (expected baseline, one_best, mixture_of_posteriors, mixture_of_lms or oracle)");
}

std::vector<RescoreMethod> all_methods() {
  return {RescoreMethod::baseline, RescoreMethod::one_best, RescoreMethod::mixture_of_posteriors,
          RescoreMethod::mixture_of_lms, RescoreMethod::oracle};
}

HypothesisRanking rank_hypotheses(const NBestList& nbest, std::vector<double> scores) {
  if (nbest.empty()) throw Error("empty n-best list");
  if (scores.size() != nbest.size()) throw Error("score count does not match the n-best list");
  HypothesisRanking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), 0);
  std::sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    const auto& wa = nbest.hypotheses[a].words;
    const auto& wb = nbest.hypotheses[b].words;
    if (wa != wb) return wa < wb;
    return nbest.hypotheses[a].acoustic_log_score > nbest.hypotheses[b].acoustic_log_score;
  });
  r.scores = std::move(scores);
  return r;
}

std::vector<double> lm_scores(const NBestList& nbest, const LanguageModel& lm, const RescoreConfig& cfg) {
  cfg.validate();
  std::vector<double> out;
  out.reserve(nbest.size());
  for (const auto& h : nbest.hypotheses) out.push_back(hypothesis_log_score(lm, h, cfg));
  return out;
}

namespace {

// s[U][h] = hypothesis_log_score under DA U's model; shared models scored once.
std::vector<std::vector<double>> score_matrix(const NBestList& nbest, const DaLmSet& set,
                                              const RescoreConfig& cfg) {
  std::map<const NGramModel*, std::size_t> first;
  std::vector<std::vector<double>> s(set.size());
  for (std::size_t d = 0; d < set.size(); ++d) {
    auto [it, fresh] = first.try_emplace(&set.model(d), d);
    s[d] = fresh ? lm_scores(nbest, set.model(d), cfg) : s[it->second];
  }
  return s;
}

void check_posterior(std::span<const double> posterior, const DaLmSet& set) {
  if (posterior.size() != set.size()) throw Error("posterior row does not match the DA model set");
}

std::vector<double> mixture_from_matrix(const std::vector<std::vector<double>>& s,
                                        std::span<const double> posterior, std::size_t n) {
  std::vector<double> out(n);
  std::vector<double> terms(s.size());
  for (std::size_t h = 0; h < n; ++h) {
    for (std::size_t d = 0; d < s.size(); ++d)
      terms[d] = posterior[d] > 0.0 ? std::log(posterior[d]) + s[d][h] : kNegInf;
    out[h] = log_sum_exp(terms);
  }
  return out;
}

std::vector<double> posteriors_from_matrix(const std::vector<std::vector<double>>& s,
                                           std::span<const double> posterior, std::size_t n,
                                           PosteriorNormalizer normalizer) {
  if (normalizer == PosteriorNormalizer::shared) {
    auto out = mixture_from_matrix(s, posterior, n);
    const double z = log_sum_exp(out);
    for (auto& v : out) v -= z;
    return out;
  }
  std::vector<double> out(n);
  std::vector<double> norm(s.size(), kNegInf);
  for (std::size_t d = 0; d < s.size(); ++d) {
    if (posterior[d] > 0.0) norm[d] = log_sum_exp(s[d]);
  }
  std::vector<double> terms(s.size());
  for (std::size_t h = 0; h < n; ++h) {
    for (std::size_t d = 0; d < s.size(); ++d)
      terms[d] = posterior[d] > 0.0 ? std::log(posterior[d]) + s[d][h] - norm[d] : kNegInf;
    out[h] = log_sum_exp(terms);
  }
  return out;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<double> mixture_of_lms_scores(const NBestList& nbest, const DaLmSet& set,
                                          std::span<const double> posterior, const RescoreConfig& cfg) {
  if (nbest.empty()) throw Error("empty n-best list");
  check_posterior(posterior, set);
  return mixture_from_matrix(score_matrix(nbest, set, cfg), posterior, nbest.size());
}

std::vector<double> mixture_of_posteriors_scores(const NBestList& nbest, const DaLmSet& set,
                                                 std::span<const double> posterior, const RescoreConfig& cfg,
                                                 PosteriorNormalizer normalizer) {
  if (nbest.empty()) throw Error("empty n-best list");
  check_posterior(posterior, set);
  return posteriors_from_matrix(score_matrix(nbest, set, cfg), posterior, nbest.size(), normalizer);
}

std::optional<double> WerResult::rate() const {
  if (reference_length == 0) return std::nullopt;
  return static_cast<double>(errors()) / static_cast<double>(reference_length);
}

WerResult& WerResult::operator+=(const WerResult& o) {
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  reference_length += o.reference_length;
  return *this;
}

WerResult wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  // cost = (edits, insertions + deletions), compared lexicographically.
  using Cost = std::pair<std::size_t, std::size_t>;
  std::vector<std::vector<Cost>> dp(n + 1, std::vector<Cost>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) dp[i][0] = {i, i};
  for (std::size_t j = 0; j <= m; ++j) dp[0][j] = {j, j};
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const bool same = ref[i - 1] == hyp[j - 1];
      Cost diag{dp[i - 1][j - 1].first + (same ? 0 : 1), dp[i - 1][j - 1].second};
      Cost del{dp[i - 1][j].first + 1, dp[i - 1][j].second + 1};
      Cost ins{dp[i][j - 1].first + 1, dp[i][j - 1].second + 1};
      dp[i][j] = std::min({diag, del, ins});
    }
  }
  WerResult r;
  r.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      Cost diag{dp[i - 1][j - 1].first + (same ? 0 : 1), dp[i - 1][j - 1].second};
      if (diag == dp[i][j]) {
        if (!same) ++r.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0) {
      Cost del{dp[i - 1][j].first + 1, dp[i - 1][j].second + 1};
      if (del == dp[i][j]) {
        ++r.deletions;
        --i;
        continue;
      }
    }
    ++r.insertions;
    --j;
  }
  return r;
}

std::size_t RescoreResult::method_index(RescoreMethod m) const {
  auto it = std::find(methods.begin(), methods.end(), m);
  if (it == methods.end()) throw Error("method '" + std::string(method_name(m)) + "' was not run");
  return static_cast<std::size_t>(it - methods.begin());
}

RescoreResult rescore_corpus(std::span<const Conversation> convs, const DaLmSet& set,
                             const LanguageModel& baseline,
                             std::span<const std::vector<std::vector<double>>> posteriors,
                             std::span<const RescoreMethod> methods, const RescoreConfig& cfg) {
  cfg.validate();
  if (methods.empty()) throw Error("no rescoring methods requested");
  if (posteriors.size() != convs.size()) throw Error("posteriors do not cover every conversation");
  const bool oracle = std::find(methods.begin(), methods.end(), RescoreMethod::oracle) != methods.end();

  RescoreResult result;
  result.methods.assign(methods.begin(), methods.end());
  for (auto m : methods) result.summaries.push_back({m, {}, std::nullopt});
  std::vector<double> log_prob(methods.size(), 0.0);
  std::size_t tokens = 0;

  for (std::size_t c = 0; c < convs.size(); ++c) {
    const auto& conv = convs[c];
    if (posteriors[c].size() != conv.size())
      throw Error("posteriors for '" + conv.id + "' do not cover every utterance");
    for (std::size_t i = 0; i < conv.size(); ++i) {
      const auto& u = conv.utterances[i];
      UtteranceRescore ur;
      ur.key = {conv.id, u.index};
      ur.reference = u.words;
      if (u.da_label) ur.da = set.tagset().index(*u.da_label);
      if (!u.nbest || u.nbest->empty()) {
        ur.skipped = true;
        ++result.skipped;
        result.utterances.push_back(std::move(ur));
        continue;
      }
      if (oracle && !ur.da)
        throw Error("oracle rescoring needs a reference label for " + conv.id + ":" + std::to_string(u.index));
      const auto& nbest = *u.nbest;
      const auto& post = posteriors[c][i];
      check_posterior(post, set);
      const auto s = score_matrix(nbest, set, cfg);
      const std::size_t top = argmax(post);

      for (std::size_t k = 0; k < methods.size(); ++k) {
        std::vector<double> scores;
        switch (methods[k]) {
          case RescoreMethod::baseline:
            scores = lm_scores(nbest, baseline, cfg);
            break;
          case RescoreMethod::one_best:
            scores = s[top];
            break;
          case RescoreMethod::mixture_of_posteriors:
            scores = posteriors_from_matrix(s, post, nbest.size(), PosteriorNormalizer::per_da);
            break;
          case RescoreMethod::mixture_of_lms:
            scores = mixture_from_matrix(s, post, nbest.size());
            break;
          case RescoreMethod::oracle:
            scores = s[*ur.da];
            break;
        }
        const auto ranking = rank_hypotheses(nbest, std::move(scores));
        ur.chosen.push_back(nbest.hypotheses[ranking.best()].words);
        ur.errors.push_back(wer(u.words, ur.chosen.back()));
        result.summaries[k].wer += ur.errors.back();
      }

      // Reference-text perplexity of each method's LM.
      tokens += baseline.sentence_token_count(u.words);
      std::vector<double> ref_lp(set.size());
      std::map<const NGramModel*, double> memo;
      for (std::size_t d = 0; d < set.size(); ++d) {
        auto [it, fresh] = memo.try_emplace(&set.model(d), 0.0);
        if (fresh) it->second = set.model(d).sentence_log_prob(u.words);
        ref_lp[d] = it->second;
      }
      for (std::size_t k = 0; k < methods.size(); ++k) {
        switch (methods[k]) {
          case RescoreMethod::baseline:
            log_prob[k] += baseline.sentence_log_prob(u.words);
            break;
          case RescoreMethod::one_best:
            log_prob[k] += ref_lp[top];
            break;
          case RescoreMethod::mixture_of_lms: {
            std::vector<double> terms(set.size());
            for (std::size_t d = 0; d < set.size(); ++d)
              terms[d] = post[d] > 0.0 ? std::log(post[d]) + ref_lp[d] : kNegInf;
            log_prob[k] += log_sum_exp(terms);
            break;
          }
          case RescoreMethod::oracle:
            log_prob[k] += ref_lp[*ur.da];
            break;
          case RescoreMethod::mixture_of_posteriors:
            break;
        }
      }
      result.utterances.push_back(std::move(ur));
    }
  }
  if (tokens > 0) {
    for (std::size_t k = 0; k < methods.size(); ++k) {
      if (methods[k] == RescoreMethod::mixture_of_posteriors) continue;
      result.summaries[k].perplexity = std::exp(-log_prob[k] / static_cast<double>(tokens));
    }
  }
  return result;
}

std::vector<PerDaRow> per_da_wer_report(const RescoreResult& result, const TagSet& tagset,
                                        RescoreMethod method, RescoreMethod reference_method) {
  const std::size_t mk = result.method_index(method);
  const std::size_t rk = result.method_index(reference_method);
  std::vector<PerDaRow> rows(tagset.size());
  std::vector<WerResult> base(tagset.size()), meth(tagset.size());
  std::size_t total_words = 0;
  for (const auto& u : result.utterances) {
    if (u.skipped) continue;
    if (!u.da) throw Error("per-DA report needs reference labels");
    ++rows[*u.da].utterances;
    rows[*u.da].words += u.reference.size();
    total_words += u.reference.size();
    base[*u.da] += u.errors[rk];
    meth[*u.da] += u.errors[mk];
  }
  std::vector<PerDaRow> out;
  for (std::size_t d = 0; d < tagset.size(); ++d) {
    auto& row = rows[d];
    if (row.utterances == 0) continue;
    row.da = tagset.label(d);
    row.word_share = total_words ? 100.0 * static_cast<double>(row.words) / static_cast<double>(total_words) : 0.0;
    if (auto r = base[d].rate()) row.baseline_wer = 100.0 * *r;
    if (auto r = meth[d].rate()) row.method_wer = 100.0 * *r;
    if (row.baseline_wer && row.method_wer) row.delta = *row.method_wer - *row.baseline_wer;
    out.push_back(std::move(row));
  }
  std::stable_sort(out.begin(), out.end(), [](const PerDaRow& a, const PerDaRow& b) {
    if (a.delta.has_value() != b.delta.has_value()) return a.delta.has_value();
    return a.delta && *a.delta < *b.delta;
  });
  return out;
}

namespace {

std::string fixed(std::optional<double> v, int precision = 2) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << *v;
  return s.str();
}

}  // namespace

void write_rescore_summary(std::ostream& out, const RescoreResult& result, bool tsv) {
  if (tsv) {
    out << "method\twer\tsubstitutions\tinsertions\tdeletions\treference_words\tperplexity\n";
    for (const auto& s : result.summaries) {
      auto r = s.wer.rate();
      out << method_name(s.method) << '\t' << (r ? fixed(100.0 * *r) : "n/a") << '\t' << s.wer.substitutions
          << '\t' << s.wer.insertions << '\t' << s.wer.deletions << '\t' << s.wer.reference_length << '\t'
          << fixed(s.perplexity) << '\n';
    }
    return;
  }
  out << std::left << std::setw(24) << "Model" << std::right << std::setw(10) << "WER (%)" << std::setw(12)
      << "Perplexity" << '\n';
  for (const auto& s : result.summaries) {
    auto r = s.wer.rate();
    out << std::left << std::setw(24) << method_name(s.method) << std::right << std::setw(10)
        << (r ? fixed(100.0 * *r, 1) : "n/a") << std::setw(12) << fixed(s.perplexity, 1) << '\n';
  }
  if (result.skipped) out << "skipped " << result.skipped << " utterances without n-best lists\n";
}

void write_per_da_report(std::ostream& out, std::span<const PerDaRow> rows, bool tsv) {
  if (tsv) {
    out << "da\tutterances\twords\tword_share\tbaseline_wer\tmethod_wer\tdelta\n";
    for (const auto& r : rows) {
      out << r.da << '\t' << r.utterances << '\t' << r.words << '\t' << fixed(r.word_share) << '\t'
          << fixed(r.baseline_wer) << '\t' << fixed(r.method_wer) << '\t' << fixed(r.delta) << '\n';
    }
    return;
  }
  out << std::left << std::setw(28) << "DA" << std::right << std::setw(10) << "Share (%)" << std::setw(11)
      << "Baseline" << std::setw(9) << "Method" << std::setw(8) << "Delta" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(28) << r.da << std::right << std::setw(10) << fixed(r.word_share, 1)
        << std::setw(11) << fixed(r.baseline_wer, 1) << std::setw(9) << fixed(r.method_wer, 1) << std::setw(8)
        << fixed(r.delta, 1) << '\n';
  }
}

void write_rescore_choices(std::ostream& out, const RescoreResult& result) {
  for (const auto& u : result.utterances) {
    if (u.skipped) continue;
    for (std::size_t k = 0; k < result.methods.size(); ++k) {
      out << u.key.first << '\t' << u.key.second << '\t' << method_name(result.methods[k]) << '\t'
          << join(u.chosen[k], " ") << '\n';
    }
  }
}

}  // namespace datag
