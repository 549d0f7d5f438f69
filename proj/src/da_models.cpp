#include "datag/da_models.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "datag/util.hpp"

namespace datag {

void RescoreConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("lambda must be positive");
  if (!std::isfinite(mu)) throw Error("mu must be finite");
}

namespace {

std::vector<std::string> corpus_vocabulary(std::span<const Conversation> convs) {
  std::set<std::string> words;
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) words.insert(u.words.begin(), u.words.end());
  }
  return {words.begin(), words.end()};
}

// Model group of each DA: members of a collapsed class share the class's group.
std::vector<std::size_t> model_groups(const TagSet& tagset) {
  std::vector<std::size_t> group(tagset.size());
  for (std::size_t d = 0; d < tagset.size(); ++d) group[d] = d;
  for (const auto& [name, members] : tagset.other_class_members()) {
    std::size_t first = tagset.size();
    for (const auto& m : members) {
      auto idx = tagset.find(m);
      if (!idx) continue;
      if (first == tagset.size()) first = *idx;
      group[*idx] = first;
    }
  }
  return group;
}

std::string file_stem(std::size_t d, const std::string& label) {
  char num[16];
  std::snprintf(num, sizeof num, "%02zu_", d);
  std::string out = num;
  for (char c : label) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out;
}

}  // namespace

DaLmSet DaLmSet::train(std::span<const Conversation> convs, const TagSet& tagset, int order,
                       NGramOptions options) {
  DaLmSet set;
  set.tagset_ = tagset;
  const auto vocab = corpus_vocabulary(convs);
  const auto group = model_groups(tagset);

  std::vector<std::vector<std::string>> all;
  std::vector<std::vector<std::vector<std::string>>> by_group(tagset.size());
  set.counts_.assign(tagset.size(), 0);
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.da_label) continue;
      const std::size_t d = tagset.index(*u.da_label);
      ++set.counts_[d];
      all.push_back(u.words);
      by_group[group[d]].push_back(u.words);
    }
  }
  if (all.empty()) throw Error("no labeled utterances to train DA language models");
  set.pooled_ = std::make_shared<const NGramModel>(NGramModel::train(all, order, vocab, options));

  std::map<std::size_t, std::shared_ptr<const NGramModel>> trained;
  set.models_.resize(tagset.size());
  set.fallback_.assign(tagset.size(), false);
  for (std::size_t d = 0; d < tagset.size(); ++d) {
    const std::size_t g = group[d];
    if (by_group[g].empty()) {
      set.models_[d] = set.pooled_;
      set.fallback_[d] = true;
      set.warnings_.push_back("no training utterances for '" + tagset.label(d) +
                              "'; using the pooled model");
      continue;
    }
    auto& m = trained[g];
    if (!m) m = std::make_shared<const NGramModel>(NGramModel::train(by_group[g], order, vocab, options));
    set.models_[d] = m;
  }
  return set;
}

DaLmSet DaLmSet::smoothed(std::span<const Conversation> convs, NGramOptions options) const {
  DaLmSet out = *this;
  out.weights_.assign(size(), 1.0);
  const auto group = model_groups(tagset_);
  std::vector<std::vector<std::vector<std::string>>> by_group(size());
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.da_label) continue;
      by_group[group[tagset_.index(*u.da_label)]].push_back(u.words);
    }
  }
  std::vector<std::string> vocab;
  for (const auto& t : vocabulary().tokens()) vocab.push_back(t);

  std::map<std::size_t, std::pair<std::shared_ptr<const NGramModel>, double>> done;
  for (std::size_t d = 0; d < size(); ++d) {
    if (fallback_[d]) {
      out.models_[d] = pooled_;
      out.weights_[d] = 0.0;
      continue;
    }
    const std::size_t g = group[d];
    auto it = done.find(g);
    if (it == done.end()) {
      const auto& utts = by_group[g];
      std::vector<std::vector<std::string>> fit, held;
      for (std::size_t i = 0; i < utts.size(); ++i) (i % 10 == 9 ? held : fit).push_back(utts[i]);
      double w = 0.5;
      if (!held.empty() && !fit.empty()) {
        auto temp = NGramModel::train(fit, order(), vocab, options);
        w = fit_interp_weight(temp, *pooled_, held);
      }
      auto merged = std::make_shared<const NGramModel>(NGramModel::merge(*models_[d], *pooled_, w));
      it = done.emplace(g, std::make_pair(merged, w)).first;
    }
    out.models_[d] = it->second.first;
    out.weights_[d] = it->second.second;
  }
  return out;
}

void DaLmSet::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw Error("cannot write " + (dir / "manifest.tsv").string());
  manifest << "# da-lm-set\n";
  manifest << "transcripts\t" << (transcripts_ ? 1 : 0) << '\n';
  manifest << "pooled\tpooled.arpa\n";
  pooled_->save(dir / "pooled.arpa");
  std::map<const NGramModel*, std::string> written;
  for (std::size_t d = 0; d < size(); ++d) {
    std::string file;
    if (fallback_[d]) {
      file = "pooled.arpa";
    } else if (auto it = written.find(models_[d].get()); it != written.end()) {
      file = it->second;
    } else {
      file = file_stem(d, tagset_.label(d)) + ".arpa";
      models_[d]->save(dir / file);
      written[models_[d].get()] = file;
    }
    manifest << "da\t" << tagset_.label(d) << '\t' << file << '\t' << counts_[d] << '\t'
             << (fallback_[d] ? 1 : 0);
    if (!weights_.empty()) manifest << '\t' << format_double(weights_[d]);
    manifest << '\n';
  }
  if (!manifest) throw Error("write failed for " + (dir / "manifest.tsv").string());
}

DaLmSet DaLmSet::load(const std::filesystem::path& dir, const TagSet& tagset) {
  const auto path = dir / "manifest.tsv";
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  DaLmSet set;
  set.tagset_ = tagset;
  set.models_.resize(tagset.size());
  set.fallback_.assign(tagset.size(), false);
  set.counts_.assign(tagset.size(), 0);
  std::vector<bool> seen(tagset.size(), false);
  std::map<std::string, std::shared_ptr<const NGramModel>> cache;
  auto get = [&](const std::string& file) {
    auto& m = cache[file];
    if (!m) m = std::make_shared<const NGramModel>(NGramModel::load(dir / file));
    return m;
  };
  std::string line;
  std::size_t lineno = 0;
  bool weighted = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    try {
      if (f[0] == "transcripts" && f.size() == 2) {
        set.transcripts_ = f[1] == "1";
      } else if (f[0] == "pooled" && f.size() == 2) {
        set.pooled_ = get(f[1]);
      } else if (f[0] == "da" && (f.size() == 5 || f.size() == 6)) {
        const std::size_t d = tagset.index(f[1]);
        if (seen[d]) throw Error("duplicate entry for '" + f[1] + "'");
        seen[d] = true;
        set.models_[d] = get(f[2]);
        set.counts_[d] = static_cast<std::size_t>(parse_int(f[3]));
        set.fallback_[d] = f[4] == "1";
        if (f.size() == 6) {
          if (set.weights_.empty()) set.weights_.assign(tagset.size(), 0.0);
          set.weights_[d] = parse_double(f[5]);
          weighted = true;
        }
      } else {
        throw Error("unrecognized manifest line");
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(path.string(), lineno, e.what());
    }
  }
  if (!set.pooled_) throw ParseError(path.string(), 0, "manifest names no pooled model");
  for (std::size_t d = 0; d < tagset.size(); ++d) {
    if (!seen[d]) throw ParseError(path.string(), 0, "no model for '" + tagset.label(d) + "'");
    if (!(set.models_[d]->vocabulary() == set.pooled_->vocabulary()))
      throw Error("model for '" + tagset.label(d) + "' does not share the pooled vocabulary");
  }
  if (!weighted) set.weights_.clear();
  return set;
}

double true_word_log_likelihood(const DaLmSet& set, std::span<const std::string> words, std::size_t da) {
  return set.model(da).sentence_log_prob(words);
}

double hypothesis_log_score(const LanguageModel& lm, const Hypothesis& hyp, const RescoreConfig& cfg) {
  return hyp.acoustic_log_score / cfg.lambda + lm.sentence_log_prob(hyp.words) -
         cfg.mu / cfg.lambda * static_cast<double>(hyp.words.size());
}

double nbest_da_log_likelihood(const DaLmSet& set, const NBestList& nbest, std::size_t da,
                               const RescoreConfig& cfg) {
  if (nbest.empty()) throw Error("empty n-best list");
  cfg.validate();
  std::vector<double> terms;
  terms.reserve(nbest.size());
  for (const auto& h : nbest.hypotheses) terms.push_back(hypothesis_log_score(set.model(da), h, cfg));
  return log_sum_exp(terms);
}

std::string_view evidence_name(WordEvidence e) {
  switch (e) {
    case WordEvidence::true_words:
      return "true_words";
    case WordEvidence::nbest:
      return "nbest";
    case WordEvidence::one_best:
      return "one_best";
  }
  return "?";
}

WordEvidence parse_evidence(std::string_view text) {
  if (text == "true_words") return WordEvidence::true_words;
  if (text == "nbest") return WordEvidence::nbest;
  if (text == "one_best") return WordEvidence::one_best;
  throw Error("unknown evidence mode '" + std::string(text) + "' (expected true_words, nbest or one_best)");
}

LikelihoodTable word_likelihood_table(const DaLmSet& set, const Conversation& conv, WordEvidence mode,
                                      const RescoreConfig& cfg) {
  cfg.validate();
  auto table = make_table(conv, set.size());
  table.provenance.words = true;
  table.provenance.acoustics = mode != WordEvidence::true_words;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const auto& u = conv.utterances[i];
    if (mode != WordEvidence::true_words && (!u.nbest || u.nbest->empty()))
      throw Error("utterance " + conv.id + ":" + std::to_string(u.index) + " has no n-best list");
    auto& row = table.log_likelihoods[i];
    // Models shared by several DAs are scored once.
    std::map<const NGramModel*, double> memo;
    for (std::size_t d = 0; d < set.size(); ++d) {
      auto [it, fresh] = memo.try_emplace(&set.model(d), 0.0);
      if (fresh) {
        switch (mode) {
          case WordEvidence::true_words:
            it->second = true_word_log_likelihood(set, u.words, d);
            break;
          case WordEvidence::nbest:
            it->second = nbest_da_log_likelihood(set, *u.nbest, d, cfg);
            break;
          case WordEvidence::one_best:
            it->second = true_word_log_likelihood(set, u.nbest->hypotheses.front().words, d);
            break;
        }
      }
      row[d] = it->second;
    }
  }
  return table;
}

std::vector<std::vector<std::size_t>> classify_from_words(const DaLmSet& set,
                                                          const DiscourseGrammar& grammar,
                                                          std::span<const Conversation> convs,
                                                          WordEvidence mode, const RescoreConfig& cfg) {
  std::vector<std::vector<std::size_t>> out;
  out.reserve(convs.size());
  for (const auto& c : convs)
    out.push_back(argmax_labels(forward_backward(grammar, word_likelihood_table(set, c, mode, cfg))));
  return out;
}

}  // namespace datag
