#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "datag/corpus.hpp"
#include "datag/discourse.hpp"
#include "datag/hmm.hpp"
#include "datag/ngram.hpp"

namespace datag {

/// Score scaling for recognizer hypotheses: acoustic log scores are divided by
/// the LM weight lambda, and mu is the word insertion penalty.
struct RescoreConfig {
  double lambda = 10.0;
  double mu = 0.0;
  void validate() const;
};

/// One word n-gram model per dialogue act, all over one shared vocabulary.
class DaLmSet {
 public:
  DaLmSet() = default;

  /// Pools the words of every labeled utterance by DA. A DA without training
  /// utterances uses the model trained on all utterances (a warning is
  /// recorded). Labels in a collapsed class share one model.
  static DaLmSet train(std::span<const Conversation> convs, const TagSet& tagset, int order = 3,
                       NGramOptions options = {});

  const TagSet& tagset() const { return tagset_; }
  std::size_t size() const { return models_.size(); }
  int order() const { return pooled_ ? pooled_->order() : 0; }
  const Vocabulary& vocabulary() const { return pooled_->vocabulary(); }
  const NGramModel& model(std::size_t da) const { return *models_.at(da); }
  const std::shared_ptr<const NGramModel>& model_ptr(std::size_t da) const { return models_.at(da); }
  /// Model trained on every utterance regardless of DA.
  const NGramModel& pooled() const { return *pooled_; }
  const std::shared_ptr<const NGramModel>& pooled_ptr() const { return pooled_; }
  bool falls_back(std::size_t da) const { return fallback_.at(da); }
  std::size_t training_count(std::size_t da) const { return counts_.at(da); }
  bool trained_on_transcripts() const { return transcripts_; }
  /// Interpolation weight of each DA model against the pooled model; empty for
  /// an unsmoothed set.
  const std::vector<double>& smoothing_weights() const { return weights_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Directory of ARPA files plus manifest.tsv.
  void save(const std::filesystem::path& dir) const;
  static DaLmSet load(const std::filesystem::path& dir, const TagSet& tagset);

  /// Each DA model merged with the pooled model. The weight for a DA is fit on
  /// every tenth of its training utterances, scored by a model trained on the
  /// rest; 0.5 when there is nothing to hold out. Fallback DAs use the pooled
  /// model as is.
  DaLmSet smoothed(std::span<const Conversation> convs, NGramOptions options = {}) const;

 private:
  TagSet tagset_;
  std::vector<std::shared_ptr<const NGramModel>> models_;
  std::shared_ptr<const NGramModel> pooled_;
  std::vector<bool> fallback_;
  std::vector<std::size_t> counts_;
  std::vector<double> weights_;
  std::vector<std::string> warnings_;
  bool transcripts_ = true;
};

/// log P(W | da) under the DA's model, with sentence padding.
double true_word_log_likelihood(const DaLmSet& set, std::span<const std::string> words, std::size_t da);

/// a / lambda + log P(W) - (mu / lambda) |W| for one hypothesis.
double hypothesis_log_score(const LanguageModel& lm, const Hypothesis& hyp, const RescoreConfig& cfg);

/// log sum over hypotheses of exp(hypothesis_log_score) under the DA's model.
double nbest_da_log_likelihood(const DaLmSet& set, const NBestList& nbest, std::size_t da,
                               const RescoreConfig& cfg);

enum class WordEvidence {
  true_words,  // transcribed words
  nbest,       // sum over the recognizer's n-best list
  one_best,    // rank-1 hypothesis treated as the words
};

std::string_view evidence_name(WordEvidence e);
WordEvidence parse_evidence(std::string_view text);

/// Word likelihood table for a conversation. Throws when the mode needs an
/// n-best list an utterance lacks.
LikelihoodTable word_likelihood_table(const DaLmSet& set, const Conversation& conv, WordEvidence mode,
                                      const RescoreConfig& cfg = {});

/// Forward-backward labels per conversation from word evidence alone.
std::vector<std::vector<std::size_t>> classify_from_words(const DaLmSet& set,
                                                          const DiscourseGrammar& grammar,
                                                          std::span<const Conversation> convs,
                                                          WordEvidence mode,
                                                          const RescoreConfig& cfg = {});

}  // namespace datag
