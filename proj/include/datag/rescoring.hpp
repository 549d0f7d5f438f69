#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "datag/corpus.hpp"
#include "datag/da_models.hpp"
#include "datag/ngram.hpp"

namespace datag {

enum class RescoreMethod {
  baseline,               // one LM for every utterance
  one_best,               // LM of the most probable DA
  mixture_of_posteriors,  // mixture of per-DA recognizer posteriors
  mixture_of_lms,         // posterior-weighted sentence-level LM mixture
  oracle,                 // LM of the hand-labeled DA
};

std::string_view method_name(RescoreMethod m);
RescoreMethod parse_method(std::string_view text);
std::vector<RescoreMethod> all_methods();

/// Hypotheses in decreasing score order. Equal scores are ordered by their
/// words, so the ranking does not depend on the order of the input list.
struct HypothesisRanking {
  std::vector<std::size_t> order;
  std::vector<double> scores;  // indexed like the input list
  std::size_t best() const { return order.front(); }
};

HypothesisRanking rank_hypotheses(const NBestList& nbest, std::vector<double> scores);

/// a / lambda + log P(W) - (mu / lambda) |W| under one LM.
std::vector<double> lm_scores(const NBestList& nbest, const LanguageModel& lm, const RescoreConfig& cfg);

/// a / lambda + log sum_U P(U | E) P(W | U) - (mu / lambda) |W|.
std::vector<double> mixture_of_lms_scores(const NBestList& nbest, const DaLmSet& set,
                                          std::span<const double> posterior, const RescoreConfig& cfg);

enum class PosteriorNormalizer {
  per_da,  // each DA's hypothesis posteriors normalized by that DA's own total
  shared,  // one DA-independent normalizer for all DAs
};

/// log sum_U P(U | E) P(W | A, U). With the shared normalizer this differs
/// from mixture_of_lms_scores by a constant.
std::vector<double> mixture_of_posteriors_scores(const NBestList& nbest, const DaLmSet& set,
                                                 std::span<const double> posterior, const RescoreConfig& cfg,
                                                 PosteriorNormalizer normalizer = PosteriorNormalizer::per_da);

struct WerResult {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  /// Undefined for an empty reference.
  std::optional<double> rate() const;
  WerResult& operator+=(const WerResult& o);
  bool operator==(const WerResult&) const = default;
};

/// Minimum edit distance alignment with unit costs. Among minimal alignments
/// the one with the fewest insertions plus deletions is reported.
WerResult wer(std::span<const std::string> reference, std::span<const std::string> hypothesis);

struct UtteranceRescore {
  UtteranceKey key;
  std::optional<std::size_t> da;  // reference label, when known
  std::vector<std::string> reference;
  bool skipped = false;           // no n-best list
  std::vector<std::vector<std::string>> chosen;  // per method
  std::vector<WerResult> errors;                 // per method
};

struct MethodSummary {
  RescoreMethod method;
  WerResult wer;
  /// Per-token perplexity of the reference words; absent for
  /// mixture_of_posteriors, which defines no LM.
  std::optional<double> perplexity;
};

struct RescoreResult {
  std::vector<RescoreMethod> methods;
  std::vector<UtteranceRescore> utterances;
  std::vector<MethodSummary> summaries;  // in `methods` order
  std::size_t skipped = 0;

  std::size_t method_index(RescoreMethod m) const;
};

/// Rescores every utterance's n-best list with each method. `posteriors`
/// holds P(U_i | E) per conversation and utterance; `set` should be the
/// baseline-smoothed DA models. Utterances without an n-best list are
/// skipped and counted. The oracle method requires reference labels.
RescoreResult rescore_corpus(std::span<const Conversation> convs, const DaLmSet& set,
                             const LanguageModel& baseline,
                             std::span<const std::vector<std::vector<double>>> posteriors,
                             std::span<const RescoreMethod> methods, const RescoreConfig& cfg = {});

struct PerDaRow {
  std::string da;
  std::size_t utterances = 0;
  std::size_t words = 0;
  double word_share = 0.0;  // percent of reference words
  std::optional<double> baseline_wer;
  std::optional<double> method_wer;
  std::optional<double> delta;  // method - baseline, percentage points
};

/// WER by reference DA for `method` against `reference_method`, sorted by delta
/// (largest reduction first). Rates are in percent.
std::vector<PerDaRow> per_da_wer_report(const RescoreResult& result, const TagSet& tagset,
                                        RescoreMethod method = RescoreMethod::oracle,
                                        RescoreMethod reference_method = RescoreMethod::baseline);

void write_rescore_summary(std::ostream& out, const RescoreResult& result, bool tsv);
void write_per_da_report(std::ostream& out, std::span<const PerDaRow> rows, bool tsv);
/// conv TAB index TAB method TAB words, one line per utterance and method.
void write_rescore_choices(std::ostream& out, const RescoreResult& result);

}  // namespace datag
