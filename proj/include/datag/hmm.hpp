#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "datag/corpus.hpp"
#include "datag/discourse.hpp"

namespace datag {

struct EvidenceSources {
  bool words = false;
  bool acoustics = false;
  bool prosody = false;
  bool operator==(const EvidenceSources&) const = default;
};

/// Per-utterance DA log-likelihoods log P(E_i | U_i) for one conversation,
/// defined up to a DA-independent constant per utterance.
struct LikelihoodTable {
  std::string conversation_id;
  std::vector<Speaker> speakers;
  std::vector<std::vector<double>> log_likelihoods;  // [utterance][da]
  EvidenceSources provenance;

  std::size_t size() const { return log_likelihoods.size(); }
  /// Throws when rows have the wrong width or hold NaN / +inf.
  void validate(std::size_t num_labels) const;
};

/// Empty table for a conversation: speakers filled in, all entries zero.
LikelihoodTable make_table(const Conversation& conv, std::size_t num_labels);

/// Debug dump: conv TAB index TAB da TAB loglik.
void write_table_tsv(std::ostream& out, const LikelihoodTable& table, const TagSet& tagset);

struct CombinationWeights {
  double alpha = 1.0;  // prosody exponent
  double beta = 1.0;   // dynamic range of the combined likelihood
  bool operator==(const CombinationWeights&) const = default;
};

/// beta * (words + alpha * prosody); beta * words when prosody is absent or
/// alpha is zero.
LikelihoodTable combine_likelihoods(const LikelihoodTable& words, const LikelihoodTable* prosody,
                                    CombinationWeights weights);

struct ViterbiResult {
  std::vector<std::size_t> labels;
  double log_score = 0.0;  // log P(U) + sum log P(E_i | U_i)
};

/// Most probable DA sequence. Ties go to the lowest DA index.
ViterbiResult viterbi_decode(const DiscourseGrammar& grammar, const LikelihoodTable& table);

enum class PosteriorMode {
  offline,  // whole conversation as evidence
  online,   // utterances up to and including i only
};

/// Per-utterance posteriors P(U_i = u | E); each row sums to one.
std::vector<std::vector<double>> forward_backward(const DiscourseGrammar& grammar,
                                                  const LikelihoodTable& table,
                                                  PosteriorMode mode = PosteriorMode::offline);

/// Row-wise argmax, lowest index on ties.
std::vector<std::size_t> argmax_labels(const std::vector<std::vector<double>>& posteriors);

struct BruteForceResult {
  std::vector<std::size_t> labels;
  double log_score = 0.0;
  std::vector<std::vector<double>> posteriors;
};

/// Exhaustive enumeration of all label sequences; a reference for the dynamic
/// programming decoders. Refuses instances with more than 10^6 sequences.
BruteForceResult brute_force_decode(const DiscourseGrammar& grammar, const LikelihoodTable& table);

// ---------------------------------------------------------------------------
// Weight tuning

enum class DecodeMethod { forward_backward, viterbi };

std::vector<std::size_t> decode_labels(const DiscourseGrammar& grammar, const LikelihoodTable& table,
                                       DecodeMethod method = DecodeMethod::forward_backward);

struct TuningItem {
  LikelihoodTable words;
  std::optional<LikelihoodTable> prosody;
  std::vector<std::size_t> labels;
};

struct WeightGrid {
  double alpha_min = 0.0, alpha_max = 2.0, alpha_step = 0.1;
  double beta_min = 0.1, beta_max = 2.0, beta_step = 0.1;
  std::vector<double> alphas() const;
  std::vector<double> betas() const;
};

struct WeightSearchResult {
  CombinationWeights weights;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};

/// Accuracy of forward-backward decoding on a subset of items with fixed weights.
WeightSearchResult evaluate_weights(const DiscourseGrammar& grammar, std::span<const TuningItem> items,
                                    std::span<const std::size_t> subset, CombinationWeights weights);

/// Grid point with the best accuracy on `subset`; ties go to the smallest
/// alpha, then the smallest beta.
WeightSearchResult grid_search_weights(const DiscourseGrammar& grammar,
                                       std::span<const TuningItem> items,
                                       std::span<const std::size_t> subset, const WeightGrid& grid);

struct JackknifeResult {
  std::array<std::vector<std::size_t>, 2> halves;
  std::array<WeightSearchResult, 2> tuned;    // best weights on each half
  std::array<WeightSearchResult, 2> heldout;  // those weights on the other half
  std::vector<std::vector<std::size_t>> predictions;  // per item, decoded with the other half's weights
  std::size_t correct() const { return heldout[0].correct + heldout[1].correct; }
  std::size_t total() const { return heldout[0].total + heldout[1].total; }
  double accuracy() const {
    return total() ? static_cast<double>(correct()) / static_cast<double>(total()) : 0.0;
  }
};

/// Twofold jackknife: tune on each half, evaluate on the other, aggregate.
JackknifeResult tune_alpha_beta(const DiscourseGrammar& grammar, std::span<const TuningItem> items,
                                const std::pair<std::vector<std::size_t>, std::vector<std::size_t>>& halves,
                                const WeightGrid& grid = {});

}  // namespace datag
