#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace datag {

inline constexpr std::string_view kStartToken = "<start>";
inline constexpr std::string_view kEndToken = "<end>";
inline constexpr std::string_view kUnkToken = "<unk>";

/// Token inventory of a language model. Ids follow the byte order of the token
/// strings, so id order and ARPA output order agree.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  /// -1 when absent.
  int find(std::string_view token) const;
  /// Id used when scoring `token` as a prediction: unknown tokens and the
  /// start marker map to <unk>, or -1 when the vocabulary has no <unk>.
  int predicted_id(std::string_view token) const;
  /// Id used for `token` inside a context: unknown tokens map to <unk> (or -1).
  int context_id(std::string_view token) const;

  int start_id() const { return start_; }
  int end_id() const { return end_; }
  int unk_id() const { return unk_; }
  bool has_sentence_markers() const { return start_ >= 0 && end_ >= 0; }
  /// Every token except <start> can be predicted.
  bool predictable(int id) const { return id >= 0 && id != start_ && id < static_cast<int>(size()); }
  std::vector<int> predictable_ids() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int start_ = -1;
  int end_ = -1;
  int unk_ = -1;
};

/// Conditional token distribution over a fixed vocabulary.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual int order() const = 0;
  virtual const Vocabulary& vocabulary() const = 0;
  /// Natural-log P(token | context). The context is truncated to the last
  /// order-1 ids; -1 ids never match a stored context.
  virtual double cond_log_prob_ids(std::span<const int> context, int token) const = 0;

  double cond_log_prob(std::span<const std::string> context, std::string_view token) const;
  /// Log probability of a whole sentence: padded with order-1 <start> tokens
  /// and closed by <end> when the vocabulary has sentence markers.
  double sentence_log_prob(std::span<const std::string> words) const;
  /// Number of predicted tokens sentence_log_prob sums over.
  std::size_t sentence_token_count(std::span<const std::string> words) const;
};

struct NGramOptions {
  /// Pad sequences with <start>/<end>.
  bool sentence_markers = true;
  /// Add <unk>; it only receives probability through the order-1 backoff.
  bool unknown_token = true;
};

/// Backoff n-gram model with Witten-Bell discounting and Katz-style backoff.
///
/// For a context h with N(h) observed continuation tokens of T(h) distinct
/// types, a seen continuation w gets c(h,w) / (N + T). The reserved mass
/// T / (N + T) goes to the unseen continuations in proportion to the next
/// shorter context's distribution, renormalized over the unseen set; at order
/// 1 the shorter distribution is uniform over the vocabulary. When a context
/// has no unseen continuation the reserved mass is spread over the whole
/// vocabulary by the shorter distribution instead, so every context stays
/// normalized.
class NGramModel final : public LanguageModel {
 public:
  struct ContextNode {
    std::map<int, double> log_probs;  // explicit continuations
    double log_bow = 0.0;
    double reserved = -1.0;  // Witten-Bell T/(N+T); negative when not trained here
  };

  NGramModel() = default;

  static NGramModel train(std::span<const std::vector<std::string>> sequences, int order,
                          std::span<const std::string> vocabulary, NGramOptions options = {});
  /// Order-1 model giving every predictable token the same probability.
  static NGramModel uniform(std::span<const std::string> tokens, NGramOptions options = {});
  /// Backoff model approximating w * P_a + (1 - w) * P_b. Every context stored
  /// in either model gets the exact mixture on the union of their explicit
  /// continuations; other tokens back off to the merged shorter context, with
  /// backoff weights recomputed so each context stays normalized. Both models
  /// must share one vocabulary.
  static NGramModel merge(const NGramModel& a, const NGramModel& b, double weight);

  static NGramModel read_arpa(std::istream& in, const std::string& source = "<arpa>");
  static NGramModel load(const std::filesystem::path& path);
  void write_arpa(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  int order() const override { return order_; }
  const Vocabulary& vocabulary() const override { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocabulary_ptr() const { return vocab_; }
  double cond_log_prob_ids(std::span<const int> context, int token) const override;

  /// Witten-Bell reserved mass of a trained context, if that context was seen.
  std::optional<double> reserved_mass(std::span<const std::string> context) const;
  /// All contexts holding explicit probabilities or backoff weights.
  std::vector<std::vector<int>> stored_contexts() const;
  /// Number of n-gram entries of order m written to an ARPA file.
  std::size_t arpa_entry_count(int m) const;

 private:
  struct SeqLess {
    using is_transparent = void;
    bool operator()(std::span<const int> a, std::span<const int> b) const;
    bool operator()(const std::vector<int>& a, const std::vector<int>& b) const {
      return (*this)(std::span<const int>(a), std::span<const int>(b));
    }
    bool operator()(const std::vector<int>& a, std::span<const int> b) const {
      return (*this)(std::span<const int>(a), b);
    }
    bool operator()(std::span<const int> a, const std::vector<int>& b) const {
      return (*this)(a, std::span<const int>(b));
    }
  };
  using ContextTable = std::map<std::vector<int>, ContextNode, SeqLess>;

  std::vector<std::vector<std::vector<int>>> arpa_entries() const;

  int order_ = 0;
  std::shared_ptr<const Vocabulary> vocab_;
  // contexts_[L] holds contexts of length L.
  std::vector<ContextTable> contexts_;
};

/// Per-query linear interpolation w * P_a + (1 - w) * P_b.
class InterpolatedModel final : public LanguageModel {
 public:
  InterpolatedModel(std::shared_ptr<const LanguageModel> a, std::shared_ptr<const LanguageModel> b,
                    double weight);

  int order() const override;
  const Vocabulary& vocabulary() const override { return a_->vocabulary(); }
  double cond_log_prob_ids(std::span<const int> context, int token) const override;
  double weight() const { return weight_; }
  const LanguageModel& first() const { return *a_; }
  const LanguageModel& second() const { return *b_; }

 private:
  std::shared_ptr<const LanguageModel> a_;
  std::shared_ptr<const LanguageModel> b_;
  double weight_;
};

std::shared_ptr<const InterpolatedModel> interpolate(std::shared_ptr<const LanguageModel> a,
                                                     std::shared_ptr<const LanguageModel> b,
                                                     double weight);

struct CorpusScore {
  double log_prob = 0.0;
  std::size_t tokens = 0;
};
CorpusScore score_corpus(const LanguageModel& model,
                         std::span<const std::vector<std::string>> sequences);
/// exp(-log P / tokens), counting <end> and not the <start> padding.
double perplexity(const LanguageModel& model, std::span<const std::vector<std::string>> sequences);

/// Interpolation weight for `a` maximizing held-out likelihood of the mixture
/// with `b`, by EM from `initial` until the update moves less than `tolerance`.
double fit_interp_weight(const LanguageModel& a, const LanguageModel& b,
                         std::span<const std::vector<std::string>> heldout,
                         double initial = 0.5, double tolerance = 1e-4, int max_iterations = 100);

}  // namespace datag
