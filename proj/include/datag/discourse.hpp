#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "datag/corpus.hpp"
#include "datag/ngram.hpp"

namespace datag {

/// What the discourse n-gram conditions on.
///   U_only     DA labels alone.
///   U_and_T    joint DA x speaker events.
///   U_given_T  joint events, renormalized over DAs for the known speaker.
enum class GrammarVariant { U_only, U_and_T, U_given_T };

std::string_view variant_name(GrammarVariant v);
GrammarVariant parse_variant(std::string_view text);

struct DaEvent {
  std::size_t da = 0;
  Speaker speaker = Speaker::A;
  bool operator==(const DaEvent&) const = default;
};

/// Separator between DA and speaker in joint event tokens (U+00B7).
inline constexpr std::string_view kEventSeparator = "\xC2\xB7";

/// Prior over DA sequences: an n-gram over DA (or DA x speaker) events, or a
/// uniform distribution when no grammar is used (order 0).
class DiscourseGrammar {
 public:
  DiscourseGrammar() = default;

  /// Trains on one event sequence per conversation. Conversations should
  /// already be speaker-symmetrized.
  static DiscourseGrammar train(std::span<const Conversation> convs, const TagSet& tagset,
                                int order, GrammarVariant variant);
  /// Uniform prior: every DA equally likely at every position.
  static DiscourseGrammar none(const TagSet& tagset, GrammarVariant variant);
  static DiscourseGrammar from_model(std::shared_ptr<const NGramModel> model, const TagSet& tagset,
                                     GrammarVariant variant);

  static DiscourseGrammar read(std::istream& in, const TagSet& tagset,
                               const std::string& source = "<grammar>");
  static DiscourseGrammar load(const std::filesystem::path& path, const TagSet& tagset);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  GrammarVariant variant() const { return variant_; }
  /// n-gram order; 0 for the uniform prior.
  int order() const { return model_ ? model_->order() : 0; }
  /// Number of preceding events a transition depends on.
  std::size_t context_length() const {
    return model_ ? static_cast<std::size_t>(model_->order() - 1) : 0;
  }
  const TagSet& tagset() const { return tagset_; }
  std::size_t num_labels() const { return tagset_.size(); }
  const NGramModel* model() const { return model_.get(); }

  std::string event_token(DaEvent e) const;

  /// log P(current | history) under the variant's conditioning. For U_given_T
  /// the speaker of `current` is given, so the result is normalized over DAs.
  double transition_log_prob(std::span<const DaEvent> history, DaEvent current) const;
  /// transition_log_prob for every DA at once, written to `out` (size = tag set).
  void transition_row(std::span<const DaEvent> history, Speaker current, std::span<double> out) const;
  /// log P(<end> | history). Zero for U_given_T and for the uniform prior,
  /// where the conversation length is treated as given.
  double end_log_prob(std::span<const DaEvent> history) const;

 private:
  void bind_tokens();
  std::vector<int> context_ids(std::span<const DaEvent> history) const;

  GrammarVariant variant_ = GrammarVariant::U_only;
  TagSet tagset_;
  std::shared_ptr<const NGramModel> model_;
  // Model token id per speaker and DA.
  std::vector<int> ids_[2];
};

/// Events of a labeled conversation; throws for unlabeled utterances.
std::vector<DaEvent> conversation_events(const Conversation& conv, const TagSet& tagset);

/// Per-event perplexity of the DA labels (the <end> event is not counted).
double discourse_perplexity(const DiscourseGrammar& grammar, std::span<const Conversation> convs);

}  // namespace datag
