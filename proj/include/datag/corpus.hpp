#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace datag {

enum class Speaker : std::uint8_t { A = 0, B = 1 };

inline Speaker other_speaker(Speaker s) { return s == Speaker::A ? Speaker::B : Speaker::A; }
inline char speaker_char(Speaker s) { return s == Speaker::A ? 'A' : 'B'; }
Speaker parse_speaker(std::string_view text);

/// Ordered inventory of dialogue act labels.
///
/// Labels are single tokens (no whitespace, no middle dot) because they appear
/// inside n-gram files. A tag set may also carry collapsed classes: a name
/// standing for several member labels, used when a classifier only separates a
/// few frequent labels from an "everything else" bucket.
class TagSet {
 public:
  TagSet() = default;
  explicit TagSet(std::vector<std::string> labels,
                  std::map<std::string, std::vector<std::string>> collapsed = {});

  /// The 42-label SWBD-DAMSL inventory, most frequent first.
  static TagSet swbd_damsl();

  static TagSet parse(std::istream& in, const std::string& source = "<tagset>");
  static TagSet read(const std::filesystem::path& path);
  void write(std::ostream& out) const;

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> find(std::string_view label) const;
  /// Throws Error for an unknown label.
  std::size_t index(std::string_view label) const;
  bool contains(std::string_view label) const { return find(label).has_value(); }

  const std::map<std::string, std::vector<std::string>>& other_class_members() const {
    return collapsed_;
  }
  /// Copy of this tag set where every label outside `keep` is a member of the
  /// collapsed class `name`.
  TagSet with_collapsed_other(std::span<const std::string> keep, const std::string& name) const;
  /// Tag-set indices covered by a classifier class: the members of a collapsed
  /// class, or the label itself. Empty when the name is unknown.
  std::vector<std::size_t> expand(std::string_view class_name) const;

  bool operator==(const TagSet& other) const {
    return labels_ == other.labels_ && collapsed_ == other.collapsed_;
  }

 private:
  std::vector<std::string> labels_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::map<std::string, std::vector<std::string>> collapsed_;
};

enum class FeatureKind : std::uint8_t { continuous, categorical };

/// Column layout of a prosodic feature table. Categorical values are stored as
/// codes into `levels[feature]`.
struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;
  std::vector<std::vector<std::string>> levels;

  std::size_t size() const { return names.size(); }
  std::optional<std::size_t> find(std::string_view name) const;
  std::optional<std::size_t> level_code(std::size_t feature, std::string_view level) const;
  bool operator==(const FeatureSchema&) const = default;
};

class ProsodicFeatureVector {
 public:
  ProsodicFeatureVector() = default;
  ProsodicFeatureVector(std::shared_ptr<const FeatureSchema> schema,
                        std::vector<std::optional<double>> values);

  const FeatureSchema& schema() const { return *schema_; }
  const std::shared_ptr<const FeatureSchema>& schema_ptr() const { return schema_; }
  std::size_t size() const { return values_.size(); }
  std::optional<double> value(std::size_t i) const { return values_.at(i); }
  const std::vector<std::optional<double>>& values() const { return values_; }
  /// Level name of a categorical feature, empty when missing.
  std::optional<std::string> category(std::size_t i) const;

  bool operator==(const ProsodicFeatureVector& other) const;

 private:
  std::shared_ptr<const FeatureSchema> schema_;
  std::vector<std::optional<double>> values_;
};

struct Hypothesis {
  std::vector<std::string> words;
  double acoustic_log_score = 0.0;  // natural log
  bool operator==(const Hypothesis&) const = default;
};

/// Recognizer hypotheses for one utterance in rank order. Scoring never
/// depends on the order.
struct NBestList {
  std::vector<Hypothesis> hypotheses;
  std::size_t size() const { return hypotheses.size(); }
  bool empty() const { return hypotheses.empty(); }
  bool operator==(const NBestList&) const = default;
};

struct Utterance {
  std::string conversation_id;
  std::size_t index = 0;
  Speaker speaker = Speaker::A;
  std::optional<std::string> da_label;
  std::vector<std::string> words;
  std::optional<ProsodicFeatureVector> prosody;
  std::optional<NBestList> nbest;

  bool operator==(const Utterance&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  bool operator==(const Conversation&) const = default;
};

using UtteranceKey = std::pair<std::string, std::size_t>;

// Conversation files: conv_id TAB index TAB speaker TAB da_label TAB words.
// An empty label field means unlabeled.
std::vector<Conversation> parse_conversations(std::istream& in, const TagSet& tagset,
                                              const std::string& source = "<conversations>");
std::vector<Conversation> read_conversations(const std::filesystem::path& path,
                                             const TagSet& tagset);
void write_conversations(std::ostream& out, std::span<const Conversation> convs);

// N-best files: conv_id TAB index TAB rank TAB acoustic_log_score TAB words.
using NBestTable = std::map<UtteranceKey, NBestList>;
/// `max_size` keeps the best-ranked entries per utterance; 0 keeps all.
NBestTable parse_nbest(std::istream& in, const std::string& source = "<nbest>",
                       std::size_t max_size = 0);
NBestTable read_nbest(const std::filesystem::path& path, std::size_t max_size = 0);
void write_nbest(std::ostream& out, std::span<const Conversation> convs);
void attach_nbest(std::vector<Conversation>& convs, const NBestTable& table);

// Prosody files: header of feature names, then conv_id TAB index TAB values,
// NA for missing. A header name ending in ":cat" forces a categorical column;
// otherwise a column is categorical when any value is non-numeric.
struct ProsodyTable {
  std::shared_ptr<const FeatureSchema> schema;
  std::map<UtteranceKey, ProsodicFeatureVector> rows;
};
ProsodyTable parse_prosody(std::istream& in, const std::string& source = "<prosody>");
ProsodyTable read_prosody(const std::filesystem::path& path);
/// Writes every utterance carrying prosody; all must share one schema.
void write_prosody(std::ostream& out, std::span<const Conversation> convs);
void attach_prosody(std::vector<Conversation>& convs, const ProsodyTable& table);

/// Every conversation followed by a copy with speakers A and B exchanged;
/// originals first, then the swapped copies in the same order.
std::vector<Conversation> symmetrize_speakers(std::span<const Conversation> convs);

/// Positions selected so that each class appears exactly min-class-count
/// times, returned in ascending order. Labels outside `classes` are dropped.
std::vector<std::size_t> downsample_indices(std::span<const std::string> labels,
                                            std::span<const std::string> classes,
                                            std::uint64_t seed);
std::vector<Utterance> downsample_uniform(std::span<const Utterance> utts,
                                          std::span<const std::string> classes,
                                          std::uint64_t seed);

/// Random two-way split at conversation granularity; the first half gets
/// floor(n/2) conversations.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> jackknife_indices(std::size_t n,
                                                                                std::uint64_t seed);
std::pair<std::vector<Conversation>, std::vector<Conversation>> jackknife_split(
    std::span<const Conversation> convs, std::uint64_t seed);

std::vector<Utterance> flatten(std::span<const Conversation> convs);

}  // namespace datag
