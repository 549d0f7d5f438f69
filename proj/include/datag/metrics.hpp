#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "datag/corpus.hpp"
#include "datag/ngram.hpp"
#include "datag/tree.hpp"

namespace datag {

struct EvalReport {
  std::vector<std::string> labels;
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  /// Relative frequency of the most frequent reference label.
  double chance = 0.0;
  std::string chance_label;
  std::vector<std::vector<std::size_t>> confusion;  // [reference][predicted]

  std::size_t reference_count(std::size_t d) const;
  std::size_t predicted_count(std::size_t d) const;
  /// Undefined when the label is never predicted.
  std::optional<double> precision(std::size_t d) const;
  /// Undefined when the label never occurs in the reference.
  std::optional<double> recall(std::size_t d) const;
};

/// Exact-match accuracy of aligned label sequences (tag-set indices).
EvalReport tagging_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> reference,
                            const TagSet& tagset);
EvalReport tagging_accuracy(const std::vector<std::vector<std::size_t>>& predicted,
                            const std::vector<std::vector<std::size_t>>& reference, const TagSet& tagset);

/// label TAB reference TAB predicted TAB correct TAB precision TAB recall, then
/// the confusion matrix.
void write_report_tsv(std::ostream& out, const EvalReport& report);
void write_report_text(std::ostream& out, const EvalReport& report);

enum class BinaryClassifier { words, prosody, combined };
std::string_view classifier_name(BinaryClassifier c);

struct BinaryTaskConfig {
  std::vector<BinaryClassifier> classifiers{BinaryClassifier::words, BinaryClassifier::prosody,
                                            BinaryClassifier::combined};
  int lm_order = 3;
  NGramOptions lm_options;
  TreeConfig tree;
  std::uint64_t seed = 0;
};

struct BinaryTaskResult {
  std::string first, second;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<std::pair<BinaryClassifier, double>> accuracy;

  std::optional<double> accuracy_of(BinaryClassifier c) const;
};

/// Two-way discrimination on a balanced subset: both classes are downsampled
/// to the same size, each class is split in half for training and testing,
/// and every requested classifier is trained on the first halves and scored
/// on the second. The combined classifier adds the word log-likelihood and the
/// log scaled tree likelihood.
BinaryTaskResult focused_binary_task(std::span<const Utterance> utterances, const std::string& first,
                                     const std::string& second, const BinaryTaskConfig& config = {});

void write_binary_task(std::ostream& out, const BinaryTaskResult& result);

}  // namespace datag
