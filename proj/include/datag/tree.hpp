#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "datag/corpus.hpp"
#include "datag/hmm.hpp"

namespace datag {

struct TreeConfig {
  std::size_t min_leaf = 5;
  std::size_t max_depth = 8;
  /// A split must reduce Gini impurity by more than this.
  double min_gain = 0.0;
  /// Added to every class count when leaf distributions are estimated.
  double leaf_smoothing = 0.0;
};

/// Binary classification tree over prosodic features, grown greedily on Gini
/// impurity. Leaves hold class posteriors.
///
/// Continuous splits send value <= threshold left. Categorical splits send a
/// level set left and the complementary set right. Samples missing the split
/// feature follow the child that received more training samples; the same
/// direction is used for categorical levels the split never saw.
class DecisionTree {
 public:
  struct Node {
    bool leaf = true;
    std::size_t feature = 0;  // index into the tree's feature list
    double threshold = 0.0;
    std::vector<std::string> left_levels, right_levels;
    bool missing_left = true;
    std::size_t left = 0, right = 0;  // child node indices
    std::vector<double> distribution;  // leaves only
  };

  DecisionTree() = default;

  /// `classes` fixes the class order; when empty the distinct labels in sorted
  /// order are used. Single-class data yields one leaf and a warning.
  static DecisionTree train(std::span<const ProsodicFeatureVector> features,
                            std::span<const std::string> labels, const TreeConfig& config = {},
                            std::span<const std::string> classes = {},
                            std::vector<std::string>* warnings = nullptr);

  static DecisionTree read(std::istream& in, const std::string& source = "<tree>");
  static DecisionTree load(const std::filesystem::path& path);
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  const std::vector<std::string>& classes() const { return classes_; }
  /// Class frequencies of the training data.
  const std::vector<double>& priors() const { return priors_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::vector<FeatureKind>& feature_kinds() const { return feature_kinds_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& root() const { return nodes_.front(); }
  std::size_t depth() const;
  std::size_t leaf_count() const;

  /// Leaf distribution reached by `fv`. Throws when a split feature is absent
  /// from the vector's schema or has a different kind.
  std::vector<double> posterior(const ProsodicFeatureVector& fv) const;
  std::size_t predict(const ProsodicFeatureVector& fv) const;

  bool operator==(const DecisionTree&) const;

 private:
  std::size_t leaf_for(const ProsodicFeatureVector& fv) const;

  std::vector<std::string> classes_;
  std::vector<double> priors_;
  std::vector<std::string> feature_names_;
  std::vector<FeatureKind> feature_kinds_;
  std::vector<Node> nodes_;
};

/// posterior / prior per class, normalized to sum to one. Throws when a class
/// with positive posterior has a zero prior.
std::vector<double> bayes_scaled(std::span<const double> posterior, std::span<const double> priors);

/// Scaled likelihoods P(F | U) up to a constant, per tag-set DA. A collapsed
/// class passes its score to every member DA; DAs no tree class covers score
/// zero. Normalized to sum to one over the DAs.
std::vector<double> tree_scaled_likelihood(const DecisionTree& tree, const ProsodicFeatureVector& fv,
                                           std::span<const double> priors, const TagSet& tagset);

/// Log scaled likelihood table for a conversation. Utterances without prosody
/// get an all-zero row.
LikelihoodTable prosody_likelihood_table(const DecisionTree& tree, const Conversation& conv,
                                         const TagSet& tagset, std::span<const double> priors);

}  // namespace datag
