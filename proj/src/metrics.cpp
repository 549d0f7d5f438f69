#include "datag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "datag/da_models.hpp"
#include "datag/util.hpp"

namespace datag {

std::size_t EvalReport::reference_count(std::size_t d) const {
  std::size_t n = 0;
  for (auto c : confusion.at(d)) n += c;
  return n;
}

std::size_t EvalReport::predicted_count(std::size_t d) const {
  std::size_t n = 0;
  for (const auto& row : confusion) n += row.at(d);
  return n;
}

std::optional<double> EvalReport::precision(std::size_t d) const {
  const auto p = predicted_count(d);
  if (p == 0) return std::nullopt;
  return static_cast<double>(confusion[d][d]) / static_cast<double>(p);
}

std::optional<double> EvalReport::recall(std::size_t d) const {
  const auto r = reference_count(d);
  if (r == 0) return std::nullopt;
  return static_cast<double>(confusion[d][d]) / static_cast<double>(r);
}

EvalReport tagging_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> reference,
                            const TagSet& tagset) {
  if (predicted.size() != reference.size())
    throw Error("predicted and reference label sequences differ in length");
  EvalReport r;
  r.labels = tagset.labels();
  const std::size_t d = tagset.size();
  r.confusion.assign(d, std::vector<std::size_t>(d, 0));
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (predicted[i] >= d || reference[i] >= d) throw Error("label index outside the tag set");
    ++r.confusion[reference[i]][predicted[i]];
    r.correct += predicted[i] == reference[i];
  }
  r.total = reference.size();
  if (r.total == 0) return r;
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
  std::size_t best = 0;
  for (std::size_t k = 1; k < d; ++k) {
    if (r.reference_count(k) > r.reference_count(best)) best = k;
  }
  r.chance = static_cast<double>(r.reference_count(best)) / static_cast<double>(r.total);
  r.chance_label = r.labels[best];
  return r;
}

EvalReport tagging_accuracy(const std::vector<std::vector<std::size_t>>& predicted,
                            const std::vector<std::vector<std::size_t>>& reference, const TagSet& tagset) {
  if (predicted.size() != reference.size()) throw Error("predicted and reference conversation counts differ");
  std::vector<std::size_t> p, r;
  for (std::size_t c = 0; c < reference.size(); ++c) {
    if (predicted[c].size() != reference[c].size())
      throw Error("predicted and reference label sequences differ in length");
    p.insert(p.end(), predicted[c].begin(), predicted[c].end());
    r.insert(r.end(), reference[c].begin(), reference[c].end());
  }
  return tagging_accuracy(p, r, tagset);
}

namespace {

std::string opt(std::optional<double> v, int precision) {
  if (!v) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << *v;
  return s.str();
}

}  // namespace

void write_report_tsv(std::ostream& out, const EvalReport& report) {
  out << "# accuracy\t" << opt(report.accuracy, 4) << "\n# chance\t" << opt(report.chance, 4) << '\t'
      << report.chance_label << "\n# total\t" << report.total << '\n';
  out << "label\treference\tpredicted\tcorrect\tprecision\trecall\n";
  for (std::size_t d = 0; d < report.labels.size(); ++d) {
    out << report.labels[d] << '\t' << report.reference_count(d) << '\t' << report.predicted_count(d) << '\t'
        << report.confusion[d][d] << '\t' << opt(report.precision(d), 4) << '\t' << opt(report.recall(d), 4)
        << '\n';
  }
  out << "# confusion (rows reference, columns predicted)\n";
  out << "reference";
  for (const auto& l : report.labels) out << '\t' << l;
  out << '\n';
  for (std::size_t d = 0; d < report.labels.size(); ++d) {
    out << report.labels[d];
    for (auto c : report.confusion[d]) out << '\t' << c;
    out << '\n';
  }
}

void write_report_text(std::ostream& out, const EvalReport& report) {
  out << "utterances: " << report.total << '\n';
  out << "accuracy:   " << opt(100.0 * report.accuracy, 2) << "%\n";
  out << "chance:     " << opt(100.0 * report.chance, 2) << "% (" << report.chance_label << ")\n";
  out << std::left << std::setw(32) << "label" << std::right << std::setw(8) << "ref" << std::setw(8) << "pred"
      << std::setw(11) << "precision" << std::setw(9) << "recall" << '\n';
  for (std::size_t d = 0; d < report.labels.size(); ++d) {
    if (report.reference_count(d) == 0 && report.predicted_count(d) == 0) continue;
    auto pct = [](std::optional<double> v) { return v ? std::optional<double>(100.0 * *v) : std::nullopt; };
    out << std::left << std::setw(32) << report.labels[d] << std::right << std::setw(8)
        << report.reference_count(d) << std::setw(8) << report.predicted_count(d) << std::setw(11)
        << opt(pct(report.precision(d)), 1) << std::setw(9) << opt(pct(report.recall(d)), 1) << '\n';
  }
}

std::string_view classifier_name(BinaryClassifier c) {
  switch (c) {
    case BinaryClassifier::words:
      return "words";
    case BinaryClassifier::prosody:
      return "prosody";
    case BinaryClassifier::combined:
      return "combined";
  }
  return "?";
}

std::optional<double> BinaryTaskResult::accuracy_of(BinaryClassifier c) const {
  for (const auto& [k, a] : accuracy) {
    if (k == c) return a;
  }
  return std::nullopt;
}

BinaryTaskResult focused_binary_task(std::span<const Utterance> utterances, const std::string& first,
                                     const std::string& second, const BinaryTaskConfig& config) {
  if (first == second) throw Error("the two classes of a binary task must differ");
  std::vector<std::string> labels;
  labels.reserve(utterances.size());
  for (const auto& u : utterances) labels.push_back(u.da_label.value_or(""));
  for (const auto& c : {first, second}) {
    if (std::find(labels.begin(), labels.end(), c) == labels.end())
      throw Error("class '" + c + "' does not occur in the data");
  }
  const std::vector<std::string> classes{first, second};
  const auto chosen = downsample_indices(labels, classes, config.seed);

  // Split each class in half: the first half trains, the second tests.
  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> train, test;
  for (const auto& c : classes) {
    std::vector<std::size_t> members;
    for (auto i : chosen) {
      if (labels[i] == c) members.push_back(i);
    }
    rng.shuffle(members);
    const std::size_t half = members.size() / 2;
    train.insert(train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(half));
    test.insert(test.end(), members.begin() + static_cast<std::ptrdiff_t>(half), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  if (train.empty() || test.empty()) throw Error("too little data for a binary task");

  BinaryTaskResult result;
  result.first = first;
  result.second = second;
  result.train_size = train.size();
  result.test_size = test.size();
  const TagSet tagset(classes);

  auto wants = [&](BinaryClassifier c) {
    return std::find(config.classifiers.begin(), config.classifiers.end(), c) != config.classifiers.end();
  };
  const bool use_words = wants(BinaryClassifier::words) || wants(BinaryClassifier::combined);
  const bool use_prosody = wants(BinaryClassifier::prosody) || wants(BinaryClassifier::combined);

  DaLmSet lms;
  if (use_words) {
    Conversation pool;
    pool.id = "train";
    for (auto i : train) pool.utterances.push_back(utterances[i]);
    lms = DaLmSet::train(std::span<const Conversation>(&pool, 1), tagset, config.lm_order, config.lm_options);
  }
  DecisionTree tree;
  if (use_prosody) {
    std::vector<ProsodicFeatureVector> fv;
    std::vector<std::string> y;
    for (auto i : train) {
      if (!utterances[i].prosody) throw Error("prosody classifier needs prosodic features for every utterance");
      fv.push_back(*utterances[i].prosody);
      y.push_back(labels[i]);
    }
    tree = DecisionTree::train(fv, y, config.tree, classes);
  }

  for (auto c : config.classifiers) {
    std::size_t correct = 0;
    for (auto i : test) {
      const auto& u = utterances[i];
      std::vector<double> score(2, 0.0);
      if (c != BinaryClassifier::prosody) {
        for (std::size_t d = 0; d < 2; ++d) score[d] += true_word_log_likelihood(lms, u.words, d);
      }
      if (c != BinaryClassifier::words) {
        if (!u.prosody) throw Error("prosody classifier needs prosodic features for every utterance");
        const auto scaled = tree_scaled_likelihood(tree, *u.prosody, tree.priors(), tagset);
        for (std::size_t d = 0; d < 2; ++d) score[d] += std::log(scaled[d]);
      }
      const std::size_t pred = score[1] > score[0] ? 1 : 0;
      correct += classes[pred] == labels[i];
    }
    result.accuracy.emplace_back(c, static_cast<double>(correct) / static_cast<double>(test.size()));
  }
  return result;
}

void write_binary_task(std::ostream& out, const BinaryTaskResult& result) {
  out << result.first << " vs " << result.second << " (train " << result.train_size << ", test "
      << result.test_size << ", chance 50%)\n";
  for (const auto& [c, a] : result.accuracy)
    out << std::left << std::setw(10) << classifier_name(c) << std::right << std::fixed << std::setprecision(1)
        << 100.0 * a << "%\n";
}

}  // namespace datag
