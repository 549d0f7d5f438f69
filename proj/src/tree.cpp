#include "datag/tree.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "datag/util.hpp"

namespace datag {

namespace {

double gini(std::span<const double> counts, double n) {
  if (n <= 0.0) return 0.0;
  double s = 0.0;
  for (double c : counts) s += (c / n) * (c / n);
  return 1.0 - s;
}

struct Split {
  double gain = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::vector<std::size_t> left_codes, right_codes;
  bool missing_left = true;
};

class Builder {
 public:
  Builder(const std::vector<std::vector<std::optional<double>>>& x, const std::vector<std::size_t>& y,
          const FeatureSchema& schema, std::size_t num_classes, const TreeConfig& cfg,
          std::vector<DecisionTree::Node>& nodes)
      : x_(x), y_(y), schema_(schema), k_(num_classes), cfg_(cfg), nodes_(nodes) {}

  std::size_t build(const std::vector<std::size_t>& idx, std::size_t depth) {
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    auto counts = class_counts(idx);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
    std::optional<Split> split;
    if (!pure && depth < cfg_.max_depth && idx.size() >= 2 * std::max<std::size_t>(cfg_.min_leaf, 1))
      split = best_split(idx, counts);
    if (!split) {
      auto& node = nodes_[id];
      node.leaf = true;
      const double n = static_cast<double>(idx.size()) + cfg_.leaf_smoothing * static_cast<double>(k_);
      for (double c : counts) node.distribution.push_back((c + cfg_.leaf_smoothing) / n);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) (goes_left(*split, x_[i][split->feature]) ? left : right).push_back(i);
    {
      auto& node = nodes_[id];
      node.leaf = false;
      node.feature = split->feature;
      node.threshold = split->threshold;
      node.missing_left = split->missing_left;
      for (auto c : split->left_codes) node.left_levels.push_back(schema_.levels[split->feature][c]);
      for (auto c : split->right_codes) node.right_levels.push_back(schema_.levels[split->feature][c]);
    }
    const std::size_t l = build(left, depth + 1);
    const std::size_t r = build(right, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

 private:
  std::vector<double> class_counts(const std::vector<std::size_t>& idx) const {
    std::vector<double> c(k_, 0.0);
    for (std::size_t i : idx) c[y_[i]] += 1.0;
    return c;
  }

  static bool goes_left(const Split& s, const std::optional<double>& v) {
    if (!v) return s.missing_left;
    if (s.left_codes.empty() && s.right_codes.empty()) return *v <= s.threshold;
    const auto code = static_cast<std::size_t>(*v);
    return std::find(s.left_codes.begin(), s.left_codes.end(), code) != s.left_codes.end();
  }

  // Scores a partition of the present samples; missing samples join the larger side.
  bool score(std::span<const double> left, double nl, std::span<const double> present_total, double np,
             std::span<const double> missing, double nm, double parent_gini, double n, double& gain,
             bool& missing_left) const {
    std::vector<double> l(left.begin(), left.end()), r(k_);
    for (std::size_t c = 0; c < k_; ++c) r[c] = present_total[c] - left[c];
    double nr = np - nl;
    missing_left = nl >= nr;
    auto& target = missing_left ? l : r;
    for (std::size_t c = 0; c < k_; ++c) target[c] += missing[c];
    double ltot = nl + (missing_left ? nm : 0.0);
    double rtot = nr + (missing_left ? 0.0 : nm);
    const auto min_leaf = static_cast<double>(cfg_.min_leaf);
    if (ltot < std::max(min_leaf, 1.0) || rtot < std::max(min_leaf, 1.0)) return false;
    gain = parent_gini - (ltot / n) * gini(l, ltot) - (rtot / n) * gini(r, rtot);
    return true;
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& idx, const std::vector<double>& counts) const {
    const double n = static_cast<double>(idx.size());
    const double parent = gini(counts, n);
    std::optional<Split> best;
    double best_gain = cfg_.min_gain;
    auto consider = [&](Split s) {
      if (s.gain > best_gain + 1e-12) {
        best_gain = s.gain;
        best = std::move(s);
      }
    };

    for (std::size_t f = 0; f < schema_.size(); ++f) {
      std::vector<double> missing(k_, 0.0);
      double nm = 0.0;
      std::vector<std::pair<double, std::size_t>> present;
      for (std::size_t i : idx) {
        if (x_[i][f]) {
          present.emplace_back(*x_[i][f], y_[i]);
        } else {
          missing[y_[i]] += 1.0;
          nm += 1.0;
        }
      }
      if (present.size() < 2) continue;
      std::vector<double> ptotal(k_, 0.0);
      for (const auto& [v, c] : present) ptotal[c] += 1.0;
      const double np = static_cast<double>(present.size());

      if (schema_.kinds[f] == FeatureKind::continuous) {
        std::sort(present.begin(), present.end());
        std::vector<double> left(k_, 0.0);
        for (std::size_t j = 0; j + 1 < present.size(); ++j) {
          left[present[j].second] += 1.0;
          const double a = present[j].first, b = present[j + 1].first;
          if (!(a < b)) continue;
          Split s;
          s.feature = f;
          s.threshold = a + (b - a) / 2.0;
          if (!(s.threshold < b)) s.threshold = a;
          if (score(left, static_cast<double>(j + 1), ptotal, np, missing, nm, parent, n, s.gain,
                    s.missing_left))
            consider(std::move(s));
        }
        continue;
      }

      std::map<std::size_t, std::vector<double>> by_level;
      for (const auto& [v, c] : present) {
        auto& row = by_level[static_cast<std::size_t>(v)];
        row.resize(k_, 0.0);
        row[c] += 1.0;
      }
      std::vector<std::size_t> codes;
      for (const auto& [code, row] : by_level) codes.push_back(code);
      const std::size_t m = codes.size();
      if (m < 2) continue;
      auto try_mask = [&](auto in_left) {
        Split s;
        s.feature = f;
        std::vector<double> left(k_, 0.0);
        double nl = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const auto& row = by_level[codes[j]];
          if (in_left(j)) {
            s.left_codes.push_back(codes[j]);
            for (std::size_t c = 0; c < k_; ++c) left[c] += row[c];
            nl += std::accumulate(row.begin(), row.end(), 0.0);
          } else {
            s.right_codes.push_back(codes[j]);
          }
        }
        if (score(left, nl, ptotal, np, missing, nm, parent, n, s.gain, s.missing_left))
          consider(std::move(s));
      };
      if (m <= 12) {
        // The first level always goes left, so each partition is tried once.
        for (std::size_t mask = 1; mask + 1 < (std::size_t{1} << m); mask += 2)
          try_mask([mask](std::size_t j) { return (mask >> j) & 1U; });
      } else {
        for (std::size_t one = 0; one < m; ++one) try_mask([one](std::size_t j) { return j == one; });
      }
    }
    return best;
  }

  const std::vector<std::vector<std::optional<double>>>& x_;
  const std::vector<std::size_t>& y_;
  const FeatureSchema& schema_;
  std::size_t k_;
  const TreeConfig& cfg_;
  std::vector<DecisionTree::Node>& nodes_;
};

void check_token(const std::string& s, const char* what) {
  if (s.empty()) throw Error(std::string("empty ") + what + " in tree");
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',' || c == '|')
      throw Error(std::string(what) + " '" + s + "' cannot be written in tree format");
  }
}

}  // namespace

DecisionTree DecisionTree::train(std::span<const ProsodicFeatureVector> features,
                                 std::span<const std::string> labels, const TreeConfig& config,
                                 std::span<const std::string> classes, std::vector<std::string>* warnings) {
  if (features.empty()) throw Error("no training data for the decision tree");
  if (features.size() != labels.size()) throw Error("feature and label counts differ");
  const FeatureSchema& schema = features.front().schema();
  for (const auto& fv : features) {
    if (!(fv.schema() == schema)) throw Error("training vectors use different feature schemas");
  }

  DecisionTree tree;
  if (classes.empty()) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    tree.classes_.assign(distinct.begin(), distinct.end());
  } else {
    tree.classes_.assign(classes.begin(), classes.end());
  }
  std::vector<std::size_t> y;
  y.reserve(labels.size());
  for (const auto& l : labels) {
    auto it = std::find(tree.classes_.begin(), tree.classes_.end(), l);
    if (it == tree.classes_.end()) throw Error("label '" + l + "' is not a tree class");
    y.push_back(static_cast<std::size_t>(it - tree.classes_.begin()));
  }
  tree.priors_.assign(tree.classes_.size(), 0.0);
  for (std::size_t c : y) tree.priors_[c] += 1.0;
  for (auto& p : tree.priors_) p /= static_cast<double>(y.size());
  const auto present = std::count_if(tree.priors_.begin(), tree.priors_.end(), [](double p) { return p > 0; });
  if (present < 2 && warnings) warnings->push_back("decision tree trained on a single class");

  tree.feature_names_ = schema.names;
  tree.feature_kinds_ = schema.kinds;
  std::vector<std::vector<std::optional<double>>> x;
  x.reserve(features.size());
  for (const auto& fv : features) x.push_back(fv.values());
  std::vector<std::size_t> idx(features.size());
  std::iota(idx.begin(), idx.end(), 0);
  Builder(x, y, schema, tree.classes_.size(), config, tree.nodes_).build(idx, 0);
  return tree;
}

std::size_t DecisionTree::leaf_for(const ProsodicFeatureVector& fv) const {
  if (nodes_.empty()) throw Error("empty decision tree");
  const FeatureSchema& schema = fv.schema();
  std::size_t at = 0;
  while (!nodes_[at].leaf) {
    const Node& node = nodes_[at];
    const std::string& name = feature_names_[node.feature];
    auto f = schema.find(name);
    if (!f) throw Error("feature '" + name + "' used by the tree is missing from the input");
    if (schema.kinds[*f] != feature_kinds_[node.feature])
      throw Error("feature '" + name + "' has a different kind than in training");
    bool left = node.missing_left;
    if (auto v = fv.value(*f)) {
      if (feature_kinds_[node.feature] == FeatureKind::continuous) {
        left = *v <= node.threshold;
      } else {
        const std::string level = *fv.category(*f);
        if (std::find(node.left_levels.begin(), node.left_levels.end(), level) != node.left_levels.end())
          left = true;
        else if (std::find(node.right_levels.begin(), node.right_levels.end(), level) != node.right_levels.end())
          left = false;
      }
    }
    at = left ? node.left : node.right;
  }
  return at;
}

std::vector<double> DecisionTree::posterior(const ProsodicFeatureVector& fv) const {
  return nodes_[leaf_for(fv)].distribution;
}

std::size_t DecisionTree::predict(const ProsodicFeatureVector& fv) const {
  const auto& d = nodes_[leaf_for(fv)].distribution;
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [at, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes_[at].leaf) {
      stack.emplace_back(nodes_[at].left, d + 1);
      stack.emplace_back(nodes_[at].right, d + 1);
    }
  }
  return best;
}

std::size_t DecisionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf; }));
}

bool DecisionTree::operator==(const DecisionTree& o) const {
  if (classes_ != o.classes_ || priors_ != o.priors_ || feature_names_ != o.feature_names_ ||
      feature_kinds_ != o.feature_kinds_ || nodes_.size() != o.nodes_.size())
    return false;
  // Compare structurally in preorder so node numbering does not matter.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [a, b] = stack.back();
    stack.pop_back();
    const Node& x = nodes_[a];
    const Node& y = o.nodes_[b];
    if (x.leaf != y.leaf) return false;
    if (x.leaf) {
      if (x.distribution != y.distribution) return false;
      continue;
    }
    if (x.feature != y.feature || x.threshold != y.threshold || x.left_levels != y.left_levels ||
        x.right_levels != y.right_levels || x.missing_left != y.missing_left)
      return false;
    stack.emplace_back(x.left, y.left);
    stack.emplace_back(x.right, y.right);
  }
  return true;
}

// Format:
//   prosody-tree v1
//   classes<TAB>c1<TAB>c2...
//   priors<TAB>p1<TAB>p2...
//   features<TAB>name:num<TAB>name:cat...
// then one node per line in preorder, indented two spaces per level:
//   dur <= 0.35 ? left : right missing left
//   tone in a,b | c ? left : right missing right
//   leaf 0.25 0.75
void DecisionTree::write(std::ostream& out) const {
  out << "prosody-tree v1\nclasses";
  for (const auto& c : classes_) out << '\t' << c;
  out << "\npriors";
  for (double p : priors_) out << '\t' << format_double(p);
  out << "\nfeatures";
  for (std::size_t f = 0; f < feature_names_.size(); ++f) {
    check_token(feature_names_[f], "feature name");
    out << '\t' << feature_names_[f] << (feature_kinds_[f] == FeatureKind::continuous ? ":num" : ":cat");
  }
  out << '\n';
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [at, depth] = stack.back();
    stack.pop_back();
    const Node& node = nodes_[at];
    out << std::string(2 * depth, ' ');
    if (node.leaf) {
      out << "leaf";
      for (double p : node.distribution) out << ' ' << format_double(p);
      out << '\n';
      continue;
    }
    out << feature_names_[node.feature];
    if (feature_kinds_[node.feature] == FeatureKind::continuous) {
      out << " <= " << format_double(node.threshold);
    } else {
      for (const auto& l : node.left_levels) check_token(l, "level");
      for (const auto& l : node.right_levels) check_token(l, "level");
      out << " in " << join(node.left_levels, ",") << " | " << join(node.right_levels, ",");
    }
    out << " ? left : right missing " << (node.missing_left ? "left" : "right") << '\n';
    stack.emplace_back(node.right, depth + 1);
    stack.emplace_back(node.left, depth + 1);
  }
}

void DecisionTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write(out);
  if (!out) throw Error("write failed for " + path.string());
}

DecisionTree DecisionTree::read(std::istream& in, const std::string& source) {
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  std::size_t pos = 0;
  auto fail = [&](std::size_t line, const std::string& what) -> ParseError {
    return ParseError(source, line, what);
  };
  auto header = [&](const std::string& key) {
    if (pos >= lines.size()) throw fail(pos + 1, "missing '" + key + "' line");
    auto f = split(lines[pos], '\t');
    if (f.front() != key) throw fail(pos + 1, "expected '" + key + "'");
    ++pos;
    return std::vector<std::string>(f.begin() + 1, f.end());
  };
  if (lines.empty() || trim(lines[0]) != "prosody-tree v1") throw fail(1, "missing 'prosody-tree v1' header");
  ++pos;
  DecisionTree tree;
  tree.classes_ = header("classes");
  if (tree.classes_.empty()) throw fail(pos, "no classes");
  try {
    for (const auto& p : header("priors")) tree.priors_.push_back(parse_double(p));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw fail(pos, e.what());
  }
  if (tree.priors_.size() != tree.classes_.size()) throw fail(pos, "prior count does not match classes");
  for (const auto& f : header("features")) {
    const auto colon = f.rfind(':');
    if (colon == std::string::npos) throw fail(pos, "feature '" + f + "' lacks :num or :cat");
    const std::string kind = f.substr(colon + 1);
    if (kind != "num" && kind != "cat") throw fail(pos, "unknown feature kind '" + kind + "'");
    tree.feature_names_.push_back(f.substr(0, colon));
    tree.feature_kinds_.push_back(kind == "num" ? FeatureKind::continuous : FeatureKind::categorical);
  }

  // Recursive descent over preorder lines.
  auto parse_node = [&](auto& self, std::size_t depth) -> std::size_t {
    while (pos < lines.size() && trim(lines[pos]).empty()) ++pos;
    if (pos >= lines.size()) throw fail(pos, "tree ends before all nodes are defined");
    const std::size_t lineno = pos + 1;
    const std::string& line = lines[pos++];
    const std::size_t indent = line.find_first_not_of(' ');
    if (indent != 2 * depth) throw fail(lineno, "unexpected indentation");
    const auto words = split_ws(line);
    const std::size_t id = tree.nodes_.size();
    tree.nodes_.emplace_back();
    try {
      if (words[0] == "leaf") {
        Node node;
        for (std::size_t i = 1; i < words.size(); ++i) node.distribution.push_back(parse_double(words[i]));
        if (node.distribution.size() != tree.classes_.size())
          throw fail(lineno, "leaf arity does not match the class list");
        tree.nodes_[id] = std::move(node);
        return id;
      }
      Node node;
      node.leaf = false;
      auto it = std::find(tree.feature_names_.begin(), tree.feature_names_.end(), words[0]);
      if (it == tree.feature_names_.end()) throw fail(lineno, "unknown feature '" + words[0] + "'");
      node.feature = static_cast<std::size_t>(it - tree.feature_names_.begin());
      std::size_t w = 1;
      if (tree.feature_kinds_[node.feature] == FeatureKind::continuous) {
        if (words.size() != 9 || words[1] != "<=") throw fail(lineno, "malformed split line");
        node.threshold = parse_double(words[2]);
        w = 3;
      } else {
        if (words.size() != 11 || words[1] != "in" || words[3] != "|") throw fail(lineno, "malformed split line");
        node.left_levels = split(words[2], ',');
        node.right_levels = split(words[4], ',');
        w = 5;
      }
      if (words[w] != "?" || words[w + 1] != "left" || words[w + 2] != ":" || words[w + 3] != "right" ||
          words[w + 4] != "missing" || (words[w + 5] != "left" && words[w + 5] != "right"))
        throw fail(lineno, "malformed split line");
      node.missing_left = words[w + 5] == "left";
      tree.nodes_[id] = std::move(node);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw fail(lineno, e.what());
    }
    const std::size_t l = self(self, depth + 1);
    const std::size_t r = self(self, depth + 1);
    tree.nodes_[id].left = l;
    tree.nodes_[id].right = r;
    return id;
  };
  parse_node(parse_node, 0);
  while (pos < lines.size()) {
    if (!trim(lines[pos]).empty()) throw fail(pos + 1, "trailing content after the tree");
    ++pos;
  }
  return tree;
}

DecisionTree DecisionTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read(in, path.string());
}

std::vector<double> bayes_scaled(std::span<const double> posterior, std::span<const double> priors) {
  if (posterior.size() != priors.size()) throw Error("posterior and prior sizes differ");
  std::vector<double> out(posterior.size(), 0.0);
  double sum = 0.0;
  for (std::size_t c = 0; c < posterior.size(); ++c) {
    if (posterior[c] <= 0.0) continue;
    if (!(priors[c] > 0.0)) throw Error("zero prior for a class with positive posterior");
    out[c] = posterior[c] / priors[c];
    sum += out[c];
  }
  if (sum <= 0.0) throw Error("posterior has no mass");
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<double> tree_scaled_likelihood(const DecisionTree& tree, const ProsodicFeatureVector& fv,
                                           std::span<const double> priors, const TagSet& tagset) {
  const auto post = tree.posterior(fv);
  if (priors.size() != post.size()) throw Error("prior count does not match the tree classes");
  std::vector<double> out(tagset.size(), 0.0);
  double sum = 0.0;
  for (std::size_t c = 0; c < post.size(); ++c) {
    const auto members = tagset.expand(tree.classes()[c]);
    if (members.empty()) throw Error("tree class '" + tree.classes()[c] + "' is not in the tag set");
    double score = 0.0;
    if (post[c] > 0.0) {
      if (!(priors[c] > 0.0)) throw Error("zero prior for tree class '" + tree.classes()[c] + "'");
      score = post[c] / priors[c];
    }
    for (std::size_t d : members) {
      out[d] = score;
      sum += score;
    }
  }
  if (sum <= 0.0) throw Error("scaled likelihood has no mass");
  for (auto& v : out) v /= sum;
  return out;
}

LikelihoodTable prosody_likelihood_table(const DecisionTree& tree, const Conversation& conv,
                                         const TagSet& tagset, std::span<const double> priors) {
  auto table = make_table(conv, tagset.size());
  table.provenance.prosody = true;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const auto& u = conv.utterances[i];
    if (!u.prosody) continue;
    const auto scores = tree_scaled_likelihood(tree, *u.prosody, priors, tagset);
    for (std::size_t d = 0; d < scores.size(); ++d) table.log_likelihoods[i][d] = std::log(scores[d]);
  }
  return table;
}

}  // namespace datag
