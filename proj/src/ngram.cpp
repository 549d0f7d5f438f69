#include "datag/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "datag/util.hpp"

namespace datag {

namespace {

constexpr double kLn10 = 2.302585092994045684;
constexpr double kArpaNegInf = -99.0;

bool is_reserved(std::string_view t) {
  return t == kStartToken || t == kEndToken || t == kUnkToken;
}

std::string arpa_number(double natural_log) {
  if (natural_log == kNegInf) return "-99";
  return format_double(natural_log / kLn10);
}

double from_arpa_number(double log10_value) {
  return log10_value <= kArpaNegInf ? kNegInf : log10_value * kLn10;
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  std::sort(tokens_.begin(), tokens_.end());
  tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], static_cast<int>(i));
  start_ = find(kStartToken);
  end_ = find(kEndToken);
  unk_ = find(kUnkToken);
}

int Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

int Vocabulary::predicted_id(std::string_view token) const {
  int id = find(token);
  if (id < 0 || id == start_) return unk_;
  return id;
}

int Vocabulary::context_id(std::string_view token) const {
  int id = find(token);
  return id < 0 ? unk_ : id;
}

std::vector<int> Vocabulary::predictable_ids() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(size()); ++i) {
    if (predictable(i)) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// LanguageModel

double LanguageModel::cond_log_prob(std::span<const std::string> context,
                                    std::string_view token) const {
  const auto& v = vocabulary();
  std::vector<int> ctx;
  ctx.reserve(context.size());
  for (const auto& t : context) ctx.push_back(v.context_id(t));
  int id = v.predicted_id(token);
  if (id < 0) return kNegInf;
  return cond_log_prob_ids(ctx, id);
}

double LanguageModel::sentence_log_prob(std::span<const std::string> words) const {
  const auto& v = vocabulary();
  const bool markers = v.has_sentence_markers();
  std::vector<int> ids;
  ids.reserve(words.size() + static_cast<std::size_t>(order()) + 1);
  if (markers) ids.assign(static_cast<std::size_t>(std::max(order() - 1, 0)), v.start_id());
  const std::size_t first = ids.size();
  for (const auto& w : words) ids.push_back(v.predicted_id(w));
  if (markers) ids.push_back(v.end_id());

  double total = 0.0;
  for (std::size_t i = first; i < ids.size(); ++i) {
    if (ids[i] < 0) return kNegInf;
    std::span<const int> ctx(ids.data(), i);
    total += cond_log_prob_ids(ctx, ids[i]);
  }
  return total;
}

std::size_t LanguageModel::sentence_token_count(std::span<const std::string> words) const {
  return words.size() + (vocabulary().has_sentence_markers() ? 1 : 0);
}

// ---------------------------------------------------------------------------
// NGramModel

bool NGramModel::SeqLess::operator()(std::span<const int> a, std::span<const int> b) const {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

NGramModel NGramModel::train(std::span<const std::vector<std::string>> sequences, int order,
                             std::span<const std::string> vocabulary, NGramOptions options) {
  if (order < 1) throw Error("n-gram order must be at least 1");
  if (sequences.empty()) throw Error("no training data");
  std::set<std::string> user_vocab;
  for (const auto& t : vocabulary) {
    if (is_reserved(t)) continue;
    user_vocab.insert(t);
  }
  std::vector<std::string> tokens(user_vocab.begin(), user_vocab.end());
  if (options.sentence_markers) {
    tokens.emplace_back(kStartToken);
    tokens.emplace_back(kEndToken);
  }
  if (options.unknown_token) tokens.emplace_back(kUnkToken);

  NGramModel model;
  model.order_ = order;
  model.vocab_ = std::make_shared<const Vocabulary>(std::move(tokens));
  model.contexts_.resize(static_cast<std::size_t>(order));
  const Vocabulary& vocab = *model.vocab_;
  const auto predictable = vocab.predictable_ids();
  if (predictable.empty()) throw Error("vocabulary has no predictable tokens");

  using Counts = std::map<std::vector<int>, std::map<int, double>, SeqLess>;
  std::vector<Counts> counts(static_cast<std::size_t>(order));
  std::size_t events = 0;
  const std::size_t pad = options.sentence_markers ? static_cast<std::size_t>(order - 1) : 0;
  for (const auto& seq : sequences) {
    std::vector<int> ids(pad, vocab.start_id());
    for (const auto& t : seq) {
      if (is_reserved(t)) throw Error("reserved token '" + t + "' in training data");
      int id = vocab.find(t);
      if (id < 0) throw Error("training token '" + t + "' is outside the vocabulary");
      ids.push_back(id);
    }
    if (options.sentence_markers) ids.push_back(vocab.end_id());
    for (std::size_t i = pad; i < ids.size(); ++i) {
      for (std::size_t len = 0; len < static_cast<std::size_t>(order) && len <= i; ++len) {
        std::vector<int> ctx(ids.begin() + static_cast<std::ptrdiff_t>(i - len),
                             ids.begin() + static_cast<std::ptrdiff_t>(i));
        counts[len][std::move(ctx)][ids[i]] += 1.0;
      }
      ++events;
    }
  }
  if (events == 0) throw Error("training data contains no tokens");

  const double vsize = static_cast<double>(predictable.size());
  for (std::size_t len = 0; len < counts.size(); ++len) {
    for (const auto& [ctx, conts] : counts[len]) {
      double n = 0.0;
      for (const auto& [w, c] : conts) n += c;
      const double t = static_cast<double>(conts.size());
      const double denom = n + t;
      const double reserved = t / denom;
      ContextNode& node = model.contexts_[len][ctx];
      node.reserved = reserved;

      std::span<const int> shorter(ctx.data() + (len ? 1 : 0), len ? len - 1 : 0);
      auto lower = [&](int w) {
        if (len == 0) return 1.0 / vsize;
        return std::exp(model.cond_log_prob_ids(shorter, w));
      };

      const std::size_t unseen = predictable.size() - conts.size();
      if (unseen == 0) {
        for (const auto& [w, c] : conts) node.log_probs[w] = std::log(c / denom + reserved * lower(w));
        node.log_bow = len == 0 ? 0.0 : kNegInf;
        continue;
      }
      for (const auto& [w, c] : conts) node.log_probs[w] = std::log(c / denom);
      if (len == 0) {
        const double each = std::log(reserved / static_cast<double>(unseen));
        for (int w : predictable) {
          if (!conts.count(w)) node.log_probs[w] = each;
        }
        continue;
      }
      double seen_lower = 0.0;
      for (const auto& [w, c] : conts) seen_lower += lower(w);
      double unseen_lower = 1.0 - seen_lower;
      if (unseen_lower < 1e-6) {
        unseen_lower = 0.0;
        for (int w : predictable) {
          if (!conts.count(w)) unseen_lower += lower(w);
        }
      }
      node.log_bow = std::log(reserved / unseen_lower);
    }
  }
  return model;
}

NGramModel NGramModel::uniform(std::span<const std::string> tokens, NGramOptions options) {
  std::vector<std::string> all;
  for (const auto& t : tokens) {
    if (!is_reserved(t)) all.push_back(t);
  }
  if (options.sentence_markers) {
    all.emplace_back(kStartToken);
    all.emplace_back(kEndToken);
  }
  if (options.unknown_token) all.emplace_back(kUnkToken);
  NGramModel model;
  model.order_ = 1;
  model.vocab_ = std::make_shared<const Vocabulary>(std::move(all));
  model.contexts_.resize(1);
  auto ids = model.vocab_->predictable_ids();
  if (ids.empty()) throw Error("uniform model over an empty vocabulary");
  ContextNode& root = model.contexts_[0][std::vector<int>{}];
  const double lp = -std::log(static_cast<double>(ids.size()));
  for (int id : ids) root.log_probs[id] = lp;
  return model;
}

NGramModel NGramModel::merge(const NGramModel& a, const NGramModel& b, double weight) {
  if (!(weight >= 0.0 && weight <= 1.0)) throw Error("interpolation weight must lie in [0, 1]");
  if (!a.vocab_ || !b.vocab_ || !(*a.vocab_ == *b.vocab_))
    throw Error("merged models must share a vocabulary");
  NGramModel model;
  model.order_ = std::max(a.order_, b.order_);
  model.vocab_ = a.vocab_;
  model.contexts_.resize(static_cast<std::size_t>(model.order_));
  const auto predictable = model.vocab_->predictable_ids();

  auto mixed = [&](std::span<const int> ctx, int w) {
    const double pa = std::exp(a.cond_log_prob_ids(ctx, w));
    const double pb = std::exp(b.cond_log_prob_ids(ctx, w));
    return weight * pa + (1.0 - weight) * pb;
  };

  for (std::size_t len = 0; len < model.contexts_.size(); ++len) {
    std::map<std::vector<int>, std::set<int>, SeqLess> explicit_tokens;
    for (const NGramModel* m : {&a, &b}) {
      if (len >= m->contexts_.size()) continue;
      for (const auto& [ctx, node] : m->contexts_[len]) {
        auto& set = explicit_tokens[ctx];
        for (const auto& [w, lp] : node.log_probs) set.insert(w);
      }
    }
    for (const auto& [ctx, tokens] : explicit_tokens) {
      ContextNode& node = model.contexts_[len][ctx];
      if (len == 0) {
        for (int w : predictable) node.log_probs[w] = std::log(mixed(ctx, w));
        continue;
      }
      double seen = 0.0;
      double seen_lower = 0.0;
      std::span<const int> shorter(ctx.data() + 1, len - 1);
      for (int w : tokens) {
        const double p = mixed(ctx, w);
        node.log_probs[w] = std::log(p);
        seen += p;
        seen_lower += std::exp(model.cond_log_prob_ids(shorter, w));
      }
      const double left = 1.0 - seen;
      double lower_left = 1.0 - seen_lower;
      if (tokens.size() == predictable.size() || left <= 0.0) {
        node.log_bow = kNegInf;
        continue;
      }
      if (lower_left < 1e-6) {
        lower_left = 0.0;
        for (int w : predictable) {
          if (!tokens.count(w)) lower_left += std::exp(model.cond_log_prob_ids(shorter, w));
        }
      }
      node.log_bow = std::log(left / lower_left);
    }
  }
  return model;
}

double NGramModel::cond_log_prob_ids(std::span<const int> context, int token) const {
  if (!vocab_ || !vocab_->predictable(token)) return kNegInf;
  std::size_t len = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
  double acc = 0.0;
  while (true) {
    std::span<const int> h = context.last(len);
    const auto& table = contexts_[len];
    auto it = table.find(h);
    if (it != table.end()) {
      auto p = it->second.log_probs.find(token);
      if (p != it->second.log_probs.end()) return acc + p->second;
      acc += it->second.log_bow;
    }
    if (len == 0) break;
    --len;
  }
  return kNegInf;
}

std::optional<double> NGramModel::reserved_mass(std::span<const std::string> context) const {
  if (context.size() >= static_cast<std::size_t>(order_)) return std::nullopt;
  std::vector<int> ctx;
  for (const auto& t : context) ctx.push_back(vocab_->context_id(t));
  const auto& table = contexts_[ctx.size()];
  auto it = table.find(ctx);
  if (it == table.end() || it->second.reserved < 0) return std::nullopt;
  return it->second.reserved;
}

std::vector<std::vector<int>> NGramModel::stored_contexts() const {
  std::vector<std::vector<int>> out;
  for (const auto& table : contexts_) {
    for (const auto& [ctx, node] : table) out.push_back(ctx);
  }
  return out;
}

std::vector<std::vector<std::vector<int>>> NGramModel::arpa_entries() const {
  // Entries of order m: every explicit event (h, w) with |h| = m - 1, plus every
  // stored context of length m so its backoff weight has a line to live on.
  std::vector<std::vector<std::vector<int>>> out(static_cast<std::size_t>(order_));
  for (int m = 1; m <= order_; ++m) {
    std::set<std::vector<int>> entries;
    for (const auto& [ctx, node] : contexts_[static_cast<std::size_t>(m - 1)]) {
      for (const auto& [w, lp] : node.log_probs) {
        auto e = ctx;
        e.push_back(w);
        entries.insert(std::move(e));
      }
    }
    if (m < order_) {
      for (const auto& [ctx, node] : contexts_[static_cast<std::size_t>(m)]) entries.insert(ctx);
    }
    if (m == 1 && vocab_->start_id() >= 0) entries.insert({vocab_->start_id()});
    out[static_cast<std::size_t>(m - 1)].assign(entries.begin(), entries.end());
  }
  return out;
}

std::size_t NGramModel::arpa_entry_count(int m) const {
  if (m < 1 || m > order_) return 0;
  return arpa_entries()[static_cast<std::size_t>(m - 1)].size();
}

void NGramModel::write_arpa(std::ostream& out) const {
  const auto entries = arpa_entries();
  out << "\n\\data\\\n";
  for (int m = 1; m <= order_; ++m)
    out << "ngram " << m << "=" << entries[static_cast<std::size_t>(m - 1)].size() << "\n";
  for (int m = 1; m <= order_; ++m) {
    out << "\n\\" << m << "-grams:\n";
    for (const auto& e : entries[static_cast<std::size_t>(m - 1)]) {
      std::span<const int> h(e.data(), e.size() - 1);
      double lp = kNegInf;
      const auto& table = contexts_[static_cast<std::size_t>(m - 1)];
      auto it = table.find(h);
      if (it != table.end()) {
        auto p = it->second.log_probs.find(e.back());
        if (p != it->second.log_probs.end()) lp = p->second;
      }
      out << arpa_number(lp) << '\t';
      for (std::size_t i = 0; i < e.size(); ++i) {
        if (i) out << ' ';
        out << vocab_->token(e[i]);
      }
      if (m < order_) {
        double bow = 0.0;
        const auto& next = contexts_[static_cast<std::size_t>(m)];
        auto n = next.find(e);
        if (n != next.end()) bow = n->second.log_bow;
        out << '\t' << arpa_number(bow);
      }
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_arpa(out);
  if (!out) throw Error("write failed for " + path.string());
}

NGramModel NGramModel::read_arpa(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  bool found = false;
  while (next_line()) {
    if (trim(line) == "\\data\\") {
      found = true;
      break;
    }
  }
  if (!found) throw ParseError(source, lineno, "missing \\data\\ header");

  std::vector<std::size_t> declared;
  while (next_line()) {
    auto t = trim(line);
    if (t.empty()) {
      if (!declared.empty()) break;
      continue;
    }
    if (t.rfind("ngram ", 0) != 0) throw ParseError(source, lineno, "expected 'ngram N=count'");
    auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected 'ngram N=count'");
    long long n = 0, count = 0;
    try {
      n = parse_int(t.substr(6, eq - 6));
      count = parse_int(t.substr(eq + 1));
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (n != static_cast<long long>(declared.size()) + 1 || count < 0)
      throw ParseError(source, lineno, "n-gram orders must be listed as 1, 2, ...");
    declared.push_back(static_cast<std::size_t>(count));
  }
  if (declared.empty()) throw ParseError(source, lineno, "no n-gram counts declared");
  const int order = static_cast<int>(declared.size());

  struct Entry {
    std::vector<std::string> tokens;
    double log10_prob;
    std::optional<double> log10_bow;
  };
  std::vector<std::vector<Entry>> sections(declared.size());
  for (int m = 1; m <= order; ++m) {
    std::string header = "\\" + std::to_string(m) + "-grams:";
    bool got = false;
    while (next_line()) {
      auto t = trim(line);
      if (t.empty()) continue;
      if (t != header) throw ParseError(source, lineno, "expected " + header);
      got = true;
      break;
    }
    if (!got) throw ParseError(source, lineno, "missing " + header);
    auto& entries = sections[static_cast<std::size_t>(m - 1)];
    while (entries.size() < declared[static_cast<std::size_t>(m - 1)]) {
      if (!next_line()) throw ParseError(source, lineno, "file ends inside " + header);
      auto fields = split_ws(line);
      if (fields.empty()) continue;
      if (fields.size() != static_cast<std::size_t>(m) + 1 &&
          fields.size() != static_cast<std::size_t>(m) + 2)
        throw ParseError(source, lineno, "wrong field count for an order-" + std::to_string(m) +
                                             " entry");
      Entry e;
      try {
        e.log10_prob = parse_double(fields[0]);
        if (fields.size() == static_cast<std::size_t>(m) + 2)
          e.log10_bow = parse_double(fields.back());
      } catch (const Error& err) {
        throw ParseError(source, lineno, err.what());
      }
      e.tokens.assign(fields.begin() + 1, fields.begin() + 1 + m);
      entries.push_back(std::move(e));
    }
  }
  bool ended = false;
  while (next_line()) {
    auto t = trim(line);
    if (t.empty()) continue;
    if (t == "\\end\\") {
      ended = true;
      break;
    }
    throw ParseError(source, lineno, "more entries than declared, or missing \\end\\");
  }
  if (!ended) throw ParseError(source, lineno, "missing \\end\\");

  std::vector<std::string> tokens;
  for (const auto& e : sections[0]) tokens.push_back(e.tokens[0]);
  NGramModel model;
  model.order_ = order;
  model.vocab_ = std::make_shared<const Vocabulary>(tokens);
  model.contexts_.resize(static_cast<std::size_t>(order));
  const Vocabulary& vocab = *model.vocab_;
  if (vocab.size() != tokens.size()) throw ParseError(source, 0, "duplicate unigram entries");

  for (int m = 1; m <= order; ++m) {
    for (const auto& e : sections[static_cast<std::size_t>(m - 1)]) {
      std::vector<int> ids;
      for (const auto& t : e.tokens) {
        int id = vocab.find(t);
        if (id < 0) throw ParseError(source, 0, "token '" + t + "' missing from the unigrams");
        ids.push_back(id);
      }
      double lp = from_arpa_number(e.log10_prob);
      if (lp != kNegInf) {
        std::vector<int> ctx(ids.begin(), ids.end() - 1);
        model.contexts_[static_cast<std::size_t>(m - 1)][ctx].log_probs[ids.back()] = lp;
      }
      if (e.log10_bow && m < order)
        model.contexts_[static_cast<std::size_t>(m)][ids].log_bow = from_arpa_number(*e.log10_bow);
    }
  }
  if (model.contexts_[0].empty()) throw ParseError(source, 0, "no unigram probabilities");
  return model;
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_arpa(in, path.string());
}

// ---------------------------------------------------------------------------
// Interpolation

InterpolatedModel::InterpolatedModel(std::shared_ptr<const LanguageModel> a,
                                     std::shared_ptr<const LanguageModel> b, double weight)
    : a_(std::move(a)), b_(std::move(b)), weight_(weight) {
  if (!a_ || !b_) throw Error("interpolation needs two models");
  if (!(weight_ >= 0.0 && weight_ <= 1.0)) throw Error("interpolation weight must be in [0,1]");
  if (!(a_->vocabulary() == b_->vocabulary()))
    throw Error("cannot interpolate models with different vocabularies");
}

int InterpolatedModel::order() const { return std::max(a_->order(), b_->order()); }

double InterpolatedModel::cond_log_prob_ids(std::span<const int> context, int token) const {
  if (weight_ == 1.0) return a_->cond_log_prob_ids(context, token);
  if (weight_ == 0.0) return b_->cond_log_prob_ids(context, token);
  return log_add(std::log(weight_) + a_->cond_log_prob_ids(context, token),
                 std::log1p(-weight_) + b_->cond_log_prob_ids(context, token));
}

std::shared_ptr<const InterpolatedModel> interpolate(std::shared_ptr<const LanguageModel> a,
                                                     std::shared_ptr<const LanguageModel> b,
                                                     double weight) {
  return std::make_shared<const InterpolatedModel>(std::move(a), std::move(b), weight);
}

// ---------------------------------------------------------------------------
// Corpus-level scoring

namespace {

// Per-token scoring with the padding convention of sentence_log_prob.
template <typename Visit>
void for_each_token(const LanguageModel& model, std::span<const std::vector<std::string>> sequences,
                    Visit visit) {
  const auto& v = model.vocabulary();
  const bool markers = v.has_sentence_markers();
  const std::size_t pad = markers ? static_cast<std::size_t>(std::max(model.order() - 1, 0)) : 0;
  for (const auto& seq : sequences) {
    std::vector<int> ids(pad, v.start_id());
    for (const auto& w : seq) ids.push_back(v.predicted_id(w));
    if (markers) ids.push_back(v.end_id());
    for (std::size_t i = pad; i < ids.size(); ++i) visit(std::span<const int>(ids.data(), i), ids[i]);
  }
}

}  // namespace

CorpusScore score_corpus(const LanguageModel& model,
                         std::span<const std::vector<std::string>> sequences) {
  CorpusScore s;
  for_each_token(model, sequences, [&](std::span<const int> ctx, int tok) {
    s.log_prob += tok < 0 ? kNegInf : model.cond_log_prob_ids(ctx, tok);
    ++s.tokens;
  });
  return s;
}

double perplexity(const LanguageModel& model, std::span<const std::vector<std::string>> sequences) {
  auto s = score_corpus(model, sequences);
  if (s.tokens == 0) throw Error("perplexity of an empty corpus");
  return std::exp(-s.log_prob / static_cast<double>(s.tokens));
}

double fit_interp_weight(const LanguageModel& a, const LanguageModel& b,
                         std::span<const std::vector<std::string>> heldout, double initial,
                         double tolerance, int max_iterations) {
  if (!(a.vocabulary() == b.vocabulary()))
    throw Error("cannot interpolate models with different vocabularies");
  std::vector<std::pair<double, double>> probs;
  for_each_token(a, heldout, [&](std::span<const int> ctx, int tok) {
    if (tok < 0) return;
    double pa = std::exp(a.cond_log_prob_ids(ctx, tok));
    double pb = std::exp(b.cond_log_prob_ids(ctx, tok));
    if (pa + pb > 0.0) probs.emplace_back(pa, pb);
  });
  double w = std::clamp(initial, 0.0, 1.0);
  if (probs.empty()) return w;
  for (int it = 0; it < max_iterations; ++it) {
    double sum = 0.0;
    for (const auto& [pa, pb] : probs) {
      const double mix = w * pa + (1.0 - w) * pb;
      if (mix > 0.0) sum += w * pa / mix;
    }
    const double next = std::clamp(sum / static_cast<double>(probs.size()), 0.0, 1.0);
    const double delta = std::abs(next - w);
    w = next;
    if (delta < tolerance) break;
  }
  return w;
}

}  // namespace datag
