#include "datag/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "datag/util.hpp"

namespace datag {

void LikelihoodTable::validate(std::size_t num_labels) const {
  if (speakers.size() != log_likelihoods.size())
    throw Error("likelihood table for '" + conversation_id + "': speaker count does not match rows");
  for (std::size_t i = 0; i < log_likelihoods.size(); ++i) {
    if (log_likelihoods[i].size() != num_labels)
      throw Error("likelihood table for '" + conversation_id + "': row " + std::to_string(i) +
                  " has " + std::to_string(log_likelihoods[i].size()) + " entries, expected " +
                  std::to_string(num_labels));
    for (double v : log_likelihoods[i]) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
        throw Error("likelihood table for '" + conversation_id + "': row " + std::to_string(i) +
                    " holds NaN or +inf");
    }
  }
}

LikelihoodTable make_table(const Conversation& conv, std::size_t num_labels) {
  LikelihoodTable t;
  t.conversation_id = conv.id;
  for (const auto& u : conv.utterances) t.speakers.push_back(u.speaker);
  t.log_likelihoods.assign(conv.size(), std::vector<double>(num_labels, 0.0));
  return t;
}

void write_table_tsv(std::ostream& out, const LikelihoodTable& table, const TagSet& tagset) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t d = 0; d < table.log_likelihoods[i].size(); ++d) {
      out << table.conversation_id << '\t' << i << '\t' << tagset.label(d) << '\t'
          << format_double(table.log_likelihoods[i][d]) << '\n';
    }
  }
}

LikelihoodTable combine_likelihoods(const LikelihoodTable& words, const LikelihoodTable* prosody,
                                    CombinationWeights weights) {
  if (!(weights.alpha >= 0.0)) throw Error("alpha must be non-negative");
  if (!(weights.beta > 0.0)) throw Error("beta must be positive");
  LikelihoodTable out = words;
  const bool use_prosody = prosody && weights.alpha != 0.0;
  if (prosody) {
    if (prosody->conversation_id != words.conversation_id || prosody->size() != words.size())
      throw Error("likelihood tables for '" + words.conversation_id + "' are not aligned");
    out.provenance.prosody = use_prosody || out.provenance.prosody;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& row = out.log_likelihoods[i];
    if (use_prosody && prosody->log_likelihoods[i].size() != row.size())
      throw Error("likelihood tables for '" + words.conversation_id + "' differ in width");
    for (std::size_t d = 0; d < row.size(); ++d) {
      double v = row[d];
      if (use_prosody) v += weights.alpha * prosody->log_likelihoods[i][d];
      row[d] = weights.beta * v;
    }
  }
  return out;
}

namespace {

// DP lattice shared by the Viterbi and forward-backward passes. The state at
// position i is the last min(i+1, H) labels, H = max(context length, 1),
// encoded in base D with the oldest label most significant. The current label
// is state % D.
class Trellis {
 public:
  Trellis(const DiscourseGrammar& g, const LikelihoodTable& t)
      : grammar_(g), table_(t), d_(g.num_labels()), h_(g.context_length()), wide_(std::max<std::size_t>(h_, 1)) {
    table_.validate(d_);
    if (d_ == 0) throw Error("empty tag set");
    if (h_ + 1 > 60) throw Error("discourse grammar order too large");
    double states = std::pow(static_cast<double>(d_), static_cast<double>(wide_));
    if (states > 2e7) throw Error("decoder state space too large");
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& row = t.log_likelihoods[i];
      if (std::all_of(row.begin(), row.end(), [](double v) { return v == kNegInf; }))
        throw Error("utterance " + std::to_string(i) + " of '" + t.conversation_id +
                    "' has no admissible dialogue act");
    }
    pow_.assign(wide_ + 1, 1);
    for (std::size_t k = 1; k <= wide_; ++k) pow_[k] = pow_[k - 1] * d_;
  }

  std::size_t size() const { return table_.size(); }
  std::size_t labels() const { return d_; }
  // States after emitting position i.
  std::size_t states(std::size_t i) const { return pow_[std::min(i + 1, wide_)]; }
  // States before emitting position i (one empty state at i = 0).
  std::size_t prev_states(std::size_t i) const { return i == 0 ? 1 : states(i - 1); }

  std::size_t next_state(std::size_t i, std::size_t sp, std::size_t d) const {
    if (i < wide_) return sp * d_ + d;
    return (sp % pow_[wide_ - 1]) * d_ + d;
  }

  double emit(std::size_t i, std::size_t d) const { return table_.log_likelihoods[i][d]; }

  // Transition log probabilities into position i from previous state sp.
  const std::vector<double>& row(std::size_t i, std::size_t sp) {
    const std::size_t hist = std::min(i, h_);
    std::uint64_t bits = static_cast<std::uint64_t>(table_.speakers[i]);
    for (std::size_t k = 0; k < hist; ++k)
      bits = (bits << 1) | static_cast<std::uint64_t>(table_.speakers[i - hist + k]);
    const std::size_t code = h_ == 0 ? 0 : sp;
    const std::uint64_t key = ((static_cast<std::uint64_t>(code) * (wide_ + 1) + hist) << (h_ + 1)) | bits;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto events = history(i, sp, hist);
    std::vector<double> r(d_);
    grammar_.transition_row(events, table_.speakers[i], r);
    return cache_.emplace(key, std::move(r)).first->second;
  }

  double end(std::size_t s) {
    const std::size_t n = size();
    const std::size_t hist = std::min(n, h_);
    return grammar_.end_log_prob(history(n, s, hist));
  }

 private:
  // The last `hist` labels held by the state before position i, with speakers.
  std::vector<DaEvent> history(std::size_t i, std::size_t sp, std::size_t hist) const {
    std::vector<DaEvent> events(hist);
    std::size_t code = sp;
    for (std::size_t k = 0; k < hist; ++k) {
      const std::size_t pos = i - 1 - k;
      events[hist - 1 - k] = {code % d_, table_.speakers[pos]};
      code /= d_;
    }
    return events;
  }

  const DiscourseGrammar& grammar_;
  const LikelihoodTable& table_;
  std::size_t d_;
  std::size_t h_;
  std::size_t wide_;
  std::vector<std::size_t> pow_;
  std::unordered_map<std::uint64_t, std::vector<double>> cache_;
};

std::vector<std::vector<double>> forward_pass(Trellis& tr) {
  const std::size_t n = tr.size();
  std::vector<std::vector<double>> alpha(n);
  std::vector<double> prev{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> cur(tr.states(i), kNegInf);
    for (std::size_t sp = 0; sp < prev.size(); ++sp) {
      if (prev[sp] == kNegInf) continue;
      const auto& r = tr.row(i, sp);
      for (std::size_t d = 0; d < tr.labels(); ++d) {
        const double e = tr.emit(i, d);
        if (e == kNegInf) continue;
        double& slot = cur[tr.next_state(i, sp, d)];
        slot = log_add(slot, prev[sp] + r[d] + e);
      }
    }
    alpha[i] = cur;
    prev = std::move(cur);
  }
  return alpha;
}

}  // namespace

ViterbiResult viterbi_decode(const DiscourseGrammar& grammar, const LikelihoodTable& table) {
  Trellis tr(grammar, table);
  const std::size_t n = tr.size();
  ViterbiResult result;
  if (n == 0) {
    result.log_score = tr.end(0);
    return result;
  }
  std::vector<std::vector<std::size_t>> back(n);
  std::vector<double> prev{0.0};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> cur(tr.states(i), kNegInf);
    back[i].assign(cur.size(), 0);
    for (std::size_t sp = 0; sp < prev.size(); ++sp) {
      if (prev[sp] == kNegInf) continue;
      const auto& r = tr.row(i, sp);
      for (std::size_t d = 0; d < tr.labels(); ++d) {
        const double e = tr.emit(i, d);
        if (e == kNegInf) continue;
        const double v = prev[sp] + r[d] + e;
        const std::size_t ns = tr.next_state(i, sp, d);
        if (v > cur[ns]) {
          cur[ns] = v;
          back[i][ns] = sp;
        }
      }
    }
    prev = std::move(cur);
  }
  double best = kNegInf;
  std::size_t best_state = 0;
  for (std::size_t s = 0; s < prev.size(); ++s) {
    if (prev[s] == kNegInf) continue;
    const double v = prev[s] + tr.end(s);
    if (v > best) {
      best = v;
      best_state = s;
    }
  }
  if (best == kNegInf) throw Error("no admissible DA sequence for '" + table.conversation_id + "'");
  result.log_score = best;
  result.labels.resize(n);
  std::size_t s = best_state;
  for (std::size_t i = n; i-- > 0;) {
    result.labels[i] = s % tr.labels();
    s = back[i][s];
  }
  return result;
}

std::vector<std::vector<double>> forward_backward(const DiscourseGrammar& grammar,
                                                  const LikelihoodTable& table, PosteriorMode mode) {
  Trellis tr(grammar, table);
  const std::size_t n = tr.size();
  const std::size_t d = tr.labels();
  std::vector<std::vector<double>> post(n, std::vector<double>(d, 0.0));
  if (n == 0) return post;
  const auto alpha = forward_pass(tr);

  auto fill_row = [&](std::size_t i, const std::vector<double>& scores) {
    const double z = log_sum_exp(scores);
    if (z == kNegInf) throw Error("no admissible DA sequence for '" + table.conversation_id + "'");
    double sum = 0.0;
    for (std::size_t s = 0; s < scores.size(); ++s) {
      const double p = std::exp(scores[s] - z);
      post[i][s % d] += p;
      sum += p;
    }
    for (auto& p : post[i]) p /= sum;
  };

  if (mode == PosteriorMode::online) {
    for (std::size_t i = 0; i < n; ++i) fill_row(i, alpha[i]);
    return post;
  }

  std::vector<double> beta(alpha[n - 1].size());
  for (std::size_t s = 0; s < beta.size(); ++s) beta[s] = tr.end(s);
  std::vector<double> scores(beta.size());
  for (std::size_t s = 0; s < beta.size(); ++s) scores[s] = alpha[n - 1][s] + beta[s];
  fill_row(n - 1, scores);

  for (std::size_t i = n - 1; i-- > 0;) {
    std::vector<double> b(tr.states(i), kNegInf);
    for (std::size_t sp = 0; sp < b.size(); ++sp) {
      if (alpha[i][sp] == kNegInf) continue;
      const auto& r = tr.row(i + 1, sp);
      for (std::size_t k = 0; k < d; ++k) {
        const double e = tr.emit(i + 1, k);
        if (e == kNegInf) continue;
        b[sp] = log_add(b[sp], r[k] + e + beta[tr.next_state(i + 1, sp, k)]);
      }
    }
    beta = std::move(b);
    scores.assign(beta.size(), kNegInf);
    for (std::size_t s = 0; s < beta.size(); ++s) scores[s] = alpha[i][s] + beta[s];
    fill_row(i, scores);
  }
  return post;
}

std::vector<std::size_t> argmax_labels(const std::vector<std::vector<double>>& posteriors) {
  std::vector<std::size_t> out;
  out.reserve(posteriors.size());
  for (const auto& row : posteriors)
    out.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
  return out;
}

BruteForceResult brute_force_decode(const DiscourseGrammar& grammar, const LikelihoodTable& table) {
  const std::size_t d = grammar.num_labels();
  const std::size_t n = table.size();
  table.validate(d);
  double count = std::pow(static_cast<double>(d), static_cast<double>(n));
  if (count > 1e6) throw Error("brute-force decoding limited to 10^6 sequences");

  const std::size_t h = grammar.context_length();
  std::vector<std::size_t> seq(n, 0);
  std::vector<double> prefix(n + 1, 0.0);
  std::vector<std::pair<std::vector<std::size_t>, double>> leaves;
  leaves.reserve(static_cast<std::size_t>(count));

  auto events_before = [&](std::size_t i) {
    std::vector<DaEvent> ev;
    for (std::size_t k = (i > h ? i - h : 0); k < i; ++k) ev.push_back({seq[k], table.speakers[k]});
    return ev;
  };

  // Depth-first over label sequences in lexicographic order.
  std::vector<double> row(d);
  std::vector<std::vector<double>> rows(n, std::vector<double>(d));
  std::size_t depth = 0;
  if (n == 0) {
    leaves.emplace_back(seq, grammar.end_log_prob({}));
  } else {
    grammar.transition_row(events_before(0), table.speakers[0], rows[0]);
    std::vector<std::size_t> next(n, 0);
    while (true) {
      if (next[depth] == d) {
        if (depth == 0) break;
        next[depth] = 0;
        --depth;
        continue;
      }
      const std::size_t label = next[depth]++;
      seq[depth] = label;
      prefix[depth + 1] = prefix[depth] + rows[depth][label] + table.log_likelihoods[depth][label];
      if (depth + 1 == n) {
        leaves.emplace_back(seq, prefix[n] + grammar.end_log_prob(events_before(n)));
      } else {
        ++depth;
        grammar.transition_row(events_before(depth), table.speakers[depth], rows[depth]);
      }
    }
  }

  BruteForceResult result;
  result.log_score = kNegInf;
  for (const auto& [labels, score] : leaves) {
    if (score > result.log_score) {
      result.log_score = score;
      result.labels = labels;
    }
  }
  if (result.log_score == kNegInf) throw Error("no admissible DA sequence");
  result.posteriors.assign(n, std::vector<double>(d, 0.0));
  double z = 0.0;
  for (const auto& [labels, score] : leaves) {
    const double w = std::exp(score - result.log_score);
    z += w;
    for (std::size_t i = 0; i < n; ++i) result.posteriors[i][labels[i]] += w;
  }
  for (auto& r : result.posteriors) {
    for (auto& p : r) p /= z;
  }
  return result;
}

std::vector<std::size_t> decode_labels(const DiscourseGrammar& grammar, const LikelihoodTable& table,
                                       DecodeMethod method) {
  if (method == DecodeMethod::viterbi) return viterbi_decode(grammar, table).labels;
  return argmax_labels(forward_backward(grammar, table));
}

std::vector<double> WeightGrid::alphas() const {
  std::vector<double> out;
  const auto steps = static_cast<long>(std::llround((alpha_max - alpha_min) / alpha_step));
  for (long i = 0; i <= steps; ++i) out.push_back(alpha_min + static_cast<double>(i) * alpha_step);
  return out;
}

std::vector<double> WeightGrid::betas() const {
  std::vector<double> out;
  const auto steps = static_cast<long>(std::llround((beta_max - beta_min) / beta_step));
  for (long i = 0; i <= steps; ++i) out.push_back(beta_min + static_cast<double>(i) * beta_step);
  return out;
}

namespace {

std::size_t count_correct(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& ref) {
  if (predicted.size() != ref.size()) throw Error("label sequence length mismatch");
  std::size_t c = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) c += predicted[i] == ref[i];
  return c;
}

std::vector<std::size_t> decode_item(const DiscourseGrammar& grammar, const TuningItem& item,
                                     CombinationWeights w) {
  auto combined = combine_likelihoods(item.words, item.prosody ? &*item.prosody : nullptr, w);
  return argmax_labels(forward_backward(grammar, combined));
}

}  // namespace

WeightSearchResult evaluate_weights(const DiscourseGrammar& grammar, std::span<const TuningItem> items,
                                    std::span<const std::size_t> subset, CombinationWeights weights) {
  WeightSearchResult r;
  r.weights = weights;
  for (std::size_t idx : subset) {
    const auto& item = items[idx];
    r.correct += count_correct(decode_item(grammar, item, weights), item.labels);
    r.total += item.labels.size();
  }
  return r;
}

WeightSearchResult grid_search_weights(const DiscourseGrammar& grammar,
                                       std::span<const TuningItem> items,
                                       std::span<const std::size_t> subset, const WeightGrid& grid) {
  WeightSearchResult best;
  bool have = false;
  for (double a : grid.alphas()) {
    for (double b : grid.betas()) {
      auto r = evaluate_weights(grammar, items, subset, {a, b});
      if (!have || r.correct > best.correct) {
        best = r;
        have = true;
      }
    }
  }
  if (!have) throw Error("empty weight grid");
  return best;
}

JackknifeResult tune_alpha_beta(const DiscourseGrammar& grammar, std::span<const TuningItem> items,
                                const std::pair<std::vector<std::size_t>, std::vector<std::size_t>>& halves,
                                const WeightGrid& grid) {
  if (halves.first.empty() || halves.second.empty())
    throw Error("jackknife tuning needs two non-empty halves");
  JackknifeResult r;
  r.halves = {halves.first, halves.second};
  r.predictions.resize(items.size());
  for (int k = 0; k < 2; ++k) r.tuned[k] = grid_search_weights(grammar, items, r.halves[k], grid);
  for (int k = 0; k < 2; ++k) {
    const auto& other = r.halves[1 - k];
    const auto w = r.tuned[k].weights;
    r.heldout[1 - k].weights = w;
    for (std::size_t idx : other) {
      auto pred = decode_item(grammar, items[idx], w);
      r.heldout[1 - k].correct += count_correct(pred, items[idx].labels);
      r.heldout[1 - k].total += items[idx].labels.size();
      r.predictions[idx] = std::move(pred);
    }
  }
  return r;
}

}  // namespace datag
