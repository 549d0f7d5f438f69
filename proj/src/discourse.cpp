#include "datag/discourse.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "datag/util.hpp"

namespace datag {

namespace {

bool uses_speaker(GrammarVariant v) { return v != GrammarVariant::U_only; }

std::vector<std::string> event_vocabulary(const TagSet& tagset, GrammarVariant variant) {
  std::vector<std::string> out;
  for (const auto& l : tagset.labels()) {
    if (uses_speaker(variant)) {
      out.push_back(l + std::string(kEventSeparator) + "A");
      out.push_back(l + std::string(kEventSeparator) + "B");
    } else {
      out.push_back(l);
    }
  }
  return out;
}

}  // namespace

std::string_view variant_name(GrammarVariant v) {
  switch (v) {
    case GrammarVariant::U_only:
      return "U_only";
    case GrammarVariant::U_and_T:
      return "U_and_T";
    case GrammarVariant::U_given_T:
      return "U_given_T";
  }
  return "?";
}

GrammarVariant parse_variant(std::string_view text) {
  text = trim(text);
  if (text == "U_only") return GrammarVariant::U_only;
  if (text == "U_and_T") return GrammarVariant::U_and_T;
  if (text == "U_given_T") return GrammarVariant::U_given_T;
  throw Error("unknown grammar variant '" + std::string(text) +
              "' (expected U_only, U_and_T or U_given_T)");
}

std::vector<DaEvent> conversation_events(const Conversation& conv, const TagSet& tagset) {
  std::vector<DaEvent> out;
  out.reserve(conv.size());
  for (const auto& u : conv.utterances) {
    if (!u.da_label)
      throw Error("utterance " + conv.id + ":" + std::to_string(u.index) + " has no DA label");
    out.push_back({tagset.index(*u.da_label), u.speaker});
  }
  return out;
}

DiscourseGrammar DiscourseGrammar::train(std::span<const Conversation> convs, const TagSet& tagset,
                                         int order, GrammarVariant variant) {
  if (order < 1) throw Error("discourse grammar order must be at least 1 (use none() for no grammar)");
  DiscourseGrammar g;
  g.variant_ = variant;
  g.tagset_ = tagset;
  std::vector<std::vector<std::string>> sequences;
  sequences.reserve(convs.size());
  for (const auto& c : convs) {
    std::vector<std::string> seq;
    for (const auto& e : conversation_events(c, tagset)) seq.push_back(g.event_token(e));
    sequences.push_back(std::move(seq));
  }
  NGramOptions opts;
  opts.unknown_token = false;
  g.model_ = std::make_shared<const NGramModel>(
      NGramModel::train(sequences, order, event_vocabulary(tagset, variant), opts));
  g.bind_tokens();
  return g;
}

DiscourseGrammar DiscourseGrammar::none(const TagSet& tagset, GrammarVariant variant) {
  DiscourseGrammar g;
  g.variant_ = variant;
  g.tagset_ = tagset;
  return g;
}

DiscourseGrammar DiscourseGrammar::from_model(std::shared_ptr<const NGramModel> model,
                                              const TagSet& tagset, GrammarVariant variant) {
  DiscourseGrammar g;
  g.variant_ = variant;
  g.tagset_ = tagset;
  g.model_ = std::move(model);
  g.bind_tokens();
  return g;
}

void DiscourseGrammar::bind_tokens() {
  const Vocabulary& v = model_->vocabulary();
  if (!v.has_sentence_markers()) throw Error("discourse model lacks <start>/<end> tokens");
  for (int s = 0; s < 2; ++s) {
    ids_[s].clear();
    for (std::size_t d = 0; d < tagset_.size(); ++d) {
      std::string tok = event_token({d, static_cast<Speaker>(s)});
      int id = v.find(tok);
      if (id < 0) throw Error("discourse model has no event '" + tok + "'");
      ids_[s].push_back(id);
    }
  }
}

std::string DiscourseGrammar::event_token(DaEvent e) const {
  const std::string& l = tagset_.label(e.da);
  if (!uses_speaker(variant_)) return l;
  return l + std::string(kEventSeparator) + speaker_char(e.speaker);
}

std::vector<int> DiscourseGrammar::context_ids(std::span<const DaEvent> history) const {
  const std::size_t len = context_length();
  std::vector<int> ctx;
  ctx.reserve(len);
  const std::size_t have = std::min(len, history.size());
  for (std::size_t i = have; i < len; ++i) ctx.push_back(model_->vocabulary().start_id());
  for (const auto& e : history.last(have))
    ctx.push_back(ids_[static_cast<int>(e.speaker)].at(e.da));
  return ctx;
}

void DiscourseGrammar::transition_row(std::span<const DaEvent> history, Speaker current,
                                      std::span<double> out) const {
  const std::size_t n = tagset_.size();
  if (out.size() != n) throw Error("transition row has the wrong size");
  if (!model_) {
    const double lp = -std::log(static_cast<double>(variant_ == GrammarVariant::U_and_T ? 2 * n : n));
    for (auto& x : out) x = lp;
    return;
  }
  const auto ctx = context_ids(history);
  const auto& ids = ids_[static_cast<int>(current)];
  for (std::size_t d = 0; d < n; ++d) out[d] = model_->cond_log_prob_ids(ctx, ids[d]);
  if (variant_ == GrammarVariant::U_given_T) {
    const double norm = log_sum_exp(out);
    for (auto& x : out) x -= norm;
  }
}

double DiscourseGrammar::transition_log_prob(std::span<const DaEvent> history,
                                             DaEvent current) const {
  if (current.da >= tagset_.size()) throw Error("dialogue act index outside the tag set");
  if (!model_ || variant_ == GrammarVariant::U_given_T) {
    std::vector<double> row(tagset_.size());
    transition_row(history, current.speaker, row);
    return row[current.da];
  }
  return model_->cond_log_prob_ids(context_ids(history),
                                   ids_[static_cast<int>(current.speaker)][current.da]);
}

double DiscourseGrammar::end_log_prob(std::span<const DaEvent> history) const {
  if (!model_ || variant_ == GrammarVariant::U_given_T) return 0.0;
  return model_->cond_log_prob_ids(context_ids(history), model_->vocabulary().end_id());
}

DiscourseGrammar DiscourseGrammar::read(std::istream& in, const TagSet& tagset,
                                        const std::string& source) {
  std::string line;
  std::string first;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      first = line;
      break;
    }
  }
  const std::string prefix = "# variant: ";
  if (first.rfind(prefix, 0) != 0) throw ParseError(source, 1, "missing '# variant:' header");
  GrammarVariant variant;
  try {
    variant = parse_variant(first.substr(prefix.size()));
  } catch (const Error& e) {
    throw ParseError(source, 1, e.what());
  }
  std::stringstream rest;
  rest << in.rdbuf();
  std::string body = rest.str();
  if (body.find("\\data\\") == std::string::npos) {
    if (body.find("# grammar: none") != std::string::npos) return none(tagset, variant);
    throw ParseError(source, 0, "no n-gram data and no '# grammar: none' marker");
  }
  std::istringstream arpa(body);
  auto model = std::make_shared<const NGramModel>(NGramModel::read_arpa(arpa, source));
  try {
    return from_model(std::move(model), tagset, variant);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(source, 0, e.what());
  }
}

DiscourseGrammar DiscourseGrammar::load(const std::filesystem::path& path, const TagSet& tagset) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read(in, tagset, path.string());
}

void DiscourseGrammar::write(std::ostream& out) const {
  out << "# variant: " << variant_name(variant_) << '\n';
  if (!model_) {
    out << "# grammar: none\n";
    return;
  }
  model_->write_arpa(out);
}

void DiscourseGrammar::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write(out);
  if (!out) throw Error("write failed for " + path.string());
}

double discourse_perplexity(const DiscourseGrammar& grammar, std::span<const Conversation> convs) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& c : convs) {
    auto events = conversation_events(c, grammar.tagset());
    for (std::size_t i = 0; i < events.size(); ++i) {
      total += grammar.transition_log_prob(std::span(events).first(i), events[i]);
      ++count;
    }
  }
  if (count == 0) throw Error("perplexity of an empty corpus");
  return std::exp(-total / static_cast<double>(count));
}

}  // namespace datag
