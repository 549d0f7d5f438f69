#include "datag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "datag/util.hpp"

namespace datag {

namespace {

constexpr std::string_view kMiddleDot = "\xC2\xB7";

void validate_label(const std::string& label) {
  if (label.empty()) throw Error("empty dialogue act label");
  for (char c : label) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw Error("dialogue act label contains whitespace: '" + label + "'");
  }
  if (label.find(kMiddleDot) != std::string::npos)
    throw Error("dialogue act label contains the event separator: '" + label + "'");
  if (label.front() == '<' && label.back() == '>')
    throw Error("dialogue act label looks like a reserved token: '" + label + "'");
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

bool skip_line(std::string_view line) {
  std::string_view t = trim(line);
  return t.empty() || t.front() == '#';
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::size_t parse_index(const std::string& source, std::size_t lineno, std::string_view text) {
  try {
    long long v = parse_int(text);
    if (v < 0) throw Error("negative index");
    return static_cast<std::size_t>(v);
  } catch (const Error& e) {
    throw ParseError(source, lineno, e.what());
  }
}

}  // namespace

Speaker parse_speaker(std::string_view text) {
  text = trim(text);
  if (text == "A") return Speaker::A;
  if (text == "B") return Speaker::B;
  throw Error("speaker must be A or B, got '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// TagSet

TagSet::TagSet(std::vector<std::string> labels,
               std::map<std::string, std::vector<std::string>> collapsed)
    : labels_(std::move(labels)), collapsed_(std::move(collapsed)) {
  if (labels_.empty()) throw Error("tag set must not be empty");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    validate_label(labels_[i]);
    if (!index_.emplace(labels_[i], i).second)
      throw Error("duplicate dialogue act label '" + labels_[i] + "'");
  }
  for (const auto& [name, members] : collapsed_) {
    validate_label(name);
    for (const auto& m : members) {
      if (!contains(m))
        throw Error("collapsed class '" + name + "' names unknown label '" + m + "'");
    }
  }
}

TagSet TagSet::swbd_damsl() {
  return TagSet({"Statement",
                 "Backchannel/Acknowledge",
                 "Opinion",
                 "Abandoned/Uninterpretable",
                 "Agreement/Accept",
                 "Appreciation",
                 "Yes-No-Question",
                 "Non-verbal",
                 "Yes-Answers",
                 "Conventional-closing",
                 "Wh-Question",
                 "No-Answers",
                 "Response-Acknowledgement",
                 "Hedge",
                 "Declarative-Yes-No-Question",
                 "Other",
                 "Backchannel-Question",
                 "Quotation",
                 "Summarize/Reformulate",
                 "Affirmative-Non-yes-Answers",
                 "Action-directive",
                 "Collaborative-Completion",
                 "Repeat-phrase",
                 "Open-Question",
                 "Rhetorical-Questions",
                 "Hold-Before-Answer/Agreement",
                 "Reject",
                 "Negative-Non-no-Answers",
                 "Signal-non-understanding",
                 "Other-Answers",
                 "Conventional-opening",
                 "Or-Clause",
                 "Dispreferred-Answers",
                 "3rd-party-talk",
                 "Offers-Options-Commits",
                 "Self-talk",
                 "Downplayer",
                 "Maybe/Accept-part",
                 "Tag-Question",
                 "Declarative-Wh-Question",
                 "Apology",
                 "Thanking"});
}

TagSet TagSet::parse(std::istream& in, const std::string& source) {
  std::vector<std::string> labels;
  std::map<std::string, std::vector<std::string>> collapsed;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (skip_line(line)) continue;
    auto fields = split_ws(line);
    if (fields[0] == "@collapse") {
      if (fields.size() < 3)
        throw ParseError(source, lineno, "@collapse needs a name and at least one member");
      collapsed[fields[1]].assign(fields.begin() + 2, fields.end());
      continue;
    }
    if (fields.size() != 1) throw ParseError(source, lineno, "expected one label per line");
    labels.push_back(fields[0]);
  }
  try {
    return TagSet(std::move(labels), std::move(collapsed));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(source, 0, e.what());
  }
}

TagSet TagSet::read(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse(in, path.string());
}

void TagSet::write(std::ostream& out) const {
  for (const auto& l : labels_) out << l << '\n';
  for (const auto& [name, members] : collapsed_) {
    out << "@collapse " << name;
    for (const auto& m : members) out << ' ' << m;
    out << '\n';
  }
}

std::optional<std::size_t> TagSet::find(std::string_view label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t TagSet::index(std::string_view label) const {
  auto i = find(label);
  if (!i) throw Error("unknown dialogue act label '" + std::string(label) + "'");
  return *i;
}

TagSet TagSet::with_collapsed_other(std::span<const std::string> keep,
                                    const std::string& name) const {
  std::set<std::string> kept(keep.begin(), keep.end());
  for (const auto& k : kept) index(k);
  std::vector<std::string> members;
  for (const auto& l : labels_) {
    if (!kept.count(l)) members.push_back(l);
  }
  auto collapsed = collapsed_;
  collapsed[name] = std::move(members);
  return TagSet(labels_, std::move(collapsed));
}

std::vector<std::size_t> TagSet::expand(std::string_view class_name) const {
  std::vector<std::size_t> out;
  auto it = collapsed_.find(std::string(class_name));
  if (it != collapsed_.end()) {
    for (const auto& m : it->second) out.push_back(index(m));
  } else if (auto i = find(class_name)) {
    out.push_back(*i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prosodic features

std::optional<std::size_t> FeatureSchema::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureSchema::level_code(std::size_t feature,
                                                     std::string_view level) const {
  const auto& lv = levels.at(feature);
  for (std::size_t i = 0; i < lv.size(); ++i) {
    if (lv[i] == level) return i;
  }
  return std::nullopt;
}

ProsodicFeatureVector::ProsodicFeatureVector(std::shared_ptr<const FeatureSchema> schema,
                                             std::vector<std::optional<double>> values)
    : schema_(std::move(schema)), values_(std::move(values)) {
  if (!schema_) throw Error("feature vector without schema");
  if (values_.size() != schema_->size())
    throw Error("feature vector has " + std::to_string(values_.size()) + " values, schema has " +
                std::to_string(schema_->size()));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!values_[i]) continue;
    double v = *values_[i];
    if (!std::isfinite(v)) throw Error("non-finite value for feature " + schema_->names[i]);
    if (schema_->kinds[i] == FeatureKind::categorical &&
        (v < 0 || v != std::floor(v) || v >= static_cast<double>(schema_->levels[i].size())))
      throw Error("bad category code for feature " + schema_->names[i]);
  }
}

std::optional<std::string> ProsodicFeatureVector::category(std::size_t i) const {
  if (schema_->kinds.at(i) != FeatureKind::categorical || !values_[i]) return std::nullopt;
  return schema_->levels[i][static_cast<std::size_t>(*values_[i])];
}

bool ProsodicFeatureVector::operator==(const ProsodicFeatureVector& other) const {
  if (!schema_ || !other.schema_) return !schema_ && !other.schema_;
  if (schema_->names != other.schema_->names || schema_->kinds != other.schema_->kinds) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].has_value() != other.values_[i].has_value()) return false;
    if (!values_[i]) continue;
    if (schema_->kinds[i] == FeatureKind::categorical) {
      if (category(i) != other.category(i)) return false;
    } else if (*values_[i] != *other.values_[i]) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Conversation files

std::vector<Conversation> parse_conversations(std::istream& in, const TagSet& tagset,
                                              const std::string& source) {
  std::vector<Conversation> convs;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (skip_line(line)) continue;
    auto f = split(line, '\t');
    if (f.size() == 4) f.emplace_back();
    if (f.size() != 5)
      throw ParseError(source, lineno, "expected 5 tab-separated fields, got " +
                                           std::to_string(f.size()));
    Utterance u;
    u.conversation_id = std::string(trim(f[0]));
    if (u.conversation_id.empty()) throw ParseError(source, lineno, "empty conversation id");
    u.index = parse_index(source, lineno, f[1]);
    try {
      u.speaker = parse_speaker(f[2]);
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    std::string label(trim(f[3]));
    if (!label.empty()) {
      if (!tagset.contains(label))
        throw ParseError(source, lineno, "unknown dialogue act label '" + label + "'");
      u.da_label = label;
    }
    u.words = split_ws(f[4]);

    auto [it, inserted] = by_id.emplace(u.conversation_id, convs.size());
    if (inserted) convs.push_back(Conversation{u.conversation_id, {}});
    Conversation& c = convs[it->second];
    if (u.index != c.utterances.size())
      throw ParseError(source, lineno,
                       "non-contiguous utterance index " + std::to_string(u.index) +
                           " in conversation '" + c.id + "' (expected " +
                           std::to_string(c.utterances.size()) + ")");
    c.utterances.push_back(std::move(u));
  }
  return convs;
}

std::vector<Conversation> read_conversations(const std::filesystem::path& path,
                                             const TagSet& tagset) {
  auto in = open_input(path);
  return parse_conversations(in, tagset, path.string());
}

void write_conversations(std::ostream& out, std::span<const Conversation> convs) {
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      out << c.id << '\t' << u.index << '\t' << speaker_char(u.speaker) << '\t'
          << u.da_label.value_or("") << '\t' << join(u.words, " ") << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// N-best files

NBestTable parse_nbest(std::istream& in, const std::string& source, std::size_t max_size) {
  std::map<UtteranceKey, std::map<long long, Hypothesis>> ranked;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (skip_line(line)) continue;
    auto f = split(line, '\t');
    if (f.size() == 4) f.emplace_back();
    if (f.size() != 5)
      throw ParseError(source, lineno, "expected 5 tab-separated fields, got " +
                                           std::to_string(f.size()));
    UtteranceKey key{std::string(trim(f[0])), parse_index(source, lineno, f[1])};
    long long rank;
    Hypothesis h;
    try {
      rank = parse_int(f[2]);
      h.acoustic_log_score = parse_double(f[3]);
    } catch (const Error& e) {
      throw ParseError(source, lineno, e.what());
    }
    if (!std::isfinite(h.acoustic_log_score))
      throw ParseError(source, lineno, "acoustic score must be finite");
    h.words = split_ws(f[4]);
    if (!ranked[key].emplace(rank, std::move(h)).second)
      throw ParseError(source, lineno, "duplicate rank " + std::to_string(rank));
  }
  NBestTable table;
  for (auto& [key, hyps] : ranked) {
    NBestList list;
    for (auto& [rank, h] : hyps) {
      if (max_size && list.size() >= max_size) break;
      list.hypotheses.push_back(std::move(h));
    }
    table.emplace(key, std::move(list));
  }
  return table;
}

NBestTable read_nbest(const std::filesystem::path& path, std::size_t max_size) {
  auto in = open_input(path);
  return parse_nbest(in, path.string(), max_size);
}

void write_nbest(std::ostream& out, std::span<const Conversation> convs) {
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.nbest) continue;
      for (std::size_t r = 0; r < u.nbest->size(); ++r) {
        const auto& h = u.nbest->hypotheses[r];
        out << c.id << '\t' << u.index << '\t' << (r + 1) << '\t'
            << format_double(h.acoustic_log_score) << '\t' << join(h.words, " ") << '\n';
      }
    }
  }
}

namespace {

template <typename Table, typename Assign>
void attach_rows(std::vector<Conversation>& convs, const Table& table, const char* what,
                 Assign assign) {
  std::map<std::string, Conversation*> by_id;
  for (auto& c : convs) by_id[c.id] = &c;
  for (const auto& [key, value] : table) {
    auto it = by_id.find(key.first);
    if (it == by_id.end() || key.second >= it->second->utterances.size())
      throw Error(std::string(what) + " entry for unknown utterance " + key.first + ":" +
                  std::to_string(key.second));
    assign(it->second->utterances[key.second], value);
  }
}

}  // namespace

void attach_nbest(std::vector<Conversation>& convs, const NBestTable& table) {
  attach_rows(convs, table, "n-best", [](Utterance& u, const NBestList& l) { u.nbest = l; });
}

// ---------------------------------------------------------------------------
// Prosody files

ProsodyTable parse_prosody(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (skip_line(line)) continue;
    header = split(line, '\t');
    break;
  }
  ProsodyTable table;
  auto schema = std::make_shared<FeatureSchema>();
  if (header.empty()) {
    table.schema = schema;
    return table;
  }
  std::size_t skip = 0;
  if (header.size() >= 2 && trim(header[0]) == "conv_id" && trim(header[1]) == "index") skip = 2;
  std::vector<bool> forced_cat;
  for (std::size_t i = skip; i < header.size(); ++i) {
    std::string name(trim(header[i]));
    bool cat = false;
    if (name.size() > 4 && name.compare(name.size() - 4, 4, ":cat") == 0) {
      name.resize(name.size() - 4);
      cat = true;
    }
    if (name.empty()) throw ParseError(source, lineno, "empty feature name");
    if (schema->find(name)) throw ParseError(source, lineno, "duplicate feature " + name);
    schema->names.push_back(name);
    forced_cat.push_back(cat);
  }
  const std::size_t nf = schema->names.size();

  struct RawRow {
    UtteranceKey key;
    std::vector<std::string> cells;
    std::size_t lineno;
  };
  std::vector<RawRow> raw;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (skip_line(line)) continue;
    auto f = split(line, '\t');
    if (f.size() != nf + 2)
      throw ParseError(source, lineno, "expected " + std::to_string(nf + 2) + " fields, got " +
                                           std::to_string(f.size()));
    RawRow r{{std::string(trim(f[0])), parse_index(source, lineno, f[1])}, {}, lineno};
    for (std::size_t i = 0; i < nf; ++i) r.cells.emplace_back(trim(f[i + 2]));
    raw.push_back(std::move(r));
  }

  schema->kinds.assign(nf, FeatureKind::continuous);
  schema->levels.assign(nf, {});
  for (std::size_t i = 0; i < nf; ++i) {
    bool cat = forced_cat[i];
    for (const auto& r : raw) {
      if (cat) break;
      if (r.cells[i] == "NA") continue;
      try {
        parse_double(r.cells[i]);
      } catch (const Error&) {
        cat = true;
      }
    }
    if (!cat) continue;
    schema->kinds[i] = FeatureKind::categorical;
    std::set<std::string> levels;
    for (const auto& r : raw) {
      if (r.cells[i] != "NA") levels.insert(r.cells[i]);
    }
    schema->levels[i].assign(levels.begin(), levels.end());
  }

  table.schema = schema;
  for (const auto& r : raw) {
    std::vector<std::optional<double>> values(nf);
    for (std::size_t i = 0; i < nf; ++i) {
      if (r.cells[i] == "NA") continue;
      if (schema->kinds[i] == FeatureKind::categorical) {
        values[i] = static_cast<double>(*schema->level_code(i, r.cells[i]));
      } else {
        double v = parse_double(r.cells[i]);
        if (!std::isfinite(v))
          throw ParseError(source, r.lineno, "non-finite value for " + schema->names[i]);
        values[i] = v;
      }
    }
    if (!table.rows.emplace(r.key, ProsodicFeatureVector(schema, std::move(values))).second)
      throw ParseError(source, r.lineno, "duplicate prosody row");
  }
  return table;
}

ProsodyTable read_prosody(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_prosody(in, path.string());
}

void write_prosody(std::ostream& out, std::span<const Conversation> convs) {
  const FeatureSchema* schema = nullptr;
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.prosody) continue;
      if (!schema) {
        schema = &u.prosody->schema();
      } else if (!(*schema == u.prosody->schema())) {
        throw Error("utterances carry prosody with different schemas");
      }
    }
  }
  if (!schema) return;
  out << "conv_id\tindex";
  for (std::size_t i = 0; i < schema->size(); ++i) {
    out << '\t' << schema->names[i];
    if (schema->kinds[i] == FeatureKind::categorical) out << ":cat";
  }
  out << '\n';
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.prosody) continue;
      out << c.id << '\t' << u.index;
      for (std::size_t i = 0; i < schema->size(); ++i) {
        out << '\t';
        auto v = u.prosody->value(i);
        if (!v) {
          out << "NA";
        } else if (schema->kinds[i] == FeatureKind::categorical) {
          out << *u.prosody->category(i);
        } else {
          out << format_double(*v);
        }
      }
      out << '\n';
    }
  }
}

void attach_prosody(std::vector<Conversation>& convs, const ProsodyTable& table) {
  attach_rows(convs, table.rows, "prosody",
              [](Utterance& u, const ProsodicFeatureVector& v) { u.prosody = v; });
}

// ---------------------------------------------------------------------------
// Transforms

std::vector<Conversation> symmetrize_speakers(std::span<const Conversation> convs) {
  std::vector<Conversation> out(convs.begin(), convs.end());
  out.reserve(convs.size() * 2);
  for (const auto& c : convs) {
    Conversation swapped = c;
    for (auto& u : swapped.utterances) u.speaker = other_speaker(u.speaker);
    out.push_back(std::move(swapped));
  }
  return out;
}

std::vector<std::size_t> downsample_indices(std::span<const std::string> labels,
                                            std::span<const std::string> classes,
                                            std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> members;
  for (const auto& c : classes) members[c];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = members.find(labels[i]);
    if (it != members.end()) it->second.push_back(i);
  }
  std::size_t target = std::numeric_limits<std::size_t>::max();
  for (const auto& [cls, idx] : members) {
    if (idx.empty()) throw Error("class '" + cls + "' has no instances to sample from");
    target = std::min(target, idx.size());
  }
  if (members.empty()) return {};
  Rng rng(seed);
  std::vector<std::size_t> out;
  // Classes are visited in the order given so the draw sequence is stable.
  std::set<std::string> done;
  for (const auto& c : classes) {
    if (!done.insert(c).second) continue;
    auto idx = members[c];
    // Partial Fisher-Yates: the first `target` slots become a uniform sample.
    for (std::size_t i = 0; i < target; ++i) {
      std::size_t j = i + rng.uniform_index(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    out.insert(out.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(target));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Utterance> downsample_uniform(std::span<const Utterance> utts,
                                          std::span<const std::string> classes,
                                          std::uint64_t seed) {
  std::vector<std::string> labels;
  labels.reserve(utts.size());
  for (const auto& u : utts) labels.push_back(u.da_label.value_or(""));
  std::vector<Utterance> out;
  for (std::size_t i : downsample_indices(labels, classes, seed)) out.push_back(utts[i]);
  return out;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> jackknife_indices(
    std::size_t n, std::uint64_t seed) {
  if (n < 2) throw Error("jackknife split needs at least 2 conversations");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> first(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n / 2));
  std::vector<std::size_t> second(order.begin() + static_cast<std::ptrdiff_t>(n / 2), order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {std::move(first), std::move(second)};
}

std::pair<std::vector<Conversation>, std::vector<Conversation>> jackknife_split(
    std::span<const Conversation> convs, std::uint64_t seed) {
  auto [a, b] = jackknife_indices(convs.size(), seed);
  std::pair<std::vector<Conversation>, std::vector<Conversation>> out;
  for (auto i : a) out.first.push_back(convs[i]);
  for (auto i : b) out.second.push_back(convs[i]);
  return out;
}

std::vector<Utterance> flatten(std::span<const Conversation> convs) {
  std::vector<Utterance> out;
  for (const auto& c : convs) out.insert(out.end(), c.utterances.begin(), c.utterances.end());
  return out;
}

}  // namespace datag
