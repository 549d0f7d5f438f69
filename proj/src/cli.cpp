#include "datag/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "datag/corpus.hpp"
#include "datag/da_models.hpp"
#include "datag/discourse.hpp"
#include "datag/hmm.hpp"
#include "datag/metrics.hpp"
#include "datag/ngram.hpp"
#include "datag/rescoring.hpp"
#include "datag/tree.hpp"
#include "datag/util.hpp"

namespace fs = std::filesystem;

namespace datag {

namespace {

struct RunConfig {
  std::string tagset_path;
  std::string corpus_path;
  std::string nbest_path;
  std::string prosody_path;
  std::string models_dir;
  std::string output_path;
  std::string predictions_path;

  int order = 3;
  std::string variant = "U_only";
  int lm_order = 3;
  std::size_t tree_classes = 5;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 8;
  double leaf_smoothing = 1.0;

  std::string mode = "true_words";
  std::string grammar = "model";
  std::string decode = "posterior";
  bool online = false;
  double lambda = 10.0;
  double mu = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  bool tune = false;
  std::size_t nbest_max = 0;

  std::vector<std::string> methods;
  std::string per_da_method = "oracle";
  bool tsv = false;
  std::vector<std::string> binary;

  std::uint64_t seed = 0;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

TagSet load_tagset(const std::string& path) {
  return path.empty() ? TagSet::swbd_damsl() : TagSet::read(path);
}

std::vector<Conversation> load_corpus(const RunConfig& cfg, const TagSet& tagset) {
  if (cfg.corpus_path.empty()) throw Error("--corpus is required");
  auto convs = read_conversations(cfg.corpus_path, tagset);
  if (!cfg.nbest_path.empty()) attach_nbest(convs, read_nbest(cfg.nbest_path, cfg.nbest_max));
  if (!cfg.prosody_path.empty()) attach_prosody(convs, read_prosody(cfg.prosody_path));
  return convs;
}

bool fully_labeled(std::span<const Conversation> convs) {
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.da_label) return false;
    }
  }
  return true;
}

std::string collapsed_name(const TagSet& tagset) {
  std::string name = "OTHER";
  while (tagset.contains(name)) name += '_';
  return name;
}

// Everything the tag and rescore commands need from a model directory.
struct Models {
  TagSet tagset;
  DiscourseGrammar grammar;
  DaLmSet lms;
  DaLmSet smoothed;
  std::shared_ptr<const NGramModel> baseline;
  std::optional<DecisionTree> tree;
  TagSet tree_tagset;
  std::map<std::string, std::string> manifest;
};

std::map<std::string, std::string> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 2) throw ParseError(path.string(), n, "expected key TAB value");
    out[f[0]] = f[1];
  }
  return out;
}

Models load_models(const fs::path& dir) {
  Models m;
  m.manifest = read_manifest(dir / "manifest.tsv");
  auto get = [&](const std::string& key) {
    auto it = m.manifest.find(key);
    if (it == m.manifest.end()) throw Error("model manifest lacks '" + key + "'");
    return it->second;
  };
  m.tagset = TagSet::read(dir / get("tagset"));
  m.grammar = DiscourseGrammar::load(dir / get("discourse"), m.tagset);
  m.lms = DaLmSet::load(dir / get("da_lms"), m.tagset);
  m.smoothed = DaLmSet::load(dir / get("da_lms_smoothed"), m.tagset);
  m.baseline = std::make_shared<const NGramModel>(NGramModel::load(dir / get("baseline")));
  m.tree_tagset = m.tagset;
  const std::string tree = get("tree");
  if (tree != "none") {
    m.tree = DecisionTree::load(dir / tree);
    const std::string other = get("tree_other");
    if (other != "none") {
      std::vector<std::string> keep;
      for (const auto& c : m.tree->classes()) {
        if (c != other) keep.push_back(c);
      }
      m.tree_tagset = m.tagset.with_collapsed_other(keep, other);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const TagSet tagset = load_tagset(cfg.tagset_path);
  if (cfg.models_dir.empty()) throw Error("--models is required");
  auto convs = load_corpus(cfg, tagset);
  if (convs.empty()) throw Error("training corpus is empty");
  const GrammarVariant variant = parse_variant(cfg.variant);

  const auto sym = symmetrize_speakers(convs);
  const DiscourseGrammar grammar =
      cfg.order == 0 ? DiscourseGrammar::none(tagset, variant) : DiscourseGrammar::train(sym, tagset, cfg.order, variant);
  const DaLmSet lms = DaLmSet::train(convs, tagset, cfg.lm_order);
  const DaLmSet smoothed = lms.smoothed(convs);
  for (const auto& w : lms.warnings()) err << "warning: " << w << '\n';

  const fs::path dir = cfg.models_dir;
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "tagset.txt");
    tagset.write(f);
  }
  grammar.save(dir / "discourse.arpa");
  lms.pooled().save(dir / "baseline.arpa");
  lms.save(dir / "da_lms");
  smoothed.save(dir / "da_lms_smoothed");

  std::string tree_file = "none";
  std::string tree_other = "none";
  if (!cfg.prosody_path.empty()) {
    // Tree classes: the most frequent DAs plus one collapsed class for the rest.
    std::vector<std::size_t> counts(tagset.size(), 0);
    for (const auto& c : convs) {
      for (const auto& u : c.utterances) {
        if (u.prosody && u.da_label) ++counts[tagset.index(*u.da_label)];
      }
    }
    std::vector<std::size_t> order(tagset.size());
    for (std::size_t d = 0; d < order.size(); ++d) order[d] = d;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    std::vector<std::string> keep;
    for (std::size_t d : order) {
      if (keep.size() < cfg.tree_classes && counts[d] > 0) keep.push_back(tagset.label(d));
    }
    std::size_t rest = 0;
    for (std::size_t d = 0; d < tagset.size(); ++d) {
      if (std::find(keep.begin(), keep.end(), tagset.label(d)) == keep.end()) rest += counts[d];
    }
    std::vector<std::string> classes = keep;
    if (rest > 0) {
      tree_other = collapsed_name(tagset);
      classes.push_back(tree_other);
    }
    if (classes.size() < 2) throw Error("prosodic tree needs at least two classes with prosody");

    std::vector<ProsodicFeatureVector> fv;
    std::vector<std::string> labels;
    for (const auto& c : convs) {
      for (const auto& u : c.utterances) {
        if (!u.prosody || !u.da_label) continue;
        fv.push_back(*u.prosody);
        const bool kept = std::find(keep.begin(), keep.end(), *u.da_label) != keep.end();
        labels.push_back(kept ? *u.da_label : tree_other);
      }
    }
    const auto chosen = downsample_indices(labels, classes, cfg.seed);
    std::vector<ProsodicFeatureVector> x;
    std::vector<std::string> y;
    for (auto i : chosen) {
      x.push_back(fv[i]);
      y.push_back(labels[i]);
    }
    TreeConfig tc;
    tc.min_leaf = cfg.min_leaf;
    tc.max_depth = cfg.max_depth;
    tc.leaf_smoothing = cfg.leaf_smoothing;
    std::vector<std::string> warnings;
    const auto tree = DecisionTree::train(x, y, tc, classes, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    tree_file = "prosody.tree";
    tree.save(dir / tree_file);
    out << "prosody tree: " << classes.size() << " classes, " << x.size() << " training samples, "
        << tree.leaf_count() << " leaves\n";
  } else if (fs::exists(dir / "prosody.tree")) {
    fs::remove(dir / "prosody.tree");
  }

  {
    auto f = open_out(dir / "manifest.tsv");
    f << "# datag model directory\n";
    f << "tagset\ttagset.txt\n";
    f << "discourse\tdiscourse.arpa\n";
    f << "discourse_order\t" << cfg.order << '\n';
    f << "variant\t" << variant_name(variant) << '\n';
    f << "baseline\tbaseline.arpa\n";
    f << "lm_order\t" << cfg.lm_order << '\n';
    f << "da_lms\tda_lms\n";
    f << "da_lms_smoothed\tda_lms_smoothed\n";
    f << "tree\t" << tree_file << '\n';
    f << "tree_other\t" << tree_other << '\n';
    f << "seed\t" << cfg.seed << '\n';
    if (!f) throw Error("write failed for manifest");
  }

  std::vector<std::vector<std::string>> sentences;
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) sentences.push_back(u.words);
  }
  out << std::fixed << std::setprecision(3);
  if (fully_labeled(convs)) out << "discourse perplexity (training): " << discourse_perplexity(grammar, convs) << '\n';
  out << "baseline word perplexity (training): " << perplexity(lms.pooled(), sentences) << '\n';
  out << "models written to " << dir.string() << '\n';
  return 0;
}

// Per-conversation combined likelihood tables for the tag and rescore commands.
struct Evidence {
  std::vector<LikelihoodTable> words;
  std::vector<std::optional<LikelihoodTable>> prosody;
};

Evidence build_evidence(const Models& m, std::span<const Conversation> convs, WordEvidence mode,
                        const RescoreConfig& rc, bool use_prosody) {
  Evidence ev;
  for (const auto& c : convs) {
    ev.words.push_back(word_likelihood_table(m.lms, c, mode, rc));
    if (use_prosody && m.tree)
      ev.prosody.push_back(prosody_likelihood_table(*m.tree, c, m.tree_tagset, m.tree->priors()));
    else
      ev.prosody.push_back(std::nullopt);
  }
  return ev;
}

std::vector<std::vector<std::size_t>> reference_labels(std::span<const Conversation> convs, const TagSet& tagset) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& c : convs) {
    std::vector<std::size_t> labels;
    for (const auto& e : conversation_events(c, tagset)) labels.push_back(e.da);
    out.push_back(std::move(labels));
  }
  return out;
}

int cmd_tag(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.models_dir.empty()) throw Error("--models is required");
  const Models m = load_models(cfg.models_dir);
  const auto convs = load_corpus(cfg, m.tagset);
  const WordEvidence mode = parse_evidence(cfg.mode);
  const RescoreConfig rc{cfg.lambda, cfg.mu};
  rc.validate();
  const bool use_prosody = !cfg.prosody_path.empty();
  if (use_prosody && !m.tree) throw Error("--prosody given but the model directory has no prosody tree");
  const DiscourseGrammar grammar =
      cfg.grammar == "none" ? DiscourseGrammar::none(m.tagset, m.grammar.variant()) : m.grammar;
  const Evidence ev = build_evidence(m, convs, mode, rc, use_prosody);
  const bool labeled = fully_labeled(convs);

  std::vector<std::vector<std::size_t>> predicted(convs.size());
  std::vector<std::vector<double>> confidence(convs.size());
  CombinationWeights weights{cfg.alpha, cfg.beta};
  std::ostringstream notes;

  auto decode = [&](std::size_t c, CombinationWeights w) {
    const auto table = combine_likelihoods(ev.words[c], ev.prosody[c] ? &*ev.prosody[c] : nullptr, w);
    const auto post =
        forward_backward(grammar, table, cfg.online ? PosteriorMode::online : PosteriorMode::offline);
    predicted[c] = cfg.decode == "viterbi" ? viterbi_decode(grammar, table).labels : argmax_labels(post);
    confidence[c].clear();
    for (std::size_t i = 0; i < post.size(); ++i) confidence[c].push_back(post[i][predicted[c][i]]);
  };

  if (cfg.tune) {
    if (!labeled) throw Error("--tune needs a fully labeled corpus");
    const auto labels = reference_labels(convs, m.tagset);
    std::vector<TuningItem> items;
    for (std::size_t c = 0; c < convs.size(); ++c) items.push_back({ev.words[c], ev.prosody[c], labels[c]});
    const auto halves = jackknife_indices(convs.size(), cfg.seed);
    const auto jk = tune_alpha_beta(grammar, items, halves);
    for (int k = 0; k < 2; ++k) {
      notes << "half " << k + 1 << ": alpha " << format_double(jk.tuned[k].weights.alpha) << " beta "
            << format_double(jk.tuned[k].weights.beta) << ", held-out accuracy "
            << std::fixed << std::setprecision(2) << 100.0 * jk.heldout[1 - k].accuracy() << "%\n";
      for (std::size_t c : jk.halves[1 - k]) decode(c, jk.tuned[k].weights);
    }
  } else {
    for (std::size_t c = 0; c < convs.size(); ++c) decode(c, weights);
  }

  std::ofstream file;
  if (!cfg.output_path.empty()) file = open_out(cfg.output_path);
  std::ostream& pred_out = cfg.output_path.empty() ? out : file;
  for (std::size_t c = 0; c < convs.size(); ++c) {
    for (std::size_t i = 0; i < convs[c].size(); ++i) {
      pred_out << convs[c].id << '\t' << convs[c].utterances[i].index << '\t' << m.tagset.label(predicted[c][i])
               << '\t' << format_double(confidence[c][i]) << '\n';
    }
  }
  if (!pred_out) throw Error("failed to write predictions");

  std::ostream& report = cfg.output_path.empty() ? err : out;
  report << notes.str();
  if (labeled) {
    const auto rep = tagging_accuracy(predicted, reference_labels(convs, m.tagset), m.tagset);
    if (cfg.tsv)
      write_report_tsv(report, rep);
    else
      write_report_text(report, rep);
  }
  return 0;
}

int cmd_rescore(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  if (cfg.models_dir.empty()) throw Error("--models is required");
  if (cfg.nbest_path.empty()) throw Error("--nbest is required");
  const Models m = load_models(cfg.models_dir);
  const auto convs = load_corpus(cfg, m.tagset);
  const bool labeled = fully_labeled(convs);

  std::vector<RescoreMethod> methods;
  if (cfg.methods.empty()) {
    for (auto k : all_methods()) {
      if (k != RescoreMethod::oracle || labeled) methods.push_back(k);
    }
  } else {
    for (const auto& name : cfg.methods) methods.push_back(parse_method(name));
  }
  const bool oracle = std::find(methods.begin(), methods.end(), RescoreMethod::oracle) != methods.end();
  if (oracle && !labeled) throw Error("the oracle method needs DA labels for every utterance");

  const RescoreConfig rc{cfg.lambda, cfg.mu};
  rc.validate();
  const bool use_prosody = !cfg.prosody_path.empty();
  if (use_prosody && !m.tree) throw Error("--prosody given but the model directory has no prosody tree");
  const DiscourseGrammar grammar =
      cfg.grammar == "none" ? DiscourseGrammar::none(m.tagset, m.grammar.variant()) : m.grammar;

  // DA posteriors from the unsmoothed models; utterances without n-best lists
  // contribute uninformative word evidence.
  std::vector<std::vector<std::vector<double>>> posteriors;
  for (const auto& c : convs) {
    auto words = make_table(c, m.tagset.size());
    words.provenance.words = words.provenance.acoustics = true;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& u = c.utterances[i];
      if (!u.nbest || u.nbest->empty()) continue;
      for (std::size_t d = 0; d < m.tagset.size(); ++d)
        words.log_likelihoods[i][d] = nbest_da_log_likelihood(m.lms, *u.nbest, d, rc);
    }
    std::optional<LikelihoodTable> pros;
    if (use_prosody) pros = prosody_likelihood_table(*m.tree, c, m.tree_tagset, m.tree->priors());
    const auto table = combine_likelihoods(words, pros ? &*pros : nullptr, {cfg.alpha, cfg.beta});
    posteriors.push_back(forward_backward(grammar, table));
  }

  const auto result = rescore_corpus(convs, m.smoothed, *m.baseline, posteriors, methods, rc);
  if (!cfg.output_path.empty()) {
    auto f = open_out(cfg.output_path);
    write_rescore_choices(f, result);
  }
  write_rescore_summary(out, result, cfg.tsv);
  if (labeled) {
    const RescoreMethod per = parse_method(cfg.per_da_method);
    if (std::find(methods.begin(), methods.end(), per) != methods.end() &&
        std::find(methods.begin(), methods.end(), RescoreMethod::baseline) != methods.end()) {
      out << '\n';
      write_per_da_report(out, per_da_wer_report(result, m.tagset, per), cfg.tsv);
    }
  }
  return 0;
}

int cmd_perplexity(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  if (cfg.models_dir.empty()) throw Error("--models is required");
  const Models m = load_models(cfg.models_dir);
  const auto convs = load_corpus(cfg, m.tagset);
  std::vector<std::vector<std::string>> sentences;
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) sentences.push_back(u.words);
  }
  out << std::fixed << std::setprecision(3);
  if (fully_labeled(convs)) {
    out << "discourse\t" << discourse_perplexity(m.grammar, convs) << '\n';
    // Word perplexity when each utterance is scored by its own DA's model.
    for (const auto* set : {&m.lms, &m.smoothed}) {
      double lp = 0.0;
      std::size_t n = 0;
      for (const auto& c : convs) {
        for (const auto& u : c.utterances) {
          const auto& lm = set->model(m.tagset.index(*u.da_label));
          lp += lm.sentence_log_prob(u.words);
          n += lm.sentence_token_count(u.words);
        }
      }
      if (n > 0) out << (set == &m.lms ? "da_lms" : "da_lms_smoothed") << '\t' << std::exp(-lp / static_cast<double>(n)) << '\n';
    }
  }
  if (!sentences.empty()) out << "baseline\t" << perplexity(*m.baseline, sentences) << '\n';
  return 0;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const TagSet tagset = load_tagset(cfg.tagset_path);
  const auto convs = load_corpus(cfg, tagset);
  if (!cfg.binary.empty()) {
    if (cfg.binary.size() != 2) throw Error("--binary takes exactly two DA labels");
    const auto utts = flatten(convs);
    BinaryTaskConfig bc;
    bc.seed = cfg.seed;
    bc.lm_order = cfg.lm_order;
    bc.tree.min_leaf = cfg.min_leaf;
    bc.tree.max_depth = cfg.max_depth;
    bc.tree.leaf_smoothing = cfg.leaf_smoothing;
    if (cfg.prosody_path.empty()) bc.classifiers = {BinaryClassifier::words};
    write_binary_task(out, focused_binary_task(utts, cfg.binary[0], cfg.binary[1], bc));
    return 0;
  }
  if (cfg.predictions_path.empty()) throw Error("--predictions or --binary is required");
  std::ifstream in(cfg.predictions_path);
  if (!in) throw Error("cannot open " + cfg.predictions_path);
  std::map<UtteranceKey, std::size_t> pred;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() < 3) throw ParseError(cfg.predictions_path, n, "expected conv TAB index TAB label");
    try {
      pred[{f[0], static_cast<std::size_t>(parse_int(f[1]))}] = tagset.index(f[2]);
    } catch (const Error& e) {
      throw ParseError(cfg.predictions_path, n, e.what());
    }
  }
  std::vector<std::size_t> p, r;
  for (const auto& c : convs) {
    for (const auto& u : c.utterances) {
      if (!u.da_label) throw Error("reference corpus has unlabeled utterance " + c.id + ":" + std::to_string(u.index));
      auto it = pred.find({c.id, u.index});
      if (it == pred.end()) throw Error("no prediction for " + c.id + ":" + std::to_string(u.index));
      p.push_back(it->second);
      r.push_back(tagset.index(*u.da_label));
    }
  }
  const auto rep = tagging_accuracy(p, r, tagset);
  if (cfg.tsv)
    write_report_tsv(out, rep);
  else
    write_report_text(out, rep);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dialogue act tagging: discourse HMMs, DA language models, prosodic trees and n-best rescoring",
               "datag"};
  app.require_subcommand(1);
  RunConfig cfg;
  app.add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train discourse grammar, DA language models and prosody tree");
  auto* tag = app.add_subcommand("tag", "Label conversations with dialogue acts");
  auto* rescore = app.add_subcommand("rescore", "Rescore recognizer n-best lists with DA-conditioned models");
  auto* ppl = app.add_subcommand("perplexity", "Report discourse and word perplexities");
  auto* eval = app.add_subcommand("eval", "Score predictions against labels, or run a two-class task");

  for (auto* sub : {train, tag, rescore, ppl, eval}) {
    sub->add_option("--corpus", cfg.corpus_path, "Conversation file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", cfg.seed, "Seed for every random choice")->capture_default_str();
  }
  for (auto* sub : {tag, rescore, ppl}) {
    sub->add_option("--models", cfg.models_dir, "Model directory")->required()->check(CLI::ExistingDirectory);
  }
  for (auto* sub : {train, eval}) sub->add_option("--tagset", cfg.tagset_path, "Tag-set file (default: built-in 42 labels)")->check(CLI::ExistingFile);
  for (auto* sub : {train, tag, rescore, eval})
    sub->add_option("--prosody", cfg.prosody_path, "Prosodic feature table")->check(CLI::ExistingFile);
  for (auto* sub : {tag, rescore, eval}) sub->add_flag("--tsv", cfg.tsv, "Reports as TSV");
  for (auto* sub : {tag, rescore}) {
    sub->add_option("--output", cfg.output_path, "Output file");
    sub->add_option("--grammar", cfg.grammar, "Discourse prior")->check(CLI::IsMember({"model", "none"}))->capture_default_str();
    sub->add_option("--lambda", cfg.lambda, "Language model weight")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--mu", cfg.mu, "Word insertion penalty")->capture_default_str();
    sub->add_option("--alpha", cfg.alpha, "Prosody weight")->check(CLI::NonNegativeNumber)->capture_default_str();
    sub->add_option("--beta", cfg.beta, "Likelihood dynamic range weight")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--nbest-max", cfg.nbest_max, "Keep at most this many hypotheses (0 keeps all)");
  }
  rescore->add_option("--nbest", cfg.nbest_path, "N-best file")->required()->check(CLI::ExistingFile);
  tag->add_option("--nbest", cfg.nbest_path, "N-best file")->check(CLI::ExistingFile);
  for (auto* sub : {train, eval}) {
    sub->add_option("--lm-order", cfg.lm_order, "Order of the DA word models")->check(CLI::Range(1, 10))->capture_default_str();
    sub->add_option("--min-leaf", cfg.min_leaf, "Minimum samples per tree leaf")->check(CLI::Range(1, 1000000))->capture_default_str();
    sub->add_option("--max-depth", cfg.max_depth, "Maximum tree depth")->capture_default_str();
    sub->add_option("--leaf-smoothing", cfg.leaf_smoothing, "Pseudo-count added to tree leaf classes")->check(CLI::NonNegativeNumber)->capture_default_str();
  }

  train->add_option("--models", cfg.models_dir, "Output model directory")->required();
  train->add_option("--order", cfg.order, "Discourse n-gram order (0 for none)")->check(CLI::Range(0, 6))->capture_default_str();
  train->add_option("--variant", cfg.variant, "Discourse grammar variant")
      ->check(CLI::IsMember({"U_only", "U_and_T", "U_given_T"}))
      ->capture_default_str();
  train->add_option("--tree-classes", cfg.tree_classes, "Most frequent DAs the prosody tree separates")
      ->check(CLI::Range(1, 1000))
      ->capture_default_str();

  tag->add_option("--mode", cfg.mode, "Word evidence")->check(CLI::IsMember({"true_words", "nbest", "one_best"}))->capture_default_str();
  tag->add_option("--decode", cfg.decode, "Decoder")->check(CLI::IsMember({"posterior", "viterbi"}))->capture_default_str();
  tag->add_flag("--online", cfg.online, "Posteriors from preceding evidence only");
  tag->add_flag("--tune", cfg.tune, "Tune alpha and beta by twofold jackknife");

  rescore->add_option("--methods", cfg.methods, "Methods to run (default: all)")
      ->delimiter(',')
      ->check(CLI::IsMember({"baseline", "one_best", "mixture_of_posteriors", "mixture_of_lms", "oracle"}));
  rescore->add_option("--per-da", cfg.per_da_method, "Method compared with baseline by DA")
      ->check(CLI::IsMember({"one_best", "mixture_of_posteriors", "mixture_of_lms", "oracle"}))
      ->capture_default_str();

  eval->add_option("--predictions", cfg.predictions_path, "Output of the tag command")->check(CLI::ExistingFile);
  eval->add_option("--binary", cfg.binary, "Two DA labels for a balanced two-class task")->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (*train) return cmd_train(cfg, out, err);
    if (*tag) return cmd_tag(cfg, out, err);
    if (*rescore) return cmd_rescore(cfg, out, err);
    if (*ppl) return cmd_perplexity(cfg, out, err);
    if (*eval) return cmd_eval(cfg, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace datag
