#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "citenav/corpus.hpp"
#include "citenav/dedup.hpp"
#include "citenav/errors.hpp"
#include "citenav/eval.hpp"
#include "citenav/index.hpp"
#include "citenav/pipeline.hpp"
#include "citenav/rerank.hpp"
#include "citenav/scorer_protocol.hpp"

namespace citenav::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr const char* kScorerEnv = "CITENAV_SCORER";

// Writes through a temporary file so a failed command never leaves a
// half-written artifact under the final name.
void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    body(f);
    f.flush();
    if (!f) throw std::runtime_error("write failure on '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read '" + path.string() + "'");
  return f;
}

Corpus load_corpus(const fs::path& path, std::ostream& err) {
  if (!fs::exists(path)) throw std::runtime_error("corpus not found: '" + path.string() + "'");
  auto result = ingest_corpus(path);
  if (result.skipped > 0) err << fmt::format("warning: skipped {} unusable lines in '{}'\n", result.skipped, path.string());
  return result.corpus;
}

Qrels load_qrels(const fs::path& path) {
  auto f = open_input(path);
  return read_qrels(f);
}

// ---------------------------------------------------------------------------
// Pipeline settings shared by run, sweep and repl: config file first, flags
// on top, scorer falling back to the environment.

struct PipelineFlags {
  std::string config_path;
  std::size_t T = 0;
  std::vector<std::size_t> kd;
  std::vector<std::size_t> kc;
  std::vector<std::string> budgets;
  std::string scorer;
  std::string query_type;
  std::size_t depth = 1000;
  std::size_t key_terms = 16;
  std::size_t max_total = 512;
  std::size_t query_budget = 256;
  std::size_t candidate_budget = 256;
  bool temporal_guard = false;
  bool no_lowercase = false;
  bool no_stopwords = false;
  bool no_stem = false;
  long timeout_ms = 30000;
  std::size_t batch_size = 256;

  CLI::Option* T_opt = nullptr;
  CLI::Option* kd_opt = nullptr;
  CLI::Option* kc_opt = nullptr;
  CLI::Option* budgets_opt = nullptr;
  CLI::Option* scorer_opt = nullptr;
  CLI::Option* query_type_opt = nullptr;
  CLI::Option* depth_opt = nullptr;
  CLI::Option* key_terms_opt = nullptr;
  CLI::Option* max_total_opt = nullptr;
  CLI::Option* query_budget_opt = nullptr;
  CLI::Option* candidate_budget_opt = nullptr;
  CLI::Option* guard_opt = nullptr;
  CLI::Option* no_lowercase_opt = nullptr;
  CLI::Option* no_stopwords_opt = nullptr;
  CLI::Option* no_stem_opt = nullptr;
};

void add_analyzer_flags(CLI::App* cmd, PipelineFlags& f) {
  f.no_lowercase_opt = cmd->add_flag("--no-lowercase", f.no_lowercase, "Keep letter case");
  f.no_stopwords_opt = cmd->add_flag("--no-stopwords", f.no_stopwords, "Keep stopwords");
  f.no_stem_opt = cmd->add_flag("--no-stem", f.no_stem, "Disable Porter stemming");
}

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f, bool with_iterations = true) {
  cmd->add_option("--config", f.config_path, "JSON config file; flags override it")->check(CLI::ExistingFile);
  if (with_iterations) {
    f.T_opt = cmd->add_option("--T", f.T, "Number of navigation + ranking iterations");
    f.kd_opt = cmd->add_option("--kd", f.kd, "Retained documents per iteration")->delimiter(',');
    f.kc_opt = cmd->add_option("--kc", f.kc, "Gathered citations per iteration")->delimiter(',');
    f.budgets_opt = cmd->add_option("--budgets", f.budgets, "Iteration budgets as kd:kc, comma separated")->delimiter(',');
  }
  f.scorer_opt = cmd->add_option("--scorer", f.scorer,
                                 "identity | lexical:<model.json> | cmd:<command> | external:<host>:<port>");
  f.query_type_opt = cmd->add_option("--query-type", f.query_type, "title | title_and_abstract | key_terms");
  f.depth_opt = cmd->add_option("--depth", f.depth, "Initial retrieval depth");
  f.key_terms_opt = cmd->add_option("--key-terms", f.key_terms, "Key terms per query for key_terms queries");
  f.max_total_opt = cmd->add_option("--max-total", f.max_total, "Token budget for a query/candidate pair");
  f.query_budget_opt = cmd->add_option("--query-budget", f.query_budget, "Query side token budget");
  f.candidate_budget_opt = cmd->add_option("--candidate-budget", f.candidate_budget, "Candidate side token budget");
  f.guard_opt = cmd->add_flag("--temporal-guard", f.temporal_guard, "Skip citations newer than the query paper");
  cmd->add_option("--timeout-ms", f.timeout_ms, "External scorer timeout per batch");
  cmd->add_option("--batch-size", f.batch_size, "External scorer batch size");
  add_analyzer_flags(cmd, f);
}

json read_config_json(const std::string& path) {
  if (path.empty()) return json::object();
  auto f = open_input(path);
  std::stringstream buf;
  buf << f.rdbuf();
  auto j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ArgumentError("config '" + path + "' is not a JSON object");
  return j;
}

IterationBudget parse_budget(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ArgumentError("budget '" + text + "' is not of the form kd:kc");
  try {
    std::size_t used = 0;
    const auto kd = std::stoull(text.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("kd");
    const auto rest = text.substr(colon + 1);
    const auto kc = std::stoull(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("kc");
    return {kd, kc};
  } catch (const std::logic_error&) {
    throw ArgumentError("budget '" + text + "' is not of the form kd:kc");
  }
}

AnalyzerConfig apply_analyzer_flags(AnalyzerConfig a, const PipelineFlags& f) {
  if (f.no_lowercase) a.lowercase = false;
  if (f.no_stopwords) a.remove_stopwords = false;
  if (f.no_stem) a.stem = false;
  return a;
}

bool analyzer_flag_given(const PipelineFlags& f) { return f.no_lowercase || f.no_stopwords || f.no_stem; }

struct Resolved {
  PipelineConfig config;
  bool analyzer_pinned = false;  // config or flags named an analyzer
  ExternalScorerOptions scorer_options;
};

Resolved resolve_pipeline(const PipelineFlags& f) {
  const json file = read_config_json(f.config_path);
  Resolved r;
  r.config = PipelineConfig::from_json(file.dump());
  r.analyzer_pinned = file.contains("analyzer") || analyzer_flag_given(f);
  if (!file.contains("scorer")) {
    if (const char* env = std::getenv(kScorerEnv); env && *env) r.config.scorer = env;
  }

  PipelineConfig& c = r.config;
  if (f.budgets_opt && f.budgets_opt->count() > 0) {
    c.iterations.clear();
    for (const auto& b : f.budgets) c.iterations.push_back(parse_budget(b));
  } else if (f.kd_opt && (f.kd_opt->count() > 0 || f.kc_opt->count() > 0)) {
    if (f.kd.size() != f.kc.size()) throw ArgumentError("--kd and --kc need the same number of values");
    c.iterations.clear();
    for (std::size_t t = 0; t < f.kd.size(); ++t) c.iterations.push_back({f.kd[t], f.kc[t]});
  }
  if (f.T_opt && f.T_opt->count() > 0) {
    if (f.T == 0) {
      c.iterations.clear();
    } else if (c.iterations.size() != f.T) {
      throw ArgumentError(fmt::format("--T {} needs {} iteration budgets, got {}", f.T, f.T, c.iterations.size()));
    }
  }
  if (f.scorer_opt->count() > 0) c.scorer = f.scorer;
  if (f.query_type_opt->count() > 0) c.query_type = parse_query_type(f.query_type);
  if (f.depth_opt->count() > 0) c.retrieval_depth = f.depth;
  if (f.key_terms_opt->count() > 0) c.key_term_count = f.key_terms;
  if (f.max_total_opt->count() > 0) c.budget.max_total = f.max_total;
  if (f.query_budget_opt->count() > 0) c.budget.query_budget = f.query_budget;
  if (f.candidate_budget_opt->count() > 0) c.budget.candidate_budget = f.candidate_budget;
  if (f.guard_opt->count() > 0) c.temporal_guard = true;
  c.analyzer = apply_analyzer_flags(c.analyzer, f);

  if (f.timeout_ms <= 0) throw ArgumentError("--timeout-ms must be positive");
  if (f.batch_size == 0) throw ArgumentError("--batch-size must be positive");
  r.scorer_options.timeout = std::chrono::milliseconds(f.timeout_ms);
  r.scorer_options.batch_size = f.batch_size;
  return r;
}

// Loads the index; an unpinned config adopts the index's analyzer.
InvertedIndex load_index_for(const fs::path& path, Resolved& r) {
  if (!fs::exists(path)) throw std::runtime_error("index not found: '" + path.string() + "'");
  if (r.analyzer_pinned) return InvertedIndex::load(path, r.config.analyzer);
  auto index = InvertedIndex::load(path);
  r.config.analyzer = index.analyzer();
  return index;
}

std::vector<Paper> query_papers_from_ids(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<Paper> papers;
  papers.reserve(ids.size());
  for (const auto& id : ids) {
    const Paper* p = corpus.find(id);
    if (!p) throw ArgumentError("query '" + id + "' is not in the corpus");
    papers.push_back(*p);
  }
  return papers;
}

std::vector<std::string> read_id_list(const fs::path& path) {
  auto f = open_input(path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(f, line)) {
    std::istringstream fields(line);
    std::string id;
    if (fields >> id && id[0] != '#') ids.push_back(id);
  }
  return ids;
}

// ---------------------------------------------------------------------------

void print_stats_row(std::ostream& out, const std::string& label, const StatsReport& s) {
  out << fmt::format("{:<10} {:>10} {:>12} {:>14.4f} {:>12.2f}\n", label, s.docs, s.citations, s.avg_citations,
                     s.avg_length_chars);
}

std::string stats_header() {
  return fmt::format("{:<10} {:>10} {:>12} {:>14} {:>12}\n", "stage", "docs", "citations", "avg_citations",
                     "avg_length");
}

struct IngestArgs {
  std::string input;
  std::string out;
  bool no_filter = false;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::exists(a.input)) throw IngestError("input not found: '" + a.input + "'");
  const auto raw = ingest_corpus(a.input);
  const Corpus corpus = a.no_filter ? raw.corpus : filter_corpus(raw.corpus);
  const auto raw_stats = corpus_stats(raw.corpus);
  const auto stats = corpus_stats(corpus);

  std::ostringstream table;
  table << stats_header();
  print_stats_row(table, "raw", raw_stats);
  if (!a.no_filter) print_stats_row(table, "filtered", stats);
  table << fmt::format("skipped lines: {}\n", raw.skipped);

  const fs::path dir(a.out);
  write_file(dir / "corpus.jsonl", [&](std::ostream& f) { write_corpus(f, corpus); });
  write_file(dir / "stats.txt", [&](std::ostream& f) { f << table.str(); });
  out << table.str();
  if (raw.skipped > 0) err << fmt::format("warning: {} unusable lines skipped\n", raw.skipped);
  return 0;
}

struct SplitArgs {
  std::string corpus;
  std::string out;
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
  std::size_t dev_sample = 0;
  std::size_t test_sample = 0;
  std::uint64_t seed = 0;
};

int cmd_split(const SplitArgs& a, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(a.corpus, err);
  SplitSpec spec;
  spec.train_fraction = a.train;
  spec.dev_fraction = a.dev;
  spec.test_fraction = a.test;
  if (a.dev_sample) spec.dev_sample_size = a.dev_sample;
  if (a.test_sample) spec.test_sample_size = a.test_sample;
  spec.sample_seed = a.seed;
  const Split split = split_by_year(corpus, spec);

  std::vector<std::string> train_ids;
  for (const auto& p : split.train.papers()) train_ids.push_back(p.id);
  const QuerySet train_queries = make_queries(split.train, train_ids);

  const fs::path dir(a.out);
  write_file(dir / "train.jsonl", [&](std::ostream& f) { write_corpus(f, split.train); });
  write_file(dir / "train.qrels", [&](std::ostream& f) { write_qrels(f, qrels_from_queries(train_queries)); });
  write_file(dir / "dev.qrels", [&](std::ostream& f) { write_qrels(f, qrels_from_queries(split.dev)); });
  write_file(dir / "test.qrels", [&](std::ostream& f) { write_qrels(f, qrels_from_queries(split.test)); });
  out << fmt::format("train papers: {}\ntrain queries: {}\ndev queries: {}\ntest queries: {}\n", split.train.size(),
                     train_queries.size(), split.dev.size(), split.test.size());
  return 0;
}

struct IndexArgs {
  std::string corpus;
  std::string out;
  std::string config_path;
  unsigned workers = 1;
  PipelineFlags analyzer;
};

int cmd_index(const IndexArgs& a, std::ostream& out, std::ostream& err) {
  const json file = read_config_json(a.config_path);
  const AnalyzerConfig analyzer =
      apply_analyzer_flags(PipelineConfig::from_json(file.dump()).analyzer, a.analyzer);
  const Corpus corpus = load_corpus(a.corpus, err);
  const InvertedIndex index = build_index(corpus, analyzer, std::max(1u, a.workers));
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  const std::string tmp = a.out + ".tmp";
  index.save(tmp);
  fs::rename(tmp, a.out);
  out << fmt::format("documents: {}\nterms: {}\navgdl: {:.4f}\nanalyzer: {}\n", index.doc_count(), index.term_count(),
                     index.avg_doc_length(), index.fingerprint());
  return 0;
}

struct RunArgs {
  std::string index;
  std::string corpus;
  std::string qrels;
  std::string queries;
  std::string query_file;
  std::string out;
  std::string tag = "citenav";
  std::string traces;
  unsigned workers = 1;
  PipelineFlags pipeline;
};

void write_traces(const fs::path& path, const RunResult& run) {
  write_file(path, [&](std::ostream& f) {
    for (const auto& [qid, iterations] : run.traces) {
      for (std::size_t t = 0; t < iterations.size(); ++t) {
        const auto& pool = iterations[t].pool;
        nlohmann::ordered_json j;
        j["query"] = qid;
        j["iteration"] = t;
        j["retained"] = pool.retained;
        j["expanded"] = pool.expanded;
        auto& provenance = j["provenance"] = nlohmann::ordered_json::object();
        for (const auto& id : pool.expanded) {
          const auto& p = pool.provenance.at(id);
          provenance[id] = {{"source", p.source}, {"rank", p.source_rank}};
        }
        j["ranked"] = iterations[t].ranked.entries.size();
        f << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
      }
    }
  });
}

int cmd_run(RunArgs& a, std::ostream& out, std::ostream& err) {
  Resolved r = resolve_pipeline(a.pipeline);
  const int sources = !a.qrels.empty() + !a.queries.empty() + !a.query_file.empty();
  if (sources != 1) throw ArgumentError("give exactly one of --qrels, --queries, --query-file");

  const Corpus corpus = load_corpus(a.corpus, err);
  const InvertedIndex index = load_index_for(a.index, r);
  r.config.validate();

  std::vector<Paper> queries;
  if (!a.qrels.empty()) {
    std::vector<std::string> ids;
    for (const auto& [qid, rel] : load_qrels(a.qrels)) ids.push_back(qid);
    queries = query_papers_from_ids(corpus, ids);
  } else if (!a.queries.empty()) {
    queries = query_papers_from_ids(corpus, read_id_list(a.queries));
  } else {
    if (!fs::exists(a.query_file)) throw std::runtime_error("query file not found: '" + a.query_file + "'");
    const auto parsed = ingest_corpus(a.query_file);
    if (parsed.skipped > 0) err << fmt::format("warning: skipped {} unusable query lines\n", parsed.skipped);
    queries.assign(parsed.corpus.papers().begin(), parsed.corpus.papers().end());
  }

  const fs::path out_path(a.out);
  const fs::path invalid_path = a.out + ".INVALID";
  auto scorer = make_scorer(r.config.scorer, &index, r.scorer_options);
  RunResult partial;
  RunOptions options{std::max(1u, a.workers), !a.traces.empty(), &partial};
  RunResult run;
  try {
    run = run_queries(queries, r.config, index, corpus, *scorer, options);
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::remove(out_path, ec);
    write_file(invalid_path, [&](std::ostream& f) { write_trec_run(f, partial, a.tag + "-INVALID"); });
    err << fmt::format("error: run aborted after {} of {} queries: {}\n", partial.rankings.size(), queries.size(),
                       e.what());
    err << fmt::format("partial results written to '{}'\n", invalid_path.string());
    return 1;
  }
  write_file(out_path, [&](std::ostream& f) { write_trec_run(f, run, a.tag); });
  std::error_code ec;
  fs::remove(invalid_path, ec);
  if (!a.traces.empty()) write_traces(a.traces, run);
  out << fmt::format("queries: {}\nT: {}\nscorer: {}\nfingerprint: {}\n", run.rankings.size(), r.config.T(),
                     r.config.scorer, run.fingerprint);
  return 0;
}

struct EvalArgs {
  std::string run;
  std::string qrels;
  std::string report;
  std::string corpus;
  std::size_t f1_depth = 20;
  std::size_t mrr_depth = 1000;
  std::size_t recall_depth = 1000;
  std::size_t overlap_depth = 1000;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  auto run_file = open_input(a.run);
  const Run run = read_trec_run(run_file);
  const Qrels qrels = load_qrels(a.qrels);
  EvalOptions options;
  options.f1_depth = a.f1_depth;
  options.mrr_depth = a.mrr_depth;
  options.recall_depth = a.recall_depth;
  options.overlap_depth = a.overlap_depth;
  Corpus corpus;
  if (!a.corpus.empty()) {
    corpus = load_corpus(a.corpus, err);
    options.overlap_corpus = &corpus;
  }
  const MetricsReport report = evaluate(run, qrels, options);
  const std::string report_path = a.report.empty() ? a.run + ".eval.jsonl" : a.report;
  write_file(report_path, [&](std::ostream& f) { write_report_jsonl(f, report); });
  write_report_table(out, report);
  return 0;
}

struct PairsArgs {
  std::string index;
  std::string corpus;
  std::string qrels;
  std::string out;
  std::size_t top_k = 10;
  std::string mode = "bm25_top_k";
  std::size_t negatives = 0;
  std::string query_type = "title_and_abstract";
  std::uint64_t seed = 0;
};

int cmd_pairs(const PairsArgs& a, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(a.corpus, err);
  if (!fs::exists(a.index)) throw std::runtime_error("index not found: '" + a.index + "'");
  const InvertedIndex index = InvertedIndex::load(a.index);
  QuerySet queries;
  for (const auto& [qid, rel] : load_qrels(a.qrels)) queries.push_back({qid, {rel.begin(), rel.end()}});
  PairOptions options;
  options.top_k = a.top_k;
  options.mode = parse_sampling_mode(a.mode);
  options.random_negatives = a.negatives;
  options.query_type = parse_query_type(a.query_type);
  options.seed = a.seed;
  const PairSet set = generate_training_pairs(queries, index, corpus, options);
  write_file(a.out, [&](std::ostream& f) { write_training_pairs(f, set.pairs); });
  out << fmt::format("pairs: {} total, {} positive ({:.2f}%), {} negative\n", set.stats.total, set.stats.positives,
                     100.0 * set.stats.positive_fraction(), set.stats.negatives);
  return 0;
}

struct TrainArgs {
  std::string pairs;
  std::string index;
  std::string corpus;
  std::string out;
  std::size_t epochs = 2000;
  double lr = 0.5;
  std::uint64_t seed = 0;
  std::size_t max_total = 512;
  std::size_t query_budget = 256;
  std::size_t candidate_budget = 256;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(a.corpus, err);
  if (!fs::exists(a.index)) throw std::runtime_error("index not found: '" + a.index + "'");
  const InvertedIndex index = InvertedIndex::load(a.index);
  auto pairs_file = open_input(a.pairs);
  const auto pairs = read_training_pairs(pairs_file);
  const TokenBudget budget{a.max_total, a.query_budget, a.candidate_budget};
  const auto result = train_lexical_scorer(pairs, corpus, index, budget, TrainOptions{a.epochs, a.lr, a.seed});
  write_file(a.out, [&](std::ostream& f) { f << result.model.to_json() << '\n'; });
  out << fmt::format("pairs: {}\nfinal loss: {:.6f}\nmodel: {}\n", pairs.size(), result.final_loss, a.out);
  return 0;
}

struct SweepArgs {
  std::string index;
  std::string corpus;
  std::string qrels;
  std::string out;
  std::size_t step = 100;
  std::size_t sum = 1000;
  std::size_t recall_depth = 1000;
  unsigned workers = 1;
  PipelineFlags pipeline;
};

int cmd_sweep(SweepArgs& a, std::ostream& out, std::ostream& err) {
  Resolved r = resolve_pipeline(a.pipeline);
  const Corpus corpus = load_corpus(a.corpus, err);
  const InvertedIndex index = load_index_for(a.index, r);
  QuerySet dev;
  for (const auto& [qid, rel] : load_qrels(a.qrels)) dev.push_back({qid, {rel.begin(), rel.end()}});
  auto scorer = make_scorer(r.config.scorer, &index, r.scorer_options);
  const SweepResult result =
      sweep_budgets(dev, r.config, index, corpus, *scorer, SweepOptions{a.step, a.sum, a.recall_depth, std::max(1u, a.workers)});
  write_file(a.out, [&](std::ostream& f) {
    for (const auto& p : result.curve) f << fmt::format("{}\t{}\t{:.6f}\n", p.budget.k_d, p.budget.k_c, p.recall);
  });
  out << fmt::format("iteration: {}\nbest: kd={} kc={}\ncurve: {} points in {}\n", r.config.T(), result.best.k_d,
                     result.best.k_c, result.curve.size(), a.out);
  return 0;
}

struct DedupArgs {
  std::string train;
  std::vector<std::string> holdout;
  std::string holdout_titles;
  std::string out;
  std::string report;
  double threshold = 0.7;
};

int cmd_dedup(const DedupArgs& a, std::ostream& out, std::ostream& err) {
  const Corpus train = load_corpus(a.train, err);
  std::vector<std::string> titles;
  for (const auto& path : a.holdout) {
    for (const auto& p : load_corpus(path, err).papers()) titles.push_back(p.title);
  }
  if (!a.holdout_titles.empty()) {
    auto f = open_input(a.holdout_titles);
    std::string line;
    while (std::getline(f, line)) titles.push_back(line);
  }
  if (titles.empty()) throw ArgumentError("no holdout titles given (use --holdout or --holdout-titles)");
  const LeakRemoval removal = remove_leaked(train, titles, a.threshold);
  write_file(a.out, [&](std::ostream& f) { write_corpus(f, removal.survivors); });
  const std::string report = a.report.empty() ? a.out + ".removed.jsonl" : a.report;
  write_file(report, [&](std::ostream& f) { write_leak_report(f, removal.removed); });
  out << fmt::format("train papers: {}\nleaked: {}\nsurvivors after filtering: {}\n", train.size(),
                     removal.removed.size(), removal.survivors.size());
  return 0;
}

int cmd_conformance(const std::string& endpoint_flag, long timeout_ms, std::ostream& out) {
  std::string endpoint = endpoint_flag;
  if (endpoint.empty()) {
    if (const char* env = std::getenv(kScorerEnv); env && *env) endpoint = env;
  }
  if (endpoint.empty()) throw ArgumentError(std::string("no scorer endpoint (use --scorer or ") + kScorerEnv + ")");
  ExternalScorerOptions options;
  options.timeout = std::chrono::milliseconds(timeout_ms);
  const auto checks = run_conformance(endpoint, options);
  bool ok = true;
  for (const auto& c : checks) {
    out << fmt::format("{} {}{}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail.empty() ? "" : " (" + c.detail + ")");
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

struct ReplArgs {
  std::string index;
  std::string corpus;
  std::size_t show = 10;
  PipelineFlags pipeline;
};

int cmd_repl(ReplArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  Resolved r = resolve_pipeline(a.pipeline);
  const Corpus corpus = load_corpus(a.corpus, err);
  const InvertedIndex index = load_index_for(a.index, r);
  r.config.validate();
  auto scorer = make_scorer(r.config.scorer, &index, r.scorer_options);
  out << "enter a title (optionally followed by ' | ' and an abstract); empty line quits\n";
  std::string line;
  for (std::size_t n = 1; out << "> " << std::flush, std::getline(in, line); ++n) {
    if (line.empty()) break;
    Paper query;
    query.id = fmt::format("repl-{}", n);
    const auto bar = line.find(" | ");
    query.title = line.substr(0, bar);
    if (bar != std::string::npos) query.abstract = line.substr(bar + 3);
    try {
      const auto ranked = run_pipeline(query, r.config, index, corpus, *scorer);
      const std::size_t shown = std::min(a.show, ranked.entries.size());
      for (std::size_t i = 0; i < shown; ++i) {
        const Paper* p = corpus.find(ranked.entries[i].id);
        out << fmt::format("{:>3}. {:<20} {:.4f}  {}\n", i + 1, ranked.entries[i].id, ranked.entries[i].score,
                           p ? p->title : "");
      }
      if (shown == 0) out << "(no results)\n";
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
    }
  }
  out << '\n';
  return 0;
}

int cmd_stats(const std::string& corpus_path, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(corpus_path, err);
  out << stats_header();
  print_stats_row(out, "corpus", corpus_stats(corpus));
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"citenav: citation recommendation with BM25 retrieval and citation-graph navigation", "citenav"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "citenav 0.1.0");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Ingest a JSONL dump, filter it and report statistics");
  c_ingest->add_option("--input", ingest.input, "Line-delimited paper records")->required();
  c_ingest->add_option("--out", ingest.out, "Output directory")->required();
  c_ingest->add_flag("--no-filter", ingest.no_filter, "Skip the filtering rules");

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "Chronological train/dev/test split");
  c_split->add_option("--corpus", split.corpus, "Filtered corpus file")->required();
  c_split->add_option("--out", split.out, "Output directory")->required();
  c_split->add_option("--train", split.train, "Train fraction");
  c_split->add_option("--dev", split.dev, "Dev fraction");
  c_split->add_option("--test", split.test, "Test fraction");
  c_split->add_option("--dev-sample", split.dev_sample, "Down-sample dev queries to this many");
  c_split->add_option("--test-sample", split.test_sample, "Down-sample test queries to this many");
  c_split->add_option("--seed", split.seed, "Sampling seed");

  IndexArgs index;
  auto* c_index = app.add_subcommand("index", "Build a BM25 index");
  c_index->add_option("--corpus", index.corpus, "Corpus file")->required();
  c_index->add_option("--out", index.out, "Index file")->required();
  c_index->add_option("--config", index.config_path, "JSON config file (analyzer section)")->check(CLI::ExistingFile);
  c_index->add_option("--workers", index.workers, "Analysis threads");
  add_analyzer_flags(c_index, index.analyzer);

  RunArgs run_args;
  auto* c_run = app.add_subcommand("run", "Run the retrieval pipeline and write a TREC run file");
  c_run->add_option("--index", run_args.index, "Index file")->required();
  c_run->add_option("--corpus", run_args.corpus, "Corpus file")->required();
  c_run->add_option("--qrels", run_args.qrels, "Query ids taken from a qrels file");
  c_run->add_option("--queries", run_args.queries, "File with one query paper id per line");
  c_run->add_option("--query-file", run_args.query_file, "Ad-hoc queries as JSONL records (id, title, paperAbstract)");
  c_run->add_option("--out", run_args.out, "Run file")->required();
  c_run->add_option("--tag", run_args.tag, "Run tag");
  c_run->add_option("--traces", run_args.traces, "Write per-iteration candidate pools here (JSONL)");
  c_run->add_option("--workers", run_args.workers, "Query threads");
  add_pipeline_flags(c_run, run_args.pipeline);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a run file against qrels");
  c_eval->add_option("--run", eval.run, "TREC run file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--qrels", eval.qrels, "TREC qrels file")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--report", eval.report, "JSONL report (default <run>.eval.jsonl)");
  c_eval->add_option("--corpus", eval.corpus, "Corpus file; enables the term-overlap column");
  c_eval->add_option("--f1-depth", eval.f1_depth, "F1 cutoff");
  c_eval->add_option("--mrr-depth", eval.mrr_depth, "MRR cutoff");
  c_eval->add_option("--recall-depth", eval.recall_depth, "Recall cutoff");
  c_eval->add_option("--overlap-depth", eval.overlap_depth, "Candidates per query for term overlap");

  PairsArgs pairs;
  auto* c_pairs = app.add_subcommand("pairs", "Export labeled training pairs from BM25 results");
  c_pairs->add_option("--index", pairs.index, "Index file")->required();
  c_pairs->add_option("--corpus", pairs.corpus, "Corpus file")->required();
  c_pairs->add_option("--qrels", pairs.qrels, "Training queries")->required()->check(CLI::ExistingFile);
  c_pairs->add_option("--out", pairs.out, "Pair file (JSONL)")->required();
  c_pairs->add_option("--topk", pairs.top_k, "BM25 depth per query");
  c_pairs->add_option("--mode", pairs.mode, "bm25_top_k | add_missed_positives | add_random_negatives");
  c_pairs->add_option("--negatives", pairs.negatives, "Random negatives per query (default: topk)");
  c_pairs->add_option("--query-type", pairs.query_type, "title | title_and_abstract | key_terms");
  c_pairs->add_option("--seed", pairs.seed, "Sampling seed");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the built-in lexical scorer on a pair file");
  c_train->add_option("--pairs", train.pairs, "Pair file")->required()->check(CLI::ExistingFile);
  c_train->add_option("--index", train.index, "Index file")->required();
  c_train->add_option("--corpus", train.corpus, "Corpus file")->required();
  c_train->add_option("--out", train.out, "Model file (JSON)")->required();
  c_train->add_option("--epochs", train.epochs, "Gradient steps");
  c_train->add_option("--lr", train.lr, "Learning rate");
  c_train->add_option("--seed", train.seed, "Seed");
  c_train->add_option("--max-total", train.max_total, "Pair token budget");
  c_train->add_option("--query-budget", train.query_budget, "Query side budget");
  c_train->add_option("--candidate-budget", train.candidate_budget, "Candidate side budget");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Sweep the budget split of the next iteration on dev queries");
  c_sweep->add_option("--index", sweep.index, "Index file")->required();
  c_sweep->add_option("--corpus", sweep.corpus, "Corpus file")->required();
  c_sweep->add_option("--qrels", sweep.qrels, "Dev qrels")->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--out", sweep.out, "Curve file (kd, kc, recall per line)")->required();
  c_sweep->add_option("--step", sweep.step, "Grid step");
  c_sweep->add_option("--sum", sweep.sum, "kd + kc");
  c_sweep->add_option("--recall-depth", sweep.recall_depth, "Recall cutoff");
  c_sweep->add_option("--workers", sweep.workers, "Query threads");
  add_pipeline_flags(c_sweep, sweep.pipeline);

  DedupArgs dedup;
  auto* c_dedup = app.add_subcommand("dedup", "Remove training papers whose titles leak into holdout sets");
  c_dedup->add_option("--train", dedup.train, "Training corpus file")->required();
  c_dedup->add_option("--holdout", dedup.holdout, "Holdout corpus files (titles are compared)");
  c_dedup->add_option("--holdout-titles", dedup.holdout_titles, "Plain text file, one holdout title per line");
  c_dedup->add_option("--out", dedup.out, "Surviving training corpus")->required();
  c_dedup->add_option("--report", dedup.report, "Removed-paper report (default <out>.removed.jsonl)");
  c_dedup->add_option("--threshold", dedup.threshold, "Jaccard threshold")->check(CLI::Range(0.0, 1.0));

  std::string conformance_endpoint;
  long conformance_timeout = 10000;
  auto* c_conf = app.add_subcommand("conformance", "Check an external scorer against the wire protocol");
  c_conf->add_option("--scorer", conformance_endpoint, "cmd:<command> or external:<host>:<port>");
  c_conf->add_option("--timeout-ms", conformance_timeout, "Timeout per exchange");

  ReplArgs repl;
  auto* c_repl = app.add_subcommand("repl", "Interactive queries against an index");
  c_repl->add_option("--index", repl.index, "Index file")->required();
  c_repl->add_option("--corpus", repl.corpus, "Corpus file")->required();
  c_repl->add_option("--show", repl.show, "Results shown per query");
  add_pipeline_flags(c_repl, repl.pipeline);

  std::string stats_corpus;
  auto* c_stats = app.add_subcommand("stats", "Corpus statistics");
  c_stats->add_option("--corpus", stats_corpus, "Corpus file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const CLI::App* chosen = app.get_subcommands().front();
  try {
    if (chosen == c_ingest) return cmd_ingest(ingest, out, err);
    if (chosen == c_split) return cmd_split(split, out, err);
    if (chosen == c_index) return cmd_index(index, out, err);
    if (chosen == c_run) return cmd_run(run_args, out, err);
    if (chosen == c_eval) return cmd_eval(eval, out, err);
    if (chosen == c_pairs) return cmd_pairs(pairs, out, err);
    if (chosen == c_train) return cmd_train(train, out, err);
    if (chosen == c_sweep) return cmd_sweep(sweep, out, err);
    if (chosen == c_dedup) return cmd_dedup(dedup, out, err);
    if (chosen == c_conf) return cmd_conformance(conformance_endpoint, conformance_timeout, out);
    if (chosen == c_repl) return cmd_repl(repl, in, out, err);
    if (chosen == c_stats) return cmd_stats(stats_corpus, out, err);
  } catch (const std::exception& e) {
    err << "citenav " << chosen->get_name() << ": error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace citenav::cli
