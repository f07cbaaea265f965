#include "citenav/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "citenav/errors.hpp"
#include "citenav/eval.hpp"
#include "citenav/text.hpp"

namespace citenav {

using json = nlohmann::ordered_json;

std::string to_string(QueryType type) {
  switch (type) {
    case QueryType::title:
      return "title";
    case QueryType::title_and_abstract:
      return "title_and_abstract";
    case QueryType::key_terms:
      return "key_terms";
  }
  return "?";
}

QueryType parse_query_type(std::string_view name) {
  if (name == "title") return QueryType::title;
  if (name == "title_and_abstract") return QueryType::title_and_abstract;
  if (name == "key_terms") return QueryType::key_terms;
  throw ArgumentError("unknown query type '" + std::string(name) + "'");
}

std::string to_string(SamplingMode mode) {
  switch (mode) {
    case SamplingMode::bm25_top_k:
      return "bm25_top_k";
    case SamplingMode::add_missed_positives:
      return "add_missed_positives";
    case SamplingMode::add_random_negatives:
      return "add_random_negatives";
  }
  return "?";
}

SamplingMode parse_sampling_mode(std::string_view name) {
  if (name == "bm25_top_k") return SamplingMode::bm25_top_k;
  if (name == "add_missed_positives") return SamplingMode::add_missed_positives;
  if (name == "add_random_negatives") return SamplingMode::add_random_negatives;
  throw ArgumentError("unknown sampling mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  if (retrieval_depth == 0) throw ArgumentError("pipeline: retrieval depth must be at least 1");
  for (std::size_t t = 0; t < iterations.size(); ++t) {
    if (iterations[t].k_d == 0) throw ArgumentError(fmt::format("pipeline: k_d of iteration {} must be at least 1", t));
  }
  if (query_type == QueryType::key_terms && key_term_count == 0) throw ArgumentError("pipeline: key_term_count must be positive");
  budget.validate();
}

std::string PipelineConfig::to_json() const {
  json j;
  j["iterations"] = json::array();
  for (const auto& it : iterations) j["iterations"].push_back({{"kd", it.k_d}, {"kc", it.k_c}});
  j["retrieval_depth"] = retrieval_depth;
  j["query_type"] = to_string(query_type);
  j["key_term_count"] = key_term_count;
  j["budget"] = {{"max_total", budget.max_total}, {"query", budget.query_budget}, {"candidate", budget.candidate_budget}};
  j["analyzer"] = {{"lowercase", analyzer.lowercase}, {"stopwords", analyzer.remove_stopwords}, {"stem", analyzer.stem}};
  j["scorer"] = scorer;
  j["tie_break"] = "doc_id_ascending";
  j["temporal_guard"] = temporal_guard;
  j["seed"] = seed;
  return j.dump();
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ArgumentError("pipeline config is not a JSON object");
  PipelineConfig config;
  try {
    if (j.contains("iterations")) {
      for (const auto& it : j.at("iterations")) {
        config.iterations.push_back({it.at("kd").get<std::size_t>(), it.at("kc").get<std::size_t>()});
      }
    }
    config.retrieval_depth = j.value("retrieval_depth", config.retrieval_depth);
    if (j.contains("query_type")) config.query_type = parse_query_type(j.at("query_type").get<std::string>());
    config.key_term_count = j.value("key_term_count", config.key_term_count);
    if (j.contains("budget")) {
      const auto& b = j.at("budget");
      config.budget.max_total = b.value("max_total", config.budget.max_total);
      config.budget.query_budget = b.value("query", config.budget.query_budget);
      config.budget.candidate_budget = b.value("candidate", config.budget.candidate_budget);
    }
    if (j.contains("analyzer")) {
      const auto& a = j.at("analyzer");
      config.analyzer.lowercase = a.value("lowercase", config.analyzer.lowercase);
      config.analyzer.remove_stopwords = a.value("stopwords", config.analyzer.remove_stopwords);
      config.analyzer.stem = a.value("stem", config.analyzer.stem);
    }
    config.scorer = j.value("scorer", config.scorer);
    if (j.value("tie_break", std::string("doc_id_ascending")) != "doc_id_ascending") {
      throw ArgumentError("pipeline: only the doc_id_ascending tie-break is supported");
    }
    config.temporal_guard = j.value("temporal_guard", config.temporal_guard);
    config.seed = j.value("seed", config.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed pipeline config: ") + e.what());
  }
  return config;
}

std::string PipelineConfig::fingerprint() const { return to_hex(fnv1a64(to_json())); }

// ---------------------------------------------------------------------------
// Query text

std::string build_query_text(const Paper& paper, QueryType type, const InvertedIndex& index, std::size_t key_term_count) {
  switch (type) {
    case QueryType::title:
      return paper.title;
    case QueryType::title_and_abstract:
      return paper.title + " " + paper.abstract;
    case QueryType::key_terms:
      break;
  }

  struct TermInfo {
    std::size_t tf = 0;
    std::string surface;
  };
  const auto& analyzer = index.analyzer();
  std::map<std::string, TermInfo> terms;
  for (auto& word : split_words(paper.title + " " + paper.abstract, analyzer.lowercase)) {
    if (analyzer.remove_stopwords && is_stopword(word)) continue;
    std::string term = analyzer.stem ? porter_stem(word) : word;
    auto& info = terms[term];
    if (info.tf++ == 0) info.surface = std::move(word);
  }

  struct Ranked {
    double weight;
    const std::string* term;
    const std::string* surface;
  };
  std::vector<Ranked> ranked;
  for (const auto& [term, info] : terms) {
    const auto df = index.document_frequency(term);
    if (df == 0) continue;  // cannot match anything
    ranked.push_back({static_cast<double>(info.tf) * bm25_idf(df, index.doc_count()), &term, &info.surface});
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return *a.term < *b.term;
  });
  if (ranked.size() > key_term_count) ranked.resize(key_term_count);

  std::string out;
  for (const auto& r : ranked) {
    if (!out.empty()) out.push_back(' ');
    out += *r.surface;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

std::vector<std::string> ids_of(const RankedList& list) {
  std::vector<std::string> ids;
  ids.reserve(list.entries.size());
  for (const auto& e : list.entries) ids.push_back(e.id);
  return ids;
}

}  // namespace

RankedList run_pipeline(const Paper& query, const PipelineConfig& config, const InvertedIndex& index,
                        const Corpus& corpus, Scorer& scorer, std::vector<IterationTrace>* trace) {
  config.validate();
  if (!(config.analyzer == index.analyzer())) {
    throw ArgumentError("pipeline: the index was built with a different analyzer than the config requests");
  }

  RankedList current;
  try {
    current = bm25_search(index, build_query_text(query, config.query_type, index, config.key_term_count),
                          config.retrieval_depth, query.id);
  } catch (const Error& e) {
    throw PipelineError(fmt::format("query {}: initial retrieval: {}", query.id, e.what()), -1);
  }
  current.query_id = query.id;

  const auto& analyzer = index.analyzer();
  if (config.T() == 0) {
    if (!scorer.is_identity()) {
      try {
        current = rerank(scorer, query, ids_of(current), corpus, config.budget, analyzer);
      } catch (const Error& e) {
        throw PipelineError(fmt::format("query {}: iteration 0 ranking: {}", query.id, e.what()), 0);
      }
    }
  }

  NavigationOptions nav;
  if (config.temporal_guard) nav.max_year = query.year;
  for (std::size_t t = 0; t < config.T(); ++t) {
    const auto& budget = config.iterations[t];
    try {
      auto pool = navigate(current, corpus, budget.k_d, budget.k_c, query.id, nav);
      current = rerank(scorer, query, pool_to_candidates(pool), corpus, config.budget, analyzer);
      if (trace) trace->push_back(IterationTrace{std::move(pool), current});
    } catch (const Error& e) {
      throw PipelineError(fmt::format("query {}: iteration {}: {}", query.id, t, e.what()), static_cast<int>(t));
    }
  }

  if (current.entries.size() > config.retrieval_depth) current.entries.resize(config.retrieval_depth);
  return current;
}

RunResult run_queries(std::span<const Paper> queries, const PipelineConfig& config, const InvertedIndex& index,
                      const Corpus& corpus, Scorer& scorer, const RunOptions& options) {
  config.validate();
  const std::size_t n = queries.size();
  std::vector<RankedList> results(n);
  std::vector<std::vector<IterationTrace>> traces(options.keep_traces ? n : 0);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = run_pipeline(queries[i], config, index, corpus, scorer, options.keep_traces ? &traces[i] : nullptr);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  const unsigned workers = std::clamp<unsigned>(options.workers, 1, 256);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  RunResult run;
  run.fingerprint = config.fingerprint();
  std::exception_ptr first_error;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      if (!first_error) first_error = errors[i];
      continue;
    }
    if (i >= next.load()) continue;  // never started
    if (options.keep_traces) run.traces.emplace(queries[i].id, std::move(traces[i]));
    run.rankings.emplace(queries[i].id, std::move(results[i]));
  }
  if (first_error) {
    if (options.partial) *options.partial = std::move(run);
    std::rethrow_exception(first_error);
  }
  return run;
}

// ---------------------------------------------------------------------------
// TREC run files

void write_trec_run(std::ostream& out, const RunResult& run, const std::string& tag) {
  const std::string runtag = run.fingerprint.empty() ? tag : tag + ":" + run.fingerprint;
  for (const auto& [qid, ranked] : run.rankings) {
    for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
      out << fmt::format("{} Q0 {} {} {:.6f} {}\n", qid, ranked.entries[i].id, i + 1, ranked.entries[i].score, runtag);
    }
  }
}

std::map<std::string, RankedList> read_trec_run(std::istream& in) {
  std::map<std::string, std::vector<std::pair<long, ScoredDoc>>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, q0, docid, tag;
    long rank = 0;
    double score = 0.0;
    if (!(fields >> qid)) continue;  // blank
    if (!(fields >> q0 >> docid >> rank >> score)) {
      throw ArgumentError(fmt::format("run file line {}: expected 'qid Q0 docid rank score tag'", line_no));
    }
    rows[qid].push_back({rank, ScoredDoc{docid, score}});
  }
  std::map<std::string, RankedList> run;
  for (auto& [qid, entries] : rows) {
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    RankedList list;
    list.query_id = qid;
    std::set<std::string> seen;
    for (auto& [rank, doc] : entries) {
      if (seen.insert(doc.id).second) list.entries.push_back(std::move(doc));
    }
    run.emplace(qid, std::move(list));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Training pairs

PairSet generate_training_pairs(std::span<const Query> queries, const InvertedIndex& index, const Corpus& corpus,
                                const PairOptions& options) {
  if (options.top_k == 0) throw ArgumentError("pairs: top_k must be at least 1");
  PairSet out;
  for (const auto& query : queries) {
    const Paper* paper = corpus.find(query.id);
    if (!paper) throw ArgumentError("pairs: query '" + query.id + "' is not in the corpus");
    const std::set<std::string> gold(query.relevant.begin(), query.relevant.end());
    const auto ranked = bm25_search(index, build_query_text(*paper, options.query_type, index), options.top_k, query.id);
    const std::string query_text = paper->text();

    std::set<std::string> used;
    auto emit = [&](const Paper& candidate, bool relevant, std::size_t rank) {
      used.insert(candidate.id);
      out.pairs.push_back(TrainingPair{query.id, candidate.id, relevant, rank, query_text, candidate.text()});
    };
    for (std::size_t r = 0; r < ranked.entries.size(); ++r) {
      const Paper* candidate = corpus.find(ranked.entries[r].id);
      if (!candidate) throw ArgumentError("pairs: retrieved document '" + ranked.entries[r].id + "' is not in the corpus");
      emit(*candidate, gold.contains(candidate->id), r + 1);
    }

    if (options.mode == SamplingMode::add_missed_positives) {
      for (const auto& id : query.relevant) {
        if (used.contains(id)) continue;
        if (const Paper* candidate = corpus.find(id)) emit(*candidate, true, 0);
      }
    } else if (options.mode == SamplingMode::add_random_negatives && corpus.size() > 1) {
      const std::size_t wanted = options.random_negatives ? options.random_negatives : options.top_k;
      std::mt19937_64 rng(options.seed ^ fnv1a64(query.id));
      std::size_t added = 0;
      for (std::size_t attempt = 0; added < wanted && attempt < wanted * 20; ++attempt) {
        const Paper& candidate = corpus.at(static_cast<DocNo>(uniform_below(rng, corpus.size())));
        if (candidate.id == query.id || gold.contains(candidate.id) || used.contains(candidate.id)) continue;
        emit(candidate, false, 0);
        ++added;
      }
    }
  }
  out.stats.total = out.pairs.size();
  for (const auto& p : out.pairs) (p.relevant ? out.stats.positives : out.stats.negatives)++;
  return out;
}

void write_training_pairs(std::ostream& out, std::span<const TrainingPair> pairs) {
  for (const auto& p : pairs) {
    json j;
    j["qid"] = p.query_id;
    j["docid"] = p.candidate_id;
    j["label"] = p.relevant ? 1 : 0;
    j["rank"] = p.rank;
    j["query"] = p.query_text;
    j["candidate"] = p.candidate_text;
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

std::vector<TrainingPair> read_training_pairs(std::istream& in) {
  std::vector<TrainingPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw ArgumentError("invalid JSON");
      TrainingPair p;
      p.query_id = j.at("qid").get<std::string>();
      p.candidate_id = j.at("docid").get<std::string>();
      p.relevant = j.at("label").get<int>() != 0;
      p.rank = j.at("rank").get<std::size_t>();
      p.query_text = j.value("query", "");
      p.candidate_text = j.value("candidate", "");
      pairs.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw ArgumentError(fmt::format("pair file line {}: {}", line_no, e.what()));
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Budget sweep

SweepResult sweep_budgets(std::span<const Query> dev, const PipelineConfig& base, const InvertedIndex& index,
                          const Corpus& corpus, Scorer& scorer, const SweepOptions& options) {
  if (dev.empty()) throw ArgumentError("sweep: empty dev set");
  if (options.grid_step == 0) throw ArgumentError("sweep: grid step must be positive");

  std::vector<Paper> papers;
  Qrels qrels;
  for (const auto& q : dev) {
    const Paper* paper = corpus.find(q.id);
    if (!paper) throw ArgumentError("sweep: dev query '" + q.id + "' is not in the corpus");
    if (q.relevant.empty()) throw ArgumentError("sweep: dev query '" + q.id + "' has no relevant documents");
    papers.push_back(*paper);
    qrels.emplace(q.id, RelevantSet(q.relevant.begin(), q.relevant.end()));
  }

  SweepResult result;
  double best = -1.0;
  for (std::size_t k_d = 0; k_d <= options.budget_sum; k_d += options.grid_step) {
    const IterationBudget budget{k_d, options.budget_sum - k_d};
    double recall = 0.0;
    if (k_d > 0) {  // nothing retained, nothing to navigate from
      PipelineConfig config = base;
      config.iterations.push_back(budget);
      const auto run = run_queries(papers, config, index, corpus, scorer, RunOptions{options.workers, false});
      EvalOptions eval;
      eval.recall_depth = options.recall_depth;
      recall = evaluate(run.rankings, qrels, eval).recall;
    }
    result.curve.push_back(SweepPoint{budget, recall});
    if (recall >= best) {
      best = recall;
      result.best = budget;
    }
  }
  return result;
}

}  // namespace citenav
