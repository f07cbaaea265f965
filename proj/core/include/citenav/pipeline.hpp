#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "citenav/analyzer.hpp"
#include "citenav/corpus.hpp"
#include "citenav/index.hpp"
#include "citenav/navigation.hpp"
#include "citenav/rerank.hpp"

namespace citenav {

enum class QueryType { title, title_and_abstract, key_terms };

std::string to_string(QueryType type);
/// Accepts "title", "title_and_abstract", "key_terms". Throws ArgumentError.
QueryType parse_query_type(std::string_view name);

struct IterationBudget {
  std::size_t k_d = 0;  // retained documents
  std::size_t k_c = 0;  // gathered citations

  friend bool operator==(const IterationBudget&, const IterationBudget&) = default;
};

enum class TieBreak { doc_id_ascending };

struct PipelineConfig {
  /// One entry per navigation + ranking iteration; T = iterations.size().
  std::vector<IterationBudget> iterations;
  std::size_t retrieval_depth = 1000;
  QueryType query_type = QueryType::title_and_abstract;
  std::size_t key_term_count = 16;
  TokenBudget budget;
  AnalyzerConfig analyzer;
  std::string scorer = "identity";
  TieBreak tie_break = TieBreak::doc_id_ascending;
  bool temporal_guard = false;  // skip citations newer than the query paper
  std::uint64_t seed = 0;

  std::size_t T() const noexcept { return iterations.size(); }
  /// Throws ArgumentError on k_d = 0, depth = 0 or an invalid token budget.
  void validate() const;
  /// Canonical JSON; fingerprint() hashes it.
  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
  std::string fingerprint() const;
};

/// Query text for `paper`: its title, title + " " + abstract, or the
/// top key_term_count terms ranked by tf * idf against `index` (ties by
/// term); each key term is emitted as its first surface form.
std::string build_query_text(const Paper& paper, QueryType type, const InvertedIndex& index,
                             std::size_t key_term_count = 16);

struct IterationTrace {
  CandidatePool pool;
  RankedList ranked;
};

/// The full loop for one query: BM25 retrieval, then for each iteration
/// navigate + rerank. With no iterations the BM25 list is reranked once, or
/// returned unchanged by the identity scorer. The final list is cut to
/// retrieval_depth. Stage failures surface as PipelineError.
RankedList run_pipeline(const Paper& query, const PipelineConfig& config, const InvertedIndex& index,
                        const Corpus& corpus, Scorer& scorer,
                        std::vector<IterationTrace>* trace = nullptr);

struct RunResult {
  std::map<std::string, RankedList> rankings;  // by query id
  std::string fingerprint;
  std::map<std::string, std::vector<IterationTrace>> traces;  // only if requested
};

struct RunOptions {
  unsigned workers = 1;
  bool keep_traces = false;
  /// On failure, receives the queries that did complete before rethrowing.
  RunResult* partial = nullptr;
};

/// Runs every query, fanning out over `workers` threads. Output does not
/// depend on the worker count. Throws the first failing query's error.
RunResult run_queries(std::span<const Paper> queries, const PipelineConfig& config,
                      const InvertedIndex& index, const Corpus& corpus, Scorer& scorer,
                      const RunOptions& options = {});

/// "qid Q0 docid rank score tag", queries in id order.
void write_trec_run(std::ostream& out, const RunResult& run, const std::string& tag);
std::map<std::string, RankedList> read_trec_run(std::istream& in);

enum class SamplingMode { bm25_top_k, add_missed_positives, add_random_negatives };

std::string to_string(SamplingMode mode);
SamplingMode parse_sampling_mode(std::string_view name);

struct PairOptions {
  std::size_t top_k = 10;
  SamplingMode mode = SamplingMode::bm25_top_k;
  /// Extra negatives per query under add_random_negatives; 0 means top_k.
  std::size_t random_negatives = 0;
  QueryType query_type = QueryType::title_and_abstract;
  std::uint64_t seed = 0;
};

struct PairStats {
  std::size_t total = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double positive_fraction() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(positives) / static_cast<double>(total);
  }
};

struct PairSet {
  std::vector<TrainingPair> pairs;
  PairStats stats;
};

/// Training pairs from the BM25 top-k of each query (query excluded), labeled
/// by gold membership, plus the optional rebalancing modes.
PairSet generate_training_pairs(std::span<const Query> queries, const InvertedIndex& index,
                                const Corpus& corpus, const PairOptions& options = {});

void write_training_pairs(std::ostream& out, std::span<const TrainingPair> pairs);
std::vector<TrainingPair> read_training_pairs(std::istream& in);

struct SweepPoint {
  IterationBudget budget;
  double recall = 0.0;
};

struct SweepResult {
  IterationBudget best;
  std::vector<SweepPoint> curve;
};

struct SweepOptions {
  std::size_t grid_step = 100;
  std::size_t budget_sum = 1000;
  std::size_t recall_depth = 1000;
  unsigned workers = 1;
};

/// Greedy sweep of iteration `base.T()`: earlier iterations stay as in `base`;
/// for k_d in {0, step, ..., sum}, k_c = sum - k_d, mean R@recall_depth is
/// measured on `dev`. k_d = 0 yields an empty candidate list. Ties go to the
/// larger k_d. Throws ArgumentError on an empty dev set.
SweepResult sweep_budgets(std::span<const Query> dev, const PipelineConfig& base,
                          const InvertedIndex& index, const Corpus& corpus, Scorer& scorer,
                          const SweepOptions& options = {});

}  // namespace citenav
