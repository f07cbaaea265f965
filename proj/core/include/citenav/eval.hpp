#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "citenav/analyzer.hpp"
#include "citenav/corpus.hpp"
#include "citenav/index.hpp"

namespace citenav {

using RelevantSet = std::set<std::string>;
using Qrels = std::map<std::string, RelevantSet>;
using Run = std::map<std::string, RankedList>;

// The three metrics throw ArgumentError on an empty relevant set.

/// F1 over the top k. Precision divides by min(k, |ranked|).
double f1_at_k(const RankedList& ranked, const RelevantSet& relevant, std::size_t k = 20);
/// Reciprocal rank of the first relevant document within `depth`, else 0.
double reciprocal_rank(const RankedList& ranked, const RelevantSet& relevant, std::size_t depth = 1000);
double recall_at_k(const RankedList& ranked, const RelevantSet& relevant, std::size_t k = 1000);

/// Fraction of the candidate's distinct non-stopword terms that also occur in
/// the query; 0 if the candidate has none. Analysis uses `analyzer` with
/// stopword removal forced on.
double term_overlap(const Paper& query, const Paper& candidate, const AnalyzerConfig& analyzer);

struct QueryMetrics {
  std::string query_id;
  double f1 = 0.0;
  double mrr = 0.0;
  double recall = 0.0;
  std::optional<double> term_overlap;
  bool in_run = true;
};

struct MetricsReport {
  std::vector<QueryMetrics> per_query;  // sorted by query id
  double f1 = 0.0;
  double mrr = 0.0;
  double recall = 0.0;
  std::optional<double> term_overlap;
  std::size_t query_count = 0;
};

struct EvalOptions {
  std::size_t f1_depth = 20;
  std::size_t mrr_depth = 1000;
  std::size_t recall_depth = 1000;
  /// When set, mean term overlap of the top `overlap_depth` candidates per
  /// query is reported.
  const Corpus* overlap_corpus = nullptr;
  AnalyzerConfig overlap_analyzer;
  std::size_t overlap_depth = 1000;
};

/// Per-query metrics and their arithmetic means over all qrels queries.
/// Queries absent from the run score 0. Throws EvaluationError naming any run
/// query that has no qrels entry, and ArgumentError for empty relevant sets.
MetricsReport evaluate(const Run& run, const Qrels& qrels, const EvalOptions& options = {});

/// TREC qrels: "qid 0 docid 1" (lines with relevance 0 are ignored).
Qrels read_qrels(std::istream& in);
void write_qrels(std::ostream& out, const Qrels& qrels);
Qrels qrels_from_queries(const std::vector<Query>& queries);

void write_report_table(std::ostream& out, const MetricsReport& report);
/// One JSON record per query, then a {"summary": ...} record.
void write_report_jsonl(std::ostream& out, const MetricsReport& report);

}  // namespace citenav
