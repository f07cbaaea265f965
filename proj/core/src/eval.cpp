#include "citenav/eval.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "citenav/errors.hpp"

namespace citenav {

namespace {

void require_relevant(const RelevantSet& relevant, const char* metric) {
  if (relevant.empty()) throw ArgumentError(std::string(metric) + ": empty relevant set");
}

}  // namespace

double f1_at_k(const RankedList& ranked, const RelevantSet& relevant, std::size_t k) {
  require_relevant(relevant, "f1");
  const std::size_t depth = std::min(k, ranked.entries.size());
  if (depth == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) hits += relevant.contains(ranked.entries[i].id);
  if (hits == 0) return 0.0;
  const double precision = static_cast<double>(hits) / static_cast<double>(depth);
  const double recall = static_cast<double>(hits) / static_cast<double>(relevant.size());
  return 2.0 * precision * recall / (precision + recall);
}

double reciprocal_rank(const RankedList& ranked, const RelevantSet& relevant, std::size_t depth) {
  require_relevant(relevant, "mrr");
  const std::size_t n = std::min(depth, ranked.entries.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (relevant.contains(ranked.entries[i].id)) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

double recall_at_k(const RankedList& ranked, const RelevantSet& relevant, std::size_t k) {
  require_relevant(relevant, "recall");
  const std::size_t n = std::min(k, ranked.entries.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += relevant.contains(ranked.entries[i].id);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double term_overlap(const Paper& query, const Paper& candidate, const AnalyzerConfig& analyzer) {
  AnalyzerConfig config = analyzer;
  config.remove_stopwords = true;
  const auto candidate_terms = analyze(candidate.text(), config);
  const std::unordered_set<std::string> candidate_set(candidate_terms.begin(), candidate_terms.end());
  if (candidate_set.empty()) return 0.0;
  const auto query_terms = analyze(query.text(), config);
  const std::unordered_set<std::string> query_set(query_terms.begin(), query_terms.end());
  std::size_t shared = 0;
  for (const auto& t : candidate_set) shared += query_set.contains(t);
  return static_cast<double>(shared) / static_cast<double>(candidate_set.size());
}

MetricsReport evaluate(const Run& run, const Qrels& qrels, const EvalOptions& options) {
  for (const auto& [qid, list] : run) {
    if (!qrels.contains(qid)) throw EvaluationError("run contains query '" + qid + "' with no qrels entry");
  }
  MetricsReport report;
  double overlap_sum = 0.0;
  std::size_t overlap_queries = 0;
  static const RankedList empty;
  for (const auto& [qid, relevant] : qrels) {
    if (relevant.empty()) throw ArgumentError("qrels query '" + qid + "' has no relevant documents");
    QueryMetrics m;
    m.query_id = qid;
    const auto it = run.find(qid);
    m.in_run = it != run.end();
    const RankedList& ranked = m.in_run ? it->second : empty;
    m.f1 = f1_at_k(ranked, relevant, options.f1_depth);
    m.mrr = reciprocal_rank(ranked, relevant, options.mrr_depth);
    m.recall = recall_at_k(ranked, relevant, options.recall_depth);

    if (options.overlap_corpus) {
      const Corpus& corpus = *options.overlap_corpus;
      const Paper* query = corpus.find(qid);
      if (!query) throw EvaluationError("term overlap: query '" + qid + "' is not in the corpus");
      const std::size_t n = std::min(options.overlap_depth, ranked.entries.size());
      double sum = 0.0;
      std::size_t counted = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const Paper* candidate = corpus.find(ranked.entries[i].id);
        if (!candidate) throw EvaluationError("term overlap: document '" + ranked.entries[i].id + "' is not in the corpus");
        sum += term_overlap(*query, *candidate, options.overlap_analyzer);
        ++counted;
      }
      if (counted > 0) {
        m.term_overlap = sum / static_cast<double>(counted);
        overlap_sum += *m.term_overlap;
        ++overlap_queries;
      }
    }

    report.f1 += m.f1;
    report.mrr += m.mrr;
    report.recall += m.recall;
    report.per_query.push_back(std::move(m));
  }
  report.query_count = report.per_query.size();
  if (report.query_count > 0) {
    const double n = static_cast<double>(report.query_count);
    report.f1 /= n;
    report.mrr /= n;
    report.recall /= n;
  }
  if (overlap_queries > 0) report.term_overlap = overlap_sum / static_cast<double>(overlap_queries);
  return report;
}

Qrels read_qrels(std::istream& in) {
  Qrels qrels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string qid, iter, docid;
    long rel = 0;
    if (!(fields >> qid)) continue;
    if (!(fields >> iter >> docid >> rel)) {
      throw ArgumentError(fmt::format("qrels line {}: expected 'qid iter docid relevance'", line_no));
    }
    if (rel > 0) qrels[qid].insert(docid);
  }
  return qrels;
}

void write_qrels(std::ostream& out, const Qrels& qrels) {
  for (const auto& [qid, relevant] : qrels) {
    for (const auto& docid : relevant) out << qid << " 0 " << docid << " 1\n";
  }
}

Qrels qrels_from_queries(const std::vector<Query>& queries) {
  Qrels qrels;
  for (const auto& q : queries) qrels[q.id].insert(q.relevant.begin(), q.relevant.end());
  return qrels;
}

void write_report_table(std::ostream& out, const MetricsReport& report) {
  const bool overlap = report.term_overlap.has_value();
  out << fmt::format("{:<24} {:>8} {:>8} {:>8}", "query", "F1", "MRR", "R") << (overlap ? fmt::format(" {:>8}", "overlap") : "")
      << '\n';
  for (const auto& m : report.per_query) {
    out << fmt::format("{:<24} {:>8.4f} {:>8.4f} {:>8.4f}", m.query_id, m.f1, m.mrr, m.recall);
    if (overlap) out << (m.term_overlap ? fmt::format(" {:>8.4f}", *m.term_overlap) : fmt::format(" {:>8}", "-"));
    out << (m.in_run ? "" : "  (missing)") << '\n';
  }
  out << fmt::format("{:<24} {:>8.4f} {:>8.4f} {:>8.4f}", fmt::format("mean ({})", report.query_count), report.f1,
                     report.mrr, report.recall);
  if (overlap) out << fmt::format(" {:>8.4f}", *report.term_overlap);
  out << '\n';
}

void write_report_jsonl(std::ostream& out, const MetricsReport& report) {
  using json = nlohmann::ordered_json;
  for (const auto& m : report.per_query) {
    json j{{"query", m.query_id}, {"f1", m.f1}, {"mrr", m.mrr}, {"recall", m.recall}, {"in_run", m.in_run}};
    if (m.term_overlap) j["term_overlap"] = *m.term_overlap;
    out << j.dump() << '\n';
  }
  json summary{{"queries", report.query_count}, {"f1", report.f1}, {"mrr", report.mrr}, {"recall", report.recall}};
  if (report.term_overlap) summary["term_overlap"] = *report.term_overlap;
  out << json{{"summary", summary}}.dump() << '\n';
}

}  // namespace citenav
