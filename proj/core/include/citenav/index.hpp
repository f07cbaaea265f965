#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "citenav/analyzer.hpp"
#include "citenav/corpus.hpp"

namespace citenav {

struct Posting {
  DocNo doc;
  std::uint32_t tf;

  friend bool operator==(const Posting&, const Posting&) = default;
};

struct ScoredDoc {
  std::string id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Scores are non-increasing, equal scores ordered by id, ids unique.
struct RankedList {
  std::string query_id;
  std::vector<ScoredDoc> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }

  friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// Sorts by (score desc, id asc).
void sort_ranked(std::vector<ScoredDoc>& entries);

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
};

/// ln(1 + (N - df + 0.5) / (df + 0.5)); non-negative for 0 <= df <= N.
double bm25_idf(std::size_t df, std::size_t doc_count);

/// Single-term BM25 contribution without the idf factor.
double bm25_tf_weight(double tf, double doc_length, double avg_doc_length,
                      const Bm25Params& params = {});

class InvertedIndex {
 public:
  InvertedIndex() = default;

  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  std::uint32_t doc_length(DocNo doc) const { return doc_lengths_.at(doc); }
  const std::string& doc_id(DocNo doc) const { return doc_ids_.at(doc); }
  std::optional<DocNo> find_doc(std::string_view id) const;

  std::size_t term_count() const noexcept { return terms_.size(); }
  std::span<const std::string> terms() const noexcept { return terms_; }
  /// Postings sorted by DocNo; empty for unknown terms.
  std::span<const Posting> postings(std::string_view term) const;
  std::size_t document_frequency(std::string_view term) const { return postings(term).size(); }

  const AnalyzerConfig& analyzer() const noexcept { return analyzer_; }
  std::string fingerprint() const { return analyzer_fingerprint(analyzer_); }

  void save(const std::filesystem::path& path) const;
  /// Throws IndexFormatError on a corrupt file or, when `expected` is given,
  /// if the stored analyzer fingerprint differs from it.
  static InvertedIndex load(const std::filesystem::path& path,
                            std::optional<AnalyzerConfig> expected = std::nullopt);

  friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;

 private:
  friend InvertedIndex build_index(const Corpus&, const AnalyzerConfig&, unsigned);

  std::optional<std::size_t> term_slot(std::string_view term) const;
  void finalize_stats();

  AnalyzerConfig analyzer_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  std::vector<std::string> terms_;           // sorted
  std::vector<std::uint64_t> term_offsets_;  // terms_.size() + 1 entries
  std::vector<Posting> postings_;
};

/// Indexes analyze(title + " " + abstract) of every paper. `workers` > 1
/// analyzes document ranges in parallel; the result is identical for any
/// worker count. Throws BuildError on an empty corpus.
InvertedIndex build_index(const Corpus& corpus, const AnalyzerConfig& config, unsigned workers = 1);

/// Top-k documents by BM25 over the distinct analyzed query terms.
/// `exclude` is never returned. Throws ArgumentError when k < 1.
RankedList bm25_search(const InvertedIndex& index, std::string_view query_text, std::size_t k,
                       std::optional<std::string_view> exclude = std::nullopt,
                       const Bm25Params& params = {});

/// As bm25_search, over already-analyzed query tokens.
RankedList bm25_search_terms(const InvertedIndex& index, std::span<const std::string> query_terms,
                             std::size_t k, std::optional<std::string_view> exclude = std::nullopt,
                             const Bm25Params& params = {});

}  // namespace citenav
