#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace citenav {

/// Dense document number: position of a paper in its Corpus (papers are
/// stored sorted by id, so DocNo order equals id order).
using DocNo = std::uint32_t;

struct Paper {
  std::string id;
  std::string title;
  std::string abstract;
  std::optional<int> year;
  /// Cited paper ids in storage order, without duplicates.
  std::vector<std::string> out_citations;

  /// Title and abstract joined by a single space (title only if the abstract
  /// is empty).
  std::string text() const;

  friend bool operator==(const Paper&, const Paper&) = default;
};

/// Immutable, id-sorted collection of papers with resolved citation
/// adjacency. Copies share storage and are safe to read from many threads.
class Corpus {
 public:
  Corpus();
  /// Throws ArgumentError on an empty or duplicate id.
  explicit Corpus(std::vector<Paper> papers);

  std::size_t size() const noexcept;
  bool empty() const noexcept { return size() == 0; }

  std::span<const Paper> papers() const noexcept;
  const Paper& at(DocNo doc) const;
  const Paper* find(std::string_view id) const;
  std::optional<DocNo> doc_no(std::string_view id) const;

  /// Cited documents of `doc` that resolve inside this corpus, in storage order.
  std::span<const DocNo> citations(DocNo doc) const;

  /// Sum of resolved adjacency sizes.
  std::size_t edge_count() const noexcept;

  friend bool operator==(const Corpus& a, const Corpus& b);

 private:
  struct Data;
  std::shared_ptr<const Data> data_;
};

struct IngestResult {
  Corpus corpus;
  std::size_t skipped = 0;  // malformed lines, missing id/title, duplicate ids
};

/// Reads one JSON record per line (Open Research dump schema: id, title,
/// paperAbstract, year, outCitations). Blank lines are ignored; unusable lines
/// are counted in `skipped`. Throws IngestError if the file cannot be read.
IngestResult ingest_corpus(const std::filesystem::path& path);
IngestResult ingest_corpus(std::istream& in);

/// Writes papers in id order using the ingest schema. Re-ingesting the output
/// yields an equal Corpus.
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Drops papers without a year, citation edges to unknown, self or
/// future-dated papers (cited.year > citing.year), and papers left without
/// citations; repeats until nothing changes.
Corpus filter_corpus(const Corpus& corpus);

struct SplitSpec {
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  std::optional<std::size_t> dev_sample_size;
  std::optional<std::size_t> test_sample_size;
  std::uint64_t sample_seed = 0;
};

/// One evaluation query: the query paper and its gold citations.
struct Query {
  std::string id;
  std::vector<std::string> relevant;  // sorted ascending

  friend bool operator==(const Query&, const Query&) = default;
};

using QuerySet = std::vector<Query>;

/// Queries for the given papers of `corpus`; the relevant set is the paper's
/// citations that resolve in `corpus`, minus itself. Papers with no such
/// citation are left out. Output is sorted by id.
QuerySet make_queries(const Corpus& corpus, std::span<const std::string> paper_ids);

struct Split {
  Corpus train;
  QuerySet dev;
  QuerySet test;
};

/// Chronological split: papers sorted by (year, id); the oldest fraction goes
/// to train, then dev, then test. Dev/test pools are optionally down-sampled.
/// Throws SplitError for fewer than 3 papers or papers without a year.
Split split_by_year(const Corpus& corpus, const SplitSpec& spec);

struct StatsReport {
  std::size_t docs = 0;
  std::size_t citations = 0;
  double avg_citations = 0.0;
  double avg_length_chars = 0.0;  // code points of title + abstract
};

StatsReport corpus_stats(const Corpus& corpus);

}  // namespace citenav
