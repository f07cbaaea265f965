#include "citenav/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <thread>
#include <unordered_map>

#include "citenav/errors.hpp"

namespace citenav {

void sort_ranked(std::vector<ScoredDoc>& entries) {
  std::sort(entries.begin(), entries.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
}

double bm25_idf(std::size_t df, std::size_t doc_count) {
  const auto n = static_cast<double>(doc_count);
  const auto d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_tf_weight(double tf, double doc_length, double avg_doc_length, const Bm25Params& params) {
  const double norm = avg_doc_length > 0.0 ? doc_length / avg_doc_length : 0.0;
  return tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * norm));
}

std::optional<DocNo> InvertedIndex::find_doc(std::string_view id) const {
  auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), id,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == doc_ids_.end() || *it != id) return std::nullopt;
  return static_cast<DocNo>(it - doc_ids_.begin());
}

std::optional<std::size_t> InvertedIndex::term_slot(std::string_view term) const {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), term,
                             [](const std::string& a, std::string_view b) { return a < b; });
  if (it == terms_.end() || *it != term) return std::nullopt;
  return static_cast<std::size_t>(it - terms_.begin());
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
  const auto slot = term_slot(term);
  if (!slot) return {};
  const auto begin = term_offsets_[*slot];
  const auto end = term_offsets_[*slot + 1];
  return std::span<const Posting>(postings_).subspan(begin, end - begin);
}

void InvertedIndex::finalize_stats() {
  if (doc_lengths_.empty()) {
    avg_doc_length_ = 0.0;
    return;
  }
  std::uint64_t total = 0;
  for (const auto len : doc_lengths_) total += len;
  avg_doc_length_ = static_cast<double>(total) / static_cast<double>(doc_lengths_.size());
}

// ---------------------------------------------------------------------------
// Construction

namespace {

using PostingMap = std::unordered_map<std::string, std::vector<Posting>>;

void index_range(const Corpus& corpus, const AnalyzerConfig& config, std::size_t begin, std::size_t end,
                 PostingMap& postings, std::vector<std::uint32_t>& lengths) {
  for (std::size_t doc = begin; doc < end; ++doc) {
    const auto& paper = corpus.at(static_cast<DocNo>(doc));
    auto tokens = analyze(paper.title + " " + paper.abstract, config);
    lengths[doc] = static_cast<std::uint32_t>(tokens.size());
    std::sort(tokens.begin(), tokens.end());
    for (std::size_t i = 0; i < tokens.size();) {
      std::size_t j = i;
      while (j < tokens.size() && tokens[j] == tokens[i]) ++j;
      postings[tokens[i]].push_back(Posting{static_cast<DocNo>(doc), static_cast<std::uint32_t>(j - i)});
      i = j;
    }
  }
}

}  // namespace

InvertedIndex build_index(const Corpus& corpus, const AnalyzerConfig& config, unsigned workers) {
  if (corpus.empty()) throw BuildError("build_index: corpus is empty");
  const std::size_t n = corpus.size();
  workers = std::clamp<unsigned>(workers, 1, static_cast<unsigned>(std::min<std::size_t>(n, 64)));

  InvertedIndex index;
  index.analyzer_ = config;
  index.doc_lengths_.assign(n, 0);
  index.doc_ids_.reserve(n);
  for (const auto& paper : corpus.papers()) index.doc_ids_.push_back(paper.id);

  // Workers own contiguous document ranges; merging in range order keeps
  // every postings list sorted by document.
  std::vector<PostingMap> partial(workers);
  {
    std::vector<std::jthread> threads;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(n, w * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      threads.emplace_back([&, w, begin, end] { index_range(corpus, config, begin, end, partial[w], index.doc_lengths_); });
    }
  }

  std::vector<std::string> terms;
  for (const auto& part : partial) {
    for (const auto& [term, list] : part) terms.push_back(term);
  }
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  index.term_offsets_.reserve(terms.size() + 1);
  index.term_offsets_.push_back(0);
  for (const auto& term : terms) {
    for (const auto& part : partial) {
      if (auto it = part.find(term); it != part.end()) {
        index.postings_.insert(index.postings_.end(), it->second.begin(), it->second.end());
      }
    }
    index.term_offsets_.push_back(index.postings_.size());
  }
  index.terms_ = std::move(terms);
  index.finalize_stats();
  return index;
}

// ---------------------------------------------------------------------------
// Search

RankedList bm25_search_terms(const InvertedIndex& index, std::span<const std::string> query_terms, std::size_t k,
                             std::optional<std::string_view> exclude, const Bm25Params& params) {
  if (k < 1) throw ArgumentError("bm25_search: k must be at least 1");
  RankedList result;

  std::vector<std::string_view> distinct;
  for (const auto& term : query_terms) {
    if (std::find(distinct.begin(), distinct.end(), term) == distinct.end()) distinct.push_back(term);
  }

  const std::size_t n = index.doc_count();
  const double avgdl = index.avg_doc_length();
  std::size_t touched_estimate = 0;
  for (const auto term : distinct) touched_estimate += index.postings(term).size();

  std::vector<std::pair<DocNo, double>> scored;
  auto accumulate = [&](auto&& add) {
    for (const auto term : distinct) {
      const auto list = index.postings(term);
      if (list.empty()) continue;
      const double idf = bm25_idf(list.size(), n);
      for (const auto& p : list) {
        add(p.doc, idf * bm25_tf_weight(p.tf, index.doc_length(p.doc), avgdl, params));
      }
    }
  };

  if (touched_estimate * 4 >= n) {
    std::vector<double> acc(n, 0.0);
    std::vector<char> hit(n, 0);
    accumulate([&](DocNo d, double s) {
      acc[d] += s;
      hit[d] = 1;
    });
    for (std::size_t d = 0; d < n; ++d) {
      if (hit[d]) scored.emplace_back(static_cast<DocNo>(d), acc[d]);
    }
  } else {
    std::unordered_map<DocNo, double> acc;
    acc.reserve(touched_estimate);
    accumulate([&](DocNo d, double s) { acc[d] += s; });
    scored.assign(acc.begin(), acc.end());
  }

  if (exclude) {
    if (auto ex = index.find_doc(*exclude)) {
      std::erase_if(scored, [&](const auto& e) { return e.first == *ex; });
    }
  }

  // DocNo order equals id order, so ties can be broken on the number.
  auto better = [](const std::pair<DocNo, double>& a, const std::pair<DocNo, double>& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  };
  const std::size_t take = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);
  result.entries.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    result.entries.push_back(ScoredDoc{index.doc_id(scored[i].first), scored[i].second});
  }
  return result;
}

RankedList bm25_search(const InvertedIndex& index, std::string_view query_text, std::size_t k,
                       std::optional<std::string_view> exclude, const Bm25Params& params) {
  if (k < 1) throw ArgumentError("bm25_search: k must be at least 1");
  const auto terms = analyze(query_text, index.analyzer());
  return bm25_search_terms(index, terms, k, exclude, params);
}

// ---------------------------------------------------------------------------
// Persistence: magic, version, analyzer fingerprint, docs, terms, postings.
// Integers are stored little-endian.

namespace {

constexpr char kMagic[8] = {'C', 'N', 'I', 'D', 'X', '\0', '\0', '\1'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little, "index persistence assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void pod(const T& value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint64_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  template <typename T>
  void vec(const std::vector<T>& v) {
    pod(static_cast<std::uint64_t>(v.size()));
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T pod() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in_) throw IndexFormatError("index file truncated");
    return value;
  }
  std::string str() {
    const auto size = checked_size(1);
    std::string s(size, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(size));
    if (!in_) throw IndexFormatError("index file truncated");
    return s;
  }
  template <typename T>
  std::vector<T> vec() {
    const auto size = checked_size(sizeof(T));
    std::vector<T> v(size);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(size * sizeof(T)));
    if (!in_) throw IndexFormatError("index file truncated");
    return v;
  }

 private:
  std::uint64_t checked_size(std::size_t element) {
    const auto size = pod<std::uint64_t>();
    if (size > (std::uint64_t{1} << 40) / element) throw IndexFormatError("index file corrupt: implausible length");
    return size;
  }

  std::istream& in_;
};

}  // namespace

void InvertedIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IndexFormatError("cannot write index to '" + path.string() + "'");
  out.write(kMagic, sizeof(kMagic));
  Writer w(out);
  w.pod(kFormatVersion);
  w.str(fingerprint());
  w.pod(static_cast<std::uint8_t>(analyzer_.lowercase));
  w.pod(static_cast<std::uint8_t>(analyzer_.remove_stopwords));
  w.pod(static_cast<std::uint8_t>(analyzer_.stem));
  w.pod(static_cast<std::uint64_t>(doc_ids_.size()));
  for (const auto& id : doc_ids_) w.str(id);
  w.vec(doc_lengths_);
  w.pod(static_cast<std::uint64_t>(terms_.size()));
  for (const auto& term : terms_) w.str(term);
  w.vec(term_offsets_);
  w.vec(postings_);
  if (!out) throw IndexFormatError("write failure on '" + path.string() + "'");
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path, std::optional<AnalyzerConfig> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IndexFormatError("cannot open index '" + path.string() + "'");
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IndexFormatError("'" + path.string() + "' is not a citenav index");
  Reader r(in);
  if (const auto version = r.pod<std::uint32_t>(); version != kFormatVersion) {
    throw IndexFormatError("unsupported index format version " + std::to_string(version));
  }
  const auto stored = r.str();
  if (expected) {
    const auto wanted = analyzer_fingerprint(*expected);
    if (stored != wanted) {
      throw IndexFormatError("analyzer fingerprint mismatch: index built with '" + stored + "', expected '" + wanted + "'");
    }
  }

  InvertedIndex index;
  index.analyzer_.lowercase = r.pod<std::uint8_t>() != 0;
  index.analyzer_.remove_stopwords = r.pod<std::uint8_t>() != 0;
  index.analyzer_.stem = r.pod<std::uint8_t>() != 0;
  if (analyzer_fingerprint(index.analyzer_) != stored) throw IndexFormatError("index file corrupt: analyzer flags disagree with fingerprint");
  const auto docs = r.pod<std::uint64_t>();
  if (docs > (std::uint64_t{1} << 32)) throw IndexFormatError("index file corrupt: implausible document count");
  index.doc_ids_.reserve(docs);
  for (std::uint64_t i = 0; i < docs; ++i) index.doc_ids_.push_back(r.str());
  index.doc_lengths_ = r.vec<std::uint32_t>();
  const auto terms = r.pod<std::uint64_t>();
  if (terms > (std::uint64_t{1} << 36)) throw IndexFormatError("index file corrupt: implausible term count");
  index.terms_.reserve(terms);
  for (std::uint64_t i = 0; i < terms; ++i) index.terms_.push_back(r.str());
  index.term_offsets_ = r.vec<std::uint64_t>();
  index.postings_ = r.vec<Posting>();

  if (index.doc_lengths_.size() != docs || index.term_offsets_.size() != terms + 1 ||
      index.term_offsets_.back() != index.postings_.size()) {
    throw IndexFormatError("index file corrupt: inconsistent sections");
  }
  for (const auto& p : index.postings_) {
    if (p.doc >= docs) throw IndexFormatError("index file corrupt: posting out of range");
  }
  index.finalize_stats();
  return index;
}

}  // namespace citenav
