#include "citenav/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "citenav/errors.hpp"
#include "citenav/text.hpp"

namespace citenav {

using json = nlohmann::json;

std::string Paper::text() const {
  if (abstract.empty()) return title;
  return title + " " + abstract;
}

struct Corpus::Data {
  std::vector<Paper> papers;
  std::vector<std::uint64_t> offsets{0};
  std::vector<DocNo> adjacency;
};

namespace {

std::optional<std::size_t> position_of(const std::vector<Paper>& papers, std::string_view id) {
  auto it = std::lower_bound(papers.begin(), papers.end(), id,
                             [](const Paper& p, std::string_view key) { return p.id < key; });
  if (it == papers.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - papers.begin());
}

}  // namespace

Corpus::Corpus() : data_(std::make_shared<Data>()) {}

Corpus::Corpus(std::vector<Paper> papers) {
  auto data = std::make_shared<Data>();
  std::sort(papers.begin(), papers.end(), [](const Paper& a, const Paper& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < papers.size(); ++i) {
    if (papers[i].id.empty()) throw ArgumentError("corpus: paper with empty id");
    if (i > 0 && papers[i].id == papers[i - 1].id) throw ArgumentError("corpus: duplicate paper id '" + papers[i].id + "'");
  }
  data->papers = std::move(papers);
  data->offsets.reserve(data->papers.size() + 1);
  for (const auto& paper : data->papers) {
    for (const auto& cited : paper.out_citations) {
      if (auto pos = position_of(data->papers, cited)) data->adjacency.push_back(static_cast<DocNo>(*pos));
    }
    data->offsets.push_back(data->adjacency.size());
  }
  data_ = std::move(data);
}

std::size_t Corpus::size() const noexcept { return data_->papers.size(); }

std::span<const Paper> Corpus::papers() const noexcept { return data_->papers; }

const Paper& Corpus::at(DocNo doc) const { return data_->papers.at(doc); }

const Paper* Corpus::find(std::string_view id) const {
  auto pos = position_of(data_->papers, id);
  return pos ? &data_->papers[*pos] : nullptr;
}

std::optional<DocNo> Corpus::doc_no(std::string_view id) const {
  auto pos = position_of(data_->papers, id);
  if (!pos) return std::nullopt;
  return static_cast<DocNo>(*pos);
}

std::span<const DocNo> Corpus::citations(DocNo doc) const {
  const auto begin = data_->offsets.at(doc);
  const auto end = data_->offsets.at(doc + 1);
  return std::span<const DocNo>(data_->adjacency).subspan(begin, end - begin);
}

std::size_t Corpus::edge_count() const noexcept { return data_->adjacency.size(); }

bool operator==(const Corpus& a, const Corpus& b) { return a.data_->papers == b.data_->papers; }

// ---------------------------------------------------------------------------
// Ingestion

namespace {

std::optional<int> parse_year(const json& value) {
  if (value.is_number_integer()) return value.get<int>();
  if (value.is_number_float()) {
    const double y = value.get<double>();
    if (std::isfinite(y) && y == std::floor(y)) return static_cast<int>(y);
    return std::nullopt;
  }
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    if (!s.empty() && s.size() <= 6 && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::stoi(s);
    }
  }
  return std::nullopt;
}

std::optional<Paper> parse_record(const std::string& line) {
  json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (record.is_discarded() || !record.is_object()) return std::nullopt;

  auto id = record.find("id");
  auto title = record.find("title");
  if (id == record.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) return std::nullopt;
  if (title == record.end() || !title->is_string()) return std::nullopt;

  Paper paper;
  paper.id = id->get<std::string>();
  paper.title = title->get<std::string>();
  if (auto abs = record.find("paperAbstract"); abs != record.end() && abs->is_string()) {
    paper.abstract = abs->get<std::string>();
  }
  if (auto year = record.find("year"); year != record.end()) paper.year = parse_year(*year);
  if (auto cites = record.find("outCitations"); cites != record.end() && cites->is_array()) {
    std::unordered_set<std::string> seen;
    for (const auto& c : *cites) {
      if (!c.is_string()) continue;
      const auto& cited = c.get_ref<const std::string&>();
      if (cited.empty() || !seen.insert(cited).second) continue;
      paper.out_citations.push_back(cited);
    }
  }
  return paper;
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

IngestResult ingest_corpus(std::istream& in) {
  std::vector<Paper> papers;
  std::unordered_set<std::string> ids;
  std::size_t skipped = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (is_blank(line)) continue;
    auto paper = parse_record(line);
    if (!paper || !ids.insert(paper->id).second) {
      ++skipped;
      continue;
    }
    papers.push_back(std::move(*paper));
  }
  if (in.bad()) throw IngestError("ingest: read failure");
  return IngestResult{Corpus(std::move(papers)), skipped};
}

IngestResult ingest_corpus(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IngestError("ingest: cannot read '" + path.string() + "': not a readable file");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("ingest: cannot open '" + path.string() + "'");
  return ingest_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& paper : corpus.papers()) {
    nlohmann::ordered_json record;
    record["id"] = paper.id;
    record["title"] = paper.title;
    record["paperAbstract"] = paper.abstract;
    record["year"] = paper.year ? nlohmann::ordered_json(*paper.year) : nlohmann::ordered_json(nullptr);
    record["outCitations"] = paper.out_citations;
    out << record.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestError("cannot write corpus to '" + path.string() + "'");
  write_corpus(out, corpus);
  if (!out) throw IngestError("write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Filtering

Corpus filter_corpus(const Corpus& corpus) {
  const auto papers = corpus.papers();
  const std::size_t n = papers.size();

  std::vector<char> alive(n, 0);
  for (std::size_t i = 0; i < n; ++i) alive[i] = papers[i].year.has_value() ? 1 : 0;

  // Valid edges never change once the year rule is applied: a target either
  // exists with a year no later than the source, or the edge is gone for good.
  // What changes is whether the target stays alive.
  auto edge_ok = [&](std::size_t src, DocNo dst) {
    return dst != src && alive[dst] && *papers[dst].year <= *papers[src].year;
  };

  std::vector<std::vector<DocNo>> citers(n);
  std::vector<std::size_t> live_out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    for (const DocNo dst : corpus.citations(static_cast<DocNo>(i))) {
      if (edge_ok(i, dst)) {
        citers[dst].push_back(static_cast<DocNo>(i));
        ++live_out[i];
      }
    }
  }

  std::deque<std::size_t> dying;
  for (std::size_t i = 0; i < n; ++i) {
    if (alive[i] && live_out[i] == 0) dying.push_back(i);
  }
  while (!dying.empty()) {
    const std::size_t victim = dying.front();
    dying.pop_front();
    if (!alive[victim]) continue;
    alive[victim] = 0;
    for (const DocNo src : citers[victim]) {
      if (alive[src] && --live_out[src] == 0) dying.push_back(src);
    }
  }

  std::vector<Paper> kept;
  for (std::size_t i = 0; i < n; ++i) {
    if (!alive[i]) continue;
    Paper paper = papers[i];
    paper.out_citations.clear();
    for (const DocNo dst : corpus.citations(static_cast<DocNo>(i))) {
      if (!edge_ok(i, dst)) continue;
      const auto& cited = papers[dst].id;
      if (std::find(paper.out_citations.begin(), paper.out_citations.end(), cited) == paper.out_citations.end()) {
        paper.out_citations.push_back(cited);
      }
    }
    kept.push_back(std::move(paper));
  }
  return Corpus(std::move(kept));
}

// ---------------------------------------------------------------------------
// Splits

QuerySet make_queries(const Corpus& corpus, std::span<const std::string> paper_ids) {
  QuerySet queries;
  for (const auto& id : paper_ids) {
    const auto doc = corpus.doc_no(id);
    if (!doc) continue;
    Query query{id, {}};
    for (const DocNo cited : corpus.citations(*doc)) {
      if (cited != *doc) query.relevant.push_back(corpus.at(cited).id);
    }
    std::sort(query.relevant.begin(), query.relevant.end());
    query.relevant.erase(std::unique(query.relevant.begin(), query.relevant.end()), query.relevant.end());
    if (!query.relevant.empty()) queries.push_back(std::move(query));
  }
  std::sort(queries.begin(), queries.end(), [](const Query& a, const Query& b) { return a.id < b.id; });
  return queries;
}

namespace {

std::vector<std::string> sample_ids(std::vector<std::string> pool, std::optional<std::size_t> size,
                                    std::uint64_t seed) {
  if (!size || *size >= pool.size()) return pool;
  // Partial Fisher-Yates with a fixed engine: identical on every platform.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < *size; ++i) {
    const auto j = i + uniform_below(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(*size);
  return pool;
}

}  // namespace

Split split_by_year(const Corpus& corpus, const SplitSpec& spec) {
  if (spec.train_fraction <= 0 || spec.dev_fraction <= 0 || spec.test_fraction <= 0) {
    throw SplitError("split: fractions must be positive");
  }
  if (std::abs(spec.train_fraction + spec.dev_fraction + spec.test_fraction - 1.0) > 1e-9) {
    throw SplitError("split: fractions must sum to 1");
  }
  const std::size_t n = corpus.size();
  if (n < 3) throw SplitError("split: corpus has " + std::to_string(n) + " papers, need at least 3");

  std::vector<const Paper*> order;
  order.reserve(n);
  for (const auto& paper : corpus.papers()) {
    if (!paper.year) throw SplitError("split: paper '" + paper.id + "' has no year (filter the corpus first)");
    order.push_back(&paper);
  }
  std::sort(order.begin(), order.end(), [](const Paper* a, const Paper* b) {
    if (*a->year != *b->year) return *a->year < *b->year;
    return a->id < b->id;
  });

  const auto nd = static_cast<double>(n);
  std::size_t n_train = static_cast<std::size_t>(std::floor(nd * spec.train_fraction + 1e-9));
  std::size_t n_dev = static_cast<std::size_t>(std::floor(nd * spec.dev_fraction + 1e-9));
  // Dev and test always get at least one paper; train gives them up.
  n_dev = std::max<std::size_t>(n_dev, 1);
  n_train = std::min(n_train, n - n_dev - 1);
  const std::size_t n_test = n - n_train - n_dev;

  if (spec.dev_sample_size && *spec.dev_sample_size > n_dev) {
    throw SplitError("split: dev sample size exceeds the dev pool (" + std::to_string(n_dev) + ")");
  }
  if (spec.test_sample_size && *spec.test_sample_size > n_test) {
    throw SplitError("split: test sample size exceeds the test pool (" + std::to_string(n_test) + ")");
  }

  std::vector<Paper> train;
  std::vector<std::string> dev_ids, test_ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) {
      train.push_back(*order[i]);
    } else if (i < n_train + n_dev) {
      dev_ids.push_back(order[i]->id);
    } else {
      test_ids.push_back(order[i]->id);
    }
  }
  dev_ids = sample_ids(std::move(dev_ids), spec.dev_sample_size, spec.sample_seed);
  test_ids = sample_ids(std::move(test_ids), spec.test_sample_size, spec.sample_seed ^ 0x9e3779b97f4a7c15ULL);

  return Split{Corpus(std::move(train)), make_queries(corpus, dev_ids), make_queries(corpus, test_ids)};
}

StatsReport corpus_stats(const Corpus& corpus) {
  StatsReport report;
  report.docs = corpus.size();
  if (report.docs == 0) return report;
  std::size_t chars = 0;
  for (const auto& paper : corpus.papers()) {
    report.citations += paper.out_citations.size();
    chars += utf8_length(paper.title) + utf8_length(paper.abstract);
  }
  const auto docs = static_cast<double>(report.docs);
  report.avg_citations = static_cast<double>(report.citations) / docs;
  report.avg_length_chars = static_cast<double>(chars) / docs;
  return report;
}

}  // namespace citenav
