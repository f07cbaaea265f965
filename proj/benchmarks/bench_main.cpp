// Microbenchmarks for the hot paths: index build, BM25 search, citation
// navigation, near-duplicate title matching and the truncation rule.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "citenav/corpus.hpp"
#include "citenav/dedup.hpp"
#include "citenav/index.hpp"
#include "citenav/navigation.hpp"
#include "citenav/rerank.hpp"

using namespace citenav;

namespace {

std::string word(std::size_t n) {
  static constexpr char kLetters[] = "bcdfghjklmnpqrstvwxz";
  std::string w = "w";
  do {
    w.push_back(kLetters[n % 20]);
    n /= 20;
  } while (n > 0);
  return w;
}

// Zipf-ish synthetic corpus with random citation edges.
Corpus synthetic_corpus(std::size_t docs, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Paper> papers;
  papers.reserve(docs);
  auto draw = [&] {
    const double u = std::uniform_real_distribution<double>(0, 1)(rng);
    return word(static_cast<std::size_t>(static_cast<double>(vocab) * u * u));
  };
  for (std::size_t d = 0; d < docs; ++d) {
    Paper p;
    p.id = "p" + std::to_string(d);
    for (int i = 0; i < 8; ++i) p.title += (i ? " " : "") + draw();
    for (int i = 0; i < 120; ++i) p.abstract += (i ? " " : "") + draw();
    p.year = 1990 + static_cast<int>(rng() % 30);
    for (std::size_t c = 0, n = rng() % 13; c < n; ++c) p.out_citations.push_back("p" + std::to_string(rng() % docs));
    papers.push_back(std::move(p));
  }
  return Corpus(std::move(papers));
}

const Corpus& shared_corpus() {
  static const Corpus corpus = synthetic_corpus(20000, 30000, 1);
  return corpus;
}

const InvertedIndex& shared_index() {
  static const InvertedIndex index = build_index(shared_corpus(), AnalyzerConfig{}, 4);
  return index;
}

void BM_BuildIndex(benchmark::State& state) {
  const Corpus corpus = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 30000, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_index(corpus, AnalyzerConfig{}, static_cast<unsigned>(state.range(1))));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BuildIndex)->Args({5000, 1})->Args({5000, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_Bm25Search(benchmark::State& state) {
  const auto& index = shared_index();
  const auto& corpus = shared_corpus();
  std::size_t q = 0;
  for (auto _ : state) {
    const Paper& p = corpus.papers()[q++ % corpus.size()];
    benchmark::DoNotOptimize(bm25_search(index, p.title + " " + p.abstract, static_cast<std::size_t>(state.range(0))));
  }
}
BENCHMARK(BM_Bm25Search)->Arg(100)->Arg(1000)->Unit(benchmark::kMicrosecond);

void BM_Navigate(benchmark::State& state) {
  const auto& corpus = shared_corpus();
  const auto k_d = static_cast<std::size_t>(state.range(0));
  RankedList ranked;
  for (std::size_t i = 0; i < 1000; ++i) ranked.entries.push_back({"p" + std::to_string(i * 17 % corpus.size()), 1000.0 - i});
  for (auto _ : state) {
    benchmark::DoNotOptimize(navigate(ranked, corpus, k_d, 1000 - k_d, "p0"));
  }
}
BENCHMARK(BM_Navigate)->Arg(100)->Arg(300)->Unit(benchmark::kMicrosecond);

void BM_FindLeaked(benchmark::State& state) {
  const Corpus train = synthetic_corpus(static_cast<std::size_t>(state.range(0)), 3000, 3);
  std::vector<std::string> holdout;
  for (std::size_t i = 0; i < train.size(); i += 10) holdout.push_back(train.papers()[i].title);
  for (auto _ : state) {
    benchmark::DoNotOptimize(find_leaked(train, holdout, 0.7));
  }
}
BENCHMARK(BM_FindLeaked)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_TruncatePair(benchmark::State& state) {
  const std::vector<std::string> q(700, "token"), c(900, "token");
  for (auto _ : state) {
    benchmark::DoNotOptimize(truncate_pair<std::string>(q, c, 512));
  }
}
BENCHMARK(BM_TruncatePair);

}  // namespace

BENCHMARK_MAIN();
