#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "citenav/eval.hpp"
#include "citenav/pipeline.hpp"
#include "citenav/rerank.hpp"
#include "oracles.hpp"
#include "planted.hpp"

using namespace citenav;
using citenav::testing::stable_word;

namespace {

class TableScorer final : public Scorer {
 public:
  explicit TableScorer(std::map<std::string, double> table) : table_(std::move(table)) {}
  std::vector<double> score(std::span<const PairInput> pairs) override {
    std::vector<double> out;
    for (const auto& p : pairs) out.push_back(table_.at(p.pair_id));
    return out;
  }
  std::string name() const override { return "table"; }

 private:
  std::map<std::string, double> table_;
};

class BrokenScorer final : public Scorer {
 public:
  explicit BrokenScorer(std::vector<double> out) : out_(std::move(out)) {}
  std::vector<double> score(std::span<const PairInput>) override { return out_; }
  std::string name() const override { return "broken"; }

 private:
  std::vector<double> out_;
};

std::string repeat_words(std::size_t base, std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += stable_word(base + i) + " ";
  return s;
}

const AnalyzerConfig kAnalyzer{};

}  // namespace

TEST_CASE("truncation examples") {
  CHECK(truncated_lengths(300, 300, 512) == std::pair<std::size_t, std::size_t>{256, 256});
  CHECK(truncated_lengths(100, 200, 512) == std::pair<std::size_t, std::size_t>{100, 200});
  CHECK(truncated_lengths(500, 100, 512) == std::pair<std::size_t, std::size_t>{412, 100});
  CHECK(truncated_lengths(512, 0, 512) == std::pair<std::size_t, std::size_t>{512, 0});
  CHECK(truncated_lengths(600, 0, 512) == std::pair<std::size_t, std::size_t>{512, 0});
  CHECK(truncated_lengths(3, 3, 5) == std::pair<std::size_t, std::size_t>{3, 2});
}

TEST_CASE("truncation agrees with token-by-token removal") {
  for (std::size_t max_total : {2u, 3u, 17u, 128u}) {
    for (std::size_t q = 0; q <= 150; q += 1 + q / 10) {
      for (std::size_t c = 0; c <= 150; c += 1 + c / 10) {
        CHECK(truncated_lengths(q, c, max_total) == citenav::testing::simulate_truncation(q, c, max_total));
      }
    }
  }
}

TEST_CASE("truncate_pair keeps prefixes and is idempotent") {
  std::vector<int> q(40), c(70);
  std::iota(q.begin(), q.end(), 0);
  std::iota(c.begin(), c.end(), 100);
  const auto [tq, tc] = truncate_pair<int>(q, c, 50);
  CHECK(tq.size() + tc.size() == 50);
  CHECK(std::equal(tq.begin(), tq.end(), q.begin()));
  CHECK(std::equal(tc.begin(), tc.end(), c.begin()));
  const auto [tq2, tc2] = truncate_pair<int>(tq, tc, 50);
  CHECK(tq2 == tq);
  CHECK(tc2 == tc);
  CHECK_THROWS_AS(truncate_pair<int>(q, c, 1), ArgumentError);
}

TEST_CASE("token budget validation") {
  CHECK_NOTHROW(TokenBudget{}.validate());
  CHECK_NOTHROW((TokenBudget{512, 384, 128}.validate()));
  CHECK_THROWS_AS((TokenBudget{512, 400, 200}.validate()), ArgumentError);
  CHECK_THROWS_AS((TokenBudget{512, 0, 200}.validate()), ArgumentError);
  CHECK_THROWS_AS((TokenBudget{1, 1, 1}.validate()), ArgumentError);
}

TEST_CASE("assemble_pair") {
  const Paper shortq{"q", "graph search", "citation networks", 2010, {}};
  const Paper shortc{"c", "retrieval", "", 2009, {}};
  SUBCASE("short texts are untouched") {
    const auto p = assemble_pair(shortq, shortc, TokenBudget{}, kAnalyzer);
    CHECK(p.pair_id == "c");
    CHECK(p.query_tokens == analyze(shortq.text(), kAnalyzer));
    CHECK(p.candidate_tokens == std::vector<std::string>{"retriev"});
    CHECK(p.candidate_text == "retrieval");
  }
  SUBCASE("query side capped at its budget") {
    const Paper longq{"q", "t", repeat_words(0, 600), 2010, {}};
    const Paper longc{"c", "t", repeat_words(1000, 600), 2010, {}};
    const auto p = assemble_pair(longq, longc, TokenBudget{512, 384, 128}, kAnalyzer);
    CHECK(p.query_tokens.size() == 384);
    CHECK(p.candidate_tokens.size() == 128);
    const auto full = analyze(longq.text(), kAnalyzer);
    CHECK(std::equal(p.query_tokens.begin(), p.query_tokens.end(), full.begin()));
  }
  SUBCASE("invalid budget") {
    CHECK_THROWS_AS(assemble_pair(shortq, shortc, TokenBudget{100, 90, 90}, kAnalyzer), ArgumentError);
  }
}

TEST_CASE("lexical feature examples") {
  const Corpus corpus({Paper{"a", stable_word(1) + " " + stable_word(2), stable_word(3), 2000, {}},
                       Paper{"b", stable_word(4), stable_word(5) + " " + stable_word(6), 2000, {}}});
  const auto index = build_index(corpus, kAnalyzer);
  SUBCASE("identical text") {
    const auto f = lexical_features(assemble_pair(corpus.papers()[0], corpus.papers()[0], {}, kAnalyzer), index);
    CHECK(f[0] == 1.0);
    CHECK(f[2] == 1.0);
    CHECK(f[4] == 1.0);
    CHECK(f[1] > 0.0);
    CHECK(f[3] == doctest::Approx(std::log(4.0)));
  }
  SUBCASE("disjoint vocabularies") {
    const auto f = lexical_features(assemble_pair(corpus.papers()[0], corpus.papers()[1], {}, kAnalyzer), index);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == 0.0);
    CHECK(f[2] == 0.0);
    CHECK(f[4] == 0.0);
  }
  SUBCASE("partial overlap counts candidate terms") {
    const Paper q{"q", stable_word(1) + " " + stable_word(2) + " " + stable_word(3) + " " + stable_word(4), "", 1, {}};
    const Paper c{"c", stable_word(3) + " " + stable_word(4) + " " + stable_word(7), "", 1, {}};
    const auto f = lexical_features(assemble_pair(q, c, {}, kAnalyzer), index);
    CHECK(f[0] == doctest::Approx(2.0 / 3.0));
    CHECK(f[4] == doctest::Approx(0.5));
    CHECK(f[2] == doctest::Approx(2.0 / 5.0));
    CHECK(term_overlap(q, c, kAnalyzer) == doctest::Approx(f[0]));
  }
}

TEST_CASE("cross-entropy examples") {
  const std::vector<double> half{0.5, 0.5};
  const std::vector<int> labels{1, 0};
  CHECK(cross_entropy_loss(half, labels) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy_loss(half, labels) == doctest::Approx(1.3863).epsilon(1e-4));
  const std::vector<double> sure{1 - 1e-12, 1e-12};
  CHECK(cross_entropy_loss(sure, labels) < 1e-10);
  const std::vector<double> one{0.5};
  CHECK_THROWS_AS(cross_entropy_loss(one, labels), ArgumentError);

  const std::vector<std::vector<double>> rows{{0.0}, {0.0}};
  const std::vector<double> w{0.0};
  CHECK(logistic_loss_and_gradient(w, 0.0, rows, labels).loss == doctest::Approx(1.3863).epsilon(1e-4));
}

TEST_CASE("gradient matches central finite differences") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 1 + rng() % 6;
    const std::size_t n = 1 + rng() % 30;
    std::vector<double> w(d);
    for (auto& x : w) x = normal(rng);
    const double b = normal(rng);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : rows[i]) x = 2 * normal(rng);
      labels[i] = static_cast<int>(rng() % 2);
    }
    const auto g = logistic_loss_and_gradient(w, b, rows, labels);
    const double h = 1e-6;
    auto rel = [](double a, double e) { return std::abs(a - e) / std::max(1.0, std::abs(e)); };
    for (std::size_t k = 0; k < d; ++k) {
      auto wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      const double fd = (logistic_loss_and_gradient(wp, b, rows, labels).loss -
                         logistic_loss_and_gradient(wm, b, rows, labels).loss) / (2 * h);
      CHECK(rel(g.weight_gradient[k], fd) < 1e-5);
    }
    const double fd_b = (logistic_loss_and_gradient(w, b + h, rows, labels).loss -
                         logistic_loss_and_gradient(w, b - h, rows, labels).loss) / (2 * h);
    CHECK(rel(g.bias_gradient, fd_b) < 1e-5);
  }
}

TEST_CASE("separable toy set converges like a grid search") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> noise(-0.5, 0.5);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) {
    const int label = i % 2;
    rows.push_back({label ? 1.0 : -1.0, noise(rng)});
    labels.push_back(label);
  }
  const auto fit = fit_logistic(rows, labels, TrainOptions{20000, 1.0, 1});
  CHECK(fit.final_loss < 0.05);

  double best = std::numeric_limits<double>::infinity();
  double best_w0 = 0;
  const std::vector<double> zero_bias_w(2);
  for (double w0 = -12; w0 <= 12; w0 += 0.25) {
    for (double w1 = -12; w1 <= 12; w1 += 0.25) {
      const std::vector<double> w{w0, w1};
      const double loss = logistic_loss_and_gradient(w, 0.0, rows, labels).loss;
      if (loss < best) best = loss, best_w0 = w0;
    }
  }
  CHECK(best < 0.05);
  CHECK(best_w0 > 0);
  CHECK(fit.weights[0] > 0);
  CHECK(std::abs(fit.weights[0]) > std::abs(fit.weights[1]));
}

TEST_CASE("training rejects single-class input") {
  const std::vector<std::vector<double>> rows{{1.0}, {2.0}};
  const std::vector<int> pos{1, 1};
  CHECK_THROWS_AS(fit_logistic(rows, pos, {}), TrainingError);
  CHECK_THROWS_AS(fit_logistic({}, {}, {}), TrainingError);
}

TEST_CASE("built-in scorer with zero weights gives one half") {
  const Corpus corpus({Paper{"a", "x y", "", 1, {}}, Paper{"b", "z", "", 1, {}}});
  const auto index = build_index(corpus, kAnalyzer);
  LexicalScorer scorer(LexicalModel{}, index);
  const std::vector<PairInput> pairs{assemble_pair(corpus.papers()[0], corpus.papers()[1], {}, kAnalyzer),
                                     assemble_pair(corpus.papers()[1], corpus.papers()[0], {}, kAnalyzer)};
  for (const double s : scorer.score(pairs)) CHECK(s == 0.5);
}

TEST_CASE("scaling weights and bias preserves the ranking") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal(0.0, 1.0);
  LexicalModel m;
  for (auto& w : m.weights) w = normal(rng);
  m.bias = normal(rng);
  std::vector<FeatureVector> feats(40);
  for (auto& f : feats) {
    for (auto& x : f) x = normal(rng);
  }
  auto order = [&](const LexicalModel& model) {
    std::vector<std::size_t> idx(feats.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](auto a, auto b) { return model.probability(feats[a]) > model.probability(feats[b]); });
    return idx;
  };
  for (const double c : {0.1, 0.5, 3.0}) {
    LexicalModel scaled = m;
    for (auto& w : scaled.weights) w *= c;
    scaled.bias *= c;
    CHECK(order(scaled) == order(m));
  }
}

TEST_CASE("model json round trip") {
  LexicalModel m;
  m.weights = {0.1, -0.2, 0.3, 0.4, -0.5};
  m.bias = 0.25;
  m.feature_mean = {1, 2, 3, 4, 5};
  m.feature_scale = {0.5, 1, 2, 3, 4};
  const auto back = LexicalModel::from_json(m.to_json());
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.feature_mean == m.feature_mean);
  CHECK(back.feature_scale == m.feature_scale);
  CHECK_THROWS_AS(LexicalModel::from_json("{}"), ArgumentError);
  CHECK_THROWS_AS(LexicalModel::from_json("not json"), ArgumentError);
}

TEST_CASE("rerank sorts by score then id") {
  const Corpus corpus({Paper{"q", "t", "", 1, {}}, Paper{"dA", "t", "", 1, {}}, Paper{"dB", "t", "", 1, {}},
                       Paper{"dC", "t", "", 1, {}}});
  const Paper& query = *corpus.find("q");
  TableScorer scorer({{"dA", 0.2}, {"dC", 0.9}, {"dB", 0.9}});
  const std::vector<std::string> cands{"dA", "dC", "dB"};
  const auto r = rerank(scorer, query, cands, corpus, {}, kAnalyzer);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].id == "dB");
  CHECK(r.entries[1].id == "dC");
  CHECK(r.entries[2].id == "dA");
  CHECK(r.query_id == "q");

  const std::vector<std::string> one{"dA"};
  CHECK(rerank(scorer, query, one, corpus, {}, kAnalyzer).entries.size() == 1);
  CHECK(rerank(scorer, query, {}, corpus, {}, kAnalyzer).entries.empty());

  const std::vector<std::string> with_query{"dA", "q"};
  CHECK_THROWS_AS(rerank(scorer, query, with_query, corpus, {}, kAnalyzer), ArgumentError);
  const std::vector<std::string> missing{"dA", "nope"};
  CHECK_THROWS_AS(rerank(scorer, query, missing, corpus, {}, kAnalyzer), ArgumentError);

  BrokenScorer short_reply({0.5});
  CHECK_THROWS_AS(rerank(short_reply, query, cands, corpus, {}, kAnalyzer), ProtocolError);
  BrokenScorer out_of_range({0.5, 1.5, 0.1});
  CHECK_THROWS_AS(rerank(out_of_range, query, cands, corpus, {}, kAnalyzer), ProtocolError);
}

TEST_CASE("identity scorer keeps the provisional order") {
  std::vector<Paper> papers{Paper{"q", "t", "", 1, {}}};
  std::vector<std::string> cands;
  for (int i = 0; i < 30; ++i) {
    cands.push_back("c" + std::to_string((i * 7919) % 1000));
    papers.push_back(Paper{cands.back(), "t", "", 1, {}});
  }
  const Corpus corpus(std::move(papers));
  IdentityScorer scorer;
  const auto r = rerank(scorer, *corpus.find("q"), cands, corpus, {}, kAnalyzer);
  REQUIRE(r.entries.size() == cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) CHECK(r.entries[i].id == cands[i]);
}

TEST_CASE("rerank is a permutation with scores in range") {
  const auto planted = citenav::testing::make_planted_corpus({.total_docs = 400, .queries = 10});
  const auto index = build_index(planted.corpus, kAnalyzer);
  LexicalModel m;
  m.weights = {1, 0.5, 0.25, -0.1, 2};
  LexicalScorer scorer(m, index);
  for (const auto& q : planted.query_papers) {
    const auto bm = bm25_search(index, q.text(), 50, std::string_view(q.id));
    std::vector<std::string> cands;
    for (const auto& e : bm.entries) cands.push_back(e.id);
    const auto r = rerank(scorer, q, cands, planted.corpus, {}, kAnalyzer);
    std::vector<std::string> got;
    for (const auto& e : r.entries) {
      got.push_back(e.id);
      CHECK(e.score >= 0.0);
      CHECK(e.score <= 1.0);
    }
    std::sort(got.begin(), got.end());
    std::sort(cands.begin(), cands.end());
    CHECK(got == cands);
  }
}

TEST_CASE("trained built-in scorer does not lose MRR against BM25 on overlap-driven relevance") {
  // Relevant papers cover four of the six query terms once each inside a
  // longer text; distractors repeat three query terms in a short text, which
  // BM25 prefers and term coverage does not.
  std::mt19937_64 rng(8);
  std::vector<Paper> papers;
  std::vector<Query> queries;
  for (std::size_t q = 0; q < 60; ++q) {
    const std::size_t base = 100 + q * 10;
    Paper query{"q" + std::to_string(1000 + q), repeat_words(base, 6), "", 2010, {}};
    std::vector<std::string> gold;
    for (int r = 0; r < 2; ++r) {
      std::vector<std::size_t> terms{0, 1, 2, 3, 4, 5};
      std::shuffle(terms.begin(), terms.end(), rng);
      std::string text;
      for (int w = 0; w < 4; ++w) text += stable_word(base + terms[w]) + " ";
      text += repeat_words(5000 + rng() % 500, 20);
      gold.push_back("r" + std::to_string(1000 + q) + "_" + std::to_string(r));
      papers.push_back(Paper{gold.back(), text, "", 2000, {}});
    }
    for (int d = 0; d < 4; ++d) {
      std::vector<std::size_t> terms{0, 1, 2, 3, 4, 5};
      std::shuffle(terms.begin(), terms.end(), rng);
      std::string text;
      for (int k = 0; k < 3; ++k) text += stable_word(base + terms[0]) + " " + stable_word(base + terms[1]) + " " + stable_word(base + terms[2]) + " ";
      papers.push_back(Paper{"x" + std::to_string(1000 + q) + "_" + std::to_string(d), text, "", 2000, {}});
    }
    query.out_citations = gold;
    std::sort(gold.begin(), gold.end());
    queries.push_back(Query{query.id, gold});
    papers.push_back(std::move(query));
  }
  const Corpus corpus(std::move(papers));
  const auto index = build_index(corpus, kAnalyzer);

  const std::span<const Query> train(queries.data(), 30);
  const std::span<const Query> test(queries.data() + 30, 30);
  const auto pairs = generate_training_pairs(train, index, corpus, {.top_k = 10});
  const auto model = train_lexical_scorer(pairs.pairs, corpus, index, {}, {}).model;
  LexicalScorer scorer(model, index);

  double bm25_mrr = 0, rerank_mrr = 0;
  for (const auto& q : test) {
    const Paper& paper = *corpus.find(q.id);
    const RelevantSet gold(q.relevant.begin(), q.relevant.end());
    const auto bm = bm25_search(index, paper.text(), 10, std::string_view(q.id));
    std::vector<std::string> cands;
    for (const auto& e : bm.entries) cands.push_back(e.id);
    bm25_mrr += reciprocal_rank(bm, gold);
    rerank_mrr += reciprocal_rank(rerank(scorer, paper, cands, corpus, {}, kAnalyzer), gold);
  }
  MESSAGE("bm25 mrr " << bm25_mrr / 30 << ", reranked mrr " << rerank_mrr / 30);
  CHECK(rerank_mrr >= bm25_mrr);
}
