#include <doctest.h>

#include <random>
#include <set>

#include "citenav/navigation.hpp"
#include "oracles.hpp"

using namespace citenav;

namespace {

RankedList ranked_of(std::vector<std::string> ids) {
  RankedList r;
  double s = static_cast<double>(ids.size());
  for (auto& id : ids) r.entries.push_back(ScoredDoc{std::move(id), s--});
  return r;
}

Paper paper(std::string id, std::vector<std::string> cites, std::optional<int> year = 2000) {
  return Paper{std::move(id), "t", "", year, std::move(cites)};
}

Corpus four_leaf_corpus() {
  return Corpus({paper("d1", {"d3", "d4"}), paper("d2", {"d5", "d6"}), paper("d3", {}), paper("d4", {}),
                 paper("d5", {}), paper("d6", {})});
}

struct RandomGraph {
  Corpus corpus;
  std::vector<std::string> ids;
};

RandomGraph random_graph(std::mt19937_64& rng) {
  const std::size_t n = 2 + rng() % 40;
  RandomGraph g;
  for (std::size_t i = 0; i < n; ++i) g.ids.push_back("p" + std::to_string(i));
  std::vector<Paper> papers;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> cites;
    std::set<std::string> seen;
    for (std::size_t j = 0, m = rng() % 8; j < m; ++j) {
      // Some citations point outside the corpus.
      const auto target = rng() % 6 == 0 ? "ghost" + std::to_string(rng() % 3) : g.ids[rng() % n];
      if (target != g.ids[i] && seen.insert(target).second) cites.push_back(target);
    }
    std::optional<int> year = 1990 + static_cast<int>(rng() % 20);
    if (rng() % 10 == 0) year.reset();
    papers.push_back(Paper{g.ids[i], "t", "", year, std::move(cites)});
  }
  g.corpus = Corpus(std::move(papers));
  return g;
}

RankedList random_ranking(std::mt19937_64& rng, const std::vector<std::string>& ids) {
  auto shuffled = ids;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  shuffled.resize(1 + rng() % shuffled.size());
  return ranked_of(shuffled);
}

}  // namespace

TEST_CASE("boundary source is trimmed from its tail") {
  const auto pool = navigate(ranked_of({"d1", "d2"}), four_leaf_corpus(), 2, 3, "q");
  CHECK(pool.retained == std::vector<std::string>{"d1", "d2"});
  CHECK(pool.expanded == std::vector<std::string>{"d3", "d4", "d5"});
  CHECK(pool_to_candidates(pool) == std::vector<std::string>{"d1", "d2", "d3", "d4", "d5"});
  CHECK(pool.provenance.at("d3") == Provenance{"d1", 1});
  CHECK(pool.provenance.at("d5") == Provenance{"d2", 2});
  CHECK(pool.provenance.count("d6") == 0);
}

TEST_CASE("zero citation budget keeps only the retained head") {
  const auto pool = navigate(ranked_of({"d1", "d2"}), four_leaf_corpus(), 2, 0, "q");
  CHECK(pool.expanded.empty());
  CHECK(pool.provenance.empty());
  CHECK(pool_to_candidates(pool) == pool.retained);
}

TEST_CASE("citations of retained papers are not expanded again") {
  const Corpus c({paper("d1", {"d2", "d9"}), paper("d2", {}), paper("d9", {})});
  const auto pool = navigate(ranked_of({"d1", "d2"}), c, 2, 10, "q");
  CHECK(pool.expanded == std::vector<std::string>{"d9"});
}

TEST_CASE("skip rules") {
  const Corpus c({paper("a", {"q", "missing", "b", "x", "y"}), paper("b", {"x", "z"}), paper("q", {}),
                  paper("x", {}, 2001), paper("y", {}, 2010), paper("z", {}, std::nullopt)});
  SUBCASE("query, missing and already-seen citations") {
    const auto pool = navigate(ranked_of({"a", "b"}), c, 2, 10, "q");
    CHECK(pool.expanded == std::vector<std::string>{"x", "y", "z"});
    CHECK(pool.provenance.at("z") == Provenance{"b", 2});
  }
  SUBCASE("year guard") {
    const auto pool = navigate(ranked_of({"a", "b"}), c, 2, 10, "q", {.max_year = 2005});
    CHECK(pool.expanded == std::vector<std::string>{"x"});
  }
  SUBCASE("k_d shorter than the list") {
    const auto pool = navigate(ranked_of({"a", "b"}), c, 1, 10, "q");
    CHECK(pool.retained == std::vector<std::string>{"a"});
    CHECK(pool.expanded == std::vector<std::string>{"b", "x", "y"});
  }
  SUBCASE("empty input") {
    const auto pool = navigate(RankedList{}, c, 3, 10, "q");
    CHECK(pool.retained.empty());
    CHECK(pool.expanded.empty());
  }
}

TEST_CASE("pool of 300 retained and 700 expanded yields 1000 candidates") {
  std::vector<Paper> papers;
  std::vector<std::string> head;
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> cites;
    for (int j = 0; j < 3; ++j) cites.push_back("c" + std::to_string(i * 3 + j));
    head.push_back("h" + std::to_string(1000 + i));
    papers.push_back(paper(head.back(), std::move(cites)));
  }
  for (int i = 0; i < 900; ++i) papers.push_back(paper("c" + std::to_string(i), {}));
  const auto pool = navigate(ranked_of(head), Corpus(std::move(papers)), 300, 700, "q");
  CHECK(pool.retained.size() == 300);
  CHECK(pool.expanded.size() == 700);
  CHECK(pool_to_candidates(pool).size() == 1000);
}

TEST_CASE("navigation agrees with the gather-then-strip oracle on random graphs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = random_graph(rng);
    const auto ranked = random_ranking(rng, g.ids);
    const std::size_t k_d = 1 + rng() % 10;
    const std::size_t k_c = rng() % 25;
    const std::string query = rng() % 2 ? g.ids[rng() % g.ids.size()] : "none";
    std::optional<int> max_year;
    if (rng() % 3 == 0) max_year = 1995 + static_cast<int>(rng() % 10);

    std::vector<std::string> ids;
    for (const auto& e : ranked.entries) ids.push_back(e.id);
    const auto got = navigate(ranked, g.corpus, k_d, k_c, query, {.max_year = max_year});
    const auto want = citenav::testing::brute_navigate(ids, g.corpus, k_d, k_c, query, max_year);
    REQUIRE(got.retained == want.retained);
    REQUIRE(got.expanded == want.expanded);
  }
}

TEST_CASE("pool invariants on random graphs") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_graph(rng);
    const auto ranked = random_ranking(rng, g.ids);
    const std::size_t k_d = 1 + rng() % 10;
    const std::size_t k_c = rng() % 25;
    const auto pool = navigate(ranked, g.corpus, k_d, k_c, "none");

    CHECK(pool.retained.size() <= k_d);
    CHECK(pool.expanded.size() <= k_c);
    const std::set<std::string> r(pool.retained.begin(), pool.retained.end());
    const std::set<std::string> e(pool.expanded.begin(), pool.expanded.end());
    CHECK(r.size() == pool.retained.size());
    CHECK(e.size() == pool.expanded.size());
    for (const auto& id : pool.expanded) CHECK(r.count(id) == 0);
    CHECK(pool_to_candidates(pool).size() <= k_d + k_c);

    REQUIRE(pool.provenance.size() == pool.expanded.size());
    for (const auto& id : pool.expanded) {
      const auto& prov = pool.provenance.at(id);
      REQUIRE(prov.source_rank >= 1);
      REQUIRE(prov.source_rank <= pool.retained.size());
      CHECK(pool.retained[prov.source_rank - 1] == prov.source);
      const auto& cites = g.corpus.find(prov.source)->out_citations;
      CHECK(std::find(cites.begin(), cites.end(), id) != cites.end());
    }

    CHECK(navigate(ranked, g.corpus, k_d, k_c, "none") == pool);
    const auto bigger = navigate(ranked, g.corpus, k_d, k_c + 1, "none");
    REQUIRE(bigger.expanded.size() >= pool.expanded.size());
    CHECK(std::equal(pool.expanded.begin(), pool.expanded.end(), bigger.expanded.begin()));
  }
}
