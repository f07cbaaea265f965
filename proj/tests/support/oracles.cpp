#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace citenav::testing {

std::vector<std::pair<std::string, double>> brute_bm25(const std::vector<OracleDoc>& docs,
                                                       const std::vector<std::string>& query, std::size_t k,
                                                       const std::optional<std::string>& exclude, double k1,
                                                       double b) {
  std::vector<std::string> terms;
  for (const auto& t : query) {
    if (std::find(terms.begin(), terms.end(), t) == terms.end()) terms.push_back(t);
  }
  const double n = static_cast<double>(docs.size());
  double total = 0.0;
  for (const auto& d : docs) total += static_cast<double>(d.tokens.size());
  const double avgdl = total / n;

  std::vector<std::pair<std::string, double>> scored;
  for (const auto& d : docs) {
    double score = 0.0;
    bool matched = false;
    for (const auto& t : terms) {
      const double tf = static_cast<double>(std::count(d.tokens.begin(), d.tokens.end(), t));
      if (tf == 0) continue;
      double df = 0;
      for (const auto& other : docs) df += std::count(other.tokens.begin(), other.tokens.end(), t) > 0 ? 1 : 0;
      const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
      const double dl = static_cast<double>(d.tokens.size());
      score += idf * (tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl)));
      matched = true;
    }
    if (matched && (!exclude || d.id != *exclude)) scored.emplace_back(d.id, score);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

OracleMetrics brute_metrics(const std::vector<std::string>& ranked, const std::set<std::string>& gold,
                            std::size_t f1_k, std::size_t mrr_depth, std::size_t recall_k) {
  OracleMetrics m;
  double hits20 = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < ranked.size() && i < f1_k; ++i, ++seen) hits20 += gold.count(ranked[i]);
  if (hits20 > 0) {
    const double p = hits20 / static_cast<double>(seen);
    const double r = hits20 / static_cast<double>(gold.size());
    m.f1 = 2 * p * r / (p + r);
  }
  for (std::size_t i = 0; i < ranked.size() && i < mrr_depth; ++i) {
    if (gold.count(ranked[i])) {
      m.mrr = 1.0 / static_cast<double>(i + 1);
      break;
    }
  }
  double hits = 0;
  for (std::size_t i = 0; i < ranked.size() && i < recall_k; ++i) hits += gold.count(ranked[i]);
  m.recall = hits / static_cast<double>(gold.size());
  return m;
}

OraclePool brute_navigate(const std::vector<std::string>& ranked, const Corpus& corpus, std::size_t k_d,
                          std::size_t k_c, const std::string& query_id, std::optional<int> max_year) {
  OraclePool pool;
  for (std::size_t i = 0; i < ranked.size() && i < k_d; ++i) pool.retained.push_back(ranked[i]);
  const std::set<std::string> retained(pool.retained.begin(), pool.retained.end());

  std::vector<std::vector<std::string>> contributions;
  std::set<std::string> taken;
  for (const auto& src : pool.retained) {
    std::vector<std::string> mine;
    const Paper* p = corpus.find(src);
    if (p) {
      for (const auto& c : p->out_citations) {
        const Paper* cited = corpus.find(c);
        if (!cited || c == query_id || retained.count(c) || taken.count(c)) continue;
        if (max_year && (!cited->year || *cited->year > *max_year)) continue;
        taken.insert(c);
        mine.push_back(c);
      }
    }
    contributions.push_back(std::move(mine));
  }
  std::size_t total = 0;
  for (const auto& c : contributions) total += c.size();
  for (auto it = contributions.rbegin(); total > k_c && it != contributions.rend(); ++it) {
    while (total > k_c && !it->empty()) {
      it->pop_back();
      --total;
    }
  }
  for (const auto& c : contributions) pool.expanded.insert(pool.expanded.end(), c.begin(), c.end());
  return pool;
}

std::pair<std::size_t, std::size_t> simulate_truncation(std::size_t q, std::size_t c, std::size_t max_total) {
  while (q + c > max_total) {
    if (c >= q) {
      --c;
    } else {
      --q;
    }
  }
  return {q, c};
}

std::set<std::string> word_set(const std::string& title) {
  std::set<std::string> out;
  std::string cur;
  for (const char ch : title + " ") {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.insert(cur);
      cur.clear();
    }
  }
  return out;
}

std::map<std::string, std::pair<std::string, double>> brute_leaks(const Corpus& train,
                                                                  const std::vector<std::string>& holdout,
                                                                  double threshold) {
  std::vector<std::set<std::string>> sets;
  for (const auto& h : holdout) sets.push_back(word_set(h));
  std::map<std::string, std::pair<std::string, double>> out;
  for (const auto& p : train.papers()) {
    const auto mine = word_set(p.title);
    double best = -1;
    std::size_t best_at = 0;
    for (std::size_t h = 0; h < sets.size(); ++h) {
      std::vector<std::string> inter, uni;
      std::set_intersection(mine.begin(), mine.end(), sets[h].begin(), sets[h].end(), std::back_inserter(inter));
      std::set_union(mine.begin(), mine.end(), sets[h].begin(), sets[h].end(), std::back_inserter(uni));
      const double sim = uni.empty() ? 1.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
      if (sim > best) {
        best = sim;
        best_at = h;
      }
    }
    if (best >= threshold) out[p.id] = {holdout[best_at], best};
  }
  return out;
}

}  // namespace citenav::testing
