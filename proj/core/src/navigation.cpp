#include "citenav/navigation.hpp"

#include <unordered_set>

namespace citenav {

CandidatePool navigate(const RankedList& ranked, const Corpus& corpus, std::size_t k_d, std::size_t k_c,
                       std::string_view query_id, const NavigationOptions& options) {
  CandidatePool pool;
  const std::size_t keep = std::min(k_d, ranked.entries.size());
  pool.retained.reserve(keep);
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < keep; ++i) {
    pool.retained.push_back(ranked.entries[i].id);
    seen.insert(ranked.entries[i].id);
  }

  // Gathering in rank order means dropping the lowest-ranked contributions
  // first is the same as keeping the first k_c survivors, so stop there.
  for (std::size_t rank = 0; rank < keep && pool.expanded.size() < k_c; ++rank) {
    const auto& source = pool.retained[rank];
    const auto doc = corpus.doc_no(source);
    if (!doc) continue;
    for (const DocNo cited : corpus.citations(*doc)) {
      if (pool.expanded.size() >= k_c) break;
      const Paper& paper = corpus.at(cited);
      if (paper.id == query_id || seen.contains(paper.id)) continue;
      if (options.max_year && (!paper.year || *paper.year > *options.max_year)) continue;
      seen.insert(paper.id);
      pool.expanded.push_back(paper.id);
      pool.provenance.emplace(paper.id, Provenance{source, rank + 1});
    }
  }
  return pool;
}

std::vector<std::string> pool_to_candidates(const CandidatePool& pool) {
  std::vector<std::string> out;
  out.reserve(pool.retained.size() + pool.expanded.size());
  out.insert(out.end(), pool.retained.begin(), pool.retained.end());
  out.insert(out.end(), pool.expanded.begin(), pool.expanded.end());
  return out;
}

}  // namespace citenav
