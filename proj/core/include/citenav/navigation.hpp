#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "citenav/corpus.hpp"
#include "citenav/index.hpp"

namespace citenav {

struct Provenance {
  std::string source;
  std::size_t source_rank = 0;  // 1-based rank of the source in the input list

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Result of one navigation step: the retained head of the ranked list and
/// the capped set of papers they cite.
struct CandidatePool {
  std::vector<std::string> retained;
  std::vector<std::string> expanded;
  std::map<std::string, Provenance> provenance;  // keyed by expanded id

  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;
};

struct NavigationOptions {
  /// When set, cited papers newer than this year are skipped.
  std::optional<int> max_year;
};

/// Keeps the first `k_d` entries of `ranked` and gathers the papers they cite,
/// source by source in rank order and, within a source, in corpus storage
/// order. Citations equal to `query_id`, already retained or gathered, or
/// missing from the corpus are skipped. If more than `k_c` survive, the
/// contributions of the lowest-ranked sources are dropped first, trimming the
/// boundary source from its tail.
CandidatePool navigate(const RankedList& ranked, const Corpus& corpus, std::size_t k_d,
                       std::size_t k_c, std::string_view query_id,
                       const NavigationOptions& options = {});

/// retained followed by expanded. The order is provisional; ranking reorders.
std::vector<std::string> pool_to_candidates(const CandidatePool& pool);

}  // namespace citenav
