#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "citenav/corpus.hpp"

namespace citenav {

/// Distinct lowercase alphanumeric words of a title, sorted.
using TitleSignature = std::vector<std::string>;

TitleSignature title_signature(std::string_view title);

/// |a ∩ b| / |a ∪ b|; 1 when both are empty.
double jaccard(const TitleSignature& a, const TitleSignature& b);

struct LeakMatch {
  std::string train_id;
  std::string matched_title;
  double similarity = 0.0;

  friend bool operator==(const LeakMatch&, const LeakMatch&) = default;
};

struct LeakRemoval {
  Corpus survivors;
  std::vector<LeakMatch> removed;  // sorted by train_id
};

/// Removes every training paper whose title signature reaches `threshold`
/// Jaccard similarity with any holdout title, then re-filters the survivors.
/// The reported match is the most similar holdout title (earliest on ties).
/// Candidate pairs come from a prefix-filter index over rare words; results
/// equal the all-pairs comparison. Throws ArgumentError unless
/// 0 < threshold <= 1.
LeakRemoval remove_leaked(const Corpus& train, std::span<const std::string> holdout_titles,
                          double threshold = 0.7);

/// Only the matching step of remove_leaked, without re-filtering.
std::vector<LeakMatch> find_leaked(const Corpus& train, std::span<const std::string> holdout_titles,
                                   double threshold = 0.7);

void write_leak_report(std::ostream& out, std::span<const LeakMatch> removed);

}  // namespace citenav
