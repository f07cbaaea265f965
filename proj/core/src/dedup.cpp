#include "citenav/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "citenav/errors.hpp"
#include "citenav/text.hpp"

namespace citenav {

TitleSignature title_signature(std::string_view title) {
  auto words = split_words(title, true);
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

double jaccard(const TitleSignature& a, const TitleSignature& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t shared = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++shared;
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

namespace {

// Any two sets with Jaccard >= t share a token within their first
// s - ceil(t*s) + 1 tokens under a common global order.
std::size_t prefix_length(std::size_t size, double threshold) {
  const auto overlap = static_cast<std::size_t>(std::ceil(threshold * static_cast<double>(size) - 1e-9));
  return size - std::min(size, overlap) + 1;
}

class HoldoutIndex {
 public:
  HoldoutIndex(std::span<const std::string> titles, double threshold) : threshold_(threshold) {
    signatures_.reserve(titles.size());
    for (const auto& t : titles) signatures_.push_back(title_signature(t));
    for (const auto& sig : signatures_) {
      for (const auto& w : sig) ++frequency_[w];
    }
    for (std::size_t h = 0; h < signatures_.size(); ++h) {
      if (signatures_[h].empty()) {
        if (!first_empty_) first_empty_ = h;
        continue;
      }
      const auto ordered = order(signatures_[h]);
      const std::size_t p = std::min(prefix_length(ordered.size(), threshold_), ordered.size());
      for (std::size_t i = 0; i < p; ++i) postings_[*ordered[i]].push_back(h);
    }
  }

  /// Best matching holdout index and similarity, if any reaches the threshold.
  std::optional<std::pair<std::size_t, double>> best_match(const TitleSignature& sig) {
    if (sig.empty()) {
      if (first_empty_) return std::pair{*first_empty_, 1.0};
      return std::nullopt;
    }
    const auto ordered = order(sig);
    const std::size_t p = std::min(prefix_length(ordered.size(), threshold_), ordered.size());
    candidates_.clear();
    for (std::size_t i = 0; i < p; ++i) {
      const auto it = postings_.find(*ordered[i]);
      if (it != postings_.end()) candidates_.insert(candidates_.end(), it->second.begin(), it->second.end());
    }
    std::sort(candidates_.begin(), candidates_.end());
    candidates_.erase(std::unique(candidates_.begin(), candidates_.end()), candidates_.end());

    const double s = static_cast<double>(sig.size());
    std::optional<std::pair<std::size_t, double>> best;
    for (const std::size_t h : candidates_) {
      const double other = static_cast<double>(signatures_[h].size());
      if (std::min(s, other) < threshold_ * std::max(s, other) - 1e-9) continue;
      const double sim = jaccard(sig, signatures_[h]);
      if (sim >= threshold_ && (!best || sim > best->second)) best = std::pair{h, sim};
    }
    return best;
  }

 private:
  std::vector<const std::string*> order(const TitleSignature& sig) const {
    std::vector<std::pair<std::size_t, const std::string*>> keyed;
    keyed.reserve(sig.size());
    for (const auto& w : sig) {
      const auto it = frequency_.find(w);
      keyed.push_back({it == frequency_.end() ? 0 : it->second, &w});
    }
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return *a.second < *b.second;
    });
    std::vector<const std::string*> out;
    out.reserve(keyed.size());
    for (const auto& [f, w] : keyed) out.push_back(w);
    return out;
  }

  double threshold_;
  std::vector<TitleSignature> signatures_;
  std::unordered_map<std::string, std::size_t> frequency_;
  std::unordered_map<std::string, std::vector<std::size_t>> postings_;
  std::optional<std::size_t> first_empty_;
  std::vector<std::size_t> candidates_;
};

}  // namespace

std::vector<LeakMatch> find_leaked(const Corpus& train, std::span<const std::string> holdout_titles, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ArgumentError("dedup: threshold must lie in (0, 1]");
  HoldoutIndex index(holdout_titles, threshold);
  std::vector<LeakMatch> out;
  for (const auto& paper : train.papers()) {
    if (const auto match = index.best_match(title_signature(paper.title))) {
      out.push_back(LeakMatch{paper.id, holdout_titles[match->first], match->second});
    }
  }
  return out;  // train papers are id-sorted already
}

LeakRemoval remove_leaked(const Corpus& train, std::span<const std::string> holdout_titles, double threshold) {
  LeakRemoval result;
  result.removed = find_leaked(train, holdout_titles, threshold);
  std::vector<Paper> kept;
  std::size_t r = 0;
  for (const auto& paper : train.papers()) {
    if (r < result.removed.size() && result.removed[r].train_id == paper.id) {
      ++r;
      continue;
    }
    kept.push_back(paper);
  }
  result.survivors = filter_corpus(Corpus(std::move(kept)));
  return result;
}

void write_leak_report(std::ostream& out, std::span<const LeakMatch> removed) {
  for (const auto& m : removed) {
    nlohmann::ordered_json j{{"train_id", m.train_id}, {"matched_title", m.matched_title}, {"similarity", m.similarity}};
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
}

}  // namespace citenav
