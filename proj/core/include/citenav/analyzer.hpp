#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace citenav {

/// Token analysis switches. Splitting is always on contiguous alphanumeric
/// runs; the remaining stages can be toggled for ablations.
struct AnalyzerConfig {
  bool lowercase = true;
  bool remove_stopwords = true;
  bool stem = true;  // Porter

  friend bool operator==(const AnalyzerConfig&, const AnalyzerConfig&) = default;
};

/// Lowercase -> split -> stopword removal -> Porter stemming.
/// Pure function of (text, config).
std::vector<std::string> analyze(std::string_view text, const AnalyzerConfig& config);

/// Stable textual description of the analyzer, including a digest of the
/// stopword list. Persisted indexes embed this and refuse to load on mismatch.
std::string analyzer_fingerprint(const AnalyzerConfig& config);

/// Membership in the shipped English stopword list (exact, case-sensitive).
bool is_stopword(std::string_view word);

const std::vector<std::string_view>& stopword_list();

/// Porter stemmer (reference implementation, including its two published
/// departures: -bli -> -ble and -logi -> -log). Words that are not purely
/// lowercase ASCII letters are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace citenav
