#include "citenav/analyzer.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "citenav/text.hpp"

namespace citenav {
namespace detail {
const std::vector<std::string_view>& shipped_stopwords();
}  // namespace detail

namespace {

const std::unordered_set<std::string_view>& stopword_set() {
  static const std::unordered_set<std::string_view> set(detail::shipped_stopwords().begin(),
                                                        detail::shipped_stopwords().end());
  return set;
}

}  // namespace

const std::vector<std::string_view>& stopword_list() { return detail::shipped_stopwords(); }

bool is_stopword(std::string_view word) { return stopword_set().contains(word); }

std::vector<std::string> analyze(std::string_view text, const AnalyzerConfig& config) {
  std::vector<std::string> words = split_words(text, config.lowercase);
  if (config.remove_stopwords) {
    std::erase_if(words, [](const std::string& w) { return is_stopword(w); });
  }
  if (config.stem) {
    for (auto& w : words) w = porter_stem(w);
  }
  return words;
}

std::string analyzer_fingerprint(const AnalyzerConfig& config) {
  std::string stop_digest = "none";
  if (config.remove_stopwords) {
    std::string joined;
    for (const auto word : stopword_list()) {
      joined.append(word);
      joined.push_back('\n');
    }
    stop_digest = to_hex(fnv1a64(joined));
  }
  return "split=alnum;lowercase=" + std::string(config.lowercase ? "1" : "0") + ";stopwords=" + stop_digest +
         ";stem=" + (config.stem ? "porter" : "none");
}

}  // namespace citenav
