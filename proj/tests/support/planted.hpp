#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "citenav/corpus.hpp"

namespace citenav::testing {

/// Word made only of consonants behind a "q", so the analyzer (lowercase,
/// stopwords, Porter) maps it to itself.
std::string stable_word(std::size_t n);

struct PlantedSpec {
  std::size_t total_docs = 2000;
  std::size_t queries = 100;
  std::size_t visible_per_query = 4;
  std::size_t hidden_per_query = 4;
  std::size_t topic_words = 6;
  double filler_topic_noise = 0.3;  // chance a filler carries one random topic word
  std::uint64_t seed = 7;
};

/// Each query (year 2010) cites `visible` papers (2005) that share its topic
/// words and `hidden` papers (2000) that share none; every visible paper
/// cites all hidden papers of its query. Fillers (2000) cite each other.
struct PlantedCorpus {
  Corpus corpus;
  QuerySet queries;                  // gold = visible + hidden
  std::vector<Paper> query_papers;   // same order as `queries`
  std::vector<std::vector<std::string>> hidden;  // per query
};

PlantedCorpus make_planted_corpus(const PlantedSpec& spec = {});

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

std::string read_file(const std::string& path);

}  // namespace citenav::testing
