#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "citenav/analyzer.hpp"
#include "citenav/corpus.hpp"
#include "citenav/errors.hpp"
#include "citenav/index.hpp"

namespace citenav {

/// Token allowance for one (query, candidate) input.
struct TokenBudget {
  std::size_t max_total = 512;
  std::size_t query_budget = 256;
  std::size_t candidate_budget = 256;

  /// Throws ArgumentError unless all are positive and the sides fit max_total.
  void validate() const;

  friend bool operator==(const TokenBudget&, const TokenBudget&) = default;
};

struct PairInput {
  std::string pair_id;
  std::vector<std::string> query_tokens;
  std::vector<std::string> candidate_tokens;
  std::vector<std::string> query_title_tokens;
  std::vector<std::string> candidate_title_tokens;
  /// Untruncated title + abstract, forwarded to external scorers which
  /// tokenize on their own.
  std::string query_text;
  std::string candidate_text;
};

/// Lengths after repeatedly removing one token from the end of the longer
/// sequence (the candidate on ties) until the total fits `max_total`.
std::pair<std::size_t, std::size_t> truncated_lengths(std::size_t query_len, std::size_t candidate_len,
                                                      std::size_t max_total);

/// Applies truncated_lengths to both token lists; outputs are prefixes.
/// Throws ArgumentError when max_total < 2.
template <typename Token>
std::pair<std::vector<Token>, std::vector<Token>> truncate_pair(std::span<const Token> query,
                                                                std::span<const Token> candidate,
                                                                std::size_t max_total) {
  if (max_total < 2) throw ArgumentError("truncate_pair: max_total must be at least 2");
  const auto [q, c] = truncated_lengths(query.size(), candidate.size(), max_total);
  return {std::vector<Token>(query.begin(), query.begin() + static_cast<std::ptrdiff_t>(q)),
          std::vector<Token>(candidate.begin(), candidate.begin() + static_cast<std::ptrdiff_t>(c))};
}

/// Analyzes both papers, caps each side at its budget, then truncates the
/// pair against max_total.
PairInput assemble_pair(const Paper& query, const Paper& candidate, const TokenBudget& budget,
                        const AnalyzerConfig& analyzer);

inline constexpr std::size_t kLexicalFeatureCount = 5;
using FeatureVector = std::array<double, kLexicalFeatureCount>;

/// [term overlap (candidate side, stopwords excluded),
///  BM25(candidate | query) / distinct query terms,
///  title-token Jaccard,
///  log(1 + candidate length),
///  fraction of distinct query terms present in the candidate]
FeatureVector lexical_features(const PairInput& pair, const InvertedIndex& index);

/// Logistic model over standardized lexical features:
///   p = sigmoid(w . ((x - mean) / scale) + bias)
struct LexicalModel {
  FeatureVector weights{};
  double bias = 0.0;
  FeatureVector feature_mean{};
  FeatureVector feature_scale{1.0, 1.0, 1.0, 1.0, 1.0};

  double probability(const FeatureVector& features) const;

  std::string to_json() const;
  static LexicalModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static LexicalModel load(const std::filesystem::path& path);
};

double sigmoid(double z);

/// Pointwise cross-entropy summed over pairs:
///   L = -sum_pos log p - sum_neg log(1 - p)
/// `probabilities` must lie in (0, 1).
double cross_entropy_loss(std::span<const double> probabilities, std::span<const int> labels);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> weight_gradient;
  double bias_gradient = 0.0;
};

/// Cross-entropy of a logistic model on raw feature rows, evaluated in
/// log-sum-exp form, with its exact gradient.
LossAndGradient logistic_loss_and_gradient(std::span<const double> weights, double bias,
                                           std::span<const std::vector<double>> rows,
                                           std::span<const int> labels);

struct TrainOptions {
  std::size_t epochs = 2000;
  double learning_rate = 0.5;
  std::uint64_t seed = 0;
};

struct LogisticFit {
  std::vector<double> weights;
  double bias = 0.0;
  double final_loss = 0.0;
};

/// Full-batch gradient descent on the summed cross-entropy; the step uses the
/// mean gradient. Initial weights are drawn from `seed`. Throws TrainingError
/// if rows are empty or only one label is present.
LogisticFit fit_logistic(std::span<const std::vector<double>> rows, std::span<const int> labels,
                         const TrainOptions& options);

struct TrainingPair {
  std::string query_id;
  std::string candidate_id;
  bool relevant = false;
  std::size_t rank = 0;  // 1-based BM25 rank; 0 for pairs added outside retrieval
  std::string query_text;
  std::string candidate_text;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

struct LexicalTrainResult {
  LexicalModel model;
  double final_loss = 0.0;
};

/// Trains the built-in scorer. Pair ids are resolved against `corpus` so that
/// features match inference exactly.
LexicalTrainResult train_lexical_scorer(std::span<const TrainingPair> pairs, const Corpus& corpus,
                                        const InvertedIndex& index, const TokenBudget& budget,
                                        const TrainOptions& options);

/// A relevance estimator mapping pairs to probabilities in [0, 1], aligned with
/// the input order. Implementations must be safe to call from several threads.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual std::vector<double> score(std::span<const PairInput> pairs) = 0;
  virtual std::string name() const = 0;
  /// The identity scorer keeps the incoming order; pipelines short-circuit it.
  virtual bool is_identity() const { return false; }
};

/// Score = 1 - position / n: preserves the provisional candidate order.
class IdentityScorer final : public Scorer {
 public:
  std::vector<double> score(std::span<const PairInput> pairs) override;
  std::string name() const override { return "identity"; }
  bool is_identity() const override { return true; }
};

class LexicalScorer final : public Scorer {
 public:
  LexicalScorer(LexicalModel model, const InvertedIndex& index) : model_(std::move(model)), index_(&index) {}

  std::vector<double> score(std::span<const PairInput> pairs) override;
  std::string name() const override { return "lexical"; }
  const LexicalModel& model() const noexcept { return model_; }

 private:
  LexicalModel model_;
  const InvertedIndex* index_;
};

/// Scores every candidate against `query` and sorts by (probability desc,
/// id asc). Never drops a candidate. Throws ArgumentError if the query id is
/// among the candidates or a candidate is not in the corpus.
RankedList rerank(Scorer& scorer, const Paper& query, std::span<const std::string> candidates,
                  const Corpus& corpus, const TokenBudget& budget, const AnalyzerConfig& analyzer);

}  // namespace citenav
