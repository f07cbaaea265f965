#include "citenav/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "citenav/errors.hpp"

namespace citenav {

void TokenBudget::validate() const {
  if (max_total < 2 || query_budget == 0 || candidate_budget == 0) {
    throw ArgumentError("token budget: all budgets must be positive and max_total at least 2");
  }
  if (query_budget + candidate_budget > max_total) {
    throw ArgumentError("token budget: query_budget + candidate_budget exceeds max_total");
  }
}

std::pair<std::size_t, std::size_t> truncated_lengths(std::size_t query_len, std::size_t candidate_len,
                                                      std::size_t max_total) {
  if (query_len + candidate_len <= max_total) return {query_len, candidate_len};
  std::size_t excess = query_len + candidate_len - max_total;
  std::size_t q = query_len;
  std::size_t c = candidate_len;
  // First level the longer side down to the shorter one...
  const std::size_t gap = q > c ? q - c : c - q;
  const std::size_t level = std::min(excess, gap);
  if (q > c) {
    q -= level;
  } else {
    c -= level;
  }
  excess -= level;
  // ...then alternate, candidate first since ties trim the candidate.
  c -= (excess + 1) / 2;
  q -= excess / 2;
  return {q, c};
}

namespace {

struct Side {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<std::string> title_tokens;
};

Side prepare_side(const Paper& paper, std::size_t cap, const AnalyzerConfig& analyzer) {
  Side side;
  side.text = paper.text();
  side.tokens = analyze(side.text, analyzer);
  if (side.tokens.size() > cap) side.tokens.resize(cap);
  side.title_tokens = analyze(paper.title, analyzer);
  return side;
}

PairInput combine(const Side& query, const Side& candidate, const std::string& pair_id, const TokenBudget& budget) {
  PairInput pair;
  pair.pair_id = pair_id;
  const auto [q, c] = truncated_lengths(query.tokens.size(), candidate.tokens.size(), budget.max_total);
  pair.query_tokens.assign(query.tokens.begin(), query.tokens.begin() + static_cast<std::ptrdiff_t>(q));
  pair.candidate_tokens.assign(candidate.tokens.begin(), candidate.tokens.begin() + static_cast<std::ptrdiff_t>(c));
  pair.query_title_tokens = query.title_tokens;
  pair.candidate_title_tokens = candidate.title_tokens;
  pair.query_text = query.text;
  pair.candidate_text = candidate.text;
  return pair;
}

std::unordered_set<std::string_view> content_terms(const std::vector<std::string>& tokens) {
  std::unordered_set<std::string_view> out;
  for (const auto& t : tokens) {
    if (!is_stopword(t)) out.insert(t);
  }
  return out;
}

}  // namespace

PairInput assemble_pair(const Paper& query, const Paper& candidate, const TokenBudget& budget,
                        const AnalyzerConfig& analyzer) {
  budget.validate();
  return combine(prepare_side(query, budget.query_budget, analyzer),
                 prepare_side(candidate, budget.candidate_budget, analyzer), candidate.id, budget);
}

FeatureVector lexical_features(const PairInput& pair, const InvertedIndex& index) {
  FeatureVector f{};
  const auto query_terms = content_terms(pair.query_tokens);
  const auto candidate_terms = content_terms(pair.candidate_tokens);

  std::size_t shared = 0;
  for (const auto t : candidate_terms) shared += query_terms.contains(t) ? 1 : 0;
  f[0] = candidate_terms.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(candidate_terms.size());

  // BM25 of the (truncated) candidate for the query's distinct terms.
  std::vector<std::string_view> distinct;
  for (const auto& t : pair.query_tokens) {
    if (std::find(distinct.begin(), distinct.end(), t) == distinct.end()) distinct.push_back(t);
  }
  if (!distinct.empty() && index.doc_count() > 0) {
    const auto n = index.doc_count();
    const auto len = static_cast<double>(pair.candidate_tokens.size());
    double bm25 = 0.0;
    for (const auto term : distinct) {
      const auto tf = std::count(pair.candidate_tokens.begin(), pair.candidate_tokens.end(), term);
      if (tf == 0) continue;
      const auto df = std::clamp<std::size_t>(index.document_frequency(term), 1, n);
      bm25 += bm25_idf(df, n) * bm25_tf_weight(static_cast<double>(tf), len, index.avg_doc_length());
    }
    f[1] = bm25 / static_cast<double>(distinct.size());
  }

  std::unordered_set<std::string_view> qt(pair.query_title_tokens.begin(), pair.query_title_tokens.end());
  std::unordered_set<std::string_view> ct(pair.candidate_title_tokens.begin(), pair.candidate_title_tokens.end());
  std::size_t inter = 0;
  for (const auto t : ct) inter += qt.contains(t) ? 1 : 0;
  const std::size_t uni = qt.size() + ct.size() - inter;
  f[2] = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);

  f[3] = std::log1p(static_cast<double>(pair.candidate_tokens.size()));

  std::size_t covered = 0;
  for (const auto t : query_terms) covered += candidate_terms.contains(t) ? 1 : 0;
  f[4] = query_terms.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(query_terms.size());
  return f;
}

// ---------------------------------------------------------------------------
// Logistic model

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

double LexicalModel::probability(const FeatureVector& features) const {
  double z = bias;
  for (std::size_t i = 0; i < kLexicalFeatureCount; ++i) {
    z += weights[i] * (features[i] - feature_mean[i]) / feature_scale[i];
  }
  return sigmoid(z);
}

std::string LexicalModel::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = "lexical-logistic";
  j["features"] = {"term_overlap", "bm25_per_query_term", "title_jaccard", "log1p_candidate_length",
                   "query_term_coverage"};
  j["weights"] = weights;
  j["bias"] = bias;
  j["feature_mean"] = feature_mean;
  j["feature_scale"] = feature_scale;
  return j.dump(2);
}

LexicalModel LexicalModel::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object() || j.value("kind", "") != "lexical-logistic") {
    throw ArgumentError("not a lexical-logistic model file");
  }
  try {
    LexicalModel model;
    model.weights = j.at("weights").get<FeatureVector>();
    model.bias = j.at("bias").get<double>();
    model.feature_mean = j.at("feature_mean").get<FeatureVector>();
    model.feature_scale = j.at("feature_scale").get<FeatureVector>();
    for (const double s : model.feature_scale) {
      if (!(s > 0.0)) throw ArgumentError("model feature_scale entries must be positive");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed model file: ") + e.what());
  }
}

void LexicalModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ArgumentError("cannot write model to '" + path.string() + "'");
  out << to_json() << '\n';
}

LexicalModel LexicalModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read model '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str());
}

double cross_entropy_loss(std::span<const double> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size()) throw ArgumentError("cross_entropy_loss: size mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    loss -= labels[i] ? std::log(probabilities[i]) : std::log(1.0 - probabilities[i]);
  }
  return loss;
}

LossAndGradient logistic_loss_and_gradient(std::span<const double> weights, double bias,
                                           std::span<const std::vector<double>> rows, std::span<const int> labels) {
  if (rows.size() != labels.size()) throw ArgumentError("logistic: rows/labels size mismatch");
  LossAndGradient out;
  out.weight_gradient.assign(weights.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& x = rows[i];
    if (x.size() != weights.size()) throw ArgumentError("logistic: feature row has the wrong width");
    double z = bias;
    for (std::size_t d = 0; d < x.size(); ++d) z += weights[d] * x[d];
    // -log p = softplus(-z), -log(1 - p) = softplus(z)
    out.loss += labels[i] ? softplus(-z) : softplus(z);
    const double residual = sigmoid(z) - (labels[i] ? 1.0 : 0.0);
    for (std::size_t d = 0; d < x.size(); ++d) out.weight_gradient[d] += residual * x[d];
    out.bias_gradient += residual;
  }
  return out;
}

LogisticFit fit_logistic(std::span<const std::vector<double>> rows, std::span<const int> labels,
                         const TrainOptions& options) {
  if (rows.empty()) throw TrainingError("training: no pairs");
  if (rows.size() != labels.size()) throw TrainingError("training: rows/labels size mismatch");
  const bool has_pos = std::any_of(labels.begin(), labels.end(), [](int l) { return l != 0; });
  const bool has_neg = std::any_of(labels.begin(), labels.end(), [](int l) { return l == 0; });
  if (!has_pos || !has_neg) throw TrainingError("training: both relevant and irrelevant pairs are required");
  if (options.learning_rate <= 0.0) throw TrainingError("training: learning rate must be positive");

  const std::size_t width = rows.front().size();
  std::mt19937_64 rng(options.seed);
  LogisticFit fit;
  fit.weights.resize(width);
  for (auto& w : fit.weights) w = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5) * 0.02;

  const double step = options.learning_rate / static_cast<double>(rows.size());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const auto g = logistic_loss_and_gradient(fit.weights, fit.bias, rows, labels);
    for (std::size_t d = 0; d < width; ++d) fit.weights[d] -= step * g.weight_gradient[d];
    fit.bias -= step * g.bias_gradient;
  }
  fit.final_loss = logistic_loss_and_gradient(fit.weights, fit.bias, rows, labels).loss;
  return fit;
}

LexicalTrainResult train_lexical_scorer(std::span<const TrainingPair> pairs, const Corpus& corpus,
                                        const InvertedIndex& index, const TokenBudget& budget,
                                        const TrainOptions& options) {
  if (pairs.empty()) throw TrainingError("training: no pairs");
  budget.validate();

  std::vector<FeatureVector> raw;
  std::vector<int> labels;
  raw.reserve(pairs.size());
  for (const auto& p : pairs) {
    const Paper* q = corpus.find(p.query_id);
    const Paper* c = corpus.find(p.candidate_id);
    if (!q || !c) throw TrainingError("training: pair (" + p.query_id + ", " + p.candidate_id + ") not in corpus");
    raw.push_back(lexical_features(assemble_pair(*q, *c, budget, index.analyzer()), index));
    labels.push_back(p.relevant ? 1 : 0);
  }

  LexicalModel model;
  const auto n = static_cast<double>(raw.size());
  for (std::size_t d = 0; d < kLexicalFeatureCount; ++d) {
    double mean = 0.0;
    for (const auto& f : raw) mean += f[d];
    mean /= n;
    double var = 0.0;
    for (const auto& f : raw) var += (f[d] - mean) * (f[d] - mean);
    const double sd = std::sqrt(var / n);
    model.feature_mean[d] = mean;
    model.feature_scale[d] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<std::vector<double>> rows;
  rows.reserve(raw.size());
  for (const auto& f : raw) {
    std::vector<double> row(kLexicalFeatureCount);
    for (std::size_t d = 0; d < kLexicalFeatureCount; ++d) row[d] = (f[d] - model.feature_mean[d]) / model.feature_scale[d];
    rows.push_back(std::move(row));
  }

  const auto fit = fit_logistic(rows, labels, options);
  std::copy(fit.weights.begin(), fit.weights.end(), model.weights.begin());
  model.bias = fit.bias;
  return LexicalTrainResult{model, fit.final_loss};
}

// ---------------------------------------------------------------------------
// Scorers and reranking

std::vector<double> IdentityScorer::score(std::span<const PairInput> pairs) {
  std::vector<double> out(pairs.size());
  const auto n = static_cast<double>(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = 1.0 - static_cast<double>(i) / n;
  return out;
}

std::vector<double> LexicalScorer::score(std::span<const PairInput> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) out.push_back(model_.probability(lexical_features(pair, *index_)));
  return out;
}

RankedList rerank(Scorer& scorer, const Paper& query, std::span<const std::string> candidates, const Corpus& corpus,
                  const TokenBudget& budget, const AnalyzerConfig& analyzer) {
  budget.validate();
  RankedList ranked;
  ranked.query_id = query.id;
  if (candidates.empty()) return ranked;

  std::vector<const Paper*> papers;
  papers.reserve(candidates.size());
  for (const auto& id : candidates) {
    if (id == query.id) throw ArgumentError("rerank: query '" + query.id + "' is among its own candidates");
    const Paper* paper = corpus.find(id);
    if (!paper) throw ArgumentError("rerank: candidate '" + id + "' is not in the corpus");
    papers.push_back(paper);
  }

  std::vector<double> scores;
  if (scorer.is_identity()) {
    scores = scorer.score(std::vector<PairInput>(candidates.size()));
  } else {
    const Side query_side = prepare_side(query, budget.query_budget, analyzer);
    std::vector<PairInput> pairs;
    pairs.reserve(papers.size());
    for (const Paper* paper : papers) {
      pairs.push_back(combine(query_side, prepare_side(*paper, budget.candidate_budget, analyzer), paper->id, budget));
    }
    scores = scorer.score(pairs);
  }
  if (scores.size() != candidates.size()) {
    throw ProtocolError("rerank: scorer '" + scorer.name() + "' returned " + std::to_string(scores.size()) +
                        " scores for " + std::to_string(candidates.size()) + " pairs");
  }

  ranked.entries.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw ProtocolError("rerank: scorer '" + scorer.name() + "' produced a score outside [0, 1]");
    }
    ranked.entries.push_back(ScoredDoc{candidates[i], scores[i]});
  }
  sort_ranked(ranked.entries);
  return ranked;
}

}  // namespace citenav
