#include "inflrank/eval.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "inflrank/error.hpp"
#include "inflrank/rng.hpp"

namespace inflrank {

std::vector<ScoredCandidate> rank_scores(std::span<const std::string> ids, std::span<const double> scores) {
  if (ids.size() != scores.size()) throw ShapeError("rank_scores: ids and scores differ in length");
  std::vector<ScoredCandidate> ranked;
  ranked.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ranked.push_back({ids[i], scores[i]});
  std::sort(ranked.begin(), ranked.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.influencer_id < b.influencer_id;
  });
  return ranked;
}

std::vector<ScoredCandidate> rank_brand(const Scorer& scorer, const PooledAccount& brand,
                                        std::span<const PooledAccount* const> candidates) {
  const std::vector<double> scores = scorer(brand, candidates);
  if (scores.size() != candidates.size()) throw ShapeError("scorer returned the wrong number of scores");
  require_finite(scores, "rank_brand scores");
  std::vector<std::string> ids;
  ids.reserve(candidates.size());
  for (const PooledAccount* c : candidates) ids.push_back(c->id);
  return rank_scores(ids, scores);
}

double auc(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sweep ascending groups of equal score; each positive beats every negative
  // strictly below it and ties half with negatives in its group.
  double wins = 0.0;
  std::size_t negatives_below = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::size_t group_pos = 0;
    std::size_t group_neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] ? group_pos : group_neg) += 1;
      ++end;
    }
    wins += static_cast<double>(group_pos) * (static_cast<double>(negatives_below) + 0.5 * static_cast<double>(group_neg));
    negatives_below += group_neg;
    n_pos += group_pos;
    n_neg += group_neg;
    start = end;
  }
  if (n_pos == 0 || n_neg == 0) throw MetricError("auc needs at least one positive and one negative");
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double recall_at_k(std::span<const ScoredCandidate> ranked, const std::set<std::string>& positives, std::size_t k) {
  if (k == 0) throw UsageError("recall_at_k needs k >= 1");
  if (positives.empty()) throw MetricError("recall_at_k is undefined without positives");
  const std::size_t window = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < window; ++i) hits += positives.contains(ranked[i].influencer_id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(positives.size());
}

std::size_t best_positive_rank(std::span<const ScoredCandidate> ranked, const std::set<std::string>& positives) {
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (positives.contains(ranked[i].influencer_id)) return i + 1;
  }
  return 0;
}

double medr(std::span<const std::size_t> best_ranks) {
  if (best_ranks.empty()) throw MetricError("medr of an empty rank list");
  std::vector<std::size_t> sorted(best_ranks.begin(), best_ranks.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<double>(sorted[(sorted.size() - 1) / 2]);
}

double baseline_simcos(const PooledAccount& brand, const PooledAccount& candidate) {
  if (brand.text_pooled.size() != candidate.text_pooled.size() ||
      brand.visual_pooled.size() != candidate.visual_pooled.size()) {
    throw ShapeError("simcos: embedding dimensions differ between '" + brand.id + "' and '" + candidate.id + "'");
  }
  const double numerator = dot(brand.text_pooled, candidate.text_pooled) + dot(brand.visual_pooled, candidate.visual_pooled);
  const double norm_b = dot(brand.text_pooled, brand.text_pooled) + dot(brand.visual_pooled, brand.visual_pooled);
  const double norm_c =
      dot(candidate.text_pooled, candidate.text_pooled) + dot(candidate.visual_pooled, candidate.visual_pooled);
  if (!(norm_b > 0.0) || !(norm_c > 0.0)) {
    throw MetricError("simcos: zero embedding for '" + (norm_b > 0.0 ? candidate.id : brand.id) + "'");
  }
  return numerator / (std::sqrt(norm_b) * std::sqrt(norm_c));
}

double baseline_random(std::uint64_t seed, const PooledAccount& brand, const PooledAccount& candidate) {
  std::uint64_t key = fnv1a(brand.id);
  key = fnv1a("\x1f", key);
  key = fnv1a(candidate.id, key);
  const std::uint64_t bits = Rng::mix(Rng::mix(seed) ^ key);
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

Scorer simcos_scorer() {
  return [](const PooledAccount& brand, std::span<const PooledAccount* const> candidates) {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const PooledAccount* c : candidates) out.push_back(baseline_simcos(brand, *c));
    return out;
  };
}

Scorer random_scorer(std::uint64_t seed) {
  return [seed](const PooledAccount& brand, std::span<const PooledAccount* const> candidates) {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const PooledAccount* c : candidates) out.push_back(baseline_random(seed, brand, *c));
    return out;
  };
}

Scorer model_scorer(ModelParams params) {
  auto shared = std::make_shared<const ModelParams>(std::move(params));
  return [shared](const PooledAccount& brand, std::span<const PooledAccount* const> candidates) {
    return score_candidates(*shared, brand, candidates);
  };
}

std::vector<std::string> candidate_universe(const Dataset& dataset, const std::vector<std::string>& brands) {
  std::set<std::string> universe;
  for (const std::string& b : brands) {
    const auto& pos = dataset.positives(b);
    universe.insert(pos.begin(), pos.end());
  }
  for (const std::string& id : dataset.unassociated_influencers()) universe.insert(id);
  return {universe.begin(), universe.end()};
}

FoldMetrics evaluate_brands(const Scorer& scorer, const Dataset& dataset, const std::vector<std::string>& brands) {
  const std::vector<std::string> universe = candidate_universe(dataset, brands);
  std::vector<const PooledAccount*> candidates;
  candidates.reserve(universe.size());
  for (const std::string& id : universe) candidates.push_back(&dataset.at(id));

  std::vector<std::string> sorted = brands;
  std::sort(sorted.begin(), sorted.end());
  FoldMetrics metrics;
  std::vector<std::size_t> best_ranks;
  for (const std::string& id : sorted) {
    const auto& positives = dataset.positives(id);
    if (positives.empty()) continue;
    const std::vector<ScoredCandidate> ranked = rank_brand(scorer, dataset.at(id), candidates);
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const ScoredCandidate& c : ranked) {
      scores.push_back(c.score);
      labels.push_back(positives.contains(c.influencer_id));
    }
    BrandMetrics bm;
    bm.brand_id = id;
    bm.auc = auc(scores, labels);
    bm.recall_at_10 = recall_at_k(ranked, positives, 10);
    bm.recall_at_50 = recall_at_k(ranked, positives, 50);
    bm.best_rank = best_positive_rank(ranked, positives);
    best_ranks.push_back(bm.best_rank);
    metrics.brands.push_back(std::move(bm));
  }
  if (metrics.brands.empty()) throw MetricError("no evaluable brand (every brand lacks positives)");
  const double n = static_cast<double>(metrics.brands.size());
  for (const BrandMetrics& bm : metrics.brands) {
    metrics.auc += bm.auc;
    metrics.recall_at_10 += bm.recall_at_10;
    metrics.recall_at_50 += bm.recall_at_50;
  }
  metrics.auc /= n;
  metrics.recall_at_10 /= n;
  metrics.recall_at_50 /= n;
  metrics.medr = medr(best_ranks);
  metrics.n_brands = metrics.brands.size();
  return metrics;
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  s.per_fold = std::move(values);
  if (s.per_fold.empty()) return s;
  const double n = static_cast<double>(s.per_fold.size());
  for (double v : s.per_fold) s.mean += v;
  s.mean /= n;
  if (s.per_fold.size() > 1) {
    double ss = 0.0;
    for (double v : s.per_fold) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

MetricsReport make_report(std::string model, std::size_t k, std::vector<FoldMetrics> folds, std::size_t n_params) {
  MetricsReport r;
  r.model = std::move(model);
  r.k = k;
  r.n_params = n_params;
  std::vector<double> a, r10, r50, m;
  for (const FoldMetrics& f : folds) {
    a.push_back(f.auc);
    r10.push_back(f.recall_at_10);
    r50.push_back(f.recall_at_50);
    m.push_back(f.medr);
  }
  r.auc = summarize(std::move(a));
  r.recall_at_10 = summarize(std::move(r10));
  r.recall_at_50 = summarize(std::move(r50));
  r.medr = summarize(std::move(m));
  r.folds = std::move(folds);
  return r;
}

MetricsReport cross_validate(const Dataset& dataset, std::size_t folds, std::uint64_t split_seed,
                             const ScorerFactory& factory, std::string model_name, std::size_t k) {
  const std::vector<FoldSplit> splits = split_kfold(dataset, folds, split_seed);
  std::vector<FoldMetrics> results;
  std::size_t n_params = 0;
  for (const FoldSplit& split : splits) {
    try {
      FoldScorer fs = factory(split);
      n_params = fs.n_params;
      FoldMetrics m = evaluate_brands(fs.scorer, dataset, split.test);
      m.fold = split.fold;
      results.push_back(std::move(m));
    } catch (const NumericError& e) {
      throw NumericError("fold " + std::to_string(split.fold) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.category(), "fold " + std::to_string(split.fold) + ": " + e.what());
    }
  }
  return make_report(std::move(model_name), k, std::move(results), n_params);
}

MetricsReport cross_validate(const Dataset& dataset, const CvConfig& config) {
  ScorerFactory factory;
  std::size_t k = 0;
  if (config.model == "simcos") {
    factory = [](const FoldSplit&) { return FoldScorer{simcos_scorer(), 0}; };
  } else if (config.model == "random") {
    const std::uint64_t seed = config.seed;
    factory = [seed](const FoldSplit& split) { return FoldScorer{random_scorer(seed + split.fold), 0}; };
  } else {
    TrainConfig tc = config.train;
    tc.model = model_type_from_string(config.model);
    k = tc.k;
    factory = [&dataset, tc](const FoldSplit& split) {
      TrainConfig fold_config = tc;
      fold_config.seed = Rng::mix(tc.seed + split.fold);
      TrainResult trained = train(dataset, split, fold_config);
      const std::size_t n = parameter_count(trained.params);
      return FoldScorer{model_scorer(std::move(trained.params)), n};
    };
  }
  return cross_validate(dataset, config.folds, config.seed, factory, config.model, k);
}

}  // namespace inflrank
