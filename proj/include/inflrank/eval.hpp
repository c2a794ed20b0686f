#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "inflrank/dataset.hpp"
#include "inflrank/models.hpp"
#include "inflrank/train.hpp"

namespace inflrank {

struct ScoredCandidate {
  std::string influencer_id;
  double score = 0.0;
};

// Scores every candidate against one brand.
using Scorer =
    std::function<std::vector<double>(const PooledAccount& brand, std::span<const PooledAccount* const> candidates)>;

// Descending score, ties broken by ascending id.
std::vector<ScoredCandidate> rank_brand(const Scorer& scorer, const PooledAccount& brand,
                                        std::span<const PooledAccount* const> candidates);
std::vector<ScoredCandidate> rank_scores(std::span<const std::string> ids, std::span<const double> scores);

// (#(pos > neg) + 0.5 #ties) / (#pos #neg).
double auc(std::span<const double> scores, const std::vector<bool>& labels);

double recall_at_k(std::span<const ScoredCandidate> ranked, const std::set<std::string>& positives, std::size_t k);

// 1-indexed rank of the first positive; 0 when none is ranked.
std::size_t best_positive_rank(std::span<const ScoredCandidate> ranked, const std::set<std::string>& positives);

// Lower median of per-brand best-positive ranks.
double medr(std::span<const std::size_t> best_ranks);

// Cosine similarity of the concatenated [text, visual] vectors.
double baseline_simcos(const PooledAccount& brand, const PooledAccount& candidate);

// Uniform score in [0, 1) keyed on (seed, brand, candidate), independent of
// evaluation order.
double baseline_random(std::uint64_t seed, const PooledAccount& brand, const PooledAccount& candidate);

Scorer simcos_scorer();
Scorer random_scorer(std::uint64_t seed);
Scorer model_scorer(ModelParams params);

// Influencers associated with any of `brands`, plus influencers associated
// with no brand at all. Sorted.
std::vector<std::string> candidate_universe(const Dataset& dataset, const std::vector<std::string>& brands);

struct BrandMetrics {
  std::string brand_id;
  double auc = 0.0;
  double recall_at_10 = 0.0;
  double recall_at_50 = 0.0;
  std::size_t best_rank = 0;
};

struct FoldMetrics {
  std::size_t fold = 0;
  double auc = 0.0;
  double recall_at_10 = 0.0;
  double recall_at_50 = 0.0;
  double medr = 0.0;
  std::size_t n_brands = 0;
  std::vector<BrandMetrics> brands;
};

// Brands without a positive in the universe are skipped.
FoldMetrics evaluate_brands(const Scorer& scorer, const Dataset& dataset, const std::vector<std::string>& brands);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation over folds
  std::vector<double> per_fold;
};

MetricSummary summarize(std::vector<double> values);

struct MetricsReport {
  std::string model;
  std::size_t k = 0;
  std::vector<FoldMetrics> folds;
  MetricSummary auc;
  MetricSummary recall_at_10;
  MetricSummary recall_at_50;
  MetricSummary medr;
  std::size_t n_params = 0;
};

MetricsReport make_report(std::string model, std::size_t k, std::vector<FoldMetrics> folds, std::size_t n_params);

struct FoldScorer {
  Scorer scorer;
  std::size_t n_params = 0;
};
using ScorerFactory = std::function<FoldScorer(const FoldSplit& split)>;

MetricsReport cross_validate(const Dataset& dataset, std::size_t folds, std::uint64_t split_seed,
                             const ScorerFactory& factory, std::string model_name, std::size_t k);

// model is one of wsim, wsim_mt, simcos, random. Trained models use `train`.
struct CvConfig {
  std::string model = "wsim";
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  TrainConfig train;
};

MetricsReport cross_validate(const Dataset& dataset, const CvConfig& config);

std::string report_json(std::span<const MetricsReport> reports);
std::string report_csv(std::span<const MetricsReport> reports);
void write_reports(std::span<const MetricsReport> reports, const std::filesystem::path& json_path,
                   const std::filesystem::path& csv_path);

}  // namespace inflrank
