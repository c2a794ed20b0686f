#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "inflrank/dataset.hpp"
#include "inflrank/models.hpp"
#include "inflrank/sampler.hpp"

namespace inflrank {

struct TrainConfig {
  ModelType model = ModelType::wsim;
  std::size_t k = 4;
  PoolMode mode = PoolMode::partial_sequence;
  double lr = 1e-3;
  std::size_t epochs = 200;
  std::size_t patience = 10;
  double val_fraction = 0.2;
  double lambda = 0.5;
  double gamma = 0.5;
  double dropout = 0.5;
  std::uint64_t seed = 0;
  // Build pools once instead of drawing fresh negatives every epoch.
  bool freeze_pools = false;
  Architecture arch = Architecture::desk();

  // Throws ConfigError on out-of-range values. lr = 0 is accepted.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t stopped_epoch = 0;
  std::size_t best_epoch = 0;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  std::vector<std::string> train_brands;
  std::vector<std::string> val_brands;
};

ModelParams init_model(const Dataset& dataset, const TrainConfig& config);

// Brand-level holdout, stratified by category: each category with at least two
// brands gives round(fraction * n) of them, clamped to [1, n - 1].
struct Holdout {
  std::vector<std::string> train;
  std::vector<std::string> val;
};
Holdout holdout_split(const Dataset& dataset, const std::vector<std::string>& brands, double fraction,
                      std::uint64_t seed);

TrainResult train(const Dataset& dataset, const FoldSplit& split, const TrainConfig& config);

struct Validation {
  double loss = 0.0;
  double auc = 0.0;
};

// Mean listwise loss over pools drawn with `pool_seed` plus mean per-brand
// ranking AUC, all with dropout off.
Validation validate(const ModelParams& params, const std::vector<std::string>& brands, const Dataset& dataset,
                    const PoolPlan& plan, std::uint64_t pool_seed);

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace inflrank
