#include "inflrank/sampler.hpp"

#include <algorithm>

#include "inflrank/error.hpp"

namespace inflrank {

std::string to_string(PoolMode mode) { return mode == PoolMode::listwise ? "listwise" : "partial_sequence"; }

PoolMode pool_mode_from_string(const std::string& name) {
  if (name == "listwise") return PoolMode::listwise;
  if (name == "partial_sequence") return PoolMode::partial_sequence;
  throw ConfigError("unknown pool mode '" + name + "' (expected listwise or partial_sequence)");
}

std::size_t Pool::positive_count() const {
  return static_cast<std::size_t>(std::count(positive_mask.begin(), positive_mask.end(), true));
}

std::vector<double> target_distribution(const std::vector<bool>& mask, PoolMode mode,
                                        std::size_t n_total_positives) {
  const std::size_t in_pool = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (in_pool == 0) throw UsageError("target_distribution: pool has no positive");
  std::vector<double> y(mask.size(), 0.0);
  if (mode == PoolMode::partial_sequence) {
    for (std::size_t i = 0; i < mask.size(); ++i) y[i] = mask[i] ? 1.0 / static_cast<double>(in_pool) : 0.0;
    return y;
  }
  if (n_total_positives < in_pool) {
    throw UsageError("target_distribution: pool holds more positives than the brand has");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    y[i] = mask[i] ? 1.0 / static_cast<double>(n_total_positives) : 0.0;
    total += y[i];
  }
  for (double& v : y) v /= total;
  return y;
}

std::vector<Pool> build_pools(const PooledAccount& brand, std::span<const std::string> positives,
                              std::span<const std::string> negatives, const PoolPlan& plan, Rng& rng) {
  if (plan.k < 2) throw UsageError("pool size K must be >= 2");
  const std::size_t n = positives.size();
  if (n == 0) throw UsageError("build_pools: brand '" + brand.id + "' has no positives");
  if (negatives.size() + 1 < plan.k) {
    throw SamplingError("build_pools: brand '" + brand.id + "' has " + std::to_string(negatives.size()) +
                        " negatives, a pool of K=" + std::to_string(plan.k) + " needs " +
                        std::to_string(plan.k - 1));
  }
  const std::size_t levels = std::min(plan.k, n);

  std::vector<std::string> order(positives.begin(), positives.end());
  rng.shuffle(std::span<std::string>(order));
  std::vector<std::string> negative_scratch(negatives.begin(), negatives.end());

  std::vector<Pool> pools;
  pools.reserve(n * levels);
  for (std::size_t j = 1; j <= levels; ++j) {
    for (std::size_t r = 0; r < n; ++r) {
      std::vector<std::pair<std::string, bool>> members;
      members.reserve(plan.k);
      for (std::size_t t = 0; t < j; ++t) members.emplace_back(order[(r + t) % n], true);
      // Partial Fisher-Yates: the first K - j slots become a uniform sample.
      const std::size_t need = plan.k - j;
      for (std::size_t s = 0; s < need; ++s) {
        const std::size_t pick = s + rng.below(negative_scratch.size() - s);
        std::swap(negative_scratch[s], negative_scratch[pick]);
        members.emplace_back(negative_scratch[s], false);
      }
      rng.shuffle(std::span<std::pair<std::string, bool>>(members));

      Pool pool;
      pool.brand_id = brand.id;
      for (auto& [id, positive] : members) {
        pool.candidate_ids.push_back(std::move(id));
        pool.positive_mask.push_back(positive);
      }
      pool.y = target_distribution(pool.positive_mask, plan.mode, n);
      pools.push_back(std::move(pool));
    }
  }
  return pools;
}

std::vector<Pool> build_pools(const Dataset& dataset, const std::string& brand_id, const PoolPlan& plan, Rng& rng) {
  const PooledAccount& brand = dataset.at(brand_id);
  const auto& pos = dataset.positives(brand_id);
  const std::vector<std::string> positives(pos.begin(), pos.end());
  const std::vector<std::string> negatives = dataset.negatives(brand_id);
  return build_pools(brand, positives, negatives, plan, rng);
}

}  // namespace inflrank
