#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "inflrank/dataset.hpp"
#include "inflrank/rng.hpp"

namespace inflrank {

enum class PoolMode { listwise, partial_sequence };

std::string to_string(PoolMode mode);
PoolMode pool_mode_from_string(const std::string& name);

struct PoolPlan {
  std::size_t k = 4;
  PoolMode mode = PoolMode::partial_sequence;
};

struct Pool {
  std::string brand_id;
  std::vector<std::string> candidate_ids;
  std::vector<bool> positive_mask;
  std::vector<double> y;

  std::size_t positive_count() const;
};

// Target distribution over a pool. Listwise puts 1/n_total_positives on each
// positive and renormalizes within the pool; partial-sequence puts
// 1/(positives in pool).
std::vector<double> target_distribution(const std::vector<bool>& mask, PoolMode mode,
                                        std::size_t n_total_positives);

// For n positives and J = min(K, n): n pools for each positive count j in 1..J,
// positives taken by rotation over a seeded shuffle so every positive appears
// at every j, the remaining K - j slots filled with distinct negatives.
std::vector<Pool> build_pools(const PooledAccount& brand, std::span<const std::string> positives,
                              std::span<const std::string> negatives, const PoolPlan& plan, Rng& rng);

// Convenience over a dataset: positives are I+(b), negatives I-(b).
std::vector<Pool> build_pools(const Dataset& dataset, const std::string& brand_id, const PoolPlan& plan, Rng& rng);

inline std::size_t expected_pool_count(std::size_t n_positives, std::size_t k) {
  return n_positives * (n_positives < k ? n_positives : k);
}

}  // namespace inflrank
