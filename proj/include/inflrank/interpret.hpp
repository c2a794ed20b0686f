#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include "inflrank/dataset.hpp"
#include "inflrank/models.hpp"
#include "inflrank/numcore.hpp"

namespace inflrank {

// Spatial visual features, s1 x s2 x f_n, channel-last like the dataset's
// unrolled visual embeddings.
struct FeatureMap {
  std::size_t s1 = 0;
  std::size_t s2 = 0;
  std::size_t f_n = 0;
  Tensor values;

  static FeatureMap from_unrolled(std::size_t s1, std::size_t s2, std::size_t f_n, std::span<const double> unrolled);
  double at(std::size_t row, std::size_t col, std::size_t channel) const {
    return values[(row * s2 + col) * f_n + channel];
  }
};

struct Heatmap {
  Tensor raw;         // s1 x s2
  Tensor normalized;  // s1 x s2 in [0, 1]
};

// diag(W_v).
Tensor importance_global(const WSimParams& params);
// W_v b_v with W_v diagonal.
Tensor importance_account(const WSimParams& params, const PooledAccount& account);

// Channel sum of importance ⊙ features, then min-max normalized.
Heatmap heatmap(const Tensor& importance, const FeatureMap& features);

// Min-max to [0, 1]; a constant matrix maps to zeros.
Tensor normalize_minmax(const Tensor& m);

// Bilinear resampling with corners aligned.
Tensor upsample(const Tensor& normalized, std::size_t rows_out, std::size_t cols_out);

// Share of the positive raw mass that lies in rows [r0, r1) x cols [c0, c1).
double positive_mass_share(const Tensor& raw, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1);

// Binary 8-bit PGM, v -> round(255 v).
void write_pgm(const Tensor& image, const std::filesystem::path& path);
// Returns pixel values divided by 255.
Tensor read_pgm(const std::filesystem::path& path);

// One row per line, 17 significant digits.
void write_matrix_csv(const Tensor& m, const std::filesystem::path& path);

}  // namespace inflrank
