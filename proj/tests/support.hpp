#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "inflrank/dataset.hpp"

namespace testing_support {

inline inflrank::PooledAccount account(std::string id, inflrank::AccountKind kind, std::size_t category,
                                       std::vector<double> text, std::vector<double> visual, double engagement = 0.0) {
  inflrank::PooledAccount a;
  a.id = std::move(id);
  a.kind = kind;
  a.category = category;
  a.text_pooled = std::move(text);
  a.visual_pooled = std::move(visual);
  a.engagement_raw = engagement;
  a.engagement = engagement;
  a.followers = kind == inflrank::AccountKind::influencer ? 10000 : 500000;
  return a;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("inflrank_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small random dataset: n_cat categories, each with brands and influencers,
// every brand associated with `positives` influencers of its category.
inline inflrank::Dataset random_dataset(std::size_t d_t, std::size_t s1, std::size_t s2, std::size_t f_n,
                                        std::size_t n_cat, std::size_t brands, std::size_t infl,
                                        std::size_t positives, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  inflrank::DatasetHeader h;
  h.d_t = d_t;
  h.s1 = s1;
  h.s2 = s2;
  h.f_n = f_n;
  h.d_v = s1 * s2 * f_n;
  for (std::size_t c = 0; c < n_cat; ++c) h.categories.push_back("cat" + std::to_string(c));
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = normal(gen);
    return v;
  };
  std::vector<inflrank::PooledAccount> accounts;
  std::map<std::string, std::vector<std::string>> assoc;
  for (std::size_t c = 0; c < n_cat; ++c) {
    for (std::size_t i = 0; i < infl; ++i) {
      accounts.push_back(account("i" + std::to_string(c) + "_" + std::to_string(i), inflrank::AccountKind::influencer,
                                 c, vec(d_t), vec(h.d_v), unit(gen)));
    }
    for (std::size_t b = 0; b < brands; ++b) {
      const std::string id = "b" + std::to_string(c) + "_" + std::to_string(b);
      accounts.push_back(account(id, inflrank::AccountKind::brand, c, vec(d_t), vec(h.d_v), unit(gen)));
      for (std::size_t i = 0; i < positives; ++i) {
        assoc[id].push_back("i" + std::to_string(c) + "_" + std::to_string((b + i) % infl));
      }
    }
  }
  return inflrank::Dataset(h, std::move(accounts), std::move(assoc));
}

}  // namespace testing_support
