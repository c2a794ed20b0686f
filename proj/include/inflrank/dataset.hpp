#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace inflrank {

enum class AccountKind { brand, influencer };

std::string to_string(AccountKind kind);

struct Post {
  std::vector<double> text_embedding;
  std::vector<double> visual_embedding;  // unrolled s1 x s2 x f_n, channel-last
  long likes = 0;
  long comments = 0;
};

struct PooledAccount {
  std::string id;
  AccountKind kind = AccountKind::influencer;
  std::size_t category = 0;
  std::vector<double> text_pooled;
  std::vector<double> visual_pooled;
  double engagement_raw = 0.0;
  double engagement = 0.0;  // min-max normalized over the dataset
  long followers = 0;
};

struct DatasetHeader {
  std::size_t d_t = 16;
  std::size_t d_v = 48;
  std::size_t s1 = 4;
  std::size_t s2 = 4;
  std::size_t f_n = 3;
  std::size_t n_posts = 50;
  std::vector<std::string> categories;
  std::optional<long> min_followers;
  std::optional<long> max_followers;
};

// Offset of visual feature (row, col, channel) in the unrolled vector.
inline std::size_t visual_offset(const DatasetHeader& h, std::size_t row, std::size_t col, std::size_t channel) {
  return (row * h.s2 + col) * h.f_n + channel;
}

struct PooledEmbeddings {
  std::vector<double> text;
  std::vector<double> visual;
};

// Element-wise mean over posts of each modality.
PooledEmbeddings pool_posts(std::span<const Post> posts);

// Mean per-post (likes + comments) / followers.
double compute_engagement(std::span<const Post> posts, long followers);

// Min-max normalization; a degenerate range maps everything to 0.
std::vector<double> normalize_engagement(std::span<const double> raw);

// Immutable after construction. The constructor validates references and
// dimensions and fills in normalized engagement from engagement_raw.
class Dataset {
 public:
  Dataset(DatasetHeader header, std::vector<PooledAccount> accounts,
          std::map<std::string, std::vector<std::string>> associations);

  const DatasetHeader& header() const { return header_; }
  const std::vector<PooledAccount>& accounts() const { return accounts_; }
  const std::map<std::string, std::set<std::string>>& associations() const { return associations_; }

  const PooledAccount* find(const std::string& id) const;
  // Throws DataError naming the id when absent.
  const PooledAccount& at(const std::string& id) const;

  // Sorted ids.
  const std::vector<std::string>& brand_ids() const { return brand_ids_; }
  const std::vector<std::string>& influencer_ids() const { return influencer_ids_; }

  // I+(b); empty set for brands without associations.
  const std::set<std::string>& positives(const std::string& brand_id) const;
  bool is_positive(const std::string& brand_id, const std::string& influencer_id) const;
  // I-(b): every influencer not associated with the brand, sorted.
  std::vector<std::string> negatives(const std::string& brand_id) const;

  // Influencers associated with no brand at all.
  std::vector<std::string> unassociated_influencers() const;

 private:
  DatasetHeader header_;
  std::vector<PooledAccount> accounts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, std::set<std::string>> associations_;
  std::vector<std::string> brand_ids_;
  std::vector<std::string> influencer_ids_;
};

// Reads header.json, accounts.jsonl and associations.jsonl from a directory.
Dataset load_dataset(const std::filesystem::path& dir);
// Writes the pooled form (engagement_raw, no posts).
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct FoldSplit {
  std::size_t fold = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Category-stratified k-fold partition of the brands.
std::vector<FoldSplit> split_kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed);

struct SyntheticSpec {
  std::size_t n_categories = 12;
  std::size_t brands_per_cat = 5;
  std::size_t influencers_per_cat = 20;
  std::size_t d_t = 16;
  std::size_t s1 = 4;
  std::size_t s2 = 4;
  std::size_t f_n = 3;
  std::size_t positives_per_brand = 11;
  double noise_sigma = 0.5;
  // Channels [0, signal_channels) carry the category centers; the rest hold
  // background_sigma noise only. 0 means every channel is a signal channel.
  std::size_t signal_channels = 0;
  double background_sigma = 0.0;
  // When > 0 the signal channels are split into this many disjoint groups and
  // category c's visual center lives only on group c % concept_groups.
  std::size_t concept_groups = 0;
  double text_signal = 1.0;
  // Shared low-rank nuisance added to every account along random directions
  // that are not aligned with coordinate axes.
  std::size_t nuisance_rank = 0;
  double nuisance_sigma = 0.0;
  std::uint64_t seed = 0;

  std::size_t d_v() const { return s1 * s2 * f_n; }
};

// Planted category structure. Within a category every brand is associated
// with the same positives_per_brand "core" influencers, drawn from the
// category center like the brands; the remaining influencers of the category
// are "peripheral", drawn from a center only half correlated with it.
Dataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace inflrank
