#include "inflrank/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "inflrank/error.hpp"
#include "inflrank/rng.hpp"

namespace inflrank {

std::string to_string(AccountKind kind) { return kind == AccountKind::brand ? "brand" : "influencer"; }

PooledEmbeddings pool_posts(std::span<const Post> posts) {
  if (posts.empty()) throw UsageError("pool_posts: no posts to pool");
  const std::size_t d_t = posts.front().text_embedding.size();
  const std::size_t d_v = posts.front().visual_embedding.size();
  PooledEmbeddings pooled{std::vector<double>(d_t, 0.0), std::vector<double>(d_v, 0.0)};
  for (std::size_t p = 0; p < posts.size(); ++p) {
    const Post& post = posts[p];
    if (post.text_embedding.size() != d_t || post.visual_embedding.size() != d_v) {
      throw ShapeError("pool_posts: post " + std::to_string(p) + " has embedding lengths (" +
                       std::to_string(post.text_embedding.size()) + ", " +
                       std::to_string(post.visual_embedding.size()) + "), expected (" + std::to_string(d_t) +
                       ", " + std::to_string(d_v) + ")");
    }
    for (std::size_t j = 0; j < d_t; ++j) pooled.text[j] += post.text_embedding[j];
    for (std::size_t j = 0; j < d_v; ++j) pooled.visual[j] += post.visual_embedding[j];
  }
  const double n = static_cast<double>(posts.size());
  for (double& v : pooled.text) v /= n;
  for (double& v : pooled.visual) v /= n;
  return pooled;
}

double compute_engagement(std::span<const Post> posts, long followers) {
  if (followers <= 0) throw UsageError("compute_engagement: followers must be positive");
  if (posts.empty()) throw UsageError("compute_engagement: no posts");
  double total = 0.0;
  for (const Post& post : posts) {
    total += static_cast<double>(post.likes + post.comments) / static_cast<double>(followers);
  }
  return total / static_cast<double>(posts.size());
}

std::vector<double> normalize_engagement(std::span<const double> raw) {
  std::vector<double> out(raw.size(), 0.0);
  if (raw.empty()) return out;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - *lo) / range;
  return out;
}

Dataset::Dataset(DatasetHeader header, std::vector<PooledAccount> accounts,
                 std::map<std::string, std::vector<std::string>> associations)
    : header_(std::move(header)), accounts_(std::move(accounts)) {
  if (header_.categories.empty()) throw DataError("dataset declares no categories");
  if (header_.s1 * header_.s2 * header_.f_n != header_.d_v) {
    throw DataError("header d_v=" + std::to_string(header_.d_v) + " does not equal s1*s2*f_n=" +
                    std::to_string(header_.s1 * header_.s2 * header_.f_n));
  }
  for (std::size_t i = 0; i < accounts_.size(); ++i) {
    const PooledAccount& a = accounts_[i];
    if (a.id.empty()) throw DataError("account " + std::to_string(i) + " has an empty id");
    if (!index_.emplace(a.id, i).second) throw DataError("duplicate account id '" + a.id + "'");
    if (a.category >= header_.categories.size()) {
      throw DataError("account '" + a.id + "' has category index " + std::to_string(a.category) + " out of range");
    }
    if (a.text_pooled.size() != header_.d_t || a.visual_pooled.size() != header_.d_v) {
      throw ShapeError("account '" + a.id + "' has embedding lengths (" + std::to_string(a.text_pooled.size()) +
                       ", " + std::to_string(a.visual_pooled.size()) + "), header declares (" +
                       std::to_string(header_.d_t) + ", " + std::to_string(header_.d_v) + ")");
    }
    if (a.kind == AccountKind::influencer && a.followers > 0) {
      if ((header_.min_followers && a.followers < *header_.min_followers) ||
          (header_.max_followers && a.followers > *header_.max_followers)) {
        throw DataError("influencer '" + a.id + "' has " + std::to_string(a.followers) +
                        " followers, outside the declared bounds");
      }
    }
    (a.kind == AccountKind::brand ? brand_ids_ : influencer_ids_).push_back(a.id);
  }
  std::sort(brand_ids_.begin(), brand_ids_.end());
  std::sort(influencer_ids_.begin(), influencer_ids_.end());

  for (auto& [brand, members] : associations) {
    const PooledAccount* b = find(brand);
    if (b == nullptr) throw DataError("association references missing brand id '" + brand + "'");
    if (b->kind != AccountKind::brand) throw DataError("association key '" + brand + "' is not a brand");
    auto& set = associations_[brand];
    for (const std::string& id : members) {
      const PooledAccount* infl = find(id);
      if (infl == nullptr) throw DataError("association of brand '" + brand + "' references missing influencer id '" + id + "'");
      if (infl->kind != AccountKind::influencer) {
        throw DataError("association of brand '" + brand + "' references non-influencer '" + id + "'");
      }
      set.insert(id);
    }
  }

  std::vector<double> raw;
  raw.reserve(accounts_.size());
  for (const PooledAccount& a : accounts_) {
    if (!std::isfinite(a.engagement_raw)) throw DataError("account '" + a.id + "' has non-finite engagement");
    raw.push_back(a.engagement_raw);
  }
  const std::vector<double> normalized = normalize_engagement(raw);
  for (std::size_t i = 0; i < accounts_.size(); ++i) accounts_[i].engagement = normalized[i];
}

const PooledAccount* Dataset::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &accounts_[it->second];
}

const PooledAccount& Dataset::at(const std::string& id) const {
  const PooledAccount* a = find(id);
  if (a == nullptr) throw DataError("unknown account id '" + id + "'");
  return *a;
}

const std::set<std::string>& Dataset::positives(const std::string& brand_id) const {
  static const std::set<std::string> none;
  const auto it = associations_.find(brand_id);
  return it == associations_.end() ? none : it->second;
}

bool Dataset::is_positive(const std::string& brand_id, const std::string& influencer_id) const {
  return positives(brand_id).contains(influencer_id);
}

std::vector<std::string> Dataset::negatives(const std::string& brand_id) const {
  const auto& pos = positives(brand_id);
  std::vector<std::string> out;
  out.reserve(influencer_ids_.size() - std::min(pos.size(), influencer_ids_.size()));
  for (const std::string& id : influencer_ids_) {
    if (!pos.contains(id)) out.push_back(id);
  }
  return out;
}

std::vector<std::string> Dataset::unassociated_influencers() const {
  std::set<std::string> used;
  for (const auto& [brand, members] : associations_) used.insert(members.begin(), members.end());
  std::vector<std::string> out;
  for (const std::string& id : influencer_ids_) {
    if (!used.contains(id)) out.push_back(id);
  }
  return out;
}

std::vector<FoldSplit> split_kfold(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw StratificationError("k-fold split needs k >= 2, got " + std::to_string(k));
  const auto& categories = dataset.header().categories;
  std::vector<std::vector<std::string>> by_category(categories.size());
  for (const std::string& id : dataset.brand_ids()) by_category[dataset.at(id).category].push_back(id);

  std::vector<FoldSplit> folds(k);
  for (std::size_t f = 0; f < k; ++f) folds[f].fold = f;
  Rng rng(seed);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    auto& brands = by_category[c];
    if (brands.empty()) continue;
    if (brands.size() < k) {
      throw StratificationError("category '" + categories[c] + "' has " + std::to_string(brands.size()) +
                                " brands, fewer than k=" + std::to_string(k));
    }
    rng.shuffle(std::span<std::string>(brands));
    for (std::size_t i = 0; i < brands.size(); ++i) folds[i % k].test.push_back(brands[i]);
  }
  for (FoldSplit& fold : folds) {
    std::sort(fold.test.begin(), fold.test.end());
    for (const std::string& id : dataset.brand_ids()) {
      if (!std::binary_search(fold.test.begin(), fold.test.end(), id)) fold.train.push_back(id);
    }
  }
  return folds;
}

}  // namespace inflrank
