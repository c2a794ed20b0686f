#include <cmath>
#include <cstdio>
#include <numeric>

#include "inflrank/dataset.hpp"
#include "inflrank/error.hpp"
#include "inflrank/rng.hpp"

namespace inflrank {

namespace {

const std::vector<std::string> kMacroCategories = {"Airline", "Auto",  "Clothing",   "Drink",
                                                   "Electronics", "Entertainment", "Food", "Jewellery",
                                                   "Makeup", "Non-Profit", "Shoes", "Services"};

std::string padded(const char* prefix, std::size_t a, std::size_t b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%02zu_%03zu", prefix, a, b);
  return buf;
}

struct Centers {
  std::vector<double> text;
  std::vector<double> visual;
};

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {
    const std::size_t signal = spec.signal_channels == 0 ? spec.f_n : spec.signal_channels;
    signal_channel_.assign(spec.f_n, false);
    group_of_channel_.assign(spec.f_n, 0);
    for (std::size_t ch = 0; ch < signal; ++ch) {
      signal_channel_[ch] = true;
      if (spec.concept_groups > 0) group_of_channel_[ch] = ch * spec.concept_groups / signal;
    }
    const std::size_t total = spec.d_t + spec.d_v();
    if (spec.nuisance_rank > 0) {
      nuisance_basis_.assign(spec.nuisance_rank, std::vector<double>(total));
      for (auto& direction : nuisance_basis_) {
        for (double& v : direction) v = rng_.normal();
        const double norm = std::sqrt(std::inner_product(direction.begin(), direction.end(), direction.begin(), 0.0));
        for (double& v : direction) v *= std::sqrt(static_cast<double>(total)) / norm;
      }
    }
  }

  Centers category_center(std::size_t category) {
    Centers c{std::vector<double>(spec_.d_t), std::vector<double>(spec_.d_v(), 0.0)};
    for (double& v : c.text) v = spec_.text_signal * rng_.normal();
    for (std::size_t pos = 0; pos < spec_.s1 * spec_.s2; ++pos) {
      for (std::size_t ch = 0; ch < spec_.f_n; ++ch) {
        if (!on_support(category, ch)) continue;
        c.visual[pos * spec_.f_n + ch] = rng_.normal();
      }
    }
    return c;
  }

  // Half correlated with the category center, same support.
  Centers peripheral_center(std::size_t category, const Centers& core) {
    Centers fresh = category_center(category);
    const double keep = 0.5;
    const double mix = std::sqrt(1.0 - keep * keep);
    for (std::size_t j = 0; j < fresh.text.size(); ++j) fresh.text[j] = keep * core.text[j] + mix * fresh.text[j];
    for (std::size_t j = 0; j < fresh.visual.size(); ++j) {
      fresh.visual[j] = keep * core.visual[j] + mix * fresh.visual[j];
    }
    return fresh;
  }

  void draw_embeddings(const Centers& center, PooledAccount& account) {
    account.text_pooled = center.text;
    account.visual_pooled = center.visual;
    for (double& v : account.text_pooled) v += spec_.noise_sigma * rng_.normal();
    for (std::size_t pos = 0; pos < spec_.s1 * spec_.s2; ++pos) {
      for (std::size_t ch = 0; ch < spec_.f_n; ++ch) {
        const double sigma = signal_channel_[ch] ? spec_.noise_sigma : spec_.background_sigma;
        account.visual_pooled[pos * spec_.f_n + ch] += sigma * rng_.normal();
      }
    }
    if (!nuisance_basis_.empty() && spec_.nuisance_sigma > 0.0) {
      for (const auto& direction : nuisance_basis_) {
        const double coeff = spec_.nuisance_sigma * rng_.normal();
        for (std::size_t j = 0; j < spec_.d_t; ++j) account.text_pooled[j] += coeff * direction[j];
        for (std::size_t j = 0; j < spec_.d_v(); ++j) account.visual_pooled[j] += coeff * direction[spec_.d_t + j];
      }
    }
  }

  Rng& rng() { return rng_; }

 private:
  bool on_support(std::size_t category, std::size_t channel) const {
    if (!signal_channel_[channel]) return false;
    if (spec_.concept_groups == 0) return true;
    return group_of_channel_[channel] == category % spec_.concept_groups;
  }

  const SyntheticSpec& spec_;
  Rng rng_;
  std::vector<bool> signal_channel_;
  std::vector<std::size_t> group_of_channel_;
  std::vector<std::vector<double>> nuisance_basis_;
};

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_categories < 1 || spec.brands_per_cat < 1 || spec.influencers_per_cat < 1 || spec.d_t < 1 ||
      spec.s1 < 1 || spec.s2 < 1 || spec.f_n < 1 || spec.positives_per_brand < 1) {
    throw UsageError("synthetic spec: all counts and dimensions must be >= 1");
  }
  if (spec.positives_per_brand > spec.influencers_per_cat) {
    throw UsageError("synthetic spec: positives_per_brand exceeds influencers_per_cat");
  }
  if (spec.signal_channels > spec.f_n) throw UsageError("synthetic spec: signal_channels exceeds f_n");
  const std::size_t signal = spec.signal_channels == 0 ? spec.f_n : spec.signal_channels;
  if (spec.concept_groups > signal) throw UsageError("synthetic spec: more concept groups than signal channels");
  if (!(spec.noise_sigma >= 0.0) || !(spec.background_sigma >= 0.0) || !(spec.nuisance_sigma >= 0.0)) {
    throw UsageError("synthetic spec: noise levels must be >= 0");
  }

  DatasetHeader header;
  header.d_t = spec.d_t;
  header.d_v = spec.d_v();
  header.s1 = spec.s1;
  header.s2 = spec.s2;
  header.f_n = spec.f_n;
  header.n_posts = 50;
  header.min_followers = 5000;
  header.max_followers = 100000;
  for (std::size_t c = 0; c < spec.n_categories; ++c) {
    if (spec.n_categories == kMacroCategories.size()) {
      header.categories.push_back(kMacroCategories[c]);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "category_%02zu", c);
      header.categories.emplace_back(buf);
    }
  }

  Generator gen(spec);
  Rng& rng = gen.rng();
  std::vector<PooledAccount> accounts;
  std::map<std::string, std::vector<std::string>> associations;
  for (std::size_t c = 0; c < spec.n_categories; ++c) {
    const Centers core = gen.category_center(c);
    const Centers peripheral = gen.peripheral_center(c, core);

    std::vector<std::string> core_ids;
    for (std::size_t j = 0; j < spec.influencers_per_cat; ++j) {
      PooledAccount infl;
      infl.id = padded("i", c, j);
      infl.kind = AccountKind::influencer;
      infl.category = c;
      const bool is_core = j < spec.positives_per_brand;
      gen.draw_embeddings(is_core ? core : peripheral, infl);
      infl.followers = 5000 + static_cast<long>(rng.below(95001));
      // Positives skew towards higher engagement.
      infl.engagement_raw = is_core ? 0.05 + 0.05 * rng.uniform() : 0.08 * rng.uniform();
      if (is_core) core_ids.push_back(infl.id);
      accounts.push_back(std::move(infl));
    }
    for (std::size_t j = 0; j < spec.brands_per_cat; ++j) {
      PooledAccount brand;
      brand.id = padded("b", c, j);
      brand.kind = AccountKind::brand;
      brand.category = c;
      gen.draw_embeddings(core, brand);
      brand.followers = 100000 + static_cast<long>(rng.below(900001));
      brand.engagement_raw = 0.1 * rng.uniform();
      associations[brand.id] = core_ids;
      accounts.push_back(std::move(brand));
    }
  }
  return Dataset(std::move(header), std::move(accounts), std::move(associations));
}

}  // namespace inflrank
