#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "inflrank/dataset.hpp"
#include "inflrank/numcore.hpp"
#include "inflrank/rng.hpp"
#include "inflrank/sampler.hpp"

namespace inflrank {

enum class ModelType { wsim, wsim_mt };

std::string to_string(ModelType type);
ModelType model_type_from_string(const std::string& name);

// Diagonal bilinear similarity per modality, mixed with engagement through
// softmax(alpha) so the three weights always sum to one.
struct WSimParams {
  Tensor wt_diag;
  Tensor wv_diag;
  Tensor alpha;  // 3 logits for (w_t, w_v, w_e)

  // Unit diagonals (plain dot product) and equal mixture weights.
  static WSimParams init(std::size_t d_t, std::size_t d_v);
  static WSimParams zeros_like(const WSimParams& other);

  std::size_t d_t() const { return wt_diag.size(); }
  std::size_t d_v() const { return wv_diag.size(); }
  std::size_t parameter_count() const { return wt_diag.size() + wv_diag.size() + alpha.size(); }

  template <typename F>
  void for_each_tensor(F&& f) {
    f(wt_diag);
    f(wv_diag);
    f(alpha);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    f(wt_diag);
    f(wv_diag);
    f(alpha);
  }
};

std::array<double, 3> mixture_weights(const Tensor& alpha);

struct WSimTerms {
  double s_t = 0.0;
  double s_v = 0.0;
  double z = 0.0;
};

WSimTerms wsim_terms(const WSimParams& params, const PooledAccount& brand, const PooledAccount& infl);
double wsim_score(const WSimParams& params, const PooledAccount& brand, const PooledAccount& infl);

// Encoder widths for WSim-MT. Both encoders end in d_r units.
struct Architecture {
  std::size_t d_r = 16;
  std::vector<std::size_t> text_hidden{32, 32};
  std::vector<std::size_t> visual_hidden{64, 32};

  static Architecture desk() { return {}; }
  // (300, 512) text and (4096, 512) visual hidden units.
  static Architecture full() { return {128, {300, 512}, {4096, 512}}; }
};

struct WSimMTParams {
  std::vector<DenseLayer> f_layers;  // text encoder
  std::vector<DenseLayer> g_layers;  // visual encoder
  Tensor wr;                         // d_r x d_r
  Tensor alpha_e;                    // 1 logit, w_e = sigmoid(alpha_e)
  DenseLayer h_layer;                // affine + softmax over categories
  double dropout = 0.5;              // hidden-layer dropout in training mode

  static WSimMTParams init(std::size_t d_t, std::size_t d_v, std::size_t n_categories, const Architecture& arch,
                           double dropout, Rng& rng);
  static WSimMTParams zeros_like(const WSimMTParams& other);

  std::size_t d_t() const { return f_layers.front().in_dim(); }
  std::size_t d_v() const { return g_layers.front().in_dim(); }
  std::size_t d_r() const { return wr.dim(0); }
  std::size_t n_categories() const { return h_layer.out_dim(); }
  std::size_t parameter_count() const;

  template <typename F>
  void for_each_tensor(F&& f) {
    for (auto& layer : f_layers) f(layer.weights), f(layer.bias);
    for (auto& layer : g_layers) f(layer.weights), f(layer.bias);
    f(wr);
    f(alpha_e);
    f(h_layer.weights);
    f(h_layer.bias);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for (const auto& layer : f_layers) f(layer.weights), f(layer.bias);
    for (const auto& layer : g_layers) f(layer.weights), f(layer.bias);
    f(wr);
    f(alpha_e);
    f(h_layer.weights);
    f(h_layer.bias);
  }
};

double sigmoid(double x);

// f(text) ⊙ g(visual) with the shared encoders; dropout only when training.
std::vector<double> wsimmt_embed(const WSimMTParams& params, const PooledAccount& account, bool training, Rng& rng);

// Bilinear form e_b^T W_r e_i.
double bilinear(const Tensor& wr, std::span<const double> e_b, std::span<const double> e_i);

double wsimmt_score(const WSimMTParams& params, const PooledAccount& brand, const PooledAccount& infl,
                    bool training, Rng& rng);

// Score from precomputed embeddings; `engagement` is the influencer's.
double wsimmt_score_embedded(const WSimMTParams& params, std::span<const double> e_b, std::span<const double> e_i,
                             double engagement);

double listwise_loss(std::span<const double> scores, std::span<const double> y);

std::vector<double> classify_category(const DenseLayer& h_layer, std::span<const double> embedding);

template <typename Params>
struct LossResult {
  double loss = 0.0;
  Params grads;
};

struct MultitaskLoss : LossResult<WSimMTParams> {
  double main = 0.0;
  double brand_ce = 0.0;
  double influencer_ce = 0.0;  // mean over the pool's candidates
};

MultitaskLoss multitask_loss(const WSimMTParams& params, const Pool& pool, const Dataset& dataset, double lambda,
                             double gamma, bool training, Rng& rng);

LossResult<WSimParams> wsim_loss_and_grads(const WSimParams& params, const Pool& pool, const Dataset& dataset);

using ModelParams = std::variant<WSimParams, WSimMTParams>;

ModelType model_type(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

// Inference scores (dropout off) of every candidate against one brand.
std::vector<double> score_candidates(const ModelParams& params, const PooledAccount& brand,
                                     std::span<const PooledAccount* const> candidates);

struct Checkpoint {
  ModelParams params;
  DatasetHeader dims;  // d_t, d_v, s1, s2, f_n and the category list
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string checkpoint_json(const Checkpoint& checkpoint);

}  // namespace inflrank
