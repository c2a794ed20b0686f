#include "inflrank/models.hpp"

#include <algorithm>
#include <cmath>

#include "inflrank/error.hpp"

namespace inflrank {

namespace {

void require_dims(const PooledAccount& account, std::size_t d_t, std::size_t d_v, const char* where) {
  if (account.text_pooled.size() != d_t || account.visual_pooled.size() != d_v) {
    throw ShapeError(std::string(where) + ": account '" + account.id + "' has embedding lengths (" +
                     std::to_string(account.text_pooled.size()) + ", " + std::to_string(account.visual_pooled.size()) +
                     "), model expects (" + std::to_string(d_t) + ", " + std::to_string(d_v) + ")");
  }
}

std::vector<double> pool_residual(std::span<const double> scores, std::span<const double> y) {
  const std::vector<double> p = softmax(scores);
  std::vector<double> dz(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] = p[i] - y[i];
  return dz;
}

std::vector<const PooledAccount*> pool_members(const Pool& pool, const Dataset& dataset) {
  std::vector<const PooledAccount*> members;
  members.reserve(pool.candidate_ids.size());
  for (const std::string& id : pool.candidate_ids) members.push_back(&dataset.at(id));
  return members;
}

void require_pool(const Pool& pool) {
  if (pool.candidate_ids.size() != pool.y.size() || pool.candidate_ids.empty()) {
    throw ShapeError("pool for brand '" + pool.brand_id + "' has " + std::to_string(pool.candidate_ids.size()) +
                     " candidates but " + std::to_string(pool.y.size()) + " targets");
  }
}

// -- WSim-MT forward/backward plumbing ---------------------------------------

struct EncoderPass {
  std::vector<DenseOutput> layers;
  const std::vector<double>& output() const { return layers.back().y.data(); }
};

EncoderPass run_encoder(const std::vector<DenseLayer>& layers, const std::vector<double>& input, double dropout,
                        bool training, Rng& rng) {
  EncoderPass pass;
  pass.layers.reserve(layers.size());
  Tensor x = Tensor::vector(input);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool hidden = i + 1 < layers.size();
    pass.layers.push_back(dense_forward(layers[i], x, hidden ? dropout : 0.0, rng, training));
    x = pass.layers.back().y;
  }
  return pass;
}

void backprop_encoder(const std::vector<DenseLayer>& layers, const EncoderPass& pass, std::vector<double> grad_out,
                      std::vector<DenseLayer>& grads) {
  Tensor g = Tensor::vector(std::move(grad_out));
  for (std::size_t i = layers.size(); i-- > 0;) {
    g = dense_backward_accumulate(layers[i], pass.layers[i].cache, g, grads[i].weights, grads[i].bias);
  }
}

struct AccountPass {
  EncoderPass f;
  EncoderPass g;
  std::vector<double> e;
};

AccountPass embed_account(const WSimMTParams& params, const PooledAccount& account, bool training, Rng& rng) {
  require_dims(account, params.d_t(), params.d_v(), "wsimmt_embed");
  AccountPass pass;
  pass.f = run_encoder(params.f_layers, account.text_pooled, params.dropout, training, rng);
  pass.g = run_encoder(params.g_layers, account.visual_pooled, params.dropout, training, rng);
  const auto& fo = pass.f.output();
  const auto& go = pass.g.output();
  if (fo.size() != go.size()) throw ShapeError("wsimmt_embed: encoder outputs differ in width");
  pass.e.resize(fo.size());
  for (std::size_t j = 0; j < fo.size(); ++j) pass.e[j] = fo[j] * go[j];
  return pass;
}

void backprop_account(const WSimMTParams& params, const AccountPass& pass, const std::vector<double>& grad_e,
                      WSimMTParams& grads) {
  const auto& fo = pass.f.output();
  const auto& go = pass.g.output();
  std::vector<double> grad_f(grad_e.size());
  std::vector<double> grad_g(grad_e.size());
  for (std::size_t j = 0; j < grad_e.size(); ++j) {
    grad_f[j] = grad_e[j] * go[j];
    grad_g[j] = grad_e[j] * fo[j];
  }
  backprop_encoder(params.f_layers, pass.f, std::move(grad_f), grads.f_layers);
  backprop_encoder(params.g_layers, pass.g, std::move(grad_g), grads.g_layers);
}

// Adds weight * CE(onehot(category), h(e)) gradients; returns the CE value.
double category_term(const WSimMTParams& params, const std::vector<double>& e, std::size_t category, double weight,
                     std::vector<double>& grad_e, WSimMTParams& grads) {
  if (category >= params.n_categories()) {
    throw ShapeError("category index " + std::to_string(category) + " outside classifier with " +
                     std::to_string(params.n_categories()) + " outputs");
  }
  const DenseOutput out = dense_forward(params.h_layer, Tensor::vector(e));
  std::vector<double> target(params.n_categories(), 0.0);
  target[category] = 1.0;
  const double ce = cross_entropy(target, out.y.values());
  std::vector<double> grad_q = cross_entropy_grad(target, out.y.values());
  for (double& v : grad_q) v *= weight;
  const Tensor gx = dense_backward_accumulate(params.h_layer, out.cache, Tensor::vector(std::move(grad_q)),
                                              grads.h_layer.weights, grads.h_layer.bias);
  for (std::size_t j = 0; j < grad_e.size(); ++j) grad_e[j] += gx[j];
  return ce;
}

}  // namespace

std::string to_string(ModelType type) { return type == ModelType::wsim ? "wsim" : "wsim_mt"; }

ModelType model_type_from_string(const std::string& name) {
  if (name == "wsim") return ModelType::wsim;
  if (name == "wsim_mt") return ModelType::wsim_mt;
  throw ConfigError("unknown model type '" + name + "' (expected wsim or wsim_mt)");
}

// -- WSim ---------------------------------------------------------------------

WSimParams WSimParams::init(std::size_t d_t, std::size_t d_v) {
  return WSimParams{Tensor({d_t}, 1.0), Tensor({d_v}, 1.0), Tensor({3}, 0.0)};
}

WSimParams WSimParams::zeros_like(const WSimParams& other) {
  return WSimParams{Tensor::zeros_like(other.wt_diag), Tensor::zeros_like(other.wv_diag),
                    Tensor::zeros_like(other.alpha)};
}

std::array<double, 3> mixture_weights(const Tensor& alpha) {
  if (alpha.size() != 3) throw ShapeError("mixture logits must have 3 entries");
  const std::vector<double> w = softmax(alpha.values());
  return {w[0], w[1], w[2]};
}

WSimTerms wsim_terms(const WSimParams& params, const PooledAccount& brand, const PooledAccount& infl) {
  require_dims(brand, params.d_t(), params.d_v(), "wsim_score");
  require_dims(infl, params.d_t(), params.d_v(), "wsim_score");
  WSimTerms terms;
  for (std::size_t j = 0; j < params.d_t(); ++j) {
    terms.s_t += params.wt_diag[j] * brand.text_pooled[j] * infl.text_pooled[j];
  }
  for (std::size_t j = 0; j < params.d_v(); ++j) {
    terms.s_v += params.wv_diag[j] * brand.visual_pooled[j] * infl.visual_pooled[j];
  }
  const auto w = mixture_weights(params.alpha);
  terms.z = w[0] * terms.s_t + w[1] * terms.s_v + w[2] * infl.engagement;
  return terms;
}

double wsim_score(const WSimParams& params, const PooledAccount& brand, const PooledAccount& infl) {
  return wsim_terms(params, brand, infl).z;
}

LossResult<WSimParams> wsim_loss_and_grads(const WSimParams& params, const Pool& pool, const Dataset& dataset) {
  require_pool(pool);
  const PooledAccount& brand = dataset.at(pool.brand_id);
  const auto members = pool_members(pool, dataset);
  const std::size_t k = members.size();
  std::vector<WSimTerms> terms(k);
  std::vector<double> z(k);
  for (std::size_t i = 0; i < k; ++i) {
    terms[i] = wsim_terms(params, brand, *members[i]);
    z[i] = terms[i].z;
  }
  LossResult<WSimParams> result{listwise_loss(z, pool.y), WSimParams::zeros_like(params)};
  const std::vector<double> dz = pool_residual(z, pool.y);
  const auto w = mixture_weights(params.alpha);

  std::array<double, 3> grad_w{0.0, 0.0, 0.0};
  auto gt = result.grads.wt_diag.values();
  auto gv = result.grads.wv_diag.values();
  for (std::size_t i = 0; i < k; ++i) {
    const PooledAccount& infl = *members[i];
    grad_w[0] += dz[i] * terms[i].s_t;
    grad_w[1] += dz[i] * terms[i].s_v;
    grad_w[2] += dz[i] * infl.engagement;
    const double ct = dz[i] * w[0];
    const double cv = dz[i] * w[1];
    for (std::size_t j = 0; j < gt.size(); ++j) gt[j] += ct * brand.text_pooled[j] * infl.text_pooled[j];
    for (std::size_t j = 0; j < gv.size(); ++j) gv[j] += cv * brand.visual_pooled[j] * infl.visual_pooled[j];
  }
  const std::vector<double> grad_alpha = softmax_backward(w, grad_w);
  for (std::size_t a = 0; a < 3; ++a) result.grads.alpha[a] = grad_alpha[a];
  return result;
}

// -- WSim-MT ------------------------------------------------------------------

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double ex = std::exp(x);
  return ex / (1.0 + ex);
}

WSimMTParams WSimMTParams::init(std::size_t d_t, std::size_t d_v, std::size_t n_categories, const Architecture& arch,
                                double dropout, Rng& rng) {
  if (arch.d_r == 0 || n_categories == 0) throw UsageError("WSim-MT needs d_r >= 1 and at least one category");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
  auto build = [&](std::size_t in, const std::vector<std::size_t>& hidden) {
    std::vector<DenseLayer> layers;
    std::size_t width = in;
    for (std::size_t h : hidden) {
      layers.push_back(DenseLayer::glorot(width, h, Activation::relu, rng));
      width = h;
    }
    layers.push_back(DenseLayer::glorot(width, arch.d_r, Activation::identity, rng));
    return layers;
  };
  WSimMTParams params;
  params.f_layers = build(d_t, arch.text_hidden);
  params.g_layers = build(d_v, arch.visual_hidden);
  params.wr = Tensor({arch.d_r, arch.d_r});
  for (std::size_t i = 0; i < arch.d_r; ++i) params.wr(i, i) = 1.0;
  params.alpha_e = Tensor({1}, 0.0);
  params.h_layer = DenseLayer::glorot(arch.d_r, n_categories, Activation::softmax, rng);
  params.dropout = dropout;
  return params;
}

WSimMTParams WSimMTParams::zeros_like(const WSimMTParams& other) {
  WSimMTParams z = other;
  z.for_each_tensor([](Tensor& t) { t.fill(0.0); });
  return z;
}

std::size_t WSimMTParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const Tensor& t) { n += t.size(); });
  return n;
}

std::vector<double> wsimmt_embed(const WSimMTParams& params, const PooledAccount& account, bool training, Rng& rng) {
  return embed_account(params, account, training, rng).e;
}

double bilinear(const Tensor& wr, std::span<const double> e_b, std::span<const double> e_i) {
  if (wr.rank() != 2 || wr.dim(0) != e_b.size() || wr.dim(1) != e_i.size()) {
    throw ShapeError("bilinear: W_r " + shape_string(wr.shape()) + " vs embeddings (" + std::to_string(e_b.size()) +
                     ", " + std::to_string(e_i.size()) + ")");
  }
  double total = 0.0;
  for (std::size_t a = 0; a < e_b.size(); ++a) {
    double row = 0.0;
    for (std::size_t c = 0; c < e_i.size(); ++c) row += wr(a, c) * e_i[c];
    total += e_b[a] * row;
  }
  return total;
}

double wsimmt_score_embedded(const WSimMTParams& params, std::span<const double> e_b, std::span<const double> e_i,
                             double engagement) {
  const double w_e = sigmoid(params.alpha_e[0]);
  return (1.0 - w_e) * bilinear(params.wr, e_b, e_i) + w_e * engagement;
}

double wsimmt_score(const WSimMTParams& params, const PooledAccount& brand, const PooledAccount& infl, bool training,
                    Rng& rng) {
  const std::vector<double> e_b = wsimmt_embed(params, brand, training, rng);
  const std::vector<double> e_i = wsimmt_embed(params, infl, training, rng);
  return wsimmt_score_embedded(params, e_b, e_i, infl.engagement);
}

double listwise_loss(std::span<const double> scores, std::span<const double> y) {
  if (scores.size() != y.size()) {
    throw ShapeError("listwise_loss: " + std::to_string(scores.size()) + " scores vs " + std::to_string(y.size()) +
                     " targets");
  }
  return cross_entropy(y, softmax(scores));
}

std::vector<double> classify_category(const DenseLayer& h_layer, std::span<const double> embedding) {
  if (embedding.size() != h_layer.in_dim()) {
    throw ShapeError("classify_category: embedding length " + std::to_string(embedding.size()) + ", classifier expects " +
                     std::to_string(h_layer.in_dim()));
  }
  const Tensor x = Tensor::vector(std::vector<double>(embedding.begin(), embedding.end()));
  return dense_forward(h_layer, x).y.data();
}

MultitaskLoss multitask_loss(const WSimMTParams& params, const Pool& pool, const Dataset& dataset, double lambda,
                             double gamma, bool training, Rng& rng) {
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw UsageError("multitask_loss: lambda and gamma must be >= 0");
  require_pool(pool);
  const PooledAccount& brand = dataset.at(pool.brand_id);
  const auto members = pool_members(pool, dataset);
  const std::size_t k = members.size();
  const std::size_t d_r = params.d_r();

  const AccountPass brand_pass = embed_account(params, brand, training, rng);
  std::vector<AccountPass> passes;
  passes.reserve(k);
  for (const PooledAccount* m : members) passes.push_back(embed_account(params, *m, training, rng));

  const double w_e = sigmoid(params.alpha_e[0]);
  std::vector<double> r(k);
  std::vector<double> z(k);
  for (std::size_t i = 0; i < k; ++i) {
    r[i] = bilinear(params.wr, brand_pass.e, passes[i].e);
    z[i] = (1.0 - w_e) * r[i] + w_e * members[i]->engagement;
  }

  MultitaskLoss result;
  result.grads = WSimMTParams::zeros_like(params);
  WSimMTParams& grads = result.grads;
  result.main = listwise_loss(z, pool.y);
  const std::vector<double> dz = pool_residual(z, pool.y);

  double grad_we = 0.0;
  std::vector<double> grad_eb(d_r, 0.0);
  std::vector<std::vector<double>> grad_ei(k, std::vector<double>(d_r, 0.0));
  auto gwr = grads.wr.values();
  for (std::size_t i = 0; i < k; ++i) {
    grad_we += dz[i] * (members[i]->engagement - r[i]);
    const double dr = (1.0 - w_e) * dz[i];
    if (dr == 0.0) continue;
    const auto& eb = brand_pass.e;
    const auto& ei = passes[i].e;
    for (std::size_t a = 0; a < d_r; ++a) {
      for (std::size_t c = 0; c < d_r; ++c) {
        const double w = params.wr(a, c);
        gwr[a * d_r + c] += dr * eb[a] * ei[c];
        grad_eb[a] += dr * w * ei[c];
        grad_ei[i][c] += dr * w * eb[a];
      }
    }
  }
  grads.alpha_e[0] = grad_we * w_e * (1.0 - w_e);

  if (lambda > 0.0) {
    result.brand_ce = category_term(params, brand_pass.e, brand.category, lambda, grad_eb, grads);
  }
  if (gamma > 0.0) {
    const double each = gamma / static_cast<double>(k);
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      total += category_term(params, passes[i].e, members[i]->category, each, grad_ei[i], grads);
    }
    result.influencer_ce = total / static_cast<double>(k);
  }
  result.loss = result.main + lambda * result.brand_ce + gamma * result.influencer_ce;

  backprop_account(params, brand_pass, grad_eb, grads);
  for (std::size_t i = 0; i < k; ++i) backprop_account(params, passes[i], grad_ei[i], grads);
  return result;
}

// -- Variant helpers -------------------------------------------------------------

ModelType model_type(const ModelParams& params) {
  return std::holds_alternative<WSimParams>(params) ? ModelType::wsim : ModelType::wsim_mt;
}

std::size_t parameter_count(const ModelParams& params) {
  return std::visit([](const auto& p) { return p.parameter_count(); }, params);
}

std::vector<double> score_candidates(const ModelParams& params, const PooledAccount& brand,
                                     std::span<const PooledAccount* const> candidates) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  if (const auto* wsim = std::get_if<WSimParams>(&params)) {
    for (const PooledAccount* c : candidates) scores.push_back(wsim_score(*wsim, brand, *c));
    return scores;
  }
  const auto& mt = std::get<WSimMTParams>(params);
  Rng unused(0);
  const std::vector<double> e_b = wsimmt_embed(mt, brand, false, unused);
  for (const PooledAccount* c : candidates) {
    const std::vector<double> e_i = wsimmt_embed(mt, *c, false, unused);
    scores.push_back(wsimmt_score_embedded(mt, e_b, e_i, c->engagement));
  }
  return scores;
}

}  // namespace inflrank
