#include "inflrank/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "inflrank/error.hpp"

namespace inflrank {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size()) {
    throw ShapeError("tensor of shape " + shape_string(shape_) + " cannot hold " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(what + ": non-finite value at index " + std::to_string(i));
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "softmax") return Activation::softmax;
  throw DataError("unknown activation '" + name + "'");
}

DenseLayer DenseLayer::glorot(std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  DenseLayer layer = zeros(in, out, activation);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
  return layer;
}

DenseLayer DenseLayer::zeros(std::size_t in, std::size_t out, Activation activation) {
  return DenseLayer{Tensor({out, in}), Tensor({out}), activation};
}

DenseOutput dense_forward(const DenseLayer& layer, const Tensor& x, double dropout_rate, Rng& rng,
                          bool training) {
  if (layer.weights.rank() != 2 || layer.bias.rank() != 1 || layer.bias.size() != layer.out_dim()) {
    throw ShapeError("dense layer weights " + shape_string(layer.weights.shape()) +
                     " inconsistent with bias " + shape_string(layer.bias.shape()));
  }
  if (x.rank() < 1 || x.rank() > 2 || x.shape().back() != layer.in_dim()) {
    throw ShapeError("dense_forward: input " + shape_string(x.shape()) + " does not match layer input " +
                     std::to_string(layer.in_dim()));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout rate must be in [0, 1), got " + std::to_string(dropout_rate));
  }
  const std::size_t rows = x.rank() == 1 ? 1 : x.dim(0);
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  std::vector<std::size_t> out_shape = x.rank() == 1 ? std::vector<std::size_t>{out}
                                                       : std::vector<std::size_t>{rows, out};

  DenseOutput result;
  DenseCache& cache = result.cache;
  cache.layer = &layer;
  cache.rows = rows;
  cache.input = x;
  cache.pre_activation = Tensor(out_shape);

  const auto xs = x.values();
  const auto w = layer.weights.values();
  auto pre = cache.pre_activation.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < out; ++o) {
      const double* wrow = &w[o * in];
      const double* xrow = &xs[r * in];
      // Four partial sums so the loop pipelines; fixed order keeps it deterministic.
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t i = 0;
      for (; i + 4 <= in; i += 4) {
        acc[0] += wrow[i] * xrow[i];
        acc[1] += wrow[i + 1] * xrow[i + 1];
        acc[2] += wrow[i + 2] * xrow[i + 2];
        acc[3] += wrow[i + 3] * xrow[i + 3];
      }
      for (; i < in; ++i) acc[0] += wrow[i] * xrow[i];
      pre[r * out + o] = layer.bias[o] + ((acc[0] + acc[1]) + (acc[2] + acc[3]));
    }
  }

  cache.activated = cache.pre_activation;
  auto act = cache.activated.values();
  switch (layer.activation) {
    case Activation::identity: break;
    case Activation::relu:
      for (double& a : act) a = a > 0.0 ? a : 0.0;
      break;
    case Activation::softmax:
      for (std::size_t r = 0; r < rows; ++r) {
        const auto row = softmax(std::span<const double>(&pre[r * out], out));
        std::copy(row.begin(), row.end(), act.begin() + static_cast<std::ptrdiff_t>(r * out));
      }
      break;
  }

  result.y = cache.activated;
  if (training && dropout_rate > 0.0) {
    cache.dropout_mask = Tensor(out_shape);
    const double scale = 1.0 / (1.0 - dropout_rate);
    auto mask = cache.dropout_mask.values();
    auto y = result.y.values();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      mask[i] = rng.uniform() < dropout_rate ? 0.0 : scale;
      y[i] *= mask[i];
    }
  }
  require_finite(result.y.values(), "dense_forward");
  return result;
}

DenseOutput dense_forward(const DenseLayer& layer, const Tensor& x) {
  Rng unused(0);
  return dense_forward(layer, x, 0.0, unused, false);
}

DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Tensor& grad_out) {
  DenseGrads grads;
  grads.grad_weights = Tensor({layer.out_dim(), layer.in_dim()});
  grads.grad_bias = Tensor({layer.out_dim()});
  grads.grad_x = dense_backward_accumulate(layer, cache, grad_out, grads.grad_weights, grads.grad_bias);
  return grads;
}

Tensor dense_backward_accumulate(const DenseLayer& layer, const DenseCache& cache, const Tensor& grad_out,
                                 Tensor& grad_weights, Tensor& grad_bias) {
  if (cache.layer == nullptr) throw UsageError("dense_backward: empty cache");
  if (cache.layer != &layer) throw UsageError("dense_backward: cache was produced by a different layer");
  if (cache.input.shape().back() != layer.in_dim() || cache.pre_activation.shape().back() != layer.out_dim()) {
    throw UsageError("dense_backward: stale cache, layer dimensions changed since forward");
  }
  if (!grad_out.same_shape(cache.pre_activation)) {
    throw ShapeError("dense_backward: grad_out " + shape_string(grad_out.shape()) + " vs output " +
                     shape_string(cache.pre_activation.shape()));
  }
  const std::size_t rows = cache.rows;
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();

  Tensor grad_act = grad_out;
  if (!cache.dropout_mask.empty()) {
    auto g = grad_act.values();
    const auto mask = cache.dropout_mask.values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= mask[i];
  }

  Tensor grad_pre = grad_act;
  auto gp = grad_pre.values();
  switch (layer.activation) {
    case Activation::identity: break;
    case Activation::relu: {
      const auto pre = cache.pre_activation.values();
      for (std::size_t i = 0; i < gp.size(); ++i) {
        if (!(pre[i] > 0.0)) gp[i] = 0.0;
      }
      break;
    }
    case Activation::softmax: {
      const auto p = cache.activated.values();
      const auto g = grad_act.values();
      for (std::size_t r = 0; r < rows; ++r) {
        const auto row = softmax_backward(p.subspan(r * out, out), g.subspan(r * out, out));
        std::copy(row.begin(), row.end(), gp.begin() + static_cast<std::ptrdiff_t>(r * out));
      }
      break;
    }
  }

  if (!grad_weights.same_shape(layer.weights) || !grad_bias.same_shape(layer.bias)) {
    throw ShapeError("dense_backward: gradient accumulators do not match the layer");
  }
  Tensor grad_x(cache.input.shape());
  const auto xs = cache.input.values();
  const auto w = layer.weights.values();
  auto gx = grad_x.values();
  auto gw = grad_weights.values();
  auto gb = grad_bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xrow = xs.data() + r * in;
    double* gxrow = gx.data() + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double g = gp[r * out + o];
      if (g == 0.0) continue;
      gb[o] += g;
      double* gwrow = gw.data() + o * in;
      const double* wrow = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gwrow[i] += g * xrow[i];
      for (std::size_t i = 0; i < in; ++i) gxrow[i] += g * wrow[i];
    }
  }
  return grad_x;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw UsageError("softmax of an empty vector");
  require_finite(logits, "softmax input");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

Tensor softmax(const Tensor& logits) {
  if (logits.empty()) throw UsageError("softmax of an empty tensor");
  Tensor out(logits.shape());
  const std::size_t width = logits.shape().back();
  const std::size_t rows = logits.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = softmax(logits.values().subspan(r * width, width));
    std::copy(row.begin(), row.end(), out.values().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return out;
}

std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> grad_p) {
  const double inner = dot(p, grad_p);
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (grad_p[i] - inner);
  return g;
}

double cross_entropy(std::span<const double> y, std::span<const double> p) {
  if (y.size() != p.size()) {
    throw ShapeError("cross_entropy: target length " + std::to_string(y.size()) + " vs prediction length " +
                     std::to_string(p.size()));
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0) loss -= y[i] * std::log(std::max(p[i], kProbabilityFloor));
  }
  return loss;
}

double cross_entropy(const Tensor& y, const Tensor& p) { return cross_entropy(y.values(), p.values()); }

std::vector<double> cross_entropy_grad(std::span<const double> y, std::span<const double> p) {
  if (y.size() != p.size()) throw ShapeError("cross_entropy_grad: length mismatch");
  std::vector<double> g(y.size(), 0.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0) g[i] = -y[i] / std::max(p[i], kProbabilityFloor);
  }
  return g;
}

AdamState AdamState::for_params(const Tensor& params, double lr) {
  AdamState state;
  state.lr = lr;
  state.m = Tensor::zeros_like(params);
  state.v = Tensor::zeros_like(params);
  return state;
}

void adam_step(Tensor& params, const Tensor& grads, AdamState& state) {
  if (!params.same_shape(grads)) {
    throw ShapeError("adam_step: params " + shape_string(params.shape()) + " vs grads " +
                     shape_string(grads.shape()));
  }
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m = Tensor::zeros_like(params);
    state.v = Tensor::zeros_like(params);
  }
  if (!state.m.same_shape(params) || !state.v.same_shape(params)) {
    throw ShapeError("adam_step: moment accumulators " + shape_string(state.m.shape()) +
                     " do not match params " + shape_string(params.shape()));
  }
  require_finite(grads.values(), "adam_step gradient");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  auto p = params.values();
  const auto g = grads.values();
  auto m = state.m.values();
  auto v = state.v.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
  require_finite(params.values(), "adam_step parameters");
}

double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& params, const Tensor& analytic,
                  double h) {
  if (!params.same_shape(analytic)) {
    throw ShapeError("grad_check: params " + shape_string(params.shape()) + " vs analytic " +
                     shape_string(analytic.shape()));
  }
  if (!(h > 0.0)) throw UsageError("grad_check: step must be positive");
  Tensor probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double up = f(probe);
    probe[i] = original - h;
    const double down = f(probe);
    probe[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: function is non-finite near coordinate " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * h);
    const double error = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, error);
  }
  return worst;
}

}  // namespace inflrank
