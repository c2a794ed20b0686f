#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "inflrank/rng.hpp"

namespace inflrank {

// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  void fill(double value);

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

// Throws NumericError naming `what` if any entry is NaN or Inf.
void require_finite(std::span<const double> values, const std::string& what);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

enum class Activation { identity, relu, softmax };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Tensor weights;  // out x in
  Tensor bias;     // out
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.dim(1); }
  std::size_t out_dim() const { return weights.dim(0); }
  std::size_t parameter_count() const { return weights.size() + bias.size(); }

  // Glorot-uniform weights in +-sqrt(6 / (in + out)), zero bias.
  static DenseLayer glorot(std::size_t in, std::size_t out, Activation activation, Rng& rng);
  static DenseLayer zeros(std::size_t in, std::size_t out, Activation activation);
};

// Everything dense_backward needs. Bound to the layer that produced it.
struct DenseCache {
  const DenseLayer* layer = nullptr;
  std::size_t rows = 0;
  Tensor input;
  Tensor pre_activation;
  Tensor activated;     // after activation, before dropout
  Tensor dropout_mask;  // scale factors (0 or 1/(1-rate)); empty if no dropout
};

struct DenseOutput {
  Tensor y;
  DenseCache cache;
};

struct DenseGrads {
  Tensor grad_x;
  Tensor grad_weights;
  Tensor grad_bias;
};

// y = activation(W x + b) per row of x (x is [in] or [rows, in]). In training
// mode with a positive rate, inverted dropout follows the activation.
DenseOutput dense_forward(const DenseLayer& layer, const Tensor& x, double dropout_rate, Rng& rng,
                          bool training);
DenseOutput dense_forward(const DenseLayer& layer, const Tensor& x);

DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache, const Tensor& grad_out);

// Same as dense_backward but adds the parameter gradients into existing
// accumulators. Returns grad_x.
Tensor dense_backward_accumulate(const DenseLayer& layer, const DenseCache& cache, const Tensor& grad_out,
                                 Tensor& grad_weights, Tensor& grad_bias);

Tensor softmax(const Tensor& logits);
std::vector<double> softmax(std::span<const double> logits);

// Backward of softmax for one row: returns J^T g given p = softmax(z).
std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> grad_p);

inline constexpr double kProbabilityFloor = 1e-12;

// -sum y_i log(max(p_i, 1e-12)).
double cross_entropy(std::span<const double> y, std::span<const double> p);
double cross_entropy(const Tensor& y, const Tensor& p);
// d/dp of cross_entropy (unclamped branch).
std::vector<double> cross_entropy_grad(std::span<const double> y, std::span<const double> p);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Tensor m;
  Tensor v;

  static AdamState for_params(const Tensor& params, double lr = 1e-3);
};

// One bias-corrected Adam update of params in place.
void adam_step(Tensor& params, const Tensor& grads, AdamState& state);

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& params,
                  const Tensor& analytic, double h = 1e-5);

}  // namespace inflrank
