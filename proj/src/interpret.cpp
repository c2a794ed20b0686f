#include "inflrank/interpret.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "inflrank/error.hpp"

namespace inflrank {

FeatureMap FeatureMap::from_unrolled(std::size_t s1, std::size_t s2, std::size_t f_n, std::span<const double> unrolled) {
  if (s1 * s2 * f_n != unrolled.size()) {
    throw ShapeError("feature map " + std::to_string(s1) + "x" + std::to_string(s2) + "x" + std::to_string(f_n) +
                     " cannot hold " + std::to_string(unrolled.size()) + " values");
  }
  return FeatureMap{s1, s2, f_n, Tensor({s1, s2, f_n}, std::vector<double>(unrolled.begin(), unrolled.end()))};
}

Tensor importance_global(const WSimParams& params) { return params.wv_diag; }

Tensor importance_account(const WSimParams& params, const PooledAccount& account) {
  if (account.visual_pooled.size() != params.d_v()) {
    throw ShapeError("importance_account: account '" + account.id + "' visual length " +
                     std::to_string(account.visual_pooled.size()) + " vs W_v " + std::to_string(params.d_v()));
  }
  Tensor out({params.d_v()});
  for (std::size_t j = 0; j < params.d_v(); ++j) out[j] = params.wv_diag[j] * account.visual_pooled[j];
  return out;
}

Tensor normalize_minmax(const Tensor& m) {
  Tensor out = Tensor::zeros_like(m);
  if (m.empty()) return out;
  const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = (m[i] - *lo) / range;
  return out;
}

Heatmap heatmap(const Tensor& importance, const FeatureMap& features) {
  const std::size_t d_v = features.s1 * features.s2 * features.f_n;
  if (importance.size() != d_v || features.values.size() != d_v) {
    throw ShapeError("heatmap: importance length " + std::to_string(importance.size()) + " vs feature map " +
                     std::to_string(features.s1) + "x" + std::to_string(features.s2) + "x" +
                     std::to_string(features.f_n));
  }
  Heatmap h;
  h.raw = Tensor({features.s1, features.s2});
  const auto imp = importance.values();
  const auto x = features.values.values();
  for (std::size_t pos = 0; pos < features.s1 * features.s2; ++pos) {
    double sum = 0.0;
    for (std::size_t ch = 0; ch < features.f_n; ++ch) sum += imp[pos * features.f_n + ch] * x[pos * features.f_n + ch];
    h.raw[pos] = sum;
  }
  require_finite(h.raw.values(), "heatmap");
  h.normalized = normalize_minmax(h.raw);
  return h;
}

Tensor upsample(const Tensor& normalized, std::size_t rows_out, std::size_t cols_out) {
  if (normalized.rank() != 2) throw ShapeError("upsample expects a matrix");
  const std::size_t rows = normalized.dim(0);
  const std::size_t cols = normalized.dim(1);
  if (rows_out < rows || cols_out < cols) throw UsageError("upsample: output must be at least the input size");
  Tensor out({rows_out, cols_out});
  auto source = [](std::size_t i, std::size_t n_in, std::size_t n_out) {
    return n_out == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1);
  };
  for (std::size_t i = 0; i < rows_out; ++i) {
    const double y = source(i, rows, rows_out);
    const std::size_t y0 = std::min(static_cast<std::size_t>(y), rows - 1);
    const std::size_t y1 = std::min(y0 + 1, rows - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t j = 0; j < cols_out; ++j) {
      const double x = source(j, cols, cols_out);
      const std::size_t x0 = std::min(static_cast<std::size_t>(x), cols - 1);
      const std::size_t x1 = std::min(x0 + 1, cols - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = (1.0 - fx) * normalized(y0, x0) + fx * normalized(y0, x1);
      const double bottom = (1.0 - fx) * normalized(y1, x0) + fx * normalized(y1, x1);
      out(i, j) = std::clamp((1.0 - fy) * top + fy * bottom, 0.0, 1.0);
    }
  }
  return out;
}

double positive_mass_share(const Tensor& raw, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  if (raw.rank() != 2) throw ShapeError("positive_mass_share expects a matrix");
  double inside = 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < raw.dim(0); ++r) {
    for (std::size_t c = 0; c < raw.dim(1); ++c) {
      const double v = std::max(raw(r, c), 0.0);
      total += v;
      if (r >= r0 && r < r1 && c >= c0 && c < c1) inside += v;
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

void write_pgm(const Tensor& image, const std::filesystem::path& path) {
  if (image.rank() != 2) throw ShapeError("write_pgm expects a matrix");
  for (double v : image.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("write_pgm: values must lie in [0, 1]");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "P5\n" << image.dim(1) << ' ' << image.dim(0) << "\n255\n";
  for (double v : image.values()) out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    std::size_t value = 0;
    const std::size_t begin = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
    }
    if (pos == begin) throw DataError("'" + path.string() + "' is not a valid PGM header");
    return value;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw DataError("'" + path.string() + "' is not a P5 PGM");
  pos = 2;
  const std::size_t width = read_int();
  const std::size_t height = read_int();
  const std::size_t maxval = read_int();
  if (maxval != 255 || width == 0 || height == 0) throw DataError("'" + path.string() + "': unsupported PGM");
  ++pos;  // single whitespace before the raster
  if (bytes.size() - pos != width * height) throw DataError("'" + path.string() + "': raster size mismatch");
  Tensor out({height, width});
  for (std::size_t i = 0; i < width * height; ++i) {
    out[i] = static_cast<double>(static_cast<unsigned char>(bytes[pos + i])) / 255.0;
  }
  return out;
}

void write_matrix_csv(const Tensor& m, const std::filesystem::path& path) {
  if (m.rank() != 2) throw ShapeError("write_matrix_csv expects a matrix");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  char buf[40];
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    for (std::size_t c = 0; c < m.dim(1); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace inflrank
