#pragma once

// Exact (O(N^2)) t-SNE to two dimensions: per-point perplexity calibration
// by binary search, early exaggeration, and momentum gradient descent with
// adaptive gains. Deterministic given the seed; intended for the modest
// point counts a viz run produces.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sig/corpus.hpp"
#include "sig/nn.hpp"

namespace sig {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 500;
  double learning_rate = 100.0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 100;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<double> pairwise_sq_dists(const std::vector<std::vector<double>>& x) {
  const std::size_t n = x.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) {
        double diff = x[i][k] - x[j][k];
        acc += diff * diff;
      }
      d[i * n + j] = acc;
      d[j * n + i] = acc;
    }
  }
  return d;
}

// Row-conditional probabilities at the beta matching the target entropy.
inline void calibrate_row(const std::vector<double>& d, std::size_t n, std::size_t i,
                          double target_entropy, std::vector<double>& p_row) {
  double beta = 1.0, beta_min = -1.0, beta_max = -1.0;
  for (int iter = 0; iter < 64; ++iter) {
    double sum = 0.0, dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        p_row[j] = 0.0;
        continue;
      }
      double v = std::exp(-beta * d[i * n + j]);
      p_row[j] = v;
      sum += v;
      dot += v * d[i * n + j];
    }
    if (sum <= 0.0) sum = 1e-12;
    double entropy = std::log(sum) + beta * dot / sum;
    double diff = entropy - target_entropy;
    if (std::abs(diff) < 1e-5) break;
    if (diff > 0) {
      beta_min = beta;
      beta = beta_max < 0 ? beta * 2.0 : 0.5 * (beta + beta_max);
    } else {
      beta_max = beta;
      beta = beta_min < 0 ? beta / 2.0 : 0.5 * (beta + beta_min);
    }
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) sum += p_row[j];
  if (sum <= 0.0) sum = 1e-12;
  for (std::size_t j = 0; j < n; ++j) p_row[j] /= sum;
}

}  // namespace detail

inline std::vector<std::array<double, 2>> tsne_2d(const std::vector<std::vector<double>>& points,
                                                  const TsneOptions& options = {}) {
  const std::size_t n = points.size();
  if (n == 0) return {};
  if (n == 1) return {{0.0, 0.0}};

  double perplexity = options.perplexity;
  double max_perp = static_cast<double>(n - 1) / 3.0;
  if (perplexity > max_perp) perplexity = std::max(2.0, max_perp);
  const double target_entropy = std::log(perplexity);

  auto d = detail::pairwise_sq_dists(points);
  std::vector<double> p(n * n, 0.0);
  {
    std::vector<double> row(n);
    for (std::size_t i = 0; i < n; ++i) {
      detail::calibrate_row(d, n, i, target_entropy, row);
      for (std::size_t j = 0; j < n; ++j) p[i * n + j] = row[j];
    }
  }
  // symmetrize and normalize
  double psum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double v = 0.5 * (p[i * n + j] + p[j * n + i]);
      p[i * n + j] = v;
      p[j * n + i] = v;
      psum += 2.0 * v;
    }
  }
  for (double& v : p) v = std::max(v / psum, 1e-12);

  nn::Rng rng(options.seed + 1);
  auto gaussian = [&rng]() {
    double u1 = std::max(rng.uniform(), 1e-12);
    double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  };
  std::vector<std::array<double, 2>> y(n), dy(n, {0.0, 0.0}), vel(n, {0.0, 0.0});
  std::vector<std::array<double, 2>> gains(n, {1.0, 1.0});
  for (auto& pt : y) pt = {1e-4 * gaussian(), 1e-4 * gaussian()};

  std::vector<double> q(n * n, 0.0);
  for (int iter = 0; iter < options.iterations; ++iter) {
    const double exaggeration = iter < options.exaggeration_iters ? options.early_exaggeration : 1.0;
    double qsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double dx = y[i][0] - y[j][0];
        double dyv = y[i][1] - y[j][1];
        double num = 1.0 / (1.0 + dx * dx + dyv * dyv);
        q[i * n + j] = num;
        q[j * n + i] = num;
        qsum += 2.0 * num;
      }
    }
    const double momentum = iter < 250 ? 0.5 : 0.8;
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double num = q[i * n + j];
        double qij = std::max(num / qsum, 1e-12);
        double mult = (exaggeration * p[i * n + j] - qij) * num;
        gx += mult * (y[i][0] - y[j][0]);
        gy += mult * (y[i][1] - y[j][1]);
      }
      dy[i] = {4.0 * gx, 4.0 * gy};
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        bool same_sign = (dy[i][static_cast<std::size_t>(k)] > 0.0) ==
                         (vel[i][static_cast<std::size_t>(k)] > 0.0);
        auto& g = gains[i][static_cast<std::size_t>(k)];
        g = same_sign ? std::max(g * 0.8, 0.01) : g + 0.2;
        auto& v = vel[i][static_cast<std::size_t>(k)];
        v = momentum * v - options.learning_rate * g * dy[i][static_cast<std::size_t>(k)];
        y[i][static_cast<std::size_t>(k)] += v;
      }
    }
    // recenter
    double cx = 0.0, cy = 0.0;
    for (const auto& pt : y) {
      cx += pt[0];
      cy += pt[1];
    }
    cx /= static_cast<double>(n);
    cy /= static_cast<double>(n);
    for (auto& pt : y) {
      pt[0] -= cx;
      pt[1] -= cy;
    }
  }
  return y;
}

}  // namespace sig
