#pragma once

// Dense math for the tiny trainable backend: matrices, Adam, and a GRU cell
// with hand-written backprop. Everything is double precision and
// single-threaded, so evaluation-mode results are bit-identical across runs.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace sig::nn {

struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {a.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {a.data() + r * cols, cols}; }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

// Parameter with gradient and Adam moments.
struct Param {
  Mat w, g, m, v;

  void init(std::size_t rows, std::size_t cols) {
    w = Mat(rows, cols);
    g = Mat(rows, cols);
    m = Mat(rows, cols);
    v = Mat(rows, cols);
  }
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
  }
  double range(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

inline void glorot_init(Mat& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  double scale = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& x : m.a) x = rng.range(-scale, scale);
}

// y += W x
inline void addmv(const Mat& W, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double* wr = W.a.data() + r * W.cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < W.cols; ++c) acc += wr[c] * x[c];
    y[r] += acc;
  }
}

// dW += dy ⊗ x ; dx += Wᵀ dy
inline void backmv(const Mat& W, Mat& dW, std::span<const double> x, std::span<const double> dy,
                   std::span<double> dx) {
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* dwr = dW.a.data() + r * W.cols;
    const double* wr = W.a.data() + r * W.cols;
    for (std::size_t c = 0; c < W.cols; ++c) {
      dwr[c] += g * x[c];
      dx[c] += wr[c] * g;
    }
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// In-place stable softmax.
inline void softmax(std::span<double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

struct GruCache {
  std::vector<double> x, hprev, z, r, n, hr;
};

// Standard GRU: z,r gates, candidate n, h' = (1-z)*n + z*h.
class GruCell {
 public:
  GruCell() = default;
  GruCell(std::size_t input, std::size_t hidden) { init(input, hidden); }

  void init(std::size_t input, std::size_t hidden) {
    input_ = input;
    hidden_ = hidden;
    for (Param* p : {&Wz_, &Wr_, &Wn_}) p->init(hidden, input);
    for (Param* p : {&Uz_, &Ur_, &Un_}) p->init(hidden, hidden);
    for (Param* p : {&bz_, &br_, &bn_}) p->init(1, hidden);
  }

  void randomize(Rng& rng) {
    for (Param* p : {&Wz_, &Wr_, &Wn_}) glorot_init(p->w, input_, hidden_, rng);
    for (Param* p : {&Uz_, &Ur_, &Un_}) glorot_init(p->w, hidden_, hidden_, rng);
  }

  std::size_t hidden_size() const { return hidden_; }
  std::size_t input_size() const { return input_; }

  void forward(std::span<const double> x, std::span<const double> hprev, std::span<double> hout,
               GruCache* cache) const {
    std::vector<double> z(hidden_), r(hidden_), n(hidden_), hr(hidden_);
    for (std::size_t i = 0; i < hidden_; ++i) {
      z[i] = bz_.w.a[i];
      r[i] = br_.w.a[i];
      n[i] = bn_.w.a[i];
    }
    addmv(Wz_.w, x, z);
    addmv(Uz_.w, hprev, z);
    addmv(Wr_.w, x, r);
    addmv(Ur_.w, hprev, r);
    for (std::size_t i = 0; i < hidden_; ++i) {
      z[i] = sigmoid(z[i]);
      r[i] = sigmoid(r[i]);
    }
    for (std::size_t i = 0; i < hidden_; ++i) hr[i] = r[i] * hprev[i];
    addmv(Wn_.w, x, n);
    addmv(Un_.w, hr, n);
    for (std::size_t i = 0; i < hidden_; ++i) n[i] = std::tanh(n[i]);
    for (std::size_t i = 0; i < hidden_; ++i) hout[i] = (1.0 - z[i]) * n[i] + z[i] * hprev[i];
    if (cache) {
      cache->x.assign(x.begin(), x.end());
      cache->hprev.assign(hprev.begin(), hprev.end());
      cache->z = std::move(z);
      cache->r = std::move(r);
      cache->n = std::move(n);
      cache->hr = std::move(hr);
    }
  }

  // dh is the gradient on this step's output; dx and dhprev accumulate.
  void backward(const GruCache& c, std::span<const double> dh, std::span<double> dx,
                std::span<double> dhprev) {
    const std::size_t H = hidden_;
    std::vector<double> dn(H), dz(H), dn_pre(H), dz_pre(H), dr(H), dr_pre(H), dhr(H, 0.0);
    for (std::size_t i = 0; i < H; ++i) {
      dn[i] = dh[i] * (1.0 - c.z[i]);
      dz[i] = dh[i] * (c.hprev[i] - c.n[i]);
      dhprev[i] += dh[i] * c.z[i];
      dn_pre[i] = dn[i] * (1.0 - c.n[i] * c.n[i]);
      dz_pre[i] = dz[i] * c.z[i] * (1.0 - c.z[i]);
    }
    backmv(Wn_.w, Wn_.g, c.x, dn_pre, dx);
    backmv(Un_.w, Un_.g, c.hr, dn_pre, dhr);
    for (std::size_t i = 0; i < H; ++i) {
      bn_.g.a[i] += dn_pre[i];
      dr[i] = dhr[i] * c.hprev[i];
      dhprev[i] += dhr[i] * c.r[i];
      dr_pre[i] = dr[i] * c.r[i] * (1.0 - c.r[i]);
    }
    backmv(Wz_.w, Wz_.g, c.x, dz_pre, dx);
    backmv(Uz_.w, Uz_.g, c.hprev, dz_pre, dhprev);
    backmv(Wr_.w, Wr_.g, c.x, dr_pre, dx);
    backmv(Ur_.w, Ur_.g, c.hprev, dr_pre, dhprev);
    for (std::size_t i = 0; i < H; ++i) {
      bz_.g.a[i] += dz_pre[i];
      br_.g.a[i] += dr_pre[i];
    }
  }

  void collect(std::vector<Param*>& out) {
    for (Param* p : {&Wz_, &Uz_, &bz_, &Wr_, &Ur_, &br_, &Wn_, &Un_, &bn_}) out.push_back(p);
  }

 private:
  std::size_t input_ = 0;
  std::size_t hidden_ = 0;
  Param Wz_, Uz_, bz_, Wr_, Ur_, br_, Wn_, Un_, bn_;
};

struct Adam {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 5.0;
  long long t = 0;

  void step(const std::vector<Param*>& params) {
    ++t;
    double norm_sq = 0.0;
    for (Param* p : params) {
      for (double g : p->g.a) norm_sq += g * g;
    }
    double scale = 1.0;
    double norm = std::sqrt(norm_sq);
    if (clip > 0.0 && norm > clip) scale = clip / norm;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (Param* p : params) {
      for (std::size_t i = 0; i < p->w.a.size(); ++i) {
        double g = p->g.a[i] * scale;
        p->m.a[i] = beta1 * p->m.a[i] + (1.0 - beta1) * g;
        p->v.a[i] = beta2 * p->v.a[i] + (1.0 - beta2) * g * g;
        double mhat = p->m.a[i] / bc1;
        double vhat = p->v.a[i] / bc2;
        p->w.a[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  void zero_grads(const std::vector<Param*>& params) {
    for (Param* p : params) p->g.zero();
  }
};

}  // namespace sig::nn
