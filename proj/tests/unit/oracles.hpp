#pragma once

// Scalar reference implementations, written loop-by-loop from the defining
// formulas and sharing no code with the library kernels.

#include <cmath>
#include <cstddef>
#include <vector>

#include "amaa/objective.hpp"
#include "amaa/tensor.hpp"

namespace amaa::oracle {

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Channel gate s = sigmoid(W2 relu(W1 mean(V))).
inline std::vector<double> se_gate(const Tensor& v, const Tensor& w1, const Tensor& w2) {
  const std::size_t c = v.dim(0), n = v.size() / c, r = w1.dim(0);
  std::vector<double> z(c, 0.0), hid(r, 0.0), s(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t i = 0; i < n; ++i) z[k] += v[k * n + i];
    z[k] /= static_cast<double>(n);
  }
  for (std::size_t j = 0; j < r; ++j) {
    for (std::size_t k = 0; k < c; ++k) hid[j] += w1[j * c + k] * z[k];
    hid[j] = hid[j] > 0.0 ? hid[j] : 0.0;
  }
  for (std::size_t k = 0; k < c; ++k) {
    double a = 0.0;
    for (std::size_t j = 0; j < r; ++j) a += w2[k * r + j] * hid[j];
    s[k] = sig(a);
  }
  return s;
}

inline Tensor se_block(const Tensor& v, const Tensor& w1, const Tensor& w2) {
  const auto s = se_gate(v, w1, w2);
  const std::size_t c = v.dim(0), n = v.size() / c;
  Tensor out(v.shape());
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < n; ++i) out[k * n + i] = s[k] * v[k * n + i];
  return out;
}

// Energy of one channel (a (D, H, W) block at `x`) with clipped windows.
inline std::vector<double> energy(const double* x, std::size_t D, std::size_t H, std::size_t W,
                                  std::size_t window, double lambda) {
  const long r = static_cast<long>(window / 2);
  std::vector<double> e(D * H * W);
  for (long d = 0; d < long(D); ++d)
    for (long h = 0; h < long(H); ++h)
      for (long w = 0; w < long(W); ++w) {
        double sum = 0.0, cnt = 0.0;
        for (long a = d - r; a <= d + r; ++a)
          for (long b = h - r; b <= h + r; ++b)
            for (long c = w - r; c <= w + r; ++c) {
              if (a < 0 || b < 0 || c < 0 || a >= long(D) || b >= long(H) || c >= long(W)) continue;
              sum += x[(a * H + b) * W + c];
              cnt += 1.0;
            }
        const double mu = sum / cnt;
        double var = 0.0;
        for (long a = d - r; a <= d + r; ++a)
          for (long b = h - r; b <= h + r; ++b)
            for (long c = w - r; c <= w + r; ++c) {
              if (a < 0 || b < 0 || c < 0 || a >= long(D) || b >= long(H) || c >= long(W)) continue;
              const double dv = x[(a * H + b) * W + c] - mu;
              var += dv * dv;
            }
        var /= cnt;
        const double xi = x[(d * H + h) * W + w];
        e[(d * H + h) * W + w] = (xi - mu) * (xi - mu) / (4.0 * (var + lambda)) + 0.5;
      }
  return e;
}

// Channel-mean mode: energies of the channel-averaged volume, A = sigmoid(1/e).
inline std::vector<double> simam_attention(const Tensor& v, std::size_t window, double lambda) {
  const std::size_t c = v.dim(0), D = v.dim(1), H = v.dim(2), W = v.dim(3), n = D * H * W;
  std::vector<double> m(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < c; ++k) m[i] += v[k * n + i];
    m[i] /= static_cast<double>(c);
  }
  const auto e = energy(m.data(), D, H, W, window, lambda);
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = sig(1.0 / e[i]);
  return a;
}

// Direct same-padded convolution, one output at a time.
inline Tensor conv3d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride) {
  const std::size_t co = w.dim(0), ci = w.dim(1), k = w.dim(2), pad = k / 2;
  const std::size_t D = x.depth(), H = x.height(), W = x.width();
  const std::size_t od = (D + stride - 1) / stride, oh = (H + stride - 1) / stride,
                    ow = (W + stride - 1) / stride;
  Tensor y({co, od, oh, ow});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t d = 0; d < od; ++d)
      for (std::size_t h = 0; h < oh; ++h)
        for (std::size_t x_ = 0; x_ < ow; ++x_) {
          double s = b[o];
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t e = 0; e < k; ++e)
                for (std::size_t f = 0; f < k; ++f) {
                  const long id = long(d * stride + a) - long(pad);
                  const long ih = long(h * stride + e) - long(pad);
                  const long iw = long(x_ * stride + f) - long(pad);
                  if (id < 0 || ih < 0 || iw < 0 || id >= long(D) || ih >= long(H) ||
                      iw >= long(W))
                    continue;
                  s += w[(((o * ci + c) * k + a) * k + e) * k + f] * x.at(c, id, ih, iw);
                }
          y.at(o, d, h, x_) = s;
        }
  return y;
}

// Plain 1x1x1 conv: out[o][i] = b[o] + sum_c w[o][c] x[c][i].
inline Tensor conv1(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t ci = x.dim(0), co = w.dim(0), n = x.size() / ci;
  Tensor out({co, x.dim(1), x.dim(2), x.dim(3)});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[o];
      for (std::size_t c = 0; c < ci; ++c) s += w[o * ci + c] * x[c * n + i];
      out[o * n + i] = s;
    }
  return out;
}

inline Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2), a.dim(3)});
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[a.size() + i] = b[i];
  return out;
}

// F_dec + alpha * M * P(V'), M = sigmoid(conv1([F_dec; V'])).
inline Tensor afg_fuse(const Tensor& f, const Tensor& enc, const Tensor& gw, const Tensor& gb,
                       const Tensor* proj, double alpha) {
  const Tensor m = conv1(concat(f, enc), gw, gb);
  const Tensor p = proj ? conv1(enc, *proj, Tensor({proj->dim(0)})) : enc;
  const std::size_t c = f.dim(0), n = f.size() / c;
  Tensor out(f.shape());
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t i = 0; i < n; ++i) out[k * n + i] = f[k * n + i] + alpha * (sig(m[i]) * p[k * n + i]);
  return out;
}

// Probability guard inside every log.
inline constexpr double kLogEps = 1e-12;

inline double ce_oracle(const Tensor& p, const LabelVolume& y, const std::vector<double>& w) {
  const std::size_t n = y.size();
  double s = 0.0, cnt = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!y.valid(i)) continue;
    s += -w[y.ids[i]] * std::log(p[y.ids[i] * n + i] + kLogEps);
    cnt += 1.0;
  }
  return s / cnt;
}

inline double affinity_oracle(const Tensor& p, const LabelVolume& y) {
  const std::size_t c = p.dim(0), n = y.size();
  double acc = 0.0;
  int present = 0;
  for (std::size_t k = 0; k < c; ++k) {
    double tp = 0.0, sp = 0.0, nc = 0.0, tn = 0.0, mc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pk = p[k * n + i];
      sp += pk;
      if (y.ids[i] == k) {
        tp += pk;
        nc += 1.0;
      } else {
        tn += 1.0 - pk;
        mc += 1.0;
      }
    }
    if (nc == 0.0) continue;
    ++present;
    double term = std::log(tp / (sp + kLogEps) + kLogEps) + std::log(tp / nc + kLogEps);
    if (mc > 0.0) term += std::log(tn / mc + kLogEps);
    acc += term / 3.0;
  }
  return present ? -acc / present : 0.0;
}

inline double consistency_oracle(const Tensor& p, std::size_t window) {
  const std::size_t D = p.dim(1), H = p.dim(2), W = p.dim(3), n = D * H * W;
  const long r = static_cast<long>(window / 2);
  double s = 0.0;
  for (long d = 0; d < long(D); ++d)
    for (long h = 0; h < long(H); ++h)
      for (long w = 0; w < long(W); ++w) {
        double sum = 0.0, cnt = 0.0;
        for (long a = d - r; a <= d + r; ++a)
          for (long b = h - r; b <= h + r; ++b)
            for (long e = w - r; e <= w + r; ++e) {
              if (a < 0 || b < 0 || e < 0 || a >= long(D) || b >= long(H) || e >= long(W)) continue;
              sum += 1.0 - p[(a * H + b) * W + e];
              cnt += 1.0;
            }
        const double o = 1.0 - p[(d * H + h) * W + w];
        s += std::abs(o - sum / cnt);
      }
  return s / static_cast<double>(n);
}

inline Tensor one_hot(const LabelVolume& y, std::size_t c) {
  const std::size_t n = y.size();
  Tensor p({c, y.dims.depth, y.dims.height, y.dims.width});
  for (std::size_t i = 0; i < n; ++i) p[y.ids[i] * n + i] = 1.0;
  return p;
}

}  // namespace amaa::oracle
