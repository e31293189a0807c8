#include "amaa/ops.hpp"

#include <algorithm>
#include <cmath>

namespace amaa::ops {
namespace {

// Generic same-padded convolution over (C, D, H, W) volumes with an
// anisotropic (kd, kh, kw) kernel. The 2-D image path maps onto D = 1.
struct ConvGeom {
  std::size_t c_in, c_out;
  std::size_t d, h, w;        // input
  std::size_t od, oh, ow;     // output
  std::size_t kd, kh, kw;
  std::size_t sd, sh, sw;
  std::ptrdiff_t pd, ph, pw;
};

std::size_t out_extent(std::size_t n, std::size_t k, std::size_t s) {
  const std::size_t p = k / 2;
  return (n + 2 * p - k) / s + 1;
}

ConvGeom make_geom(const Shape& in, std::size_t c_out, std::size_t kd,
                   std::size_t kh, std::size_t kw, std::size_t sd,
                   std::size_t sh, std::size_t sw) {
  ConvGeom g{};
  g.c_in = in[0];
  g.c_out = c_out;
  g.d = in[1];
  g.h = in[2];
  g.w = in[3];
  g.kd = kd;
  g.kh = kh;
  g.kw = kw;
  g.sd = sd;
  g.sh = sh;
  g.sw = sw;
  g.pd = static_cast<std::ptrdiff_t>(kd / 2);
  g.ph = static_cast<std::ptrdiff_t>(kh / 2);
  g.pw = static_cast<std::ptrdiff_t>(kw / 2);
  g.od = out_extent(g.d, kd, sd);
  g.oh = out_extent(g.h, kh, sh);
  g.ow = out_extent(g.w, kw, sw);
  return g;
}

// Output index range [lo, hi) for which o * s + k - p lands inside [0, n).
void valid_range(std::size_t n_in, std::size_t n_out, std::size_t s,
                 std::size_t k, std::ptrdiff_t p, std::size_t& lo,
                 std::size_t& hi) {
  const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(k) - p;
  const auto ss = static_cast<std::ptrdiff_t>(s);
  std::ptrdiff_t l = 0;
  if (off < 0) l = (-off + ss - 1) / ss;
  // largest o with o*s + off <= n_in - 1
  std::ptrdiff_t h = static_cast<std::ptrdiff_t>(n_in) - 1 - off;
  h = h < 0 ? -1 : h / ss;
  lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(l, 0));
  hi = static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(h + 1, 0, static_cast<std::ptrdiff_t>(n_out)));
  if (hi < lo) hi = lo;
}

// Visits every (output row, input row, weight) triple of the convolution and
// hands contiguous-in-output row spans to `fn`.
template <typename Fn>
void for_each_tap(const ConvGeom& g, Fn&& fn) {
  const std::size_t in_sz = g.d * g.h * g.w;
  const std::size_t out_sz = g.od * g.oh * g.ow;
  for (std::size_t co = 0; co < g.c_out; ++co) {
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      for (std::size_t a = 0; a < g.kd; ++a) {
        std::size_t d_lo, d_hi;
        valid_range(g.d, g.od, g.sd, a, g.pd, d_lo, d_hi);
        for (std::size_t b = 0; b < g.kh; ++b) {
          std::size_t h_lo, h_hi;
          valid_range(g.h, g.oh, g.sh, b, g.ph, h_lo, h_hi);
          for (std::size_t c = 0; c < g.kw; ++c) {
            std::size_t w_lo, w_hi;
            valid_range(g.w, g.ow, g.sw, c, g.pw, w_lo, w_hi);
            if (w_lo >= w_hi) continue;
            const std::size_t widx =
                (((co * g.c_in + ci) * g.kd + a) * g.kh + b) * g.kw + c;
            for (std::size_t od = d_lo; od < d_hi; ++od) {
              const std::size_t id = od * g.sd + a - g.pd;
              for (std::size_t oh = h_lo; oh < h_hi; ++oh) {
                const std::size_t ih = oh * g.sh + b - g.ph;
                const std::size_t out_row =
                    co * out_sz + (od * g.oh + oh) * g.ow;
                const std::size_t in_row = ci * in_sz + (id * g.h + ih) * g.w;
                fn(widx, out_row, in_row, static_cast<std::ptrdiff_t>(c) - g.pw,
                   w_lo, w_hi);
              }
            }
          }
        }
      }
    }
  }
}

Tensor conv_forward(const Tensor& input, const Tensor& kernel,
                    const Tensor& bias, const ConvGeom& g) {
  Tensor out = Tensor::volume(g.c_out, g.od, g.oh, g.ow);
  const std::size_t out_sz = g.od * g.oh * g.ow;
  double* o = out.data();
  for (std::size_t co = 0; co < g.c_out; ++co) {
    std::fill(o + co * out_sz, o + (co + 1) * out_sz, bias[co]);
  }
  const double* in = input.data();
  const double* k = kernel.data();
  const std::size_t sw = g.sw;
  for_each_tap(g, [&](std::size_t widx, std::size_t out_row, std::size_t in_row,
                      std::ptrdiff_t off, std::size_t lo, std::size_t hi) {
    const double wv = k[widx];
    double* orow = o + out_row;
    const double* irow = in + in_row;
    if (sw == 1) {
      for (std::size_t x = lo; x < hi; ++x) orow[x] += wv * irow[x + off];
    } else {
      for (std::size_t x = lo; x < hi; ++x) orow[x] += wv * irow[x * sw + off];
    }
  });
  return out;
}

void conv_backward(const Tensor& input, const Tensor& kernel,
                   const Tensor& grad_out, const ConvGeom& g,
                   Tensor* grad_input, Tensor* grad_kernel, Tensor* grad_bias) {
  const std::size_t out_sz = g.od * g.oh * g.ow;
  const double* go = grad_out.data();
  if (grad_bias) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      double acc = 0.0;
      for (std::size_t i = 0; i < out_sz; ++i) acc += go[co * out_sz + i];
      (*grad_bias)[co] += acc;
    }
  }
  const double* in = input.data();
  const double* k = kernel.data();
  double* gi = grad_input ? grad_input->data() : nullptr;
  double* gk = grad_kernel ? grad_kernel->data() : nullptr;
  const std::size_t sw = g.sw;
  for_each_tap(g, [&](std::size_t widx, std::size_t out_row, std::size_t in_row,
                      std::ptrdiff_t off, std::size_t lo, std::size_t hi) {
    const double* grow = go + out_row;
    if (gi) {
      const double wv = k[widx];
      double* irow = gi + in_row;
      for (std::size_t x = lo; x < hi; ++x) irow[x * sw + off] += wv * grow[x];
    }
    if (gk) {
      const double* irow = in + in_row;
      double acc = 0.0;
      for (std::size_t x = lo; x < hi; ++x) acc += grow[x] * irow[x * sw + off];
      gk[widx] += acc;
    }
  });
}

void check_stride(std::size_t stride) {
  if (stride != 1 && stride != 2) {
    throw ShapeError("convolution stride must be 1 or 2, got " +
                     std::to_string(stride));
  }
}

ConvGeom conv3d_geom(const Tensor& input, const Tensor& kernel,
                     std::size_t stride) {
  input.require_rank(4);
  if (kernel.rank() != 5) {
    throw ShapeError("conv3d kernel must be rank 5 (C_out, C_in, k, k, k), got " +
                     to_string(kernel.shape()));
  }
  const std::size_t k = kernel.dim(2);
  if (kernel.dim(3) != k || kernel.dim(4) != k || (k != 1 && k != 3)) {
    throw UnsupportedKernelError("unsupported conv3d kernel " + to_string(kernel.shape()) +
                     " (only 1x1x1 and 3x3x3)");
  }
  if (kernel.dim(1) != input.channels()) {
    throw ShapeError("conv3d channel mismatch: input has " +
                     std::to_string(input.channels()) + ", kernel expects " +
                     std::to_string(kernel.dim(1)));
  }
  check_stride(stride);
  return make_geom(input.shape(), kernel.dim(0), k, k, k, stride, stride,
                   stride);
}

ConvGeom conv2d_geom(const Tensor& image, const Tensor& kernel,
                     std::size_t stride) {
  image.require_rank(3);
  if (kernel.rank() != 4) {
    throw ShapeError("conv2d kernel must be rank 4 (C_out, C_in, k, k), got " +
                     to_string(kernel.shape()));
  }
  const std::size_t k = kernel.dim(2);
  if (kernel.dim(3) != k || (k != 1 && k != 3)) {
    throw UnsupportedKernelError("unsupported conv2d kernel " + to_string(kernel.shape()));
  }
  if (kernel.dim(1) != image.channels()) {
    throw ShapeError("conv2d channel mismatch: image has " +
                     std::to_string(image.channels()) + ", kernel expects " +
                     std::to_string(kernel.dim(1)));
  }
  check_stride(stride);
  const Shape as_volume{image.dim(0), 1, image.dim(1), image.dim(2)};
  return make_geom(as_volume, kernel.dim(0), 1, k, k, 1, stride, stride);
}

void check_bias(const Tensor& bias, std::size_t c_out) {
  if (bias.rank() != 1 || bias.dim(0) != c_out) {
    throw ShapeError("bias must have shape (" + std::to_string(c_out) +
                     "), got " + to_string(bias.shape()));
  }
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride) {
  const ConvGeom g = conv3d_geom(input, kernel, stride);
  check_bias(bias, g.c_out);
  return conv_forward(input, kernel, bias, g);
}

Tensor conv2d(const Tensor& image, const Tensor& kernel, const Tensor& bias,
              std::size_t stride) {
  const ConvGeom g = conv2d_geom(image, kernel, stride);
  check_bias(bias, g.c_out);
  return conv_forward(image, kernel, bias, g)
      .reshaped({g.c_out, g.oh, g.ow});
}

void conv3d_backward(const Tensor& input, const Tensor& kernel,
                     std::size_t stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernel,
                     Tensor* grad_bias) {
  conv_backward(input, kernel, grad_out, conv3d_geom(input, kernel, stride),
                grad_input, grad_kernel, grad_bias);
}

void conv2d_backward(const Tensor& image, const Tensor& kernel,
                     std::size_t stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernel,
                     Tensor* grad_bias) {
  conv_backward(image, kernel, grad_out, conv2d_geom(image, kernel, stride),
                grad_input, grad_kernel, grad_bias);
}

Tensor global_avg_pool3d(const Tensor& input) {
  input.require_rank(4);
  const std::size_t n = input.voxels();
  if (n == 0 || input.channels() == 0) {
    throw ShapeError("global_avg_pool3d on empty volume " +
                     to_string(input.shape()));
  }
  Tensor out({input.channels()});
  const double* p = input.data();
  for (std::size_t c = 0; c < input.channels(); ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += p[c * n + i];
    out[c] = acc / static_cast<double>(n);
  }
  return out;
}

namespace {

void check_window(std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("neighbourhood window must be odd and >= 1, got " +
                      std::to_string(window));
  }
}

// In-place clipped box sum along one axis of a (C, D, H, W) buffer.
void box_sum_axis(std::vector<double>& buf, const Shape& s, int axis,
                  std::size_t radius) {
  const std::size_t n = s[axis + 1];
  std::size_t stride = 1;
  for (int a = 3; a > axis + 1; --a) stride *= s[a];
  const std::size_t outer = element_count(s) / (n * stride);
  std::vector<double> line(n);
  std::vector<double> prefix(n + 1);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < stride; ++in) {
      const std::size_t base = o * n * stride + in;
      prefix[0] = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        line[i] = buf[base + i * stride];
      }
      for (std::size_t i = 0; i < n; ++i) {
        // direct summation keeps results independent of prefix cancellation
        const std::size_t lo = i >= radius ? i - radius : 0;
        const std::size_t hi = std::min(n - 1, i + radius);
        double acc = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) acc += line[j];
        buf[base + i * stride] = acc;
      }
    }
  }
}

std::size_t clipped_len(std::size_t i, std::size_t n, std::size_t r) {
  const std::size_t lo = i >= r ? i - r : 0;
  const std::size_t hi = std::min(n - 1, i + r);
  return hi - lo + 1;
}

// Number of real voxels in the clipped window of every position.
std::vector<double> window_counts(const GridDims& g, std::size_t radius) {
  std::vector<double> counts(g.count());
  std::size_t idx = 0;
  for (std::size_t d = 0; d < g.depth; ++d) {
    const std::size_t nd = clipped_len(d, g.depth, radius);
    for (std::size_t h = 0; h < g.height; ++h) {
      const std::size_t nh = clipped_len(h, g.height, radius);
      for (std::size_t w = 0; w < g.width; ++w) {
        counts[idx++] =
            static_cast<double>(nd * nh * clipped_len(w, g.width, radius));
      }
    }
  }
  return counts;
}

Tensor box_sum(const Tensor& input, std::size_t window) {
  const std::size_t r = window / 2;
  Tensor out = input;
  if (r == 0) return out;
  for (int axis = 2; axis >= 0; --axis) {
    box_sum_axis(out.storage(), out.shape(), axis, r);
  }
  return out;
}

}  // namespace

Tensor box_mean(const Tensor& input, std::size_t window) {
  input.require_rank(4);
  check_window(window);
  Tensor out = box_sum(input, window);
  const auto counts = window_counts(spatial_dims(input), window / 2);
  const std::size_t n = counts.size();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= counts[i % n];
  return out;
}

Tensor box_mean_backward(const Tensor& grad_out, std::size_t window) {
  grad_out.require_rank(4);
  check_window(window);
  // The clipped windows are symmetric (j in W(i) <=> i in W(j)), so the
  // adjoint is a box sum of grad / count.
  const auto counts = window_counts(spatial_dims(grad_out), window / 2);
  const std::size_t n = counts.size();
  Tensor scaled = grad_out;
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] /= counts[i % n];
  return box_sum(scaled, window);
}

NeighborhoodStats neighborhood_stats(const Tensor& input, std::size_t window) {
  input.require_rank(4);
  check_window(window);
  Tensor sq = input;
  for (double& v : sq.values()) v = v * v;
  NeighborhoodStats stats{box_mean(input, window), box_mean(sq, window)};
  for (std::size_t i = 0; i < stats.var.size(); ++i) {
    const double m = stats.mean[i];
    const double v = stats.var[i] - m * m;
    stats.var[i] = v > 0.0 ? v : 0.0;
  }
  return stats;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor scale(const Tensor& x, double k) {
  Tensor out = x;
  for (double& v : out.values()) v *= k;
  return out;
}

Tensor reciprocal(const Tensor& x, double floor) {
  Tensor out = x;
  for (double& v : out.values()) v = 1.0 / std::max(v, floor);
  return out;
}

Broadcast classify_broadcast(const Tensor& lhs, const Tensor& rhs) {
  if (lhs.shape() == rhs.shape()) return Broadcast::kSame;
  if (rhs.rank() == 1 && rhs.dim(0) == 1) return Broadcast::kScalar;
  if (rhs.rank() == 1 && lhs.rank() >= 2 && rhs.dim(0) == lhs.dim(0)) {
    return Broadcast::kPerChannel;
  }
  if (rhs.rank() == 4 && lhs.rank() == 4 && rhs.dim(0) == 1 &&
      spatial_dims(rhs) == spatial_dims(lhs)) {
    return Broadcast::kSpatialMap;
  }
  throw ShapeError("cannot broadcast " + to_string(rhs.shape()) + " against " +
                   to_string(lhs.shape()));
}

namespace {

template <typename Op>
Tensor binary(const Tensor& a, const Tensor& b, Op op) {
  const Broadcast mode = classify_broadcast(a, b);
  Tensor out = a;
  double* o = out.data();
  const double* q = b.data();
  const std::size_t n = out.size();
  switch (mode) {
    case Broadcast::kSame:
      for (std::size_t i = 0; i < n; ++i) o[i] = op(o[i], q[i]);
      break;
    case Broadcast::kScalar:
      for (std::size_t i = 0; i < n; ++i) o[i] = op(o[i], q[0]);
      break;
    case Broadcast::kPerChannel: {
      const std::size_t inner = n / a.dim(0);
      for (std::size_t i = 0; i < n; ++i) o[i] = op(o[i], q[i / inner]);
      break;
    }
    case Broadcast::kSpatialMap: {
      const std::size_t inner = b.size();
      for (std::size_t i = 0; i < n; ++i) o[i] = op(o[i], q[i % inner]);
      break;
    }
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(a, b, [](double x, double y) { return x * y; });
}

Tensor reduce_to(const Tensor& grad, const Tensor& operand, Broadcast mode) {
  Tensor out(operand.shape());
  const std::size_t n = grad.size();
  switch (mode) {
    case Broadcast::kSame:
      return grad;
    case Broadcast::kScalar: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += grad[i];
      out[0] = acc;
      break;
    }
    case Broadcast::kPerChannel: {
      const std::size_t inner = n / operand.dim(0);
      for (std::size_t c = 0; c < operand.dim(0); ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner; ++i) acc += grad[c * inner + i];
        out[c] = acc;
      }
      break;
    }
    case Broadcast::kSpatialMap: {
      const std::size_t inner = operand.size();
      for (std::size_t i = 0; i < n; ++i) out[i % inner] += grad[i];
      break;
    }
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  a.require_rank(4);
  b.require_rank(4);
  if (spatial_dims(a) != spatial_dims(b)) {
    throw ShapeError("concat_channels spatial mismatch: " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const GridDims g = spatial_dims(a);
  Tensor out = Tensor::volume(a.channels() + b.channels(), g.depth, g.height,
                              g.width);
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

ChannelSplit split_channels(const Tensor& v, std::size_t first_channels) {
  v.require_rank(4);
  if (first_channels > v.channels()) {
    throw ShapeError("split_channels: " + std::to_string(first_channels) +
                     " exceeds " + std::to_string(v.channels()) + " channels");
  }
  const GridDims g = spatial_dims(v);
  const std::size_t cut = first_channels * g.count();
  std::vector<double> head(v.values().begin(),
                           v.values().begin() + static_cast<std::ptrdiff_t>(cut));
  std::vector<double> tail(v.values().begin() + static_cast<std::ptrdiff_t>(cut),
                           v.values().end());
  return {Tensor({first_channels, g.depth, g.height, g.width}, std::move(head)),
          Tensor({v.channels() - first_channels, g.depth, g.height, g.width},
                 std::move(tail))};
}

Tensor channel_mean(const Tensor& v) {
  v.require_rank(4);
  if (v.channels() == 0) throw ShapeError("channel_mean of 0-channel volume");
  const GridDims g = spatial_dims(v);
  const std::size_t n = g.count();
  Tensor out = Tensor::volume(1, g.depth, g.height, g.width);
  for (std::size_t c = 0; c < v.channels(); ++c) {
    for (std::size_t i = 0; i < n; ++i) out[i] += v[c * n + i];
  }
  const double inv = 1.0 / static_cast<double>(v.channels());
  for (double& x : out.values()) x *= inv;
  return out;
}

namespace {

struct Taps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> t;  // weight of hi
};

Taps axis_taps(std::size_t n_in, UpsampleMode mode) {
  const std::size_t n_out = 2 * n_in;
  Taps taps{std::vector<std::size_t>(n_out), std::vector<std::size_t>(n_out),
            std::vector<double>(n_out)};
  for (std::size_t o = 0; o < n_out; ++o) {
    if (mode == UpsampleMode::kNearest) {
      taps.lo[o] = taps.hi[o] = o / 2;
      taps.t[o] = 0.0;
      continue;
    }
    double x = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(n_in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(x));
    taps.lo[o] = i0;
    taps.hi[o] = std::min(i0 + 1, n_in - 1);
    taps.t[o] = x - static_cast<double>(i0);
  }
  return taps;
}

}  // namespace

Tensor upsample2(const Tensor& v, UpsampleMode mode) {
  v.require_rank(4);
  const GridDims g = spatial_dims(v);
  const Taps td = axis_taps(g.depth, mode);
  const Taps th = axis_taps(g.height, mode);
  const Taps tw = axis_taps(g.width, mode);
  Tensor out =
      Tensor::volume(v.channels(), 2 * g.depth, 2 * g.height, 2 * g.width);
  for (std::size_t c = 0; c < v.channels(); ++c) {
    for (std::size_t d = 0; d < 2 * g.depth; ++d) {
      for (std::size_t h = 0; h < 2 * g.height; ++h) {
        for (std::size_t w = 0; w < 2 * g.width; ++w) {
          const double a = td.t[d], b = th.t[h], e = tw.t[w];
          auto s = [&](std::size_t dd, std::size_t hh, std::size_t ww) {
            return v.at(c, dd, hh, ww);
          };
          const double c00 = s(td.lo[d], th.lo[h], tw.lo[w]) * (1 - e) +
                             s(td.lo[d], th.lo[h], tw.hi[w]) * e;
          const double c01 = s(td.lo[d], th.hi[h], tw.lo[w]) * (1 - e) +
                             s(td.lo[d], th.hi[h], tw.hi[w]) * e;
          const double c10 = s(td.hi[d], th.lo[h], tw.lo[w]) * (1 - e) +
                             s(td.hi[d], th.lo[h], tw.hi[w]) * e;
          const double c11 = s(td.hi[d], th.hi[h], tw.lo[w]) * (1 - e) +
                             s(td.hi[d], th.hi[h], tw.hi[w]) * e;
          const double c0 = c00 * (1 - b) + c01 * b;
          const double c1 = c10 * (1 - b) + c11 * b;
          out.at(c, d, h, w) = c0 * (1 - a) + c1 * a;
        }
      }
    }
  }
  return out;
}

Tensor upsample2_backward(const Tensor& grad_out, const GridDims& in,
                          UpsampleMode mode) {
  grad_out.require_rank(4);
  const Taps td = axis_taps(in.depth, mode);
  const Taps th = axis_taps(in.height, mode);
  const Taps tw = axis_taps(in.width, mode);
  Tensor gin = Tensor::volume(grad_out.channels(), in.depth, in.height, in.width);
  for (std::size_t c = 0; c < grad_out.channels(); ++c) {
    for (std::size_t d = 0; d < 2 * in.depth; ++d) {
      for (std::size_t h = 0; h < 2 * in.height; ++h) {
        for (std::size_t w = 0; w < 2 * in.width; ++w) {
          const double g = grad_out.at(c, d, h, w);
          const double a = td.t[d], b = th.t[h], e = tw.t[w];
          const std::size_t ds[2] = {td.lo[d], td.hi[d]};
          const std::size_t hs[2] = {th.lo[h], th.hi[h]};
          const std::size_t ws[2] = {tw.lo[w], tw.hi[w]};
          const double wd[2] = {1 - a, a}, wh[2] = {1 - b, b}, ww[2] = {1 - e, e};
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
              for (int k = 0; k < 2; ++k)
                gin.at(c, ds[i], hs[j], ws[k]) += g * wd[i] * wh[j] * ww[k];
        }
      }
    }
  }
  return gin;
}

Tensor softmax_channels(const Tensor& logits) {
  logits.require_rank(4);
  const std::size_t c_n = logits.channels();
  const std::size_t n = logits.voxels();
  Tensor out = logits;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits[i];
    for (std::size_t c = 1; c < c_n; ++c) mx = std::max(mx, logits[c * n + i]);
    double z = 0.0;
    for (std::size_t c = 0; c < c_n; ++c) {
      const double e = std::exp(logits[c * n + i] - mx);
      out[c * n + i] = e;
      z += e;
    }
    for (std::size_t c = 0; c < c_n; ++c) out[c * n + i] /= z;
  }
  return out;
}

Tensor matvec(const Tensor& m, const Tensor& x) {
  if (m.rank() != 2 || x.rank() != 1 || m.dim(1) != x.dim(0)) {
    throw ShapeError("matvec shape mismatch: " + to_string(m.shape()) + " * " +
                     to_string(x.shape()));
  }
  Tensor out({m.dim(0)});
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.dim(1); ++c) acc += m[r * m.dim(1) + c] * x[c];
    out[r] = acc;
  }
  return out;
}

}  // namespace amaa::ops
