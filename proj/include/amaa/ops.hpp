#pragma once

// Forward kernels (and the matching adjoint kernels used by the tape) for the
// small operation set the pipeline needs. Every function here is pure.

#include <cstddef>
#include <span>

#include "amaa/tensor.hpp"

namespace amaa::ops {

// ---------------------------------------------------------------- convolution

/// Same-padded 3-D convolution.
/// kernel: (C_out, C_in, k, k, k) with k in {1, 3}; bias: (C_out); stride 1|2.
/// Output spatial size is ceil(n / stride) per axis.
Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride);

/// Same-padded 2-D convolution on a (C, rows, cols) image.
/// kernel: (C_out, C_in, k, k) with k in {1, 3}; stride 1|2.
Tensor conv2d(const Tensor& image, const Tensor& kernel, const Tensor& bias,
              std::size_t stride);

// Adjoints. Each accumulates (+=) into the non-null outputs, which must
// already have the right shape.
void conv3d_backward(const Tensor& input, const Tensor& kernel,
                     std::size_t stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernel,
                     Tensor* grad_bias);
void conv2d_backward(const Tensor& image, const Tensor& kernel,
                     std::size_t stride, const Tensor& grad_out,
                     Tensor* grad_input, Tensor* grad_kernel,
                     Tensor* grad_bias);

// -------------------------------------------------------------------- pooling

/// Mean over all D*H*W entries of each channel; returns shape (C).
Tensor global_avg_pool3d(const Tensor& input);

struct NeighborhoodStats {
  Tensor mean;
  Tensor var;  // population variance, tiny negatives clamped to 0
};

/// Per-channel mean and population variance over the s^3 window centred on
/// each voxel, clipped to the volume bounds (only real voxels are counted).
NeighborhoodStats neighborhood_stats(const Tensor& input, std::size_t window);

/// Windowed mean with the same clipped window as neighborhood_stats.
Tensor box_mean(const Tensor& input, std::size_t window);

/// Adjoint of box_mean: returns dL/dx given dL/d(box_mean(x)).
Tensor box_mean_backward(const Tensor& grad_out, std::size_t window);

// ---------------------------------------------------------------- elementwise

double sigmoid(double x);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor scale(const Tensor& x, double k);
/// 1 / max(x, floor).
Tensor reciprocal(const Tensor& x, double floor);

/// How the right-hand operand of a binary op is broadcast against the left.
enum class Broadcast {
  kSame,        // identical shapes
  kScalar,      // shape (1)
  kPerChannel,  // shape (C) against a (C, ...) tensor
  kSpatialMap,  // shape (1, D, H, W) against a (C, D, H, W) volume
};

/// Classifies rhs against lhs; throws ShapeError when incompatible.
Broadcast classify_broadcast(const Tensor& lhs, const Tensor& rhs);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Sums a full-shape gradient down to the shape of a broadcast operand.
Tensor reduce_to(const Tensor& grad, const Tensor& operand, Broadcast mode);

// ------------------------------------------------------------------ structure

/// Channel concatenation: a occupies channels [0, C_a).
Tensor concat_channels(const Tensor& a, const Tensor& b);

struct ChannelSplit {
  Tensor first;
  Tensor second;
};
/// Inverse of concat_channels.
ChannelSplit split_channels(const Tensor& v, std::size_t first_channels);

/// Mean over channels; returns a 1-channel volume.
Tensor channel_mean(const Tensor& v);

enum class UpsampleMode { kNearest, kTrilinear };

/// Factor-2 spatial upsampling. Trilinear uses half-pixel centres
/// (x_in = (x_out + 0.5) / 2 - 0.5) clamped to the edge.
Tensor upsample2(const Tensor& v, UpsampleMode mode);
Tensor upsample2_backward(const Tensor& grad_out, const GridDims& input_dims,
                          UpsampleMode mode);

/// Softmax over the channel axis at every voxel.
Tensor softmax_channels(const Tensor& logits);

/// y = m x for m of shape (rows, cols) and x of shape (cols).
Tensor matvec(const Tensor& m, const Tensor& x);

}  // namespace amaa::ops
