#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "topopt/field.hpp"

namespace topopt {

// Upsampling image generator: a trainable latent vector feeds a dense layer
// producing a base_channels image at (ceil(H/8), ceil(W/8)), followed by five
// repetitions of
//   tanh -> [bilinear resize, layers 2-4 only] -> global normalization
//        -> 5x5 same-padded convolution -> scalar learned bias,
// emitting a single-channel H x W logits grid. The three resizes target the
// exact ceil-halving intermediate shapes, so every grid size ends up at
// (H, W) after the nominal 8x upscale.
struct CnnArchitecture {
  int grid_h = 0;  // output rows    (nely)
  int grid_w = 0;  // output columns (nelx)
  int latent_dim = 128;
  int base_channels = 32;
  std::array<int, 5> channels{128, 64, 32, 16, 1};
  int kernel = 5;

  struct Shape {
    int h = 0, w = 0;
    int pixels() const { return h * w; }
  };

  // Spatial shape of the activations entering conv layer i (after the
  // layer's resize, if any). shape(4) == (grid_h, grid_w).
  Shape shape(int layer) const;
  Shape base_shape() const { return shape(0); }
  bool has_resize(int layer) const { return layer >= 1 && layer <= 3; }

  int in_channels(int layer) const { return layer == 0 ? base_channels : channels[layer - 1]; }
  int out_channels(int layer) const { return channels[layer]; }

  static CnnArchitecture for_grid(int nelx, int nely, int latent_dim = 128);

  int dense_size() const { return base_channels * base_shape().pixels(); }
  int kernel_size(int layer) const {
    return out_channels(layer) * in_channels(layer) * kernel * kernel;
  }
  int parameter_count() const;
};

// All trainable values. Layouts (C order):
//   dense_w[l][j]           j = (c * h0 + y) * w0 + x   (latent -> base image)
//   kernels[i][oc][ic][ky][kx]
// Flattened order: beta, dense_w, then per layer (kernel, bias).
struct CnnParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd dense_w;
  std::array<Eigen::VectorXd, 5> kernels;
  std::array<double, 5> biases{};

  static CnnParams zeros(const CnnArchitecture& arch);
};

Eigen::VectorXd flatten(const CnnParams& params);
CnnParams unflatten(const CnnArchitecture& arch, const Eigen::VectorXd& flat);

// Activations recorded by one forward pass, sufficient for the exact
// reverse-mode backward. Activation matrices are (pixels x channels) with
// pixel index p = y * w + x. The params pointer must outlive the tape.
struct Tape {
  CnnArchitecture arch;
  const CnnParams* params = nullptr;
  std::array<Eigen::MatrixXd, 5> post_tanh;   // t_i, at the pre-resize shape
  std::array<Eigen::MatrixXd, 5> normalized;  // n_i, input of conv i
  std::array<double, 5> norm_denom{};         // sqrt(var + 1e-12)
};

std::pair<DensityField, Tape> cnn_forward(const CnnParams& params,
                                          const CnnArchitecture& arch);

// Exact reverse-mode gradients for every trainable value, returned in the
// CnnParams layout.
CnnParams cnn_backward(const Tape& tape, const DensityField& grad_logits);

// Bilinear interpolation to an arbitrary target shape (align-corners-false,
// edge-clamped). in is (h_in*w_in x channels); the doubling resizes inside the
// network use the ceil-schedule targets from CnnArchitecture::shape.
Eigen::MatrixXd bilinear_resize(const Eigen::MatrixXd& in, int h_in, int w_in,
                                int h_out, int w_out);
// Transpose action of bilinear_resize (scatter of the same weights).
Eigen::MatrixXd bilinear_resize_adjoint(const Eigen::MatrixXd& g, int h_in, int w_in,
                                        int h_out, int w_out);

// Deterministic initialization: beta ~ N(0,1); dense and conv kernels from a
// fan-in-scaled uniform law U[-sqrt(3/fan_in), sqrt(3/fan_in)]; biases zero.
CnnParams init_params(const CnnArchitecture& arch, std::uint64_t seed);

// Checkpoint I/O: little-endian header (magic "TPC1", dims, latent, channels)
// followed by the flattened parameters as raw 64-bit floats. See README for
// the exact byte layout.
void save_params(const std::string& path, const CnnArchitecture& arch,
                 const CnnParams& params);
std::pair<CnnArchitecture, CnnParams> load_params(const std::string& path);

}  // namespace topopt
