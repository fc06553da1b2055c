#include "topopt/cnn.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <stdexcept>

namespace topopt {

namespace {

constexpr double kNormEps = 1e-6;  // guards the std division as eps^2 under the sqrt

int ceil_div(int a, int b) { return (a + b - 1) / b; }

// One linear interpolation tap: out[o] = (1-w1)*in[i0] + w1*in[i1].
struct Tap {
  int i0 = 0, i1 = 0;
  double w1 = 0.0;
};

std::vector<Tap> make_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double src = (o + 0.5) * scale - 0.5;
    int i0 = static_cast<int>(std::floor(src));
    const double w1 = src - i0;
    int i1 = i0 + 1;
    i0 = std::min(std::max(i0, 0), in - 1);
    i1 = std::min(std::max(i1, 0), in - 1);
    taps[o] = {i0, i1, w1};
  }
  return taps;
}

// Padded patch matrix: column (ic*k + ky)*k + kx holds channel ic shifted by
// (ky-pad, kx-pad), with zeros outside the image. Rows are pixels (y*w + x).
Eigen::MatrixXd im2col(const Eigen::MatrixXd& act, int h, int w, int k) {
  const int channels = static_cast<int>(act.cols());
  const int pad = k / 2;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(h * w, channels * k * k);
  for (int ic = 0; ic < channels; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      const int dy = ky - pad;
      for (int kx = 0; kx < k; ++kx) {
        const int dx = kx - pad;
        const int col = (ic * k + ky) * k + kx;
        const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
        if (x_lo >= x_hi) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          cols.block(y * w + x_lo, col, x_hi - x_lo, 1) =
              act.block(sy * w + x_lo + dx, ic, x_hi - x_lo, 1);
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-adds patch-gradient columns back onto channels.
Eigen::MatrixXd col2im(const Eigen::MatrixXd& gcols, int h, int w, int channels, int k) {
  const int pad = k / 2;
  Eigen::MatrixXd gact = Eigen::MatrixXd::Zero(h * w, channels);
  for (int ic = 0; ic < channels; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      const int dy = ky - pad;
      for (int kx = 0; kx < k; ++kx) {
        const int dx = kx - pad;
        const int col = (ic * k + ky) * k + kx;
        const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
        if (x_lo >= x_hi) continue;
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          gact.block(sy * w + x_lo + dx, ic, x_hi - x_lo, 1) +=
              gcols.block(y * w + x_lo, col, x_hi - x_lo, 1);
        }
      }
    }
  }
  return gact;
}

Eigen::MatrixXd normalize(const Eigen::MatrixXd& r, double* denom_out) {
  const double mu = r.mean();
  const double var = (r.array() - mu).square().mean();
  const double d = std::sqrt(var + kNormEps * kNormEps);
  *denom_out = d;
  return ((r.array() - mu) / d).matrix();
}

Eigen::MatrixXd normalize_backward(const Eigen::MatrixXd& gn, const Eigen::MatrixXd& n,
                                   double denom) {
  const double m1 = gn.mean();
  const double m2 = (gn.array() * n.array()).mean();
  return ((gn.array() - m1 - n.array() * m2) / denom).matrix();
}

Eigen::Map<const Eigen::MatrixXd> kernel_matrix(const CnnArchitecture& arch,
                                                const Eigen::VectorXd& kernel, int layer) {
  const int rows = arch.in_channels(layer) * arch.kernel * arch.kernel;
  return {kernel.data(), rows, arch.out_channels(layer)};
}

struct Rng {
  std::mt19937_64 engine;
  explicit Rng(std::uint64_t seed) : engine(seed) {}
  double uniform() {  // [0, 1), 53-bit; distribution pinned independent of libstdc++
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
  }
  double uniform_sym(double a) { return a * (2.0 * uniform() - 1.0); }
  double normal() {
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace

CnnArchitecture::Shape CnnArchitecture::shape(int layer) const {
  // Ceil-halving schedule: resizes at layers 1..3 walk base -> (H, W) exactly.
  switch (layer) {
    case 0: return {ceil_div(grid_h, 8), ceil_div(grid_w, 8)};
    case 1: return {ceil_div(grid_h, 4), ceil_div(grid_w, 4)};
    case 2: return {ceil_div(grid_h, 2), ceil_div(grid_w, 2)};
    case 3:
    case 4: return {grid_h, grid_w};
    default: throw std::invalid_argument("CnnArchitecture::shape: layer out of range");
  }
}

CnnArchitecture CnnArchitecture::for_grid(int nelx, int nely, int latent_dim) {
  CnnArchitecture arch;
  arch.grid_h = nely;
  arch.grid_w = nelx;
  arch.latent_dim = latent_dim;
  return arch;
}

int CnnArchitecture::parameter_count() const {
  int n = latent_dim + latent_dim * dense_size();
  for (int i = 0; i < 5; ++i) n += kernel_size(i) + 1;
  return n;
}

CnnParams CnnParams::zeros(const CnnArchitecture& arch) {
  CnnParams p;
  p.beta = Eigen::VectorXd::Zero(arch.latent_dim);
  p.dense_w = Eigen::VectorXd::Zero(arch.latent_dim * arch.dense_size());
  for (int i = 0; i < 5; ++i) p.kernels[i] = Eigen::VectorXd::Zero(arch.kernel_size(i));
  p.biases.fill(0.0);
  return p;
}

Eigen::VectorXd flatten(const CnnParams& params) {
  Eigen::Index total = params.beta.size() + params.dense_w.size();
  for (const auto& k : params.kernels) total += k.size() + 1;
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  flat.segment(at, params.beta.size()) = params.beta;
  at += params.beta.size();
  flat.segment(at, params.dense_w.size()) = params.dense_w;
  at += params.dense_w.size();
  for (int i = 0; i < 5; ++i) {
    flat.segment(at, params.kernels[i].size()) = params.kernels[i];
    at += params.kernels[i].size();
    flat[at++] = params.biases[i];
  }
  return flat;
}

CnnParams unflatten(const CnnArchitecture& arch, const Eigen::VectorXd& flat) {
  if (flat.size() != arch.parameter_count()) {
    throw std::invalid_argument("unflatten: parameter vector size mismatch");
  }
  CnnParams p;
  Eigen::Index at = 0;
  p.beta = flat.segment(at, arch.latent_dim);
  at += arch.latent_dim;
  p.dense_w = flat.segment(at, arch.latent_dim * arch.dense_size());
  at += p.dense_w.size();
  for (int i = 0; i < 5; ++i) {
    p.kernels[i] = flat.segment(at, arch.kernel_size(i));
    at += arch.kernel_size(i);
    p.biases[i] = flat[at++];
  }
  return p;
}

Eigen::MatrixXd bilinear_resize(const Eigen::MatrixXd& in, int h_in, int w_in,
                                int h_out, int w_out) {
  const auto ys = make_taps(h_in, h_out);
  const auto xs = make_taps(w_in, w_out);
  const int channels = static_cast<int>(in.cols());
  Eigen::MatrixXd out(h_out * w_out, channels);
  for (int c = 0; c < channels; ++c) {
    const double* src = in.col(c).data();
    double* dst = out.col(c).data();
    for (int oy = 0; oy < h_out; ++oy) {
      const Tap& ty = ys[oy];
      const double wy1 = ty.w1, wy0 = 1.0 - ty.w1;
      const double* row0 = src + ty.i0 * w_in;
      const double* row1 = src + ty.i1 * w_in;
      for (int ox = 0; ox < w_out; ++ox) {
        const Tap& tx = xs[ox];
        const double wx1 = tx.w1, wx0 = 1.0 - tx.w1;
        dst[oy * w_out + ox] = wy0 * (wx0 * row0[tx.i0] + wx1 * row0[tx.i1]) +
                               wy1 * (wx0 * row1[tx.i0] + wx1 * row1[tx.i1]);
      }
    }
  }
  return out;
}

Eigen::MatrixXd bilinear_resize_adjoint(const Eigen::MatrixXd& g, int h_in, int w_in,
                                        int h_out, int w_out) {
  const auto ys = make_taps(h_in, h_out);
  const auto xs = make_taps(w_in, w_out);
  const int channels = static_cast<int>(g.cols());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h_in * w_in, channels);
  for (int c = 0; c < channels; ++c) {
    double* dst = out.col(c).data();
    const double* src = g.col(c).data();
    for (int oy = 0; oy < h_out; ++oy) {
      const Tap& ty = ys[oy];
      const double wy1 = ty.w1, wy0 = 1.0 - ty.w1;
      for (int ox = 0; ox < w_out; ++ox) {
        const Tap& tx = xs[ox];
        const double gv = src[oy * w_out + ox];
        dst[ty.i0 * w_in + tx.i0] += wy0 * (1.0 - tx.w1) * gv;
        dst[ty.i0 * w_in + tx.i1] += wy0 * tx.w1 * gv;
        dst[ty.i1 * w_in + tx.i0] += wy1 * (1.0 - tx.w1) * gv;
        dst[ty.i1 * w_in + tx.i1] += wy1 * tx.w1 * gv;
      }
    }
  }
  return out;
}

std::pair<DensityField, Tape> cnn_forward(const CnnParams& params,
                                          const CnnArchitecture& arch) {
  if (params.beta.size() != arch.latent_dim ||
      params.dense_w.size() != static_cast<Eigen::Index>(arch.latent_dim) * arch.dense_size()) {
    throw std::invalid_argument("cnn_forward: params do not match architecture");
  }
  for (int i = 0; i < 5; ++i) {
    if (params.kernels[i].size() != arch.kernel_size(i)) {
      throw std::invalid_argument("cnn_forward: kernel size mismatch at layer " + std::to_string(i));
    }
  }

  Tape tape;
  tape.arch = arch;
  tape.params = &params;

  const auto base = arch.base_shape();
  const Eigen::VectorXd base_vec =
      Eigen::Map<const Eigen::MatrixXd>(params.dense_w.data(), arch.dense_size(),
                                        arch.latent_dim) *
      params.beta;
  Eigen::MatrixXd act =
      Eigen::Map<const Eigen::MatrixXd>(base_vec.data(), base.pixels(), arch.base_channels);

  for (int i = 0; i < 5; ++i) {
    const auto in_shape = (i == 0) ? base : arch.shape(i - 1);
    const auto out_shape = arch.shape(i);
    tape.post_tanh[i] = act.array().tanh().matrix();
    Eigen::MatrixXd resized =
        arch.has_resize(i)
            ? bilinear_resize(tape.post_tanh[i], in_shape.h, in_shape.w, out_shape.h, out_shape.w)
            : tape.post_tanh[i];
    tape.normalized[i] = normalize(resized, &tape.norm_denom[i]);
    const Eigen::MatrixXd patches = im2col(tape.normalized[i], out_shape.h, out_shape.w, arch.kernel);
    act = patches * kernel_matrix(arch, params.kernels[i], i);
    act.array() += params.biases[i];
  }

  DensityField logits(arch.grid_w, arch.grid_h, Stage::kLogits);
  for (int ex = 0; ex < arch.grid_w; ++ex) {
    for (int ey = 0; ey < arch.grid_h; ++ey) {
      logits.at(ex, ey) = act(ey * arch.grid_w + ex, 0);
    }
  }
  return {std::move(logits), std::move(tape)};
}

CnnParams cnn_backward(const Tape& tape, const DensityField& grad_logits) {
  const CnnArchitecture& arch = tape.arch;
  if (tape.params == nullptr) throw std::invalid_argument("cnn_backward: tape has no params");
  if (grad_logits.nelx != arch.grid_w || grad_logits.nely != arch.grid_h) {
    throw std::invalid_argument("cnn_backward: gradient shape mismatch");
  }

  CnnParams grad = CnnParams::zeros(arch);

  Eigen::MatrixXd ga(arch.grid_h * arch.grid_w, 1);
  for (int ex = 0; ex < arch.grid_w; ++ex) {
    for (int ey = 0; ey < arch.grid_h; ++ey) {
      ga(ey * arch.grid_w + ex, 0) = grad_logits.at(ex, ey);
    }
  }

  for (int i = 4; i >= 0; --i) {
    const auto in_shape = (i == 0) ? arch.base_shape() : arch.shape(i - 1);
    const auto out_shape = arch.shape(i);
    grad.biases[i] = ga.sum();
    const Eigen::MatrixXd patches = im2col(tape.normalized[i], out_shape.h, out_shape.w, arch.kernel);
    Eigen::Map<Eigen::MatrixXd>(grad.kernels[i].data(),
                                arch.in_channels(i) * arch.kernel * arch.kernel,
                                arch.out_channels(i)) = patches.transpose() * ga;
    const Eigen::MatrixXd gpatches = ga * kernel_matrix(arch, tape.params->kernels[i], i).transpose();
    Eigen::MatrixXd gn = col2im(gpatches, out_shape.h, out_shape.w, arch.in_channels(i), arch.kernel);
    Eigen::MatrixXd gr = normalize_backward(gn, tape.normalized[i], tape.norm_denom[i]);
    Eigen::MatrixXd gt = arch.has_resize(i)
                             ? bilinear_resize_adjoint(gr, in_shape.h, in_shape.w,
                                                       out_shape.h, out_shape.w)
                             : std::move(gr);
    ga = (gt.array() * (1.0 - tape.post_tanh[i].array().square())).matrix();
  }

  const Eigen::Map<const Eigen::VectorXd> gbase(ga.data(), ga.size());
  Eigen::Map<Eigen::MatrixXd>(grad.dense_w.data(), arch.dense_size(), arch.latent_dim) =
      gbase * tape.params->beta.transpose();
  grad.beta = Eigen::Map<const Eigen::MatrixXd>(tape.params->dense_w.data(), arch.dense_size(),
                                                arch.latent_dim)
                  .transpose() *
              gbase;
  return grad;
}

CnnParams init_params(const CnnArchitecture& arch, std::uint64_t seed) {
  Rng rng(seed);
  CnnParams p = CnnParams::zeros(arch);
  for (Eigen::Index i = 0; i < p.beta.size(); ++i) p.beta[i] = rng.normal();
  const double dense_bound = std::sqrt(3.0 / arch.latent_dim);
  for (Eigen::Index i = 0; i < p.dense_w.size(); ++i) p.dense_w[i] = rng.uniform_sym(dense_bound);
  for (int layer = 0; layer < 5; ++layer) {
    const double fan_in = arch.in_channels(layer) * arch.kernel * arch.kernel;
    const double bound = std::sqrt(3.0 / fan_in);
    for (Eigen::Index i = 0; i < p.kernels[layer].size(); ++i) {
      p.kernels[layer][i] = rng.uniform_sym(bound);
    }
  }
  return p;
}

namespace {

void write_u32(std::FILE* f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  std::fwrite(b, 1, 4, f);
}

std::uint32_t read_u32(std::FILE* f) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw std::runtime_error("checkpoint: truncated header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

}  // namespace

void save_params(const std::string& path, const CnnArchitecture& arch,
                 const CnnParams& params) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  std::fwrite("TPC1", 1, 4, f);
  write_u32(f, static_cast<std::uint32_t>(arch.grid_h));
  write_u32(f, static_cast<std::uint32_t>(arch.grid_w));
  write_u32(f, static_cast<std::uint32_t>(arch.latent_dim));
  write_u32(f, static_cast<std::uint32_t>(arch.base_channels));
  write_u32(f, static_cast<std::uint32_t>(arch.kernel));
  write_u32(f, 5);
  for (int c : arch.channels) write_u32(f, static_cast<std::uint32_t>(c));
  const Eigen::VectorXd flat = flatten(params);
  write_u32(f, static_cast<std::uint32_t>(flat.size()));
  static_assert(sizeof(double) == 8);
  std::fwrite(flat.data(), sizeof(double), flat.size(), f);  // little-endian hosts
  std::fclose(f);
}

std::pair<CnnArchitecture, CnnParams> load_params(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, "TPC1", 4) != 0) {
    std::fclose(f);
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  CnnArchitecture arch;
  arch.grid_h = static_cast<int>(read_u32(f));
  arch.grid_w = static_cast<int>(read_u32(f));
  arch.latent_dim = static_cast<int>(read_u32(f));
  arch.base_channels = static_cast<int>(read_u32(f));
  arch.kernel = static_cast<int>(read_u32(f));
  const std::uint32_t layers = read_u32(f);
  if (layers != 5) {
    std::fclose(f);
    throw std::runtime_error("checkpoint: unsupported layer count");
  }
  for (int i = 0; i < 5; ++i) arch.channels[i] = static_cast<int>(read_u32(f));
  const std::uint32_t count = read_u32(f);
  if (static_cast<int>(count) != arch.parameter_count()) {
    std::fclose(f);
    throw std::runtime_error("checkpoint: parameter count does not match header");
  }
  Eigen::VectorXd flat(count);
  if (std::fread(flat.data(), sizeof(double), count, f) != count) {
    std::fclose(f);
    throw std::runtime_error("checkpoint: truncated parameter data");
  }
  std::fclose(f);
  return {arch, unflatten(arch, flat)};
}

}  // namespace topopt
