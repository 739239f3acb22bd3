#include "gridgaf/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gridgaf/kernels.hpp"

namespace gridgaf::nn {

void zero_grads(std::vector<ParamBlock>& params) {
  for (auto& p : params) p.grad.zero();
}

std::size_t total_size(const std::vector<ParamBlock>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

std::vector<double> flatten_values(const std::vector<ParamBlock>& params) {
  std::vector<double> flat;
  flat.reserve(total_size(params));
  for (const auto& p : params) {
    flat.insert(flat.end(), p.value.data(), p.value.data() + p.value.numel());
  }
  return flat;
}

void set_values(std::vector<ParamBlock>& params, const std::vector<double>& flat) {
  if (flat.size() != total_size(params)) {
    throw std::invalid_argument("set_values: length mismatch");
  }
  std::size_t off = 0;
  for (auto& p : params) {
    std::memcpy(p.value.data(), flat.data() + off, p.value.numel() * sizeof(double));
    off += p.value.numel();
  }
}

std::vector<double> flatten_grads(const std::vector<ParamBlock>& params) {
  std::vector<double> flat;
  flat.reserve(total_size(params));
  for (const auto& p : params) {
    flat.insert(flat.end(), p.grad.data(), p.grad.data() + p.grad.numel());
  }
  return flat;
}

// ---- convolution ----

namespace {
void check_conv_shapes(const Tensor& input, const Tensor& kernels,
                       const Tensor& bias) {
  if (input.rank() != 3 || kernels.rank() != 4 || bias.rank() != 1) {
    throw std::invalid_argument("conv2d: input must be [H,W,Cin], kernels [k,k,Cin,Cout], bias [Cout]");
  }
  if (kernels.dim(0) != kernels.dim(1)) {
    throw std::invalid_argument("conv2d: kernels must be square");
  }
  if (kernels.dim(2) != input.dim(2)) {
    throw std::invalid_argument("conv2d: kernel Cin does not match input channels");
  }
  if (kernels.dim(3) != bias.dim(0)) {
    throw std::invalid_argument("conv2d: bias length does not match Cout");
  }
  if (kernels.dim(0) > input.dim(0) || kernels.dim(0) > input.dim(1)) {
    throw std::invalid_argument("conv2d: kernel larger than input");
  }
}
}  // namespace

void conv2d_forward(const Tensor& input, const Tensor& kernels,
                    const Tensor& bias, Tensor& out) {
  check_conv_shapes(input, kernels, bias);
  const std::size_t H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
  const std::size_t k = kernels.dim(0), Co = kernels.dim(3);
  const std::size_t Ho = H - k + 1, Wo = W - k + 1;
  if (out.shape() != std::vector<std::size_t>{Ho, Wo, Co}) {
    out = Tensor({Ho, Wo, Co});
  }

  const double* in = input.data();
  const double* ker = kernels.data();
  const double* b = bias.data();
  double* o = out.data();
  const auto axpy = kern::axpy;

  for (std::size_t y = 0; y < Ho; ++y) {
    for (std::size_t x = 0; x < Wo; ++x) {
      double* acc = o + (y * Wo + x) * Co;
      std::memcpy(acc, b, Co * sizeof(double));
      for (std::size_t dy = 0; dy < k; ++dy) {
        const double* in_row = in + ((y + dy) * W + x) * Ci;
        const double* ker_row = ker + dy * (k * Ci * Co);
        for (std::size_t dx = 0; dx < k; ++dx) {
          const double* in_px = in_row + dx * Ci;
          const double* ker_px = ker_row + dx * (Ci * Co);
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            axpy(in_px[ci], ker_px + ci * Co, acc, Co);
          }
        }
      }
    }
  }
}

void conv2d_backward(const Tensor& input, const Tensor& kernels,
                     const Tensor& grad_out, Tensor& grad_kernels,
                     Tensor& grad_bias, Tensor* grad_input) {
  check_conv_shapes(input, kernels, grad_bias);
  if (!grad_kernels.same_shape(kernels)) {
    throw std::invalid_argument("conv2d_backward: grad_kernels shape mismatch");
  }
  const std::size_t H = input.dim(0), W = input.dim(1), Ci = input.dim(2);
  const std::size_t k = kernels.dim(0), Co = kernels.dim(3);
  const std::size_t Ho = H - k + 1, Wo = W - k + 1;
  if (grad_out.shape() != std::vector<std::size_t>{Ho, Wo, Co}) {
    throw std::invalid_argument("conv2d_backward: grad_out shape mismatch");
  }

  const double* in = input.data();
  const double* ker = kernels.data();
  const double* go = grad_out.data();
  double* gk = grad_kernels.data();
  double* gb = grad_bias.data();
  double* gi = grad_input ? grad_input->data() : nullptr;
  const auto axpy = kern::axpy;
  const auto dot = kern::dot;

  for (std::size_t y = 0; y < Ho; ++y) {
    for (std::size_t x = 0; x < Wo; ++x) {
      const double* g = go + (y * Wo + x) * Co;
      for (std::size_t c = 0; c < Co; ++c) gb[c] += g[c];
      for (std::size_t dy = 0; dy < k; ++dy) {
        const double* in_row = in + ((y + dy) * W + x) * Ci;
        double* gi_row = gi ? gi + ((y + dy) * W + x) * Ci : nullptr;
        for (std::size_t dx = 0; dx < k; ++dx) {
          const double* in_px = in_row + dx * Ci;
          double* gk_px = gk + (dy * k + dx) * Ci * Co;
          const double* ker_px = ker + (dy * k + dx) * Ci * Co;
          for (std::size_t ci = 0; ci < Ci; ++ci) {
            axpy(in_px[ci], g, gk_px + ci * Co, Co);
          }
          if (gi_row) {
            double* gi_px = gi_row + dx * Ci;
            for (std::size_t ci = 0; ci < Ci; ++ci) {
              gi_px[ci] += dot(ker_px + ci * Co, g, Co);
            }
          }
        }
      }
    }
  }
}

// ---- max pooling ----

void maxpool2x2_forward(const Tensor& input, Tensor& out,
                        std::vector<std::uint32_t>& argmax) {
  if (input.rank() != 3) {
    throw std::invalid_argument("maxpool2x2: input must be [H,W,C]");
  }
  const std::size_t H = input.dim(0), W = input.dim(1), C = input.dim(2);
  if (H < 2 || W < 2) {
    throw std::invalid_argument("maxpool2x2: H and W must be at least 2");
  }
  const std::size_t Ho = H / 2, Wo = W / 2;
  if (out.shape() != std::vector<std::size_t>{Ho, Wo, C}) {
    out = Tensor({Ho, Wo, C});
  }
  argmax.assign(Ho * Wo * C, 0);

  const double* in = input.data();
  double* o = out.data();
  for (std::size_t y = 0; y < Ho; ++y) {
    for (std::size_t x = 0; x < Wo; ++x) {
      const std::size_t base = (2 * y * W + 2 * x) * C;
      const std::size_t offsets[4] = {base, base + C, base + W * C,
                                      base + W * C + C};
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = offsets[0] + c;
        double best_v = in[best];
        for (int w = 1; w < 4; ++w) {
          const std::size_t idx = offsets[w] + c;
          if (in[idx] > best_v) {
            best_v = in[idx];
            best = idx;
          }
        }
        const std::size_t oi = (y * Wo + x) * C + c;
        o[oi] = best_v;
        argmax[oi] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void maxpool2x2_backward(const std::vector<std::uint32_t>& argmax,
                         const Tensor& grad_out, Tensor& grad_input) {
  if (argmax.size() != grad_out.numel()) {
    throw std::invalid_argument("maxpool2x2_backward: argmax/grad_out mismatch");
  }
  double* gi = grad_input.data();
  const double* go = grad_out.data();
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    gi[argmax[i]] += go[i];
  }
}

// ---- dense ----

void dense_forward(const Tensor& input, const Tensor& weights,
                   const Tensor& bias, Tensor& out) {
  const std::size_t n = input.numel();
  if (weights.rank() != 2 || weights.dim(1) != n || bias.numel() != weights.dim(0)) {
    throw std::invalid_argument("dense_forward: shape mismatch");
  }
  const std::size_t m = weights.dim(0);
  if (out.numel() != m) out = Tensor({m});
  const double* x = input.data();
  const double* w = weights.data();
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = bias[i] + kern::dot(w + i * n, x, n);
  }
}

void dense_backward(const Tensor& input, const Tensor& weights,
                    const Tensor& grad_out, Tensor& grad_weights,
                    Tensor& grad_bias, Tensor* grad_input) {
  const std::size_t n = input.numel();
  const std::size_t m = weights.dim(0);
  if (grad_out.numel() != m) {
    throw std::invalid_argument("dense_backward: grad_out shape mismatch");
  }
  const double* x = input.data();
  const double* w = weights.data();
  const double* go = grad_out.data();
  double* gw = grad_weights.data();
  double* gb = grad_bias.data();
  double* gi = grad_input ? grad_input->data() : nullptr;
  for (std::size_t i = 0; i < m; ++i) {
    kern::axpy(go[i], x, gw + i * n, n);
    gb[i] += go[i];
    if (gi) kern::axpy(go[i], w + i * n, gi, n);
  }
}

// ---- activations ----

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void sigmoid_forward(const Tensor& in, Tensor& out) {
  if (!out.same_shape(in)) out = Tensor(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = sigmoid(in[i]);
}

void tanh_forward(const Tensor& in, Tensor& out) {
  if (!out.same_shape(in)) out = Tensor(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = std::tanh(in[i]);
}

void relu_forward(const Tensor& in, Tensor& out) {
  if (!out.same_shape(in)) out = Tensor(in.shape());
  for (std::size_t i = 0; i < in.numel(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void sigmoid_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in) {
  for (std::size_t i = 0; i < out.numel(); ++i) {
    grad_in[i] += grad_out[i] * out[i] * (1.0 - out[i]);
  }
}

void tanh_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in) {
  for (std::size_t i = 0; i < out.numel(); ++i) {
    grad_in[i] += grad_out[i] * (1.0 - out[i] * out[i]);
  }
}

void relu_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in) {
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (out[i] > 0.0) grad_in[i] += grad_out[i];
  }
}

// ---- softmax / loss ----

void softmax(const Tensor& logits, Tensor& probs) {
  if (!probs.same_shape(logits)) probs = Tensor(logits.shape());
  double mx = logits[0];
  for (std::size_t i = 1; i < logits.numel(); ++i) mx = std::max(mx, logits[i]);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    z += probs[i];
  }
  kern::scale(1.0 / z, probs.data(), probs.numel());
}

double softmax_xent_loss(const Tensor& logits, int target_class,
                         Tensor& grad_logits) {
  const std::size_t k = logits.numel();
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= k) {
    throw std::invalid_argument("softmax_xent_loss: target class out of range");
  }
  softmax(logits, grad_logits);
  const double p = grad_logits[static_cast<std::size_t>(target_class)];
  grad_logits[static_cast<std::size_t>(target_class)] = p - 1.0;
  // clip keeps the loss finite when the correct-class probability underflows
  return -std::log(std::max(p, 1e-300));
}

// ---- optimizer ----

void Optimizer::step(std::vector<ParamBlock>& params) {
  if (cfg_.kind == OptKind::SgdMomentum) {
    if (velocity_.empty()) {
      for (const auto& p : params) velocity_.emplace_back(p.value.shape());
    }
    if (velocity_.size() != params.size()) {
      throw std::invalid_argument("optimizer: parameter list changed");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!velocity_[i].same_shape(p.value) || !p.grad.same_shape(p.value)) {
        throw std::invalid_argument("optimizer: shape mismatch for " + p.name);
      }
      kern::sgd_momentum_update(p.value.data(), velocity_[i].data(),
                                p.grad.data(), cfg_.learning_rate,
                                cfg_.momentum, p.value.numel());
    }
  } else {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.value.shape());
        v_.emplace_back(p.value.shape());
      }
    }
    if (m_.size() != params.size()) {
      throw std::invalid_argument("optimizer: parameter list changed");
    }
    const double t = static_cast<double>(t_ + 1);
    const double bc1 = 1.0 / (1.0 - std::pow(cfg_.beta1, t));
    const double bc2 = 1.0 / (1.0 - std::pow(cfg_.beta2, t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!m_[i].same_shape(p.value) || !p.grad.same_shape(p.value)) {
        throw std::invalid_argument("optimizer: shape mismatch for " + p.name);
      }
      kern::adam_update(p.value.data(), m_[i].data(), v_[i].data(),
                        p.grad.data(), cfg_.learning_rate, cfg_.beta1,
                        cfg_.beta2, cfg_.epsilon, bc1, bc2, p.value.numel());
    }
  }
  ++t_;
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[8] = {'G', 'G', 'A', 'F', 'C', 'K', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

const CheckpointBlock& Checkpoint::find(const std::string& name) const {
  for (const auto& b : blocks) {
    if (b.name == name) return b;
  }
  throw std::runtime_error("checkpoint: missing block \"" + name + "\"");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_checkpoint: cannot write " + path.string());
  }
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  put_u32(out, ckpt.kind);
  put_u32(out, static_cast<std::uint32_t>(ckpt.meta_json.size()));
  out.write(ckpt.meta_json.data(), static_cast<std::streamsize>(ckpt.meta_json.size()));
  put_u32(out, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& b : ckpt.blocks) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u32(out, b.dtype);
    if (b.dtype == 0) {
      put_u32(out, static_cast<std::uint32_t>(b.dims.size()));
      std::size_t numel = 1;
      for (std::size_t d : b.dims) {
        put_u64(out, d);
        numel *= d;
      }
      if (numel != b.f64.size()) {
        throw std::runtime_error("save_checkpoint: dims/payload mismatch in " + b.name);
      }
      for (double v : b.f64) put_u64(out, std::bit_cast<std::uint64_t>(v));
    } else {
      put_u64(out, b.bytes.size());
      out.write(reinterpret_cast<const char*>(b.bytes.data()),
                static_cast<std::streamsize>(b.bytes.size()));
    }
  }
  if (!out) {
    throw std::runtime_error("save_checkpoint: write failed for " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  }
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  }
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw std::runtime_error("load_checkpoint: unsupported version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.kind = get_u32(in);
  const std::uint32_t meta_len = get_u32(in);
  ckpt.meta_json.resize(meta_len);
  in.read(ckpt.meta_json.data(), meta_len);
  const std::uint32_t n_blocks = get_u32(in);
  for (std::uint32_t bi = 0; bi < n_blocks; ++bi) {
    CheckpointBlock b;
    const std::uint32_t name_len = get_u32(in);
    b.name.resize(name_len);
    in.read(b.name.data(), name_len);
    b.dtype = get_u32(in);
    if (b.dtype == 0) {
      const std::uint32_t ndims = get_u32(in);
      std::size_t numel = 1;
      for (std::uint32_t d = 0; d < ndims; ++d) {
        b.dims.push_back(static_cast<std::size_t>(get_u64(in)));
        numel *= b.dims.back();
      }
      b.f64.resize(numel);
      for (double& v : b.f64) v = std::bit_cast<double>(get_u64(in));
    } else if (b.dtype == 1) {
      b.bytes.resize(static_cast<std::size_t>(get_u64(in)));
      in.read(reinterpret_cast<char*>(b.bytes.data()),
              static_cast<std::streamsize>(b.bytes.size()));
    } else {
      throw std::runtime_error("load_checkpoint: unknown block dtype");
    }
    ckpt.blocks.push_back(std::move(b));
  }
  if (!in) {
    throw std::runtime_error("load_checkpoint: truncated file " + path.string());
  }
  return ckpt;
}

}  // namespace gridgaf::nn
