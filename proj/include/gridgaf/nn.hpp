#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gridgaf/tensor.hpp"

namespace gridgaf::nn {

// One named parameter tensor with its gradient accumulator. All backward
// functions in this module ACCUMULATE (+=) into gradient tensors; callers
// zero them at batch boundaries.
struct ParamBlock {
  std::string name;
  Tensor value;
  Tensor grad;

  ParamBlock() = default;
  ParamBlock(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
};

void zero_grads(std::vector<ParamBlock>& params);
std::size_t total_size(const std::vector<ParamBlock>& params);
std::vector<double> flatten_values(const std::vector<ParamBlock>& params);
void set_values(std::vector<ParamBlock>& params, const std::vector<double>& flat);
std::vector<double> flatten_grads(const std::vector<ParamBlock>& params);

// ---- layer primitives ----
// Layout: activations [H, W, C] channels-last, conv kernels [k, k, Cin, Cout],
// dense weights [m, n]. Convolution is stride-1, no padding, cross-correlation
// orientation (no kernel flip).

void conv2d_forward(const Tensor& input, const Tensor& kernels,
                    const Tensor& bias, Tensor& out);
void conv2d_backward(const Tensor& input, const Tensor& kernels,
                     const Tensor& grad_out, Tensor& grad_kernels,
                     Tensor& grad_bias, Tensor* grad_input);

// Non-overlapping 2x2 windows, trailing odd row/column dropped. argmax holds
// the flat input index feeding each output cell (first maximum in scan order).
void maxpool2x2_forward(const Tensor& input, Tensor& out,
                        std::vector<std::uint32_t>& argmax);
void maxpool2x2_backward(const std::vector<std::uint32_t>& argmax,
                         const Tensor& grad_out, Tensor& grad_input);

// out = weights * input + bias
void dense_forward(const Tensor& input, const Tensor& weights,
                   const Tensor& bias, Tensor& out);
void dense_backward(const Tensor& input, const Tensor& weights,
                    const Tensor& grad_out, Tensor& grad_weights,
                    Tensor& grad_bias, Tensor* grad_input);

// ---- activations (elementwise; out may alias in) ----
double sigmoid(double x);
void sigmoid_forward(const Tensor& in, Tensor& out);
void tanh_forward(const Tensor& in, Tensor& out);
void relu_forward(const Tensor& in, Tensor& out);
// backward from cached forward OUTPUT (grad_in += f'(x) .* grad_out)
void sigmoid_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in);
void tanh_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in);
void relu_backward(const Tensor& out, const Tensor& grad_out, Tensor& grad_in);

// max-subtracted softmax over the whole tensor
void softmax(const Tensor& logits, Tensor& probs);
// loss = -log softmax(logits)[target]; grad_logits = softmax - one_hot (set,
// not accumulated)
double softmax_xent_loss(const Tensor& logits, int target_class,
                         Tensor& grad_logits);

// ---- optimizers ----
enum class OptKind { SgdMomentum, Adam };

struct OptimizerConfig {
  OptKind kind = OptKind::SgdMomentum;
  double learning_rate = 0.01;
  double momentum = 0.9;    // SGD
  double beta1 = 0.9;       // Adam
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Owns the per-parameter auxiliary buffers (velocity, or Adam moments plus
// step counter). Buffers are laid out against the block list given to the
// first step() call; later calls must pass identically-shaped blocks.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(std::vector<ParamBlock>& params);
  std::uint64_t steps_taken() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor> velocity_;  // SGD
  std::vector<Tensor> m_, v_;     // Adam
};

// ---- checkpoint container ----
// Versioned binary, all integers little-endian:
//   magic "GGAFCKP1", u32 version, u32 kind, u32 meta_len + JSON bytes,
//   u32 n_blocks, then per block: u32 name_len + name, u32 dtype
//   (0 = f64 tensor, 1 = raw bytes), and for tensors u32 ndims + u64 dims
//   followed by f64 LE payload in row-major declaration order, for raw
//   blocks u64 nbytes + bytes.
struct CheckpointBlock {
  std::string name;
  std::uint32_t dtype = 0;
  std::vector<std::size_t> dims;       // dtype 0
  std::vector<double> f64;             // dtype 0
  std::vector<std::uint8_t> bytes;     // dtype 1
};

struct Checkpoint {
  std::uint32_t kind = 0;
  std::string meta_json;
  std::vector<CheckpointBlock> blocks;

  const CheckpointBlock& find(const std::string& name) const;
};

inline constexpr std::uint32_t kCkptKindCnn = 0;
inline constexpr std::uint32_t kCkptKindRnn = 1;
inline constexpr std::uint32_t kCkptKindLstm = 2;
inline constexpr std::uint32_t kCkptKindDt = 3;
inline constexpr std::uint32_t kCkptKindSvm = 4;

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gridgaf::nn
