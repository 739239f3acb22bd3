#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gridgaf/data_model.hpp"
#include "gridgaf/nn.hpp"
#include "gridgaf/tensor.hpp"

namespace gridgaf {

Tensor one_hot(int class_index, std::size_t k = 3);
inline Tensor one_hot(Label label) { return one_hot(static_cast<int>(label)); }

// argmax; ties break toward the lowest class index
int predict_class(const Tensor& logits);

enum class Activation { Relu, Tanh };
const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Classifier that maps a square image tensor [S,S] to 3 logits. backward()
// accumulates into the parameter gradients; callers zero them per batch.
class NeuralNet {
 public:
  virtual ~NeuralNet() = default;
  virtual const Tensor& forward(const Tensor& image) = 0;
  virtual void backward(const Tensor& grad_logits) = 0;
  virtual std::vector<nn::ParamBlock>& params() = 0;
  virtual const std::vector<nn::ParamBlock>& params() const = 0;
  virtual std::string kind() const = 0;
  virtual std::size_t input_size() const = 0;
  virtual nn::Checkpoint to_checkpoint() const = 0;
};

// Modified LeNet-5: conv(k,c1) -> act -> pool -> conv(k,c2) -> act -> pool ->
// dense(fc1) -> act -> dense(fc2) -> act -> dense(classes).
struct LeNetConfig {
  std::size_t input_size = 64;
  std::size_t conv1_channels = 32;
  std::size_t conv2_channels = 16;
  std::size_t kernel_size = 5;
  std::size_t fc1_units = 120;
  std::size_t fc2_units = 84;
  std::size_t num_classes = 3;
  Activation hidden_activation = Activation::Relu;
};

class LeNet final : public NeuralNet {
 public:
  LeNet(const LeNetConfig& cfg, std::uint64_t init_seed);
  const Tensor& forward(const Tensor& image) override;
  void backward(const Tensor& grad_logits) override;
  std::vector<nn::ParamBlock>& params() override { return params_; }
  const std::vector<nn::ParamBlock>& params() const override { return params_; }
  std::string kind() const override { return "cnn"; }
  std::size_t input_size() const override { return cfg_.input_size; }
  nn::Checkpoint to_checkpoint() const override;
  const LeNetConfig& config() const { return cfg_; }
  std::size_t flatten_size() const;
  // Smallest distance of the last forward pass from a relu/maxpool switching
  // point: min over |conv pre-activations| and pooling win-by margins.
  // Finite-difference tests only probe parameter sets where this is large.
  double min_kink_margin() const;

 private:
  void act_forward(const Tensor& in, Tensor& out) const;
  void act_backward(const Tensor& out, const Tensor& go, Tensor& gi) const;

  LeNetConfig cfg_;
  std::vector<nn::ParamBlock> params_;
  // forward cache
  Tensor input_, z1_, a1_, p1_, z2_, a2_, p2_, a3_, a4_, logits_;
  Tensor z3_, z4_;
  std::vector<std::uint32_t> idx1_, idx2_;
  // backward scratch
  Tensor ga4_, gz4_, ga3_, gz3_, gp2_, ga2_, gz2_, gp1_, ga1_, gz1_;
};

// h_t = tanh(W x_t + U h_prev + b)
void rnn_cell(const Tensor& W, const Tensor& U, const Tensor& b,
              const Tensor& x, const Tensor& h_prev, Tensor& h_out);

// Gate activations cached by one LSTM step; g is the tanh cell candidate.
struct LstmStepCache {
  Tensor f, i, o, g, s, tanh_s;
};

struct LstmGateParams {
  const Tensor *Wf, *Uf, *bf;
  const Tensor *Wi, *Ui, *bi;
  const Tensor *Wo, *Uo, *bo;
  const Tensor *Ws, *Us, *bs;
};

// f,i,o = sigmoid(W x + U h_prev + b); s = f.*s_prev + i.*tanh(Ws x + Us h + bs);
// h = o .* tanh(s)
void lstm_cell(const LstmGateParams& p, const Tensor& x, const Tensor& h_prev,
               const Tensor& s_prev, Tensor& h_out, Tensor& s_out,
               LstmStepCache* cache = nullptr);

// Many-to-one reader: image rows are the time steps, logits come from a dense
// readout of the final hidden state.
struct RnnConfig {
  std::size_t input_size = 64;   // row width m = S
  std::size_t hidden_units = 128;
  std::size_t num_classes = 3;
};

class RnnNet final : public NeuralNet {
 public:
  RnnNet(const RnnConfig& cfg, std::uint64_t init_seed);
  const Tensor& forward(const Tensor& image) override;
  void backward(const Tensor& grad_logits) override;
  std::vector<nn::ParamBlock>& params() override { return params_; }
  const std::vector<nn::ParamBlock>& params() const override { return params_; }
  std::string kind() const override { return "rnn"; }
  std::size_t input_size() const override { return cfg_.input_size; }
  nn::Checkpoint to_checkpoint() const override;
  const RnnConfig& config() const { return cfg_; }

 private:
  RnnConfig cfg_;
  std::vector<nn::ParamBlock> params_;
  Tensor input_, logits_;
  std::vector<Tensor> hs_;  // h_0 .. h_S
};

struct LstmConfig {
  std::size_t input_size = 64;
  std::size_t hidden_units = 64;
  std::size_t num_classes = 3;
};

class LstmNet final : public NeuralNet {
 public:
  LstmNet(const LstmConfig& cfg, std::uint64_t init_seed);
  const Tensor& forward(const Tensor& image) override;
  void backward(const Tensor& grad_logits) override;
  std::vector<nn::ParamBlock>& params() override { return params_; }
  const std::vector<nn::ParamBlock>& params() const override { return params_; }
  std::string kind() const override { return "lstm"; }
  std::size_t input_size() const override { return cfg_.input_size; }
  nn::Checkpoint to_checkpoint() const override;
  const LstmConfig& config() const { return cfg_; }

 private:
  LstmGateParams gate_params() const;

  LstmConfig cfg_;
  std::vector<nn::ParamBlock> params_;
  Tensor input_, logits_;
  std::vector<Tensor> hs_, ss_;        // states 0..S
  std::vector<LstmStepCache> steps_;   // 1..S
};

void save_model(const NeuralNet& net, const std::filesystem::path& path);
std::unique_ptr<NeuralNet> neural_net_from_checkpoint(const nn::Checkpoint& ckpt);
std::unique_ptr<NeuralNet> load_neural_net(const std::filesystem::path& path);

}  // namespace gridgaf
