#include "gridgaf/models.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>

#include "gridgaf/kernels.hpp"
#include "gridgaf/rng.hpp"
#include "json.hpp"

namespace gridgaf {

Tensor one_hot(int class_index, std::size_t k) {
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= k) {
    throw std::invalid_argument("one_hot: class index out of range");
  }
  Tensor t({k});
  t[static_cast<std::size_t>(class_index)] = 1.0;
  return t;
}

int predict_class(const Tensor& logits) {
  int best = 0;
  for (std::size_t i = 1; i < logits.numel(); ++i) {
    if (logits[i] > logits[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

const char* to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw std::runtime_error("unknown activation: " + s);
}

namespace {

// Glorot-uniform fill: U(-L, L) with L = sqrt(6 / (fan_in + fan_out)).
void glorot_fill(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < t.numel(); ++i) {
    t[i] = rng.uniform(-limit, limit);
  }
}

// pre = W x + U h + b
void recurrent_preact(const Tensor& W, const Tensor& U, const Tensor& b,
                      const Tensor& x, const Tensor& h_prev, Tensor& pre) {
  const std::size_t h = W.dim(0), m = W.dim(1);
  if (x.numel() != m || h_prev.numel() != h || U.dim(0) != h || U.dim(1) != h) {
    throw std::invalid_argument("recurrent cell: shape mismatch");
  }
  if (pre.numel() != h) pre = Tensor({h});
  const double* wp = W.data();
  const double* up = U.data();
  for (std::size_t i = 0; i < h; ++i) {
    pre[i] = b[i] + kern::dot(wp + i * m, x.data(), m) +
             kern::dot(up + i * h, h_prev.data(), h);
  }
}

// gW += d (x) outer x ; gU += d outer h_prev ; gb += d ; dh_prev += U^T d
void recurrent_grads(const Tensor& U, const Tensor& x, const Tensor& h_prev,
                     const Tensor& d, Tensor& gW, Tensor& gU, Tensor& gb,
                     Tensor& dh_prev) {
  const std::size_t h = U.dim(0), m = x.numel();
  for (std::size_t i = 0; i < h; ++i) {
    const double di = d[i];
    kern::axpy(di, x.data(), gW.data() + i * m, m);
    kern::axpy(di, h_prev.data(), gU.data() + i * h, h);
    gb[i] += di;
    kern::axpy(di, U.data() + i * h, dh_prev.data(), h);
  }
}

}  // namespace

// ---- LeNet ----

LeNet::LeNet(const LeNetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  const std::size_t k = cfg.kernel_size;
  const std::size_t s1 = cfg.input_size - k + 1;       // conv1 out
  const std::size_t p1 = s1 / 2;                       // pool1 out
  const std::size_t s2 = p1 - k + 1;                   // conv2 out
  const std::size_t p2 = s2 / 2;                       // pool2 out
  if (cfg.input_size < k || p1 < k || p2 == 0) {
    throw std::invalid_argument("LeNet: input size too small for architecture");
  }
  const std::size_t flat = p2 * p2 * cfg.conv2_channels;

  params_.emplace_back("conv1_kernels", Tensor({k, k, 1, cfg.conv1_channels}));
  params_.emplace_back("conv1_bias", Tensor({cfg.conv1_channels}));
  params_.emplace_back("conv2_kernels",
                       Tensor({k, k, cfg.conv1_channels, cfg.conv2_channels}));
  params_.emplace_back("conv2_bias", Tensor({cfg.conv2_channels}));
  params_.emplace_back("fc1_weights", Tensor({cfg.fc1_units, flat}));
  params_.emplace_back("fc1_bias", Tensor({cfg.fc1_units}));
  params_.emplace_back("fc2_weights", Tensor({cfg.fc2_units, cfg.fc1_units}));
  params_.emplace_back("fc2_bias", Tensor({cfg.fc2_units}));
  params_.emplace_back("out_weights", Tensor({cfg.num_classes, cfg.fc2_units}));
  params_.emplace_back("out_bias", Tensor({cfg.num_classes}));

  Rng rng(derive_stream(init_seed, 0xC0, 0x01));
  glorot_fill(params_[0].value, k * k * 1, k * k * cfg.conv1_channels, rng);
  glorot_fill(params_[2].value, k * k * cfg.conv1_channels,
              k * k * cfg.conv2_channels, rng);
  glorot_fill(params_[4].value, flat, cfg.fc1_units, rng);
  glorot_fill(params_[6].value, cfg.fc1_units, cfg.fc2_units, rng);
  glorot_fill(params_[8].value, cfg.fc2_units, cfg.num_classes, rng);
}

std::size_t LeNet::flatten_size() const {
  const std::size_t k = cfg_.kernel_size;
  const std::size_t p1 = (cfg_.input_size - k + 1) / 2;
  const std::size_t p2 = (p1 - k + 1) / 2;
  return p2 * p2 * cfg_.conv2_channels;
}

namespace {
// min over 2x2 windows of (max - second max). With relu inputs the exact
// zeros are pinned by the |z| margins checked alongside, so only positive
// entries can swap rank; windows with fewer than two positives are locally
// constant in the top slot and impose no constraint.
double pool_margin(const Tensor& in, bool positives_only) {
  const std::size_t H = in.dim(0), W = in.dim(1), C = in.dim(2);
  double margin = std::numeric_limits<double>::infinity();
  for (std::size_t y = 0; y + 1 < H; y += 2) {
    for (std::size_t x = 0; x + 1 < W; x += 2) {
      for (std::size_t c = 0; c < C; ++c) {
        const double v[4] = {in.at(y, x, c), in.at(y, x + 1, c),
                             in.at(y + 1, x, c), in.at(y + 1, x + 1, c)};
        double top = -std::numeric_limits<double>::infinity();
        double second = -std::numeric_limits<double>::infinity();
        int counted = 0;
        for (int k = 0; k < 4; ++k) {
          if (positives_only && v[k] <= 0.0) continue;
          ++counted;
          if (v[k] > top) {
            second = top;
            top = v[k];
          } else if (v[k] > second) {
            second = v[k];
          }
        }
        if (counted >= 2) margin = std::min(margin, top - second);
      }
    }
  }
  return margin;
}
}  // namespace

double LeNet::min_kink_margin() const {
  const bool relu = cfg_.hidden_activation == Activation::Relu;
  double margin = std::numeric_limits<double>::infinity();
  if (relu) {
    for (const Tensor* z : {&z1_, &z2_, &z3_, &z4_}) {
      for (std::size_t i = 0; i < z->numel(); ++i) {
        margin = std::min(margin, std::abs((*z)[i]));
      }
    }
  }
  margin = std::min(margin, pool_margin(a1_, relu));
  margin = std::min(margin, pool_margin(a2_, relu));
  return margin;
}

void LeNet::act_forward(const Tensor& in, Tensor& out) const {
  if (cfg_.hidden_activation == Activation::Relu) {
    nn::relu_forward(in, out);
  } else {
    nn::tanh_forward(in, out);
  }
}

void LeNet::act_backward(const Tensor& out, const Tensor& go, Tensor& gi) const {
  if (cfg_.hidden_activation == Activation::Relu) {
    nn::relu_backward(out, go, gi);
  } else {
    nn::tanh_backward(out, go, gi);
  }
}

const Tensor& LeNet::forward(const Tensor& image) {
  const std::size_t S = cfg_.input_size;
  if (image.rank() != 2 || image.dim(0) != S || image.dim(1) != S) {
    throw std::invalid_argument("LeNet::forward: image size mismatch");
  }
  if (input_.numel() != S * S) input_ = Tensor({S, S, 1});
  std::memcpy(input_.data(), image.data(), S * S * sizeof(double));

  nn::conv2d_forward(input_, params_[0].value, params_[1].value, z1_);
  act_forward(z1_, a1_);
  nn::maxpool2x2_forward(a1_, p1_, idx1_);
  nn::conv2d_forward(p1_, params_[2].value, params_[3].value, z2_);
  act_forward(z2_, a2_);
  nn::maxpool2x2_forward(a2_, p2_, idx2_);
  nn::dense_forward(p2_, params_[4].value, params_[5].value, z3_);
  act_forward(z3_, a3_);
  nn::dense_forward(a3_, params_[6].value, params_[7].value, z4_);
  act_forward(z4_, a4_);
  nn::dense_forward(a4_, params_[8].value, params_[9].value, logits_);
  return logits_;
}

void LeNet::backward(const Tensor& grad_logits) {
  auto ensure = [](Tensor& t, const Tensor& like) {
    if (!t.same_shape(like)) t = Tensor(like.shape());
    t.zero();
  };
  ensure(ga4_, a4_);
  ensure(gz4_, z4_);
  ensure(ga3_, a3_);
  ensure(gz3_, z3_);
  ensure(gp2_, p2_);
  ensure(ga2_, a2_);
  ensure(gz2_, z2_);
  ensure(gp1_, p1_);
  ensure(ga1_, a1_);
  ensure(gz1_, z1_);

  nn::dense_backward(a4_, params_[8].value, grad_logits, params_[8].grad,
                     params_[9].grad, &ga4_);
  act_backward(a4_, ga4_, gz4_);
  nn::dense_backward(a3_, params_[6].value, gz4_, params_[6].grad,
                     params_[7].grad, &ga3_);
  act_backward(a3_, ga3_, gz3_);
  nn::dense_backward(p2_, params_[4].value, gz3_, params_[4].grad,
                     params_[5].grad, &gp2_);
  nn::maxpool2x2_backward(idx2_, gp2_, ga2_);
  act_backward(a2_, ga2_, gz2_);
  nn::conv2d_backward(p1_, params_[2].value, gz2_, params_[2].grad,
                      params_[3].grad, &gp1_);
  nn::maxpool2x2_backward(idx1_, gp1_, ga1_);
  act_backward(a1_, ga1_, gz1_);
  nn::conv2d_backward(input_, params_[0].value, gz1_, params_[0].grad,
                      params_[1].grad, nullptr);
}

// ---- recurrent cells ----

void rnn_cell(const Tensor& W, const Tensor& U, const Tensor& b,
              const Tensor& x, const Tensor& h_prev, Tensor& h_out) {
  Tensor pre;
  recurrent_preact(W, U, b, x, h_prev, pre);
  nn::tanh_forward(pre, h_out);
}

void lstm_cell(const LstmGateParams& p, const Tensor& x, const Tensor& h_prev,
               const Tensor& s_prev, Tensor& h_out, Tensor& s_out,
               LstmStepCache* cache) {
  LstmStepCache local;
  LstmStepCache& c = cache ? *cache : local;
  Tensor pre;
  recurrent_preact(*p.Wf, *p.Uf, *p.bf, x, h_prev, pre);
  nn::sigmoid_forward(pre, c.f);
  recurrent_preact(*p.Wi, *p.Ui, *p.bi, x, h_prev, pre);
  nn::sigmoid_forward(pre, c.i);
  recurrent_preact(*p.Wo, *p.Uo, *p.bo, x, h_prev, pre);
  nn::sigmoid_forward(pre, c.o);
  recurrent_preact(*p.Ws, *p.Us, *p.bs, x, h_prev, pre);
  nn::tanh_forward(pre, c.g);

  const std::size_t h = c.f.numel();
  if (s_prev.numel() != h) {
    throw std::invalid_argument("lstm_cell: cell state shape mismatch");
  }
  if (c.s.numel() != h) c.s = Tensor({h});
  for (std::size_t k = 0; k < h; ++k) {
    c.s[k] = c.f[k] * s_prev[k] + c.i[k] * c.g[k];
  }
  nn::tanh_forward(c.s, c.tanh_s);
  if (h_out.numel() != h) h_out = Tensor({h});
  kern::hadamard(c.o.data(), c.tanh_s.data(), h_out.data(), h);
  s_out = c.s;
}

// ---- simple RNN ----

RnnNet::RnnNet(const RnnConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  const std::size_t m = cfg.input_size, h = cfg.hidden_units;
  params_.emplace_back("W", Tensor({h, m}));
  params_.emplace_back("U", Tensor({h, h}));
  params_.emplace_back("b", Tensor({h}));
  params_.emplace_back("readout_weights", Tensor({cfg.num_classes, h}));
  params_.emplace_back("readout_bias", Tensor({cfg.num_classes}));
  Rng rng(derive_stream(init_seed, 0xC0, 0x02));
  glorot_fill(params_[0].value, m, h, rng);
  glorot_fill(params_[1].value, h, h, rng);
  glorot_fill(params_[3].value, h, cfg.num_classes, rng);
}

const Tensor& RnnNet::forward(const Tensor& image) {
  const std::size_t S = cfg_.input_size;
  if (image.rank() != 2 || image.dim(0) != S || image.dim(1) != S) {
    throw std::invalid_argument("RnnNet::forward: image size mismatch");
  }
  input_ = image;
  const std::size_t h = cfg_.hidden_units;
  hs_.assign(S + 1, Tensor({h}));

  Tensor xt({S});
  for (std::size_t t = 1; t <= S; ++t) {
    std::memcpy(xt.data(), image.data() + (t - 1) * S, S * sizeof(double));
    rnn_cell(params_[0].value, params_[1].value, params_[2].value, xt,
             hs_[t - 1], hs_[t]);
  }
  nn::dense_forward(hs_[S], params_[3].value, params_[4].value, logits_);
  return logits_;
}

void RnnNet::backward(const Tensor& grad_logits) {
  const std::size_t S = cfg_.input_size, h = cfg_.hidden_units;
  Tensor dh({h}), dh_prev({h}), dpre({h}), xt({S});
  nn::dense_backward(hs_[S], params_[3].value, grad_logits, params_[3].grad,
                     params_[4].grad, &dh);
  for (std::size_t t = S; t >= 1; --t) {
    // through tanh
    dpre.zero();
    nn::tanh_backward(hs_[t], dh, dpre);
    std::memcpy(xt.data(), input_.data() + (t - 1) * S, S * sizeof(double));
    dh_prev.zero();
    recurrent_grads(params_[1].value, xt, hs_[t - 1], dpre, params_[0].grad,
                    params_[1].grad, params_[2].grad, dh_prev);
    std::swap(dh, dh_prev);
  }
}

// ---- LSTM ----

LstmNet::LstmNet(const LstmConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  const std::size_t m = cfg.input_size, h = cfg.hidden_units;
  const char* gate_names[4] = {"f", "i", "o", "s"};
  for (const char* g : gate_names) {
    params_.emplace_back(std::string("W_") + g, Tensor({h, m}));
    params_.emplace_back(std::string("U_") + g, Tensor({h, h}));
    params_.emplace_back(std::string("b_") + g, Tensor({h}));
  }
  params_.emplace_back("readout_weights", Tensor({cfg.num_classes, h}));
  params_.emplace_back("readout_bias", Tensor({cfg.num_classes}));

  Rng rng(derive_stream(init_seed, 0xC0, 0x03));
  for (int g = 0; g < 4; ++g) {
    glorot_fill(params_[3 * g].value, m, h, rng);
    glorot_fill(params_[3 * g + 1].value, h, h, rng);
  }
  glorot_fill(params_[12].value, h, cfg.num_classes, rng);
  params_[2].value.fill(1.0);  // forget-gate bias
}

LstmGateParams LstmNet::gate_params() const {
  return LstmGateParams{
      &params_[0].value,  &params_[1].value,  &params_[2].value,
      &params_[3].value,  &params_[4].value,  &params_[5].value,
      &params_[6].value,  &params_[7].value,  &params_[8].value,
      &params_[9].value,  &params_[10].value, &params_[11].value};
}

const Tensor& LstmNet::forward(const Tensor& image) {
  const std::size_t S = cfg_.input_size;
  if (image.rank() != 2 || image.dim(0) != S || image.dim(1) != S) {
    throw std::invalid_argument("LstmNet::forward: image size mismatch");
  }
  input_ = image;
  const std::size_t h = cfg_.hidden_units;
  hs_.assign(S + 1, Tensor({h}));
  ss_.assign(S + 1, Tensor({h}));
  steps_.assign(S, LstmStepCache{});

  const LstmGateParams gp = gate_params();
  Tensor xt({S});
  for (std::size_t t = 1; t <= S; ++t) {
    std::memcpy(xt.data(), image.data() + (t - 1) * S, S * sizeof(double));
    lstm_cell(gp, xt, hs_[t - 1], ss_[t - 1], hs_[t], ss_[t], &steps_[t - 1]);
  }
  nn::dense_forward(hs_[S], params_[12].value, params_[13].value, logits_);
  return logits_;
}

void LstmNet::backward(const Tensor& grad_logits) {
  const std::size_t S = cfg_.input_size, h = cfg_.hidden_units;
  Tensor dh({h}), dh_prev({h}), ds({h});
  Tensor df({h}), di({h}), dgo({h}), dg({h});
  Tensor dpre_f({h}), dpre_i({h}), dpre_o({h}), dpre_g({h});
  Tensor xt({S});

  nn::dense_backward(hs_[S], params_[12].value, grad_logits, params_[12].grad,
                     params_[13].grad, &dh);

  for (std::size_t t = S; t >= 1; --t) {
    const LstmStepCache& c = steps_[t - 1];
    const Tensor& s_prev = ss_[t - 1];
    for (std::size_t k = 0; k < h; ++k) {
      dgo[k] = dh[k] * c.tanh_s[k];
      ds[k] += dh[k] * c.o[k] * (1.0 - c.tanh_s[k] * c.tanh_s[k]);
      df[k] = ds[k] * s_prev[k];
      di[k] = ds[k] * c.g[k];
      dg[k] = ds[k] * c.i[k];
      dpre_f[k] = df[k] * c.f[k] * (1.0 - c.f[k]);
      dpre_i[k] = di[k] * c.i[k] * (1.0 - c.i[k]);
      dpre_o[k] = dgo[k] * c.o[k] * (1.0 - c.o[k]);
      dpre_g[k] = dg[k] * (1.0 - c.g[k] * c.g[k]);
    }
    std::memcpy(xt.data(), input_.data() + (t - 1) * S, S * sizeof(double));
    dh_prev.zero();
    recurrent_grads(params_[1].value, xt, hs_[t - 1], dpre_f, params_[0].grad,
                    params_[1].grad, params_[2].grad, dh_prev);
    recurrent_grads(params_[4].value, xt, hs_[t - 1], dpre_i, params_[3].grad,
                    params_[4].grad, params_[5].grad, dh_prev);
    recurrent_grads(params_[7].value, xt, hs_[t - 1], dpre_o, params_[6].grad,
                    params_[7].grad, params_[8].grad, dh_prev);
    recurrent_grads(params_[10].value, xt, hs_[t - 1], dpre_g, params_[9].grad,
                    params_[10].grad, params_[11].grad, dh_prev);
    std::swap(dh, dh_prev);
    for (std::size_t k = 0; k < h; ++k) ds[k] *= c.f[k];
  }
}

// ---- checkpoints ----

namespace {

nn::Checkpoint params_to_checkpoint(std::uint32_t kind,
                                    const std::string& meta,
                                    const std::vector<nn::ParamBlock>& params) {
  nn::Checkpoint ckpt;
  ckpt.kind = kind;
  ckpt.meta_json = meta;
  for (const auto& p : params) {
    nn::CheckpointBlock b;
    b.name = p.name;
    b.dtype = 0;
    b.dims = p.value.shape();
    b.f64.assign(p.value.data(), p.value.data() + p.value.numel());
    ckpt.blocks.push_back(std::move(b));
  }
  return ckpt;
}

void params_from_checkpoint(const nn::Checkpoint& ckpt,
                            std::vector<nn::ParamBlock>& params) {
  if (ckpt.blocks.size() != params.size()) {
    throw std::runtime_error("checkpoint: block count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& b = ckpt.blocks[i];
    if (b.name != params[i].name || b.dims != params[i].value.shape()) {
      throw std::runtime_error("checkpoint: block \"" + b.name +
                               "\" does not match model layout");
    }
    std::memcpy(params[i].value.data(), b.f64.data(),
                b.f64.size() * sizeof(double));
  }
}

}  // namespace

nn::Checkpoint LeNet::to_checkpoint() const {
  nlohmann::json meta{{"model", "cnn"},
                      {"input_size", cfg_.input_size},
                      {"conv1_channels", cfg_.conv1_channels},
                      {"conv2_channels", cfg_.conv2_channels},
                      {"kernel_size", cfg_.kernel_size},
                      {"fc1_units", cfg_.fc1_units},
                      {"fc2_units", cfg_.fc2_units},
                      {"num_classes", cfg_.num_classes},
                      {"activation", to_string(cfg_.hidden_activation)}};
  return params_to_checkpoint(nn::kCkptKindCnn, meta.dump(), params_);
}

nn::Checkpoint RnnNet::to_checkpoint() const {
  nlohmann::json meta{{"model", "rnn"},
                      {"input_size", cfg_.input_size},
                      {"hidden_units", cfg_.hidden_units},
                      {"num_classes", cfg_.num_classes}};
  return params_to_checkpoint(nn::kCkptKindRnn, meta.dump(), params_);
}

nn::Checkpoint LstmNet::to_checkpoint() const {
  nlohmann::json meta{{"model", "lstm"},
                      {"input_size", cfg_.input_size},
                      {"hidden_units", cfg_.hidden_units},
                      {"num_classes", cfg_.num_classes}};
  return params_to_checkpoint(nn::kCkptKindLstm, meta.dump(), params_);
}

void save_model(const NeuralNet& net, const std::filesystem::path& path) {
  nn::save_checkpoint(net.to_checkpoint(), path);
}

std::unique_ptr<NeuralNet> neural_net_from_checkpoint(const nn::Checkpoint& ckpt) {
  const nlohmann::json meta = nlohmann::json::parse(ckpt.meta_json);
  std::unique_ptr<NeuralNet> net;
  if (ckpt.kind == nn::kCkptKindCnn) {
    LeNetConfig cfg;
    cfg.input_size = meta.at("input_size").get<std::size_t>();
    cfg.conv1_channels = meta.at("conv1_channels").get<std::size_t>();
    cfg.conv2_channels = meta.at("conv2_channels").get<std::size_t>();
    cfg.kernel_size = meta.at("kernel_size").get<std::size_t>();
    cfg.fc1_units = meta.at("fc1_units").get<std::size_t>();
    cfg.fc2_units = meta.at("fc2_units").get<std::size_t>();
    cfg.num_classes = meta.at("num_classes").get<std::size_t>();
    cfg.hidden_activation =
        activation_from_string(meta.at("activation").get<std::string>());
    net = std::make_unique<LeNet>(cfg, 0);
  } else if (ckpt.kind == nn::kCkptKindRnn) {
    RnnConfig cfg;
    cfg.input_size = meta.at("input_size").get<std::size_t>();
    cfg.hidden_units = meta.at("hidden_units").get<std::size_t>();
    cfg.num_classes = meta.at("num_classes").get<std::size_t>();
    net = std::make_unique<RnnNet>(cfg, 0);
  } else if (ckpt.kind == nn::kCkptKindLstm) {
    LstmConfig cfg;
    cfg.input_size = meta.at("input_size").get<std::size_t>();
    cfg.hidden_units = meta.at("hidden_units").get<std::size_t>();
    cfg.num_classes = meta.at("num_classes").get<std::size_t>();
    net = std::make_unique<LstmNet>(cfg, 0);
  } else {
    throw std::runtime_error("checkpoint does not hold a neural model");
  }
  params_from_checkpoint(ckpt, net->params());
  return net;
}

std::unique_ptr<NeuralNet> load_neural_net(const std::filesystem::path& path) {
  return neural_net_from_checkpoint(nn::load_checkpoint(path));
}

}  // namespace gridgaf
