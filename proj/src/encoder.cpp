#include "aasist3/encoder.hpp"

#include <stdexcept>
#include <string>

namespace aasist3 {

namespace {

Tensor conv_weights(int c_in, int c_out, int kf, int kt, Rng& rng) {
  Tensor w = kaiming_init({c_out, c_in, kf, kt}, c_in * kf * kt, rng);
  w.set_requires_grad(true);
  return w;
}

}  // namespace

ConvUnit::ConvUnit(int c_in, int c_out, int kf, int kt, Rng& rng)
    : bn(c_in),
      weight(conv_weights(c_in, c_out, kf, kt, rng)),
      bias(Tensor::zeros({c_out}, true)) {}

Tensor ConvUnit::forward(const Tensor& x, bool training) {
  Tensor h = selu(batch_norm_channels(x, bn, training));
  return conv2d(h, weight, bias, (weight.dim(2) - 1) / 2, (weight.dim(3) - 1) / 2);
}

void ConvUnit::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
  out.emplace_back(prefix + ".bn.gamma", bn.gamma);
  out.emplace_back(prefix + ".bn.beta", bn.beta);
}

void ConvUnit::collect_buffers(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".bn.running_mean", bn.running_mean);
  out.emplace_back(prefix + ".bn.running_var", bn.running_var);
}

ResidualBlock::ResidualBlock(int c_in, int c_out, const EncoderConfig& cfg, bool first,
                             Rng& rng)
    : plain_first(first), pool_f(cfg.pool_f), pool_t(cfg.pool_t) {
  if (first) {
    conv0_weight = conv_weights(c_in, c_out, cfg.kernel_f, cfg.kernel_t, rng);
    conv0_bias = Tensor::zeros({c_out}, true);
  } else {
    unit_a = ConvUnit(c_in, c_out, cfg.kernel_f, cfg.kernel_t, rng);
  }
  unit_b = ConvUnit(c_out, c_out, cfg.kernel_f, cfg.kernel_t, rng);
  project_skip = c_in != c_out;
  if (project_skip) {
    skip_weight = conv_weights(c_in, c_out, 1, 1, rng);
    skip_bias = Tensor::zeros({c_out}, true);
  }
}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
  Tensor h;
  if (plain_first) {
    h = conv2d(x, conv0_weight, conv0_bias, (conv0_weight.dim(2) - 1) / 2,
               (conv0_weight.dim(3) - 1) / 2);
  } else {
    h = unit_a.forward(x, training);
  }
  h = unit_b.forward(h, training);
  Tensor skip = project_skip ? conv2d(x, skip_weight, skip_bias, 0, 0) : x;
  return maxpool2d(add(h, skip), pool_f, pool_t);
}

void ResidualBlock::collect_params(const std::string& prefix, NamedParams& out) {
  if (plain_first) {
    out.emplace_back(prefix + ".conv0.weight", conv0_weight);
    out.emplace_back(prefix + ".conv0.bias", conv0_bias);
  } else {
    unit_a.collect_params(prefix + ".unit_a", out);
  }
  unit_b.collect_params(prefix + ".unit_b", out);
  if (project_skip) {
    out.emplace_back(prefix + ".skip.weight", skip_weight);
    out.emplace_back(prefix + ".skip.bias", skip_bias);
  }
}

void ResidualBlock::collect_buffers(const std::string& prefix, NamedParams& out) {
  if (!plain_first) unit_a.collect_buffers(prefix + ".unit_a", out);
  unit_b.collect_buffers(prefix + ".unit_b", out);
}

Encoder::Encoder(const EncoderConfig& cfg, Rng& rng) : cfg_(cfg), stem_bn_(1) {
  if (cfg.channels.empty()) throw std::invalid_argument("Encoder: empty channel plan");
  int c_in = 1;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    blocks_.emplace_back(c_in, cfg.channels[i], cfg, i == 0, rng);
    c_in = cfg.channels[i];
  }
}

Tensor Encoder::forward(const Tensor& x, bool training) {
  if (x.ndim() != 4 || x.dim(1) != 1) {
    throw std::invalid_argument("Encoder: expected [B, 1, F, T], got " + shape_str(x.shape()));
  }
  output_shape(cfg_, x.dim(2), x.dim(3));  // validates extents up front
  Tensor h = maxpool2d(x, cfg_.first_pool_f, cfg_.first_pool_t);
  h = selu(batch_norm_channels(h, stem_bn_, training));
  for (ResidualBlock& block : blocks_) h = block.forward(h, training);
  return h;
}

Shape Encoder::output_shape(const EncoderConfig& cfg, int f, int t) {
  int min_f = cfg.first_pool_f;
  int min_t = cfg.first_pool_t;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    min_f *= cfg.pool_f;
    min_t *= cfg.pool_t;
  }
  if (f < min_f || t < min_t) {
    throw std::invalid_argument("Encoder: input " + std::to_string(f) + "x" +
                                std::to_string(t) + " too small for the pooling chain; " +
                                "minimal admissible extents are " + std::to_string(min_f) +
                                "x" + std::to_string(min_t));
  }
  int fo = f / cfg.first_pool_f;
  int to = t / cfg.first_pool_t;
  for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
    fo /= cfg.pool_f;
    to /= cfg.pool_t;
  }
  return {cfg.channels.back(), fo, to};
}

void Encoder::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".stem_bn.gamma", stem_bn_.gamma);
  out.emplace_back(prefix + ".stem_bn.beta", stem_bn_.beta);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_params(prefix + ".block" + std::to_string(i), out);
  }
}

void Encoder::collect_buffers(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + ".stem_bn.running_mean", stem_bn_.running_mean);
  out.emplace_back(prefix + ".stem_bn.running_var", stem_bn_.running_var);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_buffers(prefix + ".block" + std::to_string(i), out);
  }
}

}  // namespace aasist3
