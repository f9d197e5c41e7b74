#pragma once

// Convolutional encoder over the filterbank output: a max-pool /
// batch-norm / SELU stem followed by six residual blocks of
// pre-activation conv units with max pooling after each skip connection.

#include <string>
#include <vector>

#include "aasist3/kan.hpp"
#include "aasist3/ops.hpp"

namespace aasist3 {

struct EncoderConfig {
  std::vector<int> channels = {32, 32, 64, 64, 64, 64};
  int kernel_f = 3;
  int kernel_t = 3;
  int pool_f = 1;  // per-block pool window
  int pool_t = 2;
  int first_pool_f = 1;  // stem pool window
  int first_pool_t = 3;
};

// Conv(SELU(BatchNorm(x))), same padding.
struct ConvUnit {
  BatchNorm bn;
  Tensor weight;  // [Co, Ci, KF, KT]
  Tensor bias;    // [Co]

  ConvUnit() = default;
  ConvUnit(int c_in, int c_out, int kf, int kt, Rng& rng);
  Tensor forward(const Tensor& x, bool training);
  void collect_params(const std::string& prefix, NamedParams& out);
  void collect_buffers(const std::string& prefix, NamedParams& out);
};

struct ResidualBlock {
  bool plain_first = false;  // first block: plain conv instead of unit_a
  Tensor conv0_weight, conv0_bias;
  ConvUnit unit_a;
  ConvUnit unit_b;
  bool project_skip = false;
  Tensor skip_weight, skip_bias;  // 1x1 conv when channel counts differ
  int pool_f = 1, pool_t = 2;

  ResidualBlock() = default;
  ResidualBlock(int c_in, int c_out, const EncoderConfig& cfg, bool first, Rng& rng);
  Tensor forward(const Tensor& x, bool training);
  void collect_params(const std::string& prefix, NamedParams& out);
  void collect_buffers(const std::string& prefix, NamedParams& out);
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const EncoderConfig& cfg, Rng& rng);

  // x: [B, 1, F, T] -> [B, C, F', T'].
  Tensor forward(const Tensor& x, bool training);

  // The (C, F', T') this configuration produces for an F x T input;
  // throws when the pooling chain underflows, naming the minimal T.
  static Shape output_shape(const EncoderConfig& cfg, int f, int t);

  const EncoderConfig& config() const { return cfg_; }
  void collect_params(const std::string& prefix, NamedParams& out);
  void collect_buffers(const std::string& prefix, NamedParams& out);

 private:
  EncoderConfig cfg_;
  BatchNorm stem_bn_;
  std::vector<ResidualBlock> blocks_;
};

}  // namespace aasist3
