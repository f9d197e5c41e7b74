#include "aasist3/model.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace aasist3 {

Aasist3Model::Aasist3Model(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
  bank_ = make_mel_filterbank(cfg.sinc.n_filters, cfg.sinc.kernel_len, cfg.sinc.f_min,
                              cfg.sinc.f_max, cfg.sample_rate);
  encoder_ = Encoder(cfg.encoder, rng);

  const int chunk = cfg.chunk_samples();
  if (chunk < cfg.sinc.kernel_len) {
    throw std::invalid_argument("Aasist3Model: chunk shorter than the sinc kernel");
  }
  const int frames = (chunk - cfg.sinc.kernel_len) / cfg.sinc.stride + 1;
  encoded_shape_ = Encoder::output_shape(cfg.encoder, cfg.sinc.n_filters, frames);
  const int channels = encoded_shape_[0];
  const int n_spatial = encoded_shape_[1];
  const int n_temporal = encoded_shape_[2];
  const int d = cfg.graph.dim;

  auto basis = std::make_shared<const BsplineBasis>(
      build_grid(cfg.kan.grid_min, cfg.kan.grid_max, cfg.kan.grid_size, cfg.kan.order));

  pe_t_ = normal_init({n_temporal, channels}, 0.1, rng);
  pe_s_ = normal_init({n_spatial, channels}, 0.1, rng);
  pe_t_.set_requires_grad(true);
  pe_s_.set_requires_grad(true);

  gal_t_ = make_gal_params(channels, d, cfg.graph.temperature, basis, rng);
  gal_s_ = make_gal_params(channels, d, cfg.graph.temperature, basis, rng);
  gal_t_.dropout_p = cfg.graph.dropout;
  gal_s_.dropout_p = cfg.graph.dropout;
  pool_t_ = make_pool_params(d, basis, rng);
  pool_s_ = make_pool_params(d, basis, rng);
  pool_t_.dropout_p = cfg.graph.dropout;
  pool_s_.dropout_p = cfg.graph.dropout;

  stack_init_ = Tensor::zeros({d}, true);

  branches_.reserve(static_cast<std::size_t>(cfg.graph.branches));
  for (int b = 0; b < cfg.graph.branches; ++b) {
    Branch br;
    br.hs1 = make_hs_gal_params(d, d, d, cfg.graph.temperature, basis, rng);
    br.pool_t = make_pool_params(d, basis, rng);
    br.pool_s = make_pool_params(d, basis, rng);
    br.hs2 = make_hs_gal_params(d, d, d, cfg.graph.temperature, basis, rng);
    br.hs1.dropout_p = cfg.graph.dropout;
    br.hs2.dropout_p = cfg.graph.dropout;
    br.pool_t.dropout_p = cfg.graph.dropout;
    br.pool_s.dropout_p = cfg.graph.dropout;
    branches_.push_back(std::move(br));
  }

  readout_kan_ = KanLayer(5 * d, 2, basis, rng);

  params_.emplace_back("pe_t", pe_t_);
  params_.emplace_back("pe_s", pe_s_);
  params_.emplace_back("stack_init", stack_init_);
  encoder_.collect_params("encoder", params_);
  gal_t_.collect_params("gal_t", params_);
  gal_s_.collect_params("gal_s", params_);
  pool_t_.collect_params("pool_t", params_);
  pool_s_.collect_params("pool_s", params_);
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    const std::string prefix = "branch" + std::to_string(b);
    branches_[b].hs1.collect_params(prefix + ".hs1", params_);
    branches_[b].pool_t.collect_params(prefix + ".pool_t", params_);
    branches_[b].pool_s.collect_params(prefix + ".pool_s", params_);
    branches_[b].hs2.collect_params(prefix + ".hs2", params_);
  }
  readout_kan_.collect_params("readout", params_);

  encoder_.collect_buffers("encoder", buffers_);
  gal_t_.collect_buffers("gal_t", buffers_);
  gal_s_.collect_buffers("gal_s", buffers_);
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    const std::string prefix = "branch" + std::to_string(b);
    branches_[b].hs1.collect_buffers(prefix + ".hs1", buffers_);
    branches_[b].hs2.collect_buffers(prefix + ".hs2", buffers_);
  }
}

std::pair<Tensor, Tensor> Aasist3Model::reduce_to_node_sets(const Tensor& encoded) {
  if (encoded.ndim() != 4) {
    throw std::invalid_argument("reduce_to_node_sets: expected [B, C, F', T']");
  }
  Tensor mag = abs_op(encoded);
  Tensor temporal = transpose_last2(reduce_max(mag, 2));  // [B, T', C]
  Tensor spatial = transpose_last2(reduce_max(mag, 3));   // [B, F', C]
  return {temporal, spatial};
}

std::pair<Graph, Graph> Aasist3Model::graphs_from_features(const Tensor& encoded, bool training,
                                                           Rng& rng) {
  auto [t_raw, s_raw] = reduce_to_node_sets(encoded);
  if (t_raw.dim(1) != pe_t_.dim(0) || s_raw.dim(1) != pe_s_.dim(0)) {
    throw std::invalid_argument("graphs_from_features: embedding shape mismatch");
  }
  Graph gt{add_broadcast_nodes(t_raw, pe_t_)};
  Graph gs{add_broadcast_nodes(s_raw, pe_s_)};
  gt = kan_gal(gt, gal_t_, training, rng);
  gt = kan_graph_pool(gt, pool_t_, cfg_.graph.first_pool_ratio, training, rng);
  gs = kan_gal(gs, gal_s_, training, rng);
  gs = kan_graph_pool(gs, pool_s_, cfg_.graph.first_pool_ratio, training, rng);
  return {gt, gs};
}

Aasist3Model::BranchOutput Aasist3Model::branch_forward(int branch, const HeteroState& state,
                                                        bool training, Rng& rng) {
  Branch& br = branches_.at(static_cast<std::size_t>(branch));
  BranchOutput out;
  out.stage2 = kan_hs_gal(state, br.hs1, training, rng);
  HeteroState mid;
  mid.temporal = kan_graph_pool(out.stage2.temporal, br.pool_t, cfg_.graph.branch_pool_ratio,
                                training, rng);
  mid.spatial = kan_graph_pool(out.stage2.spatial, br.pool_s, cfg_.graph.branch_pool_ratio,
                               training, rng);
  mid.stack = out.stage2.stack;
  out.stage3 = kan_hs_gal(mid, br.hs2, training, rng);
  return out;
}

Aasist3Model::Aggregate Aasist3Model::aggregate_branches(
    const HeteroState& pre, const std::vector<BranchOutput>& branches) const {
  if (branches.empty()) throw std::invalid_argument("aggregate_branches: no branch outputs");
  Tensor t2 = branches[0].stage2.temporal.nodes;
  Tensor s2 = branches[0].stage2.spatial.nodes;
  Tensor t3 = branches[0].stage3.temporal.nodes;
  Tensor s3 = branches[0].stage3.spatial.nodes;
  Tensor st2 = branches[0].stage2.stack;
  Tensor st3 = branches[0].stage3.stack;
  for (std::size_t b = 1; b < branches.size(); ++b) {
    t2 = maximum(t2, branches[b].stage2.temporal.nodes);
    s2 = maximum(s2, branches[b].stage2.spatial.nodes);
    t3 = maximum(t3, branches[b].stage3.temporal.nodes);
    s3 = maximum(s3, branches[b].stage3.spatial.nodes);
    st2 = maximum(st2, branches[b].stage2.stack);
    st3 = maximum(st3, branches[b].stage3.stack);
  }
  Aggregate agg;
  agg.h_t = concat({pre.temporal.nodes, t2, t3}, 1);
  agg.h_s = concat({pre.spatial.nodes, s2, s3}, 1);
  if (cfg_.graph.stack_combine == "sum") {
    agg.s_f = add(add(pre.stack, st2), st3);
  } else {
    agg.s_f = maximum(maximum(pre.stack, st2), st3);
  }
  return agg;
}

Tensor Aasist3Model::readout(const Aggregate& agg, bool training, Rng& rng) {
  const double p = cfg_.graph.dropout;
  const double pr = cfg_.graph.readout_dropout;
  Tensor ht = dropout(agg.h_t, p, training, rng);
  Tensor hs = dropout(agg.h_s, p, training, rng);
  Tensor sf = dropout(agg.s_f, p, training, rng);
  std::vector<Tensor> parts = {
      reduce_max(ht, 1), reduce_mean(ht, 1), reduce_max(hs, 1), reduce_mean(hs, 1), sf,
  };
  for (Tensor& part : parts) part = dropout(part, pr, training, rng);
  Tensor hidden = concat(parts, 1);  // [B, 5*D]
  return readout_kan_.forward(hidden);
}

Tensor Aasist3Model::encode(const Tensor& features, bool training) {
  return encoder_.forward(features, training);
}

Tensor Aasist3Model::forward_features(const Tensor& features, bool training, Rng& rng) {
  Tensor encoded = encode(features, training);
  auto [gt, gs] = graphs_from_features(encoded, training, rng);
  HeteroState pre{gt, gs, expand_batch(stack_init_, features.dim(0))};
  std::vector<BranchOutput> outs;
  outs.reserve(branches_.size());
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    outs.push_back(branch_forward(static_cast<int>(b), pre, training, rng));
  }
  Aggregate agg = aggregate_branches(pre, outs);
  Tensor logits = readout(agg, training, rng);
  logits.check_finite("forward_features logits");
  return logits;
}

Tensor Aasist3Model::features_from_chunk(const AudioSignal& chunk) const {
  Tensor feats = sinc_conv(chunk, bank_, cfg_.sinc.stride);  // [F, frames]
  return reshape(feats, {1, 1, feats.dim(0), feats.dim(1)});
}

std::vector<double> Aasist3Model::chunk_probabilities(const AudioSignal& audio) {
  if (audio.sample_rate != cfg_.sample_rate) {
    throw std::invalid_argument("score_utterance: sample rate " +
                                std::to_string(audio.sample_rate) + " != " +
                                std::to_string(cfg_.sample_rate));
  }
  AudioSignal emphasized = pre_emphasis(audio, cfg_.pre_emphasis);
  std::vector<AudioSignal> chunks =
      chunk_signal(emphasized, cfg_.chunk_seconds, cfg_.hop_seconds);
  Rng scratch(0);  // never consumed: dropout is disabled in eval mode
  std::vector<double> probs;
  probs.reserve(chunks.size());
  for (const AudioSignal& chunk : chunks) {
    Tensor logits = forward_features(features_from_chunk(chunk), false, scratch);
    Tensor prob = softmax_t(logits, 1, 1.0);
    probs.push_back(prob.at(static_cast<std::size_t>(kBonafideClass)));
  }
  return probs;
}

double Aasist3Model::score_utterance(const AudioSignal& audio) {
  const std::vector<double> probs = chunk_probabilities(audio);
  double sum = 0.0;
  for (double p : probs) sum += p;
  return sum / static_cast<double>(probs.size());
}

void Aasist3Model::zero_grad() {
  for (auto& [name, tensor] : params_) tensor.zero_grad();
}

double fuse_scores(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("fuse_scores: no scores");
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

}  // namespace aasist3
