#include "aasist3/gradsuite.hpp"

#include <memory>

#include "aasist3/graph.hpp"
#include "aasist3/model.hpp"
#include "aasist3/train.hpp"

namespace aasist3 {

namespace {

std::shared_ptr<const BsplineBasis> default_basis() {
  return std::make_shared<const BsplineBasis>(build_grid(-1.0, 1.0, 16, 4));
}

Tensor random_input(const Shape& shape, double lo, double hi, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  double* d = t.data();
  for (std::size_t i = 0; i < t.numel(); ++i) d[i] = rng.uniform(lo, hi);
  return t;
}

std::vector<Tensor> trainable(const NamedParams& params) {
  std::vector<Tensor> out;
  for (const auto& [name, tensor] : params) out.push_back(tensor);
  return out;
}

GradCheckResult check(const std::string& layer, double tolerance, double got) {
  return {layer, got, tolerance, got <= tolerance};
}

GradCheckResult check_kan_layer() {
  Rng rng(11);
  KanLayer layer(4, 3, default_basis(), rng);
  Tensor x = random_input({5, 4}, -1.2, 1.2, rng);
  x.set_requires_grad(true);
  Rng proj_rng(12);
  Tensor w = random_input({5, 3}, -1.0, 1.0, proj_rng);
  std::vector<Tensor> params = {x, layer.coeffs(), layer.base_weight(), layer.spline_weight(),
                                layer.slopes()};
  auto f = [&]() { return sum_all(mul(layer.forward(x), w)); };
  return check("kan_layer", 1e-4, grad_check(f, params));
}

GradCheckResult check_kan_gal() {
  Rng rng(21);
  GalParams p = make_gal_params(3, 3, 1.5, default_basis(), rng);
  p.dropout_p = 0.0;
  Tensor x = random_input({2, 4, 3}, -1.0, 1.0, rng);
  x.set_requires_grad(true);
  Rng proj_rng(22);
  Tensor w = random_input({2, 4, 3}, -1.0, 1.0, proj_rng);
  NamedParams named;
  p.collect_params("gal", named);
  std::vector<Tensor> params = trainable(named);
  params.push_back(x);
  Rng drop_rng(0);
  auto f = [&]() { return sum_all(mul(kan_gal(Graph{x}, p, true, drop_rng).nodes, w)); };
  return check("kan_gal", 1e-4, grad_check(f, params));
}

GradCheckResult check_kan_graph_pool() {
  Rng rng(31);
  PoolParams p = make_pool_params(3, default_basis(), rng);
  p.dropout_p = 0.0;
  Tensor x = random_input({2, 5, 3}, -1.0, 1.0, rng);
  x.set_requires_grad(true);
  Rng proj_rng(32);
  Tensor w = random_input({2, 3, 3}, -1.0, 1.0, proj_rng);
  NamedParams named;
  p.collect_params("pool", named);
  std::vector<Tensor> params = trainable(named);
  params.push_back(x);
  Rng drop_rng(0);
  auto f = [&]() {
    return sum_all(mul(kan_graph_pool(Graph{x}, p, 0.6, true, drop_rng).nodes, w));
  };
  return check("kan_graph_pool", 1e-4, grad_check(f, params));
}

GradCheckResult check_kan_hs_gal() {
  Rng rng(41);
  HsGalParams p = make_hs_gal_params(3, 3, 3, 1.5, default_basis(), rng);
  p.dropout_p = 0.0;
  Tensor ht = random_input({2, 3, 3}, -1.0, 1.0, rng);
  Tensor hs = random_input({2, 2, 3}, -1.0, 1.0, rng);
  Tensor stack = random_input({2, 3}, -1.0, 1.0, rng);
  ht.set_requires_grad(true);
  hs.set_requires_grad(true);
  stack.set_requires_grad(true);
  Rng proj_rng(42);
  Tensor wt = random_input({2, 3, 3}, -1.0, 1.0, proj_rng);
  Tensor ws = random_input({2, 2, 3}, -1.0, 1.0, proj_rng);
  Tensor wk = random_input({2, 3}, -1.0, 1.0, proj_rng);
  NamedParams named;
  p.collect_params("hs", named);
  std::vector<Tensor> params = trainable(named);
  params.push_back(ht);
  params.push_back(hs);
  params.push_back(stack);
  Rng drop_rng(0);
  auto f = [&]() {
    HeteroState out = kan_hs_gal(HeteroState{Graph{ht}, Graph{hs}, stack}, p, true, drop_rng);
    Tensor a = sum_all(mul(out.temporal.nodes, wt));
    Tensor b = sum_all(mul(out.spatial.nodes, ws));
    Tensor c = sum_all(mul(out.stack, wk));
    return add(add(a, b), c);
  };
  return check("kan_hs_gal", 1e-4, grad_check(f, params));
}

GradCheckResult check_conv_unit() {
  Rng rng(51);
  ConvUnit unit(1, 2, 3, 3, rng);
  Tensor x = random_input({1, 1, 4, 4}, -1.0, 1.0, rng);
  x.set_requires_grad(true);
  Rng proj_rng(52);
  Tensor w = random_input({1, 2, 4, 4}, -1.0, 1.0, proj_rng);
  NamedParams named;
  unit.collect_params("unit", named);
  std::vector<Tensor> params = trainable(named);
  params.push_back(x);
  auto f = [&]() { return sum_all(mul(unit.forward(x, true), w)); };
  return check("conv_unit", 1e-4, grad_check(f, params));
}

GradCheckResult check_residual_block() {
  Rng rng(61);
  EncoderConfig cfg;
  cfg.channels = {3};
  ResidualBlock block(2, 3, cfg, false, rng);
  Tensor x = random_input({1, 2, 4, 6}, -1.0, 1.0, rng);
  x.set_requires_grad(true);
  Rng proj_rng(62);
  Tensor w = random_input({1, 3, 4, 3}, -1.0, 1.0, proj_rng);
  NamedParams named;
  block.collect_params("block", named);
  std::vector<Tensor> params = trainable(named);
  params.push_back(x);
  auto f = [&]() { return sum_all(mul(block.forward(x, true), w)); };
  return check("residual_block", 1e-4, grad_check(f, params));
}

GradCheckResult check_cross_entropy() {
  Rng rng(71);
  Tensor logits = random_input({4, 2}, -2.0, 2.0, rng);
  logits.set_requires_grad(true);
  const std::vector<int> labels = {0, 1, 1, 0};
  auto f = [&]() { return cross_entropy(logits, labels, 0.8, 1.2); };
  return check("cross_entropy", 1e-6, grad_check(f, {logits}));
}

ConfigDocument tiny_model_config() {
  ConfigDocument doc;
  doc.model.chunk_seconds = 0.5;
  doc.model.hop_seconds = 0.25;
  doc.model.sinc.n_filters = 6;
  doc.model.sinc.kernel_len = 17;
  doc.model.sinc.stride = 25;
  doc.model.encoder.channels = {4, 4};
  doc.model.encoder.pool_t = 4;
  doc.model.encoder.first_pool_t = 2;
  doc.model.graph.dim = 6;
  doc.model.graph.branches = 2;
  doc.model.graph.dropout = 0.0;
  doc.model.graph.readout_dropout = 0.0;
  doc.model.graph.temperature = 2.0;
  validate_config(doc);
  return doc;
}

GradCheckResult check_readout() {
  Rng rng(81);
  ConfigDocument doc = tiny_model_config();
  Aasist3Model model(doc.model, rng);
  const int d = doc.model.graph.dim;
  Tensor ht = random_input({2, 5, d}, -1.0, 1.0, rng);
  Tensor hs = random_input({2, 4, d}, -1.0, 1.0, rng);
  Tensor sf = random_input({2, d}, -1.0, 1.0, rng);
  ht.set_requires_grad(true);
  hs.set_requires_grad(true);
  sf.set_requires_grad(true);
  Rng proj_rng(82);
  Tensor w = random_input({2, 2}, -1.0, 1.0, proj_rng);
  std::vector<Tensor> params = {ht, hs, sf};
  for (auto& [name, tensor] : model.params()) {
    if (name.rfind("readout", 0) == 0) params.push_back(tensor);
  }
  Rng drop_rng(0);
  auto f = [&]() {
    Aasist3Model::Aggregate agg{ht, hs, sf};
    return sum_all(mul(model.readout(agg, true, drop_rng), w));
  };
  return check("readout", 1e-4, grad_check(f, params));
}

GradCheckResult check_full_model() {
  Rng rng(91);
  ConfigDocument doc = tiny_model_config();
  Aasist3Model model(doc.model, rng);
  // The stack node initializes to zeros, which sits exactly on the PReLU
  // kink where the derivative is undefined; check at a generic point.
  for (auto& [name, tensor] : model.params()) {
    if (name == "stack_init") {
      for (std::size_t i = 0; i < tensor.numel(); ++i) tensor.data()[i] = rng.uniform(-0.3, 0.3);
    }
  }
  AudioSignal audio;
  audio.sample_rate = 16000;
  audio.samples.resize(static_cast<std::size_t>(doc.model.chunk_samples()));
  for (double& v : audio.samples) v = rng.uniform(-0.5, 0.5);
  Tensor feats = model.features_from_chunk(audio);
  const std::vector<int> labels = {0};
  Rng drop_rng(0);
  auto f = [&]() {
    Tensor logits = model.forward_features(feats, true, drop_rng);
    return cross_entropy(logits, labels);
  };
  return check("model_pocket", 1e-3, grad_check(f, trainable(model.params()), 1e-5, 3));
}

}  // namespace

std::vector<GradCheckResult> run_grad_suite(const std::string& module_filter) {
  std::vector<GradCheckResult> results;
  auto want = [&](const char* module) {
    return module_filter.empty() || module_filter == module;
  };
  if (want("kan")) results.push_back(check_kan_layer());
  if (want("graph")) {
    results.push_back(check_kan_gal());
    results.push_back(check_kan_graph_pool());
    results.push_back(check_kan_hs_gal());
  }
  if (want("encoder")) {
    results.push_back(check_conv_unit());
    results.push_back(check_residual_block());
  }
  if (want("train")) results.push_back(check_cross_entropy());
  if (want("model")) {
    results.push_back(check_readout());
    results.push_back(check_full_model());
  }
  if (results.empty()) {
    throw std::invalid_argument("run_grad_suite: unknown module \"" + module_filter + "\"");
  }
  return results;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
  for (const GradCheckResult& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

}  // namespace aasist3
