#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "aasist3/model.hpp"
#include "aasist3/train.hpp"

using namespace aasist3;
namespace fs = std::filesystem;

namespace {

// Small enough for fast tests, big enough to exercise every stage.
ConfigDocument tiny_config() {
  ConfigDocument doc;
  doc.model.chunk_seconds = 0.5;
  doc.model.hop_seconds = 0.25;
  doc.model.sinc.n_filters = 6;
  doc.model.sinc.kernel_len = 17;
  doc.model.sinc.stride = 25;
  doc.model.encoder.channels = {4, 4};
  doc.model.encoder.first_pool_t = 2;
  doc.model.encoder.pool_t = 4;
  doc.model.graph.dim = 6;
  doc.model.graph.branches = 2;
  doc.model.graph.temperature = 2.0;
  validate_config(doc);
  return doc;
}

AudioSignal random_audio(double seconds, std::uint64_t seed) {
  Rng rng(seed);
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples.resize(static_cast<std::size_t>(seconds * 16000));
  for (double& v : s.samples) v = rng.uniform(-0.5, 0.5);
  return s;
}

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("node set reduction takes absolute maxima over the right axes") {
  Rng rng(3);
  Tensor encoded = random_tensor({2, 3, 4, 5}, rng, -2.0, 2.0);
  auto [temporal, spatial] = Aasist3Model::reduce_to_node_sets(encoded);
  CHECK(temporal.shape() == Shape{2, 5, 3});
  CHECK(spatial.shape() == Shape{2, 4, 3});
  for (std::size_t i = 0; i < temporal.numel(); ++i) CHECK(temporal.at(i) >= 0.0);
  for (std::size_t i = 0; i < spatial.numel(); ++i) CHECK(spatial.at(i) >= 0.0);

  // Constant positive input: every node value equals the constant.
  Tensor flat = Tensor::full({1, 2, 3, 4}, 0.7);
  auto [t2, s2] = Aasist3Model::reduce_to_node_sets(flat);
  for (std::size_t i = 0; i < t2.numel(); ++i) CHECK(t2.at(i) == doctest::Approx(0.7));
  for (std::size_t i = 0; i < s2.numel(); ++i) CHECK(s2.at(i) == doctest::Approx(0.7));

  // Hand check one temporal entry: max over the spectral axis.
  double expect = 0.0;
  for (int f = 0; f < 4; ++f) {
    expect = std::max(expect, std::fabs(encoded.at((static_cast<std::size_t>(0) * 3 + 0) * 20 +
                                                   static_cast<std::size_t>(f) * 5 + 0)));
  }
  CHECK(temporal.at(0) == doctest::Approx(expect));
}

TEST_CASE("branch stages preserve and pool node counts") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  const Shape enc = model.encoded_shape();
  const int n_t = pooled_node_count(enc[2], doc.model.graph.first_pool_ratio);
  const int n_s = pooled_node_count(enc[1], doc.model.graph.first_pool_ratio);

  AudioSignal audio = random_audio(0.5, 11);
  Tensor feats = model.features_from_chunk(audio);
  Rng scratch(0);

  // Encoder output feeds the graph formation; pooled counts follow the
  // ceiling rule on the encoded extents.
  Tensor encoded = model.encode(feats, false);
  CHECK(encoded.shape() == Shape{1, enc[0], enc[1], enc[2]});
  auto [gt, gs] = model.graphs_from_features(encoded, false, scratch);
  CHECK(gt.nodes.shape() == Shape{1, n_t, doc.model.graph.dim});
  CHECK(gs.nodes.shape() == Shape{1, n_s, doc.model.graph.dim});

  // End to end: logits finite, [1, 2].
  Tensor logits = model.forward_features(feats, false, scratch);
  CHECK(logits.shape() == Shape{1, 2});
  CHECK(logits.all_finite());

  // Branch bookkeeping on a synthetic pre-branch state.
  Rng rng2(17);
  HeteroState pre{Graph{random_tensor({1, n_t, doc.model.graph.dim}, rng2)},
                  Graph{random_tensor({1, n_s, doc.model.graph.dim}, rng2)},
                  random_tensor({1, doc.model.graph.dim}, rng2)};
  auto out = model.branch_forward(0, pre, false, scratch);
  CHECK(out.stage2.temporal.n_nodes() == n_t);
  CHECK(out.stage2.spatial.n_nodes() == n_s);
  CHECK(out.stage3.temporal.n_nodes() ==
        pooled_node_count(n_t, doc.model.graph.branch_pool_ratio));
  CHECK(out.stage3.spatial.n_nodes() ==
        pooled_node_count(n_s, doc.model.graph.branch_pool_ratio));
  CHECK(out.stage2.stack.shape() == out.stage3.stack.shape());

  // Aggregation: node counts add up; identical branches collapse under max.
  auto agg = model.aggregate_branches(pre, {out, out});
  CHECK(agg.h_t.dim(1) == n_t + out.stage2.temporal.n_nodes() + out.stage3.temporal.n_nodes());
  CHECK(agg.h_s.dim(1) == n_s + out.stage2.spatial.n_nodes() + out.stage3.spatial.n_nodes());
  auto agg_single = model.aggregate_branches(pre, {out});
  for (std::size_t i = 0; i < agg.h_t.numel(); ++i) {
    CHECK(agg.h_t.at(i) == agg_single.h_t.at(i));
  }
  for (std::size_t i = 0; i < agg.s_f.numel(); ++i) {
    CHECK(agg.s_f.at(i) == agg_single.s_f.at(i));
  }
}

TEST_CASE("stack nodes combine by max or sum per configuration") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  const Shape enc = model.encoded_shape();
  const int n_t = pooled_node_count(enc[2], doc.model.graph.first_pool_ratio);
  const int n_s = pooled_node_count(enc[1], doc.model.graph.first_pool_ratio);
  Rng rng2(7);
  HeteroState pre{Graph{random_tensor({1, n_t, doc.model.graph.dim}, rng2)},
                  Graph{random_tensor({1, n_s, doc.model.graph.dim}, rng2)},
                  random_tensor({1, doc.model.graph.dim}, rng2)};
  Rng scratch(0);
  auto out = model.branch_forward(0, pre, false, scratch);
  auto agg_max = model.aggregate_branches(pre, {out});

  ConfigDocument doc_sum = tiny_config();
  doc_sum.model.graph.stack_combine = "sum";
  Rng rng3(doc_sum.train.seed);  // identical parameter draws
  Aasist3Model model_sum(doc_sum.model, rng3);
  auto out_sum = model_sum.branch_forward(0, pre, false, scratch);
  auto agg_sum = model_sum.aggregate_branches(pre, {out_sum});
  for (std::size_t i = 0; i < agg_sum.s_f.numel(); ++i) {
    const double expect = pre.stack.at(i) + out_sum.stage2.stack.at(i) +
                          out_sum.stage3.stack.at(i);
    CHECK(agg_sum.s_f.at(i) == doctest::Approx(expect).epsilon(1e-12));
    const double mx = std::max({pre.stack.at(i), out.stage2.stack.at(i),
                                out.stage3.stack.at(i)});
    CHECK(agg_max.s_f.at(i) == doctest::Approx(mx).epsilon(1e-12));
  }
}

TEST_CASE("eval-mode logits are deterministic") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  Tensor feats = model.features_from_chunk(random_audio(0.5, 13));
  Rng s1(0), s2(99);  // eval mode must not consume randomness
  Tensor a = model.forward_features(feats, false, s1);
  Tensor b = model.forward_features(feats, false, s2);
  CHECK(a.to_vector() == b.to_vector());
}

TEST_CASE("single-node reductions make max equal mean") {
  Rng rng(19);
  Tensor one_node = random_tensor({2, 1, 4}, rng);
  Tensor mx = reduce_max(one_node, 1);
  Tensor mn = reduce_mean(one_node, 1);
  CHECK(mx.to_vector() == mn.to_vector());
}

TEST_CASE("utterance scores are chunk-probability means") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);

  // Exactly one window: score equals the single chunk probability.
  AudioSignal half_second = random_audio(0.5, 23);
  const std::vector<double> probs1 = model.chunk_probabilities(half_second);
  REQUIRE(probs1.size() == 1);
  CHECK(model.score_utterance(half_second) == doctest::Approx(probs1[0]).epsilon(1e-12));

  // Double-length signal: three overlapped windows, mean of the three.
  AudioSignal one_second = random_audio(1.0, 29);
  const std::vector<double> probs3 = model.chunk_probabilities(one_second);
  REQUIRE(probs3.size() == 3);
  const double score = model.score_utterance(one_second);
  CHECK(score ==
        doctest::Approx((probs3[0] + probs3[1] + probs3[2]) / 3.0).epsilon(1e-12));
  CHECK(score >= 0.0);
  CHECK(score <= 1.0);

  // Manual chunking reproduces the same probabilities.
  AudioSignal emphasized = pre_emphasis(one_second, doc.model.pre_emphasis);
  const auto chunks = chunk_signal(emphasized, doc.model.chunk_seconds, doc.model.hop_seconds);
  REQUIRE(chunks.size() == 3);
  Rng scratch(0);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    Tensor logits = model.forward_features(model.features_from_chunk(chunks[c]), false, scratch);
    Tensor prob = softmax_t(logits, 1, 1.0);
    CHECK(std::fabs(prob.at(static_cast<std::size_t>(kBonafideClass)) - probs3[c]) < 1e-9);
  }
}

TEST_CASE("score rejects the wrong sample rate") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  AudioSignal bad = random_audio(0.5, 31);
  bad.sample_rate = 8000;
  CHECK_THROWS_AS(model.score_utterance(bad), std::invalid_argument);
}

TEST_CASE("fuse_scores averages and rejects empty input") {
  CHECK(fuse_scores({0.2, 0.8}) == doctest::Approx(0.5));
  CHECK(fuse_scores({0.42}) == doctest::Approx(0.42));
  CHECK(fuse_scores({0.3, 0.3, 0.3}) == doctest::Approx(0.3));
  CHECK_THROWS_AS(fuse_scores({}), std::invalid_argument);
}

TEST_CASE("checkpoint round trip preserves eval logits to 1e-6") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  Tensor feats = model.features_from_chunk(random_audio(0.5, 37));
  Rng scratch(0);
  const std::vector<double> before = model.forward_features(feats, false, scratch).to_vector();

  const fs::path path = fs::temp_directory_path() / "aasist3_test.ckpt";
  save_checkpoint(model, doc, path.string());
  LoadedModel loaded = load_checkpoint(path.string());
  const std::vector<double> after =
      loaded.model.forward_features(feats, false, scratch).to_vector();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(std::fabs(before[i] - after[i]) < 1e-6);
  }
  fs::remove(path);
}

TEST_CASE("checkpoint loader raises distinct errors") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  const fs::path dir = fs::temp_directory_path();

  const fs::path good = dir / "aasist3_good.ckpt";
  save_checkpoint(model, doc, good.string());

  // Truncation -> format error.
  const fs::path trunc = dir / "aasist3_trunc.ckpt";
  fs::copy_file(good, trunc, fs::copy_options::overwrite_existing);
  fs::resize_file(trunc, fs::file_size(trunc) / 2);
  try {
    load_checkpoint(trunc.string());
    FAIL("expected a format error");
  } catch (const CheckpointException& e) {
    CHECK(e.code() == CheckpointError::kFormat);
  }

  // Not a checkpoint at all.
  const fs::path junk = dir / "aasist3_junk.ckpt";
  {
    std::ofstream out(junk, std::ios::binary);
    out << "junkjunkjunkjunkjunk";
  }
  try {
    load_checkpoint(junk.string());
    FAIL("expected a format error");
  } catch (const CheckpointException& e) {
    CHECK(e.code() == CheckpointError::kFormat);
  }

  // Mismatched expected configuration -> config error.
  ConfigDocument other = tiny_config();
  other.model.graph.dim = 8;
  try {
    load_checkpoint_compatible(good.string(), other);
    FAIL("expected a config error");
  } catch (const CheckpointException& e) {
    CHECK(e.code() == CheckpointError::kConfig);
  }
  // Matching configuration passes.
  CHECK_NOTHROW(load_checkpoint_compatible(good.string(), doc));

  for (const auto& p : {good, trunc, junk}) fs::remove(p);
}

TEST_CASE("pocket model end-to-end gradient at 1e-3") {
  ConfigDocument doc = tiny_config();
  doc.model.graph.dropout = 0.0;
  doc.model.graph.readout_dropout = 0.0;
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  // The stack node initializes to zeros, which sits exactly on the PReLU
  // kink where the derivative is undefined; check at a generic point.
  for (auto& [name, tensor] : model.params()) {
    if (name == "stack_init") {
      for (std::size_t i = 0; i < tensor.numel(); ++i) tensor.data()[i] = rng.uniform(-0.3, 0.3);
    }
  }
  Tensor feats = model.features_from_chunk(random_audio(0.5, 41));
  const std::vector<int> labels = {1};
  Rng scratch(0);
  auto f = [&]() {
    return cross_entropy(model.forward_features(feats, true, scratch), labels);
  };
  std::vector<Tensor> params;
  for (auto& [name, tensor] : model.params()) params.push_back(tensor);
  CHECK(grad_check(f, params, 1e-5, 2) < 1e-3);
}
