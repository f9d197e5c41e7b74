#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "aasist3/metrics.hpp"
#include "aasist3/train.hpp"

using namespace aasist3;

namespace {

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
  doc.train.batch_size = 4;
  doc.train.epochs = 2;
  doc.train.lr = 1e-3;
  validate_config(doc);
  return doc;
}

// Radix-2 FFT, test-side oracle machinery only.
void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  std::vector<std::complex<double>> even(n / 2), odd(n / 2);
  for (std::size_t i = 0; i < n / 2; ++i) {
    even[i] = a[2 * i];
    odd[i] = a[2 * i + 1];
  }
  fft(even);
  fft(odd);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const std::complex<double> t =
        std::polar(1.0, -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n)) * odd[k];
    a[k] = even[k] + t;
    a[k + n / 2] = even[k] - t;
  }
}

// Welch-averaged spectral flatness (geometric over arithmetic mean of the
// power spectrum) restricted to [f_lo, f_hi].
double high_band_flatness(const AudioSignal& s, double f_lo, double f_hi) {
  const std::size_t win = 1024;
  const std::size_t n_windows = 8;
  const std::size_t hop = (s.samples.size() - win) / n_windows;
  std::vector<double> power(win / 2, 0.0);
  for (std::size_t w = 0; w < n_windows; ++w) {
    std::vector<std::complex<double>> buf(win);
    for (std::size_t i = 0; i < win; ++i) {
      const double hann = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (win - 1));
      buf[i] = s.samples[w * hop + i] * hann;
    }
    fft(buf);
    for (std::size_t k = 0; k < win / 2; ++k) power[k] += std::norm(buf[k]);
  }
  const double bin_hz = static_cast<double>(s.sample_rate) / win;
  const std::size_t k_lo = static_cast<std::size_t>(f_lo / bin_hz);
  const std::size_t k_hi = static_cast<std::size_t>(f_hi / bin_hz);
  double log_sum = 0.0, lin_sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = k_lo; k < k_hi; ++k) {
    const double p = power[k] + 1e-30;
    log_sum += std::log(p);
    lin_sum += p;
    ++count;
  }
  return std::exp(log_sum / count) / (lin_sum / count);
}

}  // namespace

// ---------------------------------------------------------------------------
// cross-entropy
// ---------------------------------------------------------------------------

TEST_CASE("cross_entropy closed-form values") {
  Tensor even = Tensor::from_data({1, 2}, {0.0, 0.0});
  CHECK(cross_entropy(even, {0}).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Tensor confident = Tensor::from_data({1, 2}, {20.0, -20.0});
  CHECK(cross_entropy(confident, {0}).value() < 1e-8);

  CHECK(cross_entropy(even, {0}, 0.9, 0.1).value() ==
        doctest::Approx(0.9 * std::log(2.0)).epsilon(1e-12));

  CHECK_THROWS_AS(cross_entropy(even, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(cross_entropy(even, {2}), std::invalid_argument);
}

TEST_CASE("cross_entropy gradient equals weighted softmax minus one-hot") {
  Rng rng(5);
  Tensor logits = Tensor::zeros({3, 2});
  for (std::size_t i = 0; i < logits.numel(); ++i) logits.data()[i] = rng.uniform(-2.0, 2.0);
  logits.set_requires_grad(true);
  const std::vector<int> labels = {0, 1, 0};
  const double w0 = 0.7, w1 = 1.3;

  TapeScope scope;
  Tensor loss = cross_entropy(logits, labels, w0, w1);
  scope.tape.backward(loss);
  for (int i = 0; i < 3; ++i) {
    const double l0 = logits.at(2 * i), l1 = logits.at(2 * i + 1);
    const double z = std::exp(l0) + std::exp(l1);
    const double p0 = std::exp(l0) / z;
    const double w = labels[static_cast<std::size_t>(i)] == 0 ? w0 : w1;
    const double expect0 = w * (p0 - (labels[static_cast<std::size_t>(i)] == 0 ? 1.0 : 0.0)) / 3;
    CHECK(std::fabs(logits.grad()[2 * i] - expect0) < 1e-12);
  }

  logits.zero_grad();
  auto f = [&]() { return cross_entropy(logits, labels, w0, w1); };
  CHECK(grad_check(f, {logits}) < 1e-6);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

TEST_CASE("adam leaves parameters unchanged under zero gradients") {
  Tensor p = Tensor::from_data({3}, {1.0, -2.0, 3.0}, true);
  NamedParams params = {{"p", p}};
  TrainConfig cfg;
  Adam adam(params, cfg);
  adam.step();
  CHECK(p.to_vector() == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("first adam step has learning-rate magnitude") {
  Tensor p = Tensor::from_data({2}, {0.5, -0.5}, true);
  p.grad()[0] = 0.3;
  p.grad()[1] = -0.9;
  NamedParams params = {{"p", p}};
  TrainConfig cfg;
  cfg.lr = 1e-2;
  Adam adam(params, cfg);
  adam.step();
  // Bias corrections cancel at t=1: update = lr * g / (|g| + eps).
  CHECK(p.at(0) == doctest::Approx(0.5 - 1e-2).epsilon(1e-6));
  CHECK(p.at(1) == doctest::Approx(-0.5 + 1e-2).epsilon(1e-6));
}

TEST_CASE("doubling the learning rate exactly doubles the first update") {
  auto run = [](double lr) {
    Tensor p = Tensor::from_data({3}, {0.0, 0.0, 0.0}, true);
    p.grad()[0] = 0.11;
    p.grad()[1] = -0.77;
    p.grad()[2] = 2.3;
    NamedParams params = {{"p", p}};
    TrainConfig cfg;
    cfg.lr = lr;
    Adam adam(params, cfg);
    adam.step();
    return p.to_vector();
  };
  const std::vector<double> u1 = run(1e-3);
  const std::vector<double> u2 = run(2e-3);
  for (std::size_t i = 0; i < u1.size(); ++i) CHECK(u2[i] == 2.0 * u1[i]);
}

TEST_CASE("identical gradient streams give identical trajectories") {
  auto run = []() {
    Rng rng(9);
    Tensor p = Tensor::from_data({4}, {0.1, 0.2, 0.3, 0.4}, true);
    NamedParams params = {{"p", p}};
    TrainConfig cfg;
    Adam adam(params, cfg);
    for (int step = 0; step < 50; ++step) {
      p.zero_grad();
      for (int i = 0; i < 4; ++i) p.grad()[i] = rng.uniform(-1.0, 1.0);
      adam.step();
    }
    return p.to_vector();
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite gradients abort loudly") {
  Tensor p = Tensor::from_data({1}, {0.0}, true);
  p.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  NamedParams params = {{"p", p}};
  TrainConfig cfg;
  Adam adam(params, cfg);
  CHECK_THROWS_AS(adam.step(), std::runtime_error);
}

// ---------------------------------------------------------------------------
// toy dataset
// ---------------------------------------------------------------------------

TEST_CASE("toy dataset is balanced and deterministic") {
  const auto set1 = make_toy_dataset(5, 123);
  const auto set2 = make_toy_dataset(5, 123);
  REQUIRE(set1.size() == 10);
  int bona = 0, spoof = 0;
  for (const auto& utt : set1) (utt.label == kLabelBonafide ? bona : spoof)++;
  CHECK(bona == 5);
  CHECK(spoof == 5);
  for (std::size_t i = 0; i < set1.size(); ++i) {
    CHECK(set1[i].id == set2[i].id);
    CHECK(set1[i].audio.samples == set2[i].audio.samples);
    const double secs = set1[i].audio.seconds();
    CHECK(secs >= 4.0);
    CHECK(secs <= 6.0);
  }
  const auto other_seed = make_toy_dataset(5, 124);
  CHECK(set1[0].audio.samples != other_seed[0].audio.samples);
  CHECK_THROWS_AS(make_toy_dataset(0, 1), std::invalid_argument);
}

TEST_CASE("high-band spectral flatness separates the toy classes") {
  const auto set = make_toy_dataset(40, 2024);
  std::vector<double> bona, spoof;
  for (const auto& utt : set) {
    const double flat = high_band_flatness(utt.audio, 3000.0, 7500.0);
    (utt.label == kLabelBonafide ? bona : spoof).push_back(flat);
  }
  // Best single threshold (spoof side is flatter).
  std::vector<double> all = bona;
  all.insert(all.end(), spoof.begin(), spoof.end());
  std::sort(all.begin(), all.end());
  int best_correct = 0;
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    const double thr = 0.5 * (all[i] + all[i + 1]);
    int correct = 0;
    for (double v : bona) correct += v < thr ? 1 : 0;
    for (double v : spoof) correct += v >= thr ? 1 : 0;
    best_correct = std::max(best_correct, correct);
  }
  const double accuracy = static_cast<double>(best_correct) / static_cast<double>(all.size());
  INFO("oracle accuracy: ", accuracy);
  CHECK(accuracy >= 0.9);
}

// ---------------------------------------------------------------------------
// train_loop
// ---------------------------------------------------------------------------

TEST_CASE("train_loop rejects empty datasets") {
  ConfigDocument doc = tiny_config();
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);
  const auto set = make_toy_dataset(2, 7);
  CHECK_THROWS_AS(train_loop(model, doc, {}, set, ""), std::invalid_argument);
  CHECK_THROWS_AS(train_loop(model, doc, set, {}, ""), std::invalid_argument);
}

TEST_CASE("loss decreases on a frozen batch") {
  ConfigDocument doc = tiny_config();
  doc.train.lr = 1e-3;
  // Frozen batch means frozen stochasticity: dropout off.
  doc.model.graph.dropout = 0.0;
  doc.model.graph.readout_dropout = 0.0;
  Rng rng(doc.train.seed);
  Aasist3Model model(doc.model, rng);

  // One fixed batch of four half-second crops.
  const auto set = make_toy_dataset(2, 7);
  std::vector<Tensor> feats;
  std::vector<int> labels;
  for (const auto& utt : set) {
    AudioSignal emphasized = pre_emphasis(utt.audio, doc.model.pre_emphasis);
    emphasized.samples.resize(static_cast<std::size_t>(doc.model.chunk_samples()));
    Tensor f = model.features_from_chunk(emphasized);
    feats.push_back(f);
    labels.push_back(utt.label);
  }
  Tensor batch = concat(feats, 0);

  Adam adam(model.params(), doc.train);
  Rng train_rng(1);
  double previous = 0.0;
  int decreases = 0;
  for (int step = 0; step < 20; ++step) {
    TapeScope scope;
    Tensor logits = model.forward_features(batch, true, train_rng);
    Tensor loss = cross_entropy(logits, labels);
    model.zero_grad();
    scope.tape.backward(loss);
    adam.step();
    if (step > 0 && loss.value() < previous) ++decreases;
    previous = loss.value();
  }
  INFO("decreases: ", decreases);
  CHECK(decreases >= 16);
}

TEST_CASE("train_loop is deterministic per seed") {
  auto run = []() {
    ConfigDocument doc = tiny_config();
    doc.train.epochs = 1;
    doc.train.batch_size = 3;
    Rng rng(doc.train.seed);
    Aasist3Model model(doc.model, rng);
    const auto set = make_toy_dataset(3, 55);
    const std::vector<LabeledUtterance> train_set(set.begin(), set.begin() + 4);
    const std::vector<LabeledUtterance> dev_set(set.begin() + 4, set.end());
    const TrainResult result = train_loop(model, doc, train_set, dev_set, "");
    std::vector<double> fingerprint;
    for (auto& [name, tensor] : model.params()) {
      fingerprint.push_back(tensor.at(0));
    }
    fingerprint.push_back(result.history.back().train_loss);
    fingerprint.push_back(result.history.back().dev_eer);
    return fingerprint;
  };
  CHECK(run() == run());
}
