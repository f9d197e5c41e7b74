#include "aasist3/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "aasist3/metrics.hpp"

namespace aasist3 {

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     double weight_bonafide, double weight_spoof) {
  if (logits.ndim() != 2 || logits.dim(1) != 2) {
    throw std::invalid_argument("cross_entropy: expected [B, 2] logits");
  }
  const int b = logits.dim(0);
  if (labels.size() != static_cast<std::size_t>(b)) {
    throw std::invalid_argument("cross_entropy: label count mismatch");
  }
  logits.check_finite("cross_entropy");
  const double weights[2] = {weight_bonafide, weight_spoof};
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("cross_entropy: label must be 0 or 1");
  }

  const bool track = wants_grad(logits);
  Tensor out = Tensor::zeros({1});
  if (track) out.set_requires_grad(true);
  const double* ld = logits.data();
  double total = 0.0;
  for (int i = 0; i < b; ++i) {
    const double l0 = ld[2 * i], l1 = ld[2 * i + 1];
    const double m = std::max(l0, l1);
    const double lse = m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
    const int y = labels[static_cast<std::size_t>(i)];
    total += weights[y] * (lse - ld[2 * i + y]);
  }
  out.data()[0] = total / b;

  if (track) {
    Tensor lc = logits, oc = out;
    std::vector<int> yc = labels;
    const double w0 = weight_bonafide, w1 = weight_spoof;
    Tape::current()->record([lc, oc, yc, w0, w1, b]() mutable {
      const double g = oc.grad()[0];
      const double* ld2 = lc.data();
      double* lg = lc.grad();
      const double ws[2] = {w0, w1};
      for (int i = 0; i < b; ++i) {
        const double l0 = ld2[2 * i], l1 = ld2[2 * i + 1];
        const double m = std::max(l0, l1);
        const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
        const double z = e0 + e1;
        const int y = yc[static_cast<std::size_t>(i)];
        const double scale = g * ws[y] / b;
        lg[2 * i] += scale * (e0 / z - (y == 0 ? 1.0 : 0.0));
        lg[2 * i + 1] += scale * (e1 / z - (y == 1 ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

Adam::Adam(NamedParams& params, const TrainConfig& cfg) : params_(&params), cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& [name, tensor] : params) {
    m_.emplace_back(tensor.numel(), 0.0);
    v_.emplace_back(tensor.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (std::size_t pi = 0; pi < params_->size(); ++pi) {
    Tensor& p = (*params_)[pi].second;
    const double* g = p.grad();
    if (g == nullptr) continue;
    double* d = p.data();
    std::vector<double>& m = m_[pi];
    std::vector<double>& v = v_[pi];
    const std::size_t n = p.numel();
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(g[i])) {
        throw std::runtime_error("Adam: non-finite gradient in " + (*params_)[pi].first);
      }
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      d[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

namespace {

// Fixed-length crop at a random cyclic offset of the (already
// pre-emphasized) utterance.
AudioSignal random_crop(const AudioSignal& signal, int target, Rng& rng) {
  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(static_cast<std::size_t>(target));
  const std::size_t len = signal.samples.size();
  const std::size_t start = rng.below(len);
  for (int i = 0; i < target; ++i) {
    out.samples[static_cast<std::size_t>(i)] = signal.samples[(start + i) % len];
  }
  return out;
}

double dev_eer(Aasist3Model& model, const std::vector<LabeledUtterance>& dev_set) {
  std::vector<double> bona, spoof;
  for (const LabeledUtterance& utt : dev_set) {
    const double score = model.score_utterance(utt.audio);
    (utt.label == kLabelBonafide ? bona : spoof).push_back(score);
  }
  return compute_eer(bona, spoof).value;
}

}  // namespace

TrainResult train_loop(Aasist3Model& model, const ConfigDocument& doc,
                       const std::vector<LabeledUtterance>& train_set,
                       const std::vector<LabeledUtterance>& dev_set,
                       const std::string& checkpoint_path,
                       const std::function<void(const EpochStats&)>& on_epoch) {
  if (train_set.empty()) throw std::invalid_argument("train_loop: empty training set");
  if (dev_set.empty()) throw std::invalid_argument("train_loop: empty dev set");
  const TrainConfig& tc = doc.train;
  const int chunk = model.config().chunk_samples();

  // Pre-emphasis is part of the fixed front end; apply it once per
  // utterance and crop afterwards, matching the inference path.
  std::vector<AudioSignal> emphasized;
  emphasized.reserve(train_set.size());
  for (const LabeledUtterance& utt : train_set) {
    emphasized.push_back(pre_emphasis(utt.audio, model.config().pre_emphasis));
  }

  Rng rng(tc.seed);
  Adam adam(model.params(), tc);
  TrainResult result;
  result.best_dev_eer = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const int n_filters = model.filterbank().n_filters;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    // Fisher-Yates shuffle driven by the training stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t pos = 0; pos < order.size(); pos += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t bs =
          std::min(static_cast<std::size_t>(tc.batch_size), order.size() - pos);
      std::vector<Tensor> features;
      std::vector<int> labels;
      features.reserve(bs);
      labels.reserve(bs);
      for (std::size_t k = 0; k < bs; ++k) {
        const std::size_t idx = order[pos + k];
        AudioSignal crop = random_crop(emphasized[idx], chunk, rng);
        Tensor feats = sinc_conv(crop, model.filterbank(), model.config().sinc.stride);
        features.push_back(reshape(feats, {1, 1, n_filters, feats.dim(1)}));
        labels.push_back(train_set[idx].label);
      }
      Tensor batch = features.size() == 1 ? features[0] : concat(features, 0);

      TapeScope scope;
      Tensor logits = model.forward_features(batch, true, rng);
      Tensor loss = cross_entropy(logits, labels, tc.class_weight_bonafide,
                                  tc.class_weight_spoof);
      model.zero_grad();
      scope.tape.backward(loss);
      adam.step();
      loss_sum += loss.value() * static_cast<double>(bs);
      seen += bs;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(seen);
    stats.dev_eer = dev_eer(model, dev_set);
    stats.improved = stats.dev_eer < result.best_dev_eer;
    if (stats.improved) {
      result.best_dev_eer = stats.dev_eer;
      result.best_epoch = epoch;
      if (!checkpoint_path.empty()) save_checkpoint(model, doc, checkpoint_path);
    }
    if (tc.checkpoint_every > 0 && epoch % tc.checkpoint_every == 0 &&
        !checkpoint_path.empty()) {
      save_checkpoint(model, doc, checkpoint_path + ".epoch" + std::to_string(epoch));
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

}  // namespace aasist3
