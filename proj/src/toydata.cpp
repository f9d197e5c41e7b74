#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "aasist3/metrics.hpp"
#include "aasist3/train.hpp"

namespace aasist3 {

namespace {

constexpr int kRate = 16000;

// Harmonic mixture with a soft low-passed noise bed and slow amplitude
// modulation. Component tones stay below 5.2 kHz, so the band above is
// quiet for genuine utterances while the spoof post-processing fills it
// with broadband artifacts.
AudioSignal synthesize_clean(Rng& rng) {
  AudioSignal s;
  s.sample_rate = kRate;
  const double seconds = rng.uniform(4.0, 6.0);
  const std::size_t len = static_cast<std::size_t>(std::llround(seconds * kRate));
  s.samples.assign(len, 0.0);

  const int n_tones = 3 + static_cast<int>(rng.below(3));  // 3..5
  const int n_high = (n_tones + 1) / 2;
  for (int tone = 0; tone < n_tones; ++tone) {
    const bool high = tone < n_high;
    const double freq = high ? rng.uniform(3000.0, 5200.0) : rng.uniform(200.0, 3000.0);
    const double amp = rng.uniform(0.3, 1.0) / (1.0 + freq / 2000.0);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double omega = 2.0 * M_PI * freq / kRate;
    for (std::size_t i = 0; i < len; ++i) {
      s.samples[i] += amp * std::sin(omega * static_cast<double>(i) + phase);
    }
  }

  // One-pole low-passed noise bed, quiet enough to keep the band above
  // the tones close to the floor.
  double state = 0.0;
  const double noise_amp = rng.uniform(0.005, 0.015);
  for (std::size_t i = 0; i < len; ++i) {
    state = 0.995 * state + 0.05 * (2.0 * rng.uniform() - 1.0);
    s.samples[i] += noise_amp * state;
  }

  const double am_freq = rng.uniform(0.5, 2.0);
  const double am_phase = rng.uniform(0.0, 2.0 * M_PI);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) / kRate;
    s.samples[i] *= 1.0 + 0.3 * std::sin(2.0 * M_PI * am_freq * t + am_phase);
  }

  double peak = 0.0;
  for (double v : s.samples) peak = std::max(peak, std::fabs(v));
  const double gain = peak > 0.0 ? 0.5 / peak : 1.0;
  for (double& v : s.samples) v *= gain;
  return s;
}

void spoof_artifacts(AudioSignal& s, Rng& rng) {
  // Coarse amplitude quantization (16 levels across [-1, 1]).
  for (double& v : s.samples) v = std::round(v * 8.0) / 8.0;
  // Comb-filter echo a few milliseconds out.
  const std::size_t delay = 80 + rng.below(121);  // 5..12.5 ms
  const double gain = 0.7;
  std::vector<double> combed(s.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    combed[i] = s.samples[i] + (i >= delay ? gain * s.samples[i - delay] : 0.0);
  }
  s.samples = std::move(combed);
  double peak = 0.0;
  for (double v : s.samples) peak = std::max(peak, std::fabs(v));
  const double norm = peak > 0.0 ? 0.5 / peak : 1.0;
  for (double& v : s.samples) v *= norm;
}

}  // namespace

std::vector<LabeledUtterance> make_toy_dataset(int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("make_toy_dataset: n_per_class must be >= 1");
  Rng rng(seed);
  std::vector<LabeledUtterance> utterances;
  utterances.reserve(2 * static_cast<std::size_t>(n_per_class));
  char id[32];
  for (int i = 0; i < n_per_class; ++i) {
    LabeledUtterance bona;
    std::snprintf(id, sizeof(id), "bona_%04d", i);
    bona.id = id;
    bona.audio = synthesize_clean(rng);
    bona.label = kLabelBonafide;
    utterances.push_back(std::move(bona));

    LabeledUtterance spoof;
    std::snprintf(id, sizeof(id), "spoof_%04d", i);
    spoof.id = id;
    spoof.audio = synthesize_clean(rng);
    spoof_artifacts(spoof.audio, rng);
    spoof.label = kLabelSpoof;
    utterances.push_back(std::move(spoof));
  }
  return utterances;
}

}  // namespace aasist3
