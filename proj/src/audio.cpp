#include "aasist3/audio.hpp"

#include <cmath>
#include <stdexcept>

namespace aasist3 {

AudioSignal pre_emphasis(const AudioSignal& signal, double coeff) {
  if (signal.samples.empty()) throw std::invalid_argument("pre_emphasis: empty signal");
  if (coeff < 0.0 || coeff >= 1.0) {
    throw std::invalid_argument("pre_emphasis: coefficient must lie in [0, 1)");
  }
  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(signal.samples.size());
  out.samples[0] = signal.samples[0];
  for (std::size_t l = 1; l < signal.samples.size(); ++l) {
    out.samples[l] = signal.samples[l] - coeff * signal.samples[l - 1];
  }
  return out;
}

AudioSignal undo_pre_emphasis(const AudioSignal& signal, double coeff) {
  if (signal.samples.empty()) throw std::invalid_argument("undo_pre_emphasis: empty signal");
  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(signal.samples.size());
  out.samples[0] = signal.samples[0];
  for (std::size_t l = 1; l < signal.samples.size(); ++l) {
    out.samples[l] = signal.samples[l] + coeff * out.samples[l - 1];
  }
  return out;
}

std::vector<AudioSignal> chunk_signal(const AudioSignal& signal, double win_seconds,
                                      double hop_seconds) {
  if (signal.samples.empty()) throw std::invalid_argument("chunk_signal: empty signal");
  if (!(win_seconds > hop_seconds) || !(hop_seconds > 0.0)) {
    throw std::invalid_argument("chunk_signal: need win > hop > 0");
  }
  const std::size_t len = signal.samples.size();
  const std::size_t win = static_cast<std::size_t>(std::llround(win_seconds * signal.sample_rate));
  const std::size_t hop = static_cast<std::size_t>(std::llround(hop_seconds * signal.sample_rate));

  auto cut = [&](std::size_t start) {
    AudioSignal chunk;
    chunk.sample_rate = signal.sample_rate;
    chunk.samples.resize(win);
    for (std::size_t i = 0; i < win; ++i) {
      chunk.samples[i] = signal.samples[(start + i) % len];
    }
    return chunk;
  };

  std::vector<AudioSignal> chunks;
  if (len <= win) {
    chunks.push_back(cut(0));
    return chunks;
  }
  std::size_t start = 0;
  while (start + win <= len) {
    chunks.push_back(cut(start));
    start += hop;
  }
  // The previous window ended at start - hop + win; anything past it gets
  // one cyclically padded trailing window.
  if (start - hop + win < len) {
    chunks.push_back(cut(start));
  }
  return chunks;
}

}  // namespace aasist3
