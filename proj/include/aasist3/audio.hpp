#pragma once

// Mono audio buffers, pre-emphasis and fixed-length chunking for inference.

#include <vector>

namespace aasist3 {

struct AudioSignal {
  std::vector<double> samples;  // in [-1, 1]
  int sample_rate = 16000;

  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// out[0] = in[0]; out[l] = in[l] - coeff * in[l-1].
AudioSignal pre_emphasis(const AudioSignal& signal, double coeff = 0.97);

// Inverse recurrence x[l] = y[l] + coeff * x[l-1]; used to validate the
// filter and by tests.
AudioSignal undo_pre_emphasis(const AudioSignal& signal, double coeff = 0.97);

// Fixed-length windows starting at 0, hop, 2*hop, ... A trailing partial
// window (or a signal shorter than one window) is filled by cyclic
// repetition of the signal.
std::vector<AudioSignal> chunk_signal(const AudioSignal& signal, double win_seconds = 4.0,
                                      double hop_seconds = 2.0);

}  // namespace aasist3
