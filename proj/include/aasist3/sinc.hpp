#pragma once

// Fixed band-pass sinc filterbank front end: mel-spaced band edges,
// Hamming-windowed sinc kernels, valid-mode convolution over raw audio.
// The taps are constants and never join the gradient tape.

#include <utility>
#include <vector>

#include "aasist3/audio.hpp"
#include "aasist3/tensor.hpp"

namespace aasist3 {

// mel(f) = 2595 * log10(1 + f / 700)
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_filters + 2 mel-equally-spaced points on [f_min, f_max]; filter i spans
// (point_i, point_{i+2}).
std::vector<std::pair<double, double>> mel_band_edges(int n_filters, double f_min, double f_max,
                                                      int sample_rate = 16000);

// Hamming-windowed band-pass kernel; kernel_len must be odd, f1 < f2.
std::vector<double> sinc_kernel(double f1, double f2, int kernel_len, int sample_rate);

struct SincFilterbank {
  int n_filters = 0;
  int kernel_len = 0;
  int sample_rate = 16000;
  std::vector<std::pair<double, double>> band_edges;
  std::vector<double> taps;  // n_filters x kernel_len, row-major

  const double* filter(int i) const { return taps.data() + static_cast<std::size_t>(i) * kernel_len; }
};

SincFilterbank make_mel_filterbank(int n_filters, int kernel_len, double f_min, double f_max,
                                   int sample_rate = 16000);

// Valid-mode convolution: [n_filters x frames] with
// frames = (len(signal) - kernel_len) / stride + 1.
Tensor sinc_conv(const AudioSignal& signal, const SincFilterbank& bank, int stride = 1);

}  // namespace aasist3
