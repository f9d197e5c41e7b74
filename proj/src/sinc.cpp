#include "aasist3/sinc.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "aasist3/kernels.hpp"

namespace aasist3 {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<std::pair<double, double>> mel_band_edges(int n_filters, double f_min, double f_max,
                                                      int sample_rate) {
  if (n_filters < 1) throw std::invalid_argument("mel_band_edges: need at least one filter");
  if (!(f_min > 0.0) || !(f_max > f_min)) {
    throw std::invalid_argument("mel_band_edges: need 0 < f_min < f_max");
  }
  if (f_max > sample_rate / 2.0) {
    throw std::invalid_argument("mel_band_edges: f_max " + std::to_string(f_max) +
                                " above Nyquist " + std::to_string(sample_rate / 2.0));
  }
  const double m_lo = hz_to_mel(f_min);
  const double m_hi = hz_to_mel(f_max);
  std::vector<double> points(static_cast<std::size_t>(n_filters) + 2);
  for (int i = 0; i < n_filters + 2; ++i) {
    const double m = m_lo + (m_hi - m_lo) * static_cast<double>(i) / (n_filters + 1);
    points[static_cast<std::size_t>(i)] = mel_to_hz(m);
  }
  std::vector<std::pair<double, double>> edges(static_cast<std::size_t>(n_filters));
  for (int i = 0; i < n_filters; ++i) {
    edges[static_cast<std::size_t>(i)] = {points[static_cast<std::size_t>(i)],
                                          points[static_cast<std::size_t>(i) + 2]};
  }
  return edges;
}

std::vector<double> sinc_kernel(double f1, double f2, int kernel_len, int sample_rate) {
  if (kernel_len < 1 || kernel_len % 2 == 0) {
    throw std::invalid_argument("sinc_kernel: kernel_len must be odd");
  }
  if (!(f2 > f1)) throw std::invalid_argument("sinc_kernel: need f2 > f1");
  const double nu1 = f1 / sample_rate;
  const double nu2 = f2 / sample_rate;
  const int half = (kernel_len - 1) / 2;
  const double window_span = static_cast<double>(kernel_len - 1);
  auto sinc = [](double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; };

  std::vector<double> taps(static_cast<std::size_t>(kernel_len));
  for (int j = 0; j < kernel_len; ++j) {
    const double n = static_cast<double>(j - half);
    const double g = 2.0 * nu2 * sinc(2.0 * M_PI * nu2 * n) - 2.0 * nu1 * sinc(2.0 * M_PI * nu1 * n);
    const double w = kernel_len == 1 ? 1.0
                                     : 0.54 - 0.46 * std::cos(2.0 * M_PI * j / window_span);
    taps[static_cast<std::size_t>(j)] = g * w;
  }
  return taps;
}

SincFilterbank make_mel_filterbank(int n_filters, int kernel_len, double f_min, double f_max,
                                   int sample_rate) {
  SincFilterbank bank;
  bank.n_filters = n_filters;
  bank.kernel_len = kernel_len;
  bank.sample_rate = sample_rate;
  bank.band_edges = mel_band_edges(n_filters, f_min, f_max, sample_rate);
  bank.taps.resize(static_cast<std::size_t>(n_filters) * kernel_len);
  for (int i = 0; i < n_filters; ++i) {
    const auto [f1, f2] = bank.band_edges[static_cast<std::size_t>(i)];
    const std::vector<double> k = sinc_kernel(f1, f2, kernel_len, sample_rate);
    std::copy(k.begin(), k.end(), bank.taps.begin() + static_cast<std::size_t>(i) * kernel_len);
  }
  return bank;
}

Tensor sinc_conv(const AudioSignal& signal, const SincFilterbank& bank, int stride) {
  if (stride < 1) throw std::invalid_argument("sinc_conv: stride must be >= 1");
  const std::size_t len = signal.samples.size();
  if (len < static_cast<std::size_t>(bank.kernel_len)) {
    throw std::invalid_argument("sinc_conv: signal of " + std::to_string(len) +
                                " samples shorter than kernel " +
                                std::to_string(bank.kernel_len));
  }
  const int frames =
      static_cast<int>((len - static_cast<std::size_t>(bank.kernel_len)) / stride) + 1;
  Tensor out = Tensor::zeros({bank.n_filters, frames});
  const auto& kt = kernels::active();
  const double* x = signal.samples.data();
  double* od = out.data();
  for (int f = 0; f < bank.n_filters; ++f) {
    const double* taps = bank.filter(f);
    double* orow = od + static_cast<std::size_t>(f) * frames;
    for (int t = 0; t < frames; ++t) {
      orow[t] = kt.dot(taps, x + static_cast<std::size_t>(t) * stride,
                       static_cast<std::size_t>(bank.kernel_len));
    }
  }
  return out;
}

}  // namespace aasist3
