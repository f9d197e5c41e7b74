#pragma once

// Data-parallel inner loops shared by the tensor ops, the convolution
// front end and the spline layers. A scalar reference implementation is
// always available; on x86-64 an AVX2+FMA variant is selected at runtime
// when the CPU supports it, on aarch64 a NEON variant is used. The active
// table can be forced to "scalar" through the AASIST3_KERNELS environment
// variable or kernels::force().

#include <cstddef>

namespace aasist3::kernels {

struct KernelTable {
  const char* name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out[i] = a[i] + b[i]
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = a[i] * b[i]
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  // out[i] = s * a[i]
  void (*scale)(const double* a, double s, double* out, std::size_t n);
  // sum_i a[i]
  double (*sum)(const double* a, std::size_t n);
};

const KernelTable& scalar_table();

// Runtime-selected table (decided once, stable for the process lifetime).
const KernelTable& active();

// Force a specific table by name ("scalar", "avx2", "neon", "auto").
// Returns false if the requested table is unavailable on this machine.
bool force(const char* name);

}  // namespace aasist3::kernels
