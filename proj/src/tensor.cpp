#include "aasist3/tensor.hpp"

#include <cmath>
#include <utility>

namespace aasist3 {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape extents must be positive");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  Tensor t;
  t.shape_ = shape;
  t.data_ = std::make_shared<std::vector<double>>(numel_of(shape), 0.0);
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  Tensor t = zeros(shape, requires_grad);
  t.fill(value);
  return t;
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> values, bool requires_grad) {
  if (numel_of(shape) != values.size()) {
    throw std::invalid_argument("from_data: " + shape_str(shape) + " does not hold " +
                                std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.shape_ = shape;
  t.data_ = std::make_shared<std::vector<double>>(std::move(values));
  if (requires_grad) t.set_requires_grad(true);
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

void Tensor::set_requires_grad(bool value) {
  requires_grad_ = value;
  if (value) {
    if (!grad_) grad_ = std::make_shared<std::vector<double>>(numel(), 0.0);
  } else {
    grad_.reset();
  }
}

double Tensor::value() const {
  if (numel() != 1) {
    throw std::logic_error("value(): tensor has " + std::to_string(numel()) + " elements");
  }
  return (*data_)[0];
}

void Tensor::fill(double value) {
  for (double& v : *data_) v = value;
}

void Tensor::zero_grad() {
  if (grad_) {
    for (double& v : *grad_) v = 0.0;
  }
}

void Tensor::add_grad(const double* g, std::size_t n) {
  if (!grad_) return;
  for (std::size_t i = 0; i < n; ++i) (*grad_)[i] += g[i];
}

bool Tensor::all_finite() const {
  for (double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(const char* what) const {
  if (!all_finite()) {
    throw std::runtime_error(std::string(what) + ": non-finite value in tensor " +
                             shape_str(shape_));
  }
}

Tensor Tensor::clone() const {
  Tensor t;
  t.shape_ = shape_;
  t.data_ = std::make_shared<std::vector<double>>(*data_);
  return t;
}

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape* Tape::current() { return g_current_tape; }

void Tape::record(std::function<void()> backward_step) {
  steps_.push_back(std::move(backward_step));
}

void Tape::backward(Tensor& loss) {
  if (loss.numel() != 1) {
    throw std::logic_error("backward: loss must be a single element, got " +
                           shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward: loss was not recorded on this tape");
  }
  loss.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

TapeScope::TapeScope() : previous_(g_current_tape) { g_current_tape = &tape; }

TapeScope::~TapeScope() { g_current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_current_tape) { g_current_tape = nullptr; }

NoGradScope::~NoGradScope() { g_current_tape = previous_; }

}  // namespace aasist3
