#pragma once

// Dense row-major tensor with reverse-mode differentiation.
//
// A Tensor is a cheap handle over shared storage. Gradients are computed
// by recording each primitive onto the thread's active Tape during the
// forward pass and replaying the records in reverse. Ops only record when
// a tape is bound and at least one input requires a gradient, so inference
// runs tape-free.

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace aasist3 {

using Shape = std::vector<int>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return shape_; }
  int dim(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::size_t numel() const { return data_ ? data_->size() : 0; }
  bool defined() const { return static_cast<bool>(data_); }

  bool requires_grad() const { return requires_grad_; }
  // Marks a leaf as trainable and allocates its gradient accumulator.
  void set_requires_grad(bool value);

  double* data() { return data_->data(); }
  const double* data() const { return data_->data(); }
  double* grad() { return grad_ ? grad_->data() : nullptr; }
  const double* grad() const { return grad_ ? grad_->data() : nullptr; }

  double value() const;  // single-element tensors only
  double at(std::size_t flat_index) const { return (*data_)[flat_index]; }

  void fill(double value);
  void zero_grad();
  void add_grad(const double* g, std::size_t n);

  bool all_finite() const;
  // Throws if any element is NaN/Inf; `what` names the producing op.
  void check_finite(const char* what) const;

  std::vector<double> to_vector() const { return *data_; }

  // Deep copy of the values (not part of any tape).
  Tensor clone() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
  std::shared_ptr<std::vector<double>> grad_;
  bool requires_grad_ = false;
};

// Ordered record of primitive operations; replaying it backwards applies
// the chain rule. Bind with TapeScope; one tape per thread at a time.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(std::function<void()> backward_step);
  std::size_t size() const { return steps_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded step in reverse.
  void backward(Tensor& loss);

 private:
  friend struct TapeScope;
  std::vector<std::function<void()>> steps_;
};

struct TapeScope {
  TapeScope();
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  Tape tape;

 private:
  Tape* previous_;
};

// Temporarily unbinds the active tape, e.g. for finite-difference
// re-evaluations inside a recorded region.
struct NoGradScope {
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

// True when a tape is bound and the tensor participates in it.
inline bool wants_grad(const Tensor& t) {
  return Tape::current() != nullptr && t.requires_grad();
}

}  // namespace aasist3
