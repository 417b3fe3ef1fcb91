#pragma once

// Dense double-precision tensors with a tape-based reverse-mode
// differentiation core. Deliberately minimal: only what the network needs.

#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace seu {

namespace detail {
struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
};
}  // namespace detail

// Value-semantic handle onto shared storage. Copies alias.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data.assign(t.numel_(), 0.0);
    if (requires_grad) t.set_requires_grad();
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> data,
                     bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (data.size() != t.impl_->data.size())
      throw std::invalid_argument("Tensor::from: data length " +
                                  std::to_string(data.size()) +
                                  " does not match shape volume " +
                                  std::to_string(t.impl_->data.size()));
    t.impl_->data = std::move(data);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int dim(int i) const { return impl_->shape.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int size() const { return static_cast<int>(impl_->data.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  double& operator[](int i) { return impl_->data[static_cast<size_t>(i)]; }
  double operator[](int i) const { return impl_->data[static_cast<size_t>(i)]; }

  double item() const {
    if (size() != 1) throw std::invalid_argument("item(): tensor is not scalar");
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad() {
    impl_->requires_grad = true;
    if (impl_->grad.size() != impl_->data.size())
      impl_->grad.assign(impl_->data.size(), 0.0);
  }
  double* grad() { return impl_->grad.data(); }
  const double* grad() const { return impl_->grad.data(); }
  void zero_grad() {
    if (impl_ && impl_->requires_grad)
      std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }

  bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

 private:
  size_t numel_() const {
    size_t n = 1;
    for (int d : impl_->shape) {
      if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
      n *= static_cast<size_t>(d);
    }
    return n;
  }
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Records backward rules in execution order; backward() replays in reverse.
// One tape per forward pass, confined to one thread.
class Tape {
 public:
  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }

  // Seeds d(loss)/d(loss) = 1 and propagates. Grads accumulate; callers
  // zero parameter grads between passes.
  void backward(Tensor loss) {
    if (loss.size() != 1)
      throw std::invalid_argument("backward: loss must be a scalar tensor");
    if (!loss.requires_grad())
      throw std::invalid_argument("backward: loss does not track gradients");
    loss.grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::function<void()>> nodes_;
};

}  // namespace seu
