#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace rma {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor. Slicing copies; there are no strided views.
template <typename Scalar>
class BasicTensor {
 public:
  using value_type = Scalar;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, Scalar fill = Scalar(0));
  BasicTensor(Shape shape, std::vector<Scalar> data);

  static BasicTensor from(Shape shape, std::initializer_list<Scalar> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  std::span<Scalar> values() { return data_; }
  std::span<const Scalar> values() const { return data_; }
  const std::vector<Scalar>& storage() const { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  const Scalar& operator[](std::size_t i) const { return data_[i]; }

  Scalar& at(std::size_t i, std::size_t j);
  Scalar at(std::size_t i, std::size_t j) const;
  Scalar& at(std::size_t c, std::size_t i, std::size_t j);
  Scalar at(std::size_t c, std::size_t i, std::size_t j) const;

  /// Same data under a new shape with equal element count.
  BasicTensor reshaped(Shape shape) const;

  void fill(Scalar value);
  bool all_finite() const;

  template <typename Other>
  BasicTensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return BasicTensor<Other>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;

 private:
  Shape shape_;
  std::vector<Scalar> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace rma
