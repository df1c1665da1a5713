#include "rma/tensor.hpp"

#include <cmath>
#include <sstream>

#include "rma/errors.hpp"

namespace rma {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
BasicTensor<Scalar>::BasicTensor(Shape shape, Scalar fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
}

template <typename Scalar>
BasicTensor<Scalar>::BasicTensor(Shape shape, std::vector<Scalar> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape_));
  }
  if (shape_numel(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " elements");
  }
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::from(Shape shape, std::initializer_list<Scalar> values) {
  return BasicTensor(std::move(shape), std::vector<Scalar>(values));
}

template <typename Scalar>
Scalar& BasicTensor<Scalar>::at(std::size_t i, std::size_t j) {
  return data_[i * shape_[1] + j];
}

template <typename Scalar>
Scalar BasicTensor<Scalar>::at(std::size_t i, std::size_t j) const {
  return data_[i * shape_[1] + j];
}

template <typename Scalar>
Scalar& BasicTensor<Scalar>::at(std::size_t c, std::size_t i, std::size_t j) {
  return data_[(c * shape_[1] + i) * shape_[2] + j];
}

template <typename Scalar>
Scalar BasicTensor<Scalar>::at(std::size_t c, std::size_t i, std::size_t j) const {
  return data_[(c * shape_[1] + i) * shape_[2] + j];
}

template <typename Scalar>
BasicTensor<Scalar> BasicTensor<Scalar>::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  return BasicTensor(std::move(shape), data_);
}

template <typename Scalar>
void BasicTensor<Scalar>::fill(Scalar value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename Scalar>
bool BasicTensor<Scalar>::all_finite() const {
  for (auto v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace rma
