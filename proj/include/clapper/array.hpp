#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clapper {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. Immutable once built; every constructor
// rejects NaN and Inf.
class Array {
 public:
  Array() = default;
  Array(Shape shape, std::vector<double> values);

  static Array zeros(Shape shape);
  static Array filled(Shape shape, double value);
  static Array scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> values() const& noexcept { return values_; }
  // A span into a temporary would dangle.
  std::span<const double> values() const&& = delete;
  double operator[](std::size_t i) const { return values_[i]; }

  // Value of a one-element array.
  double item() const;

  Array reshaped(Shape shape) const;

  bool operator==(const Array& other) const = default;

 private:
  Shape shape_{0};
  std::vector<double> values_;
};

// Largest |a[i] - b[i]|; shapes must agree.
double max_abs_diff(const Array& a, const Array& b);

}  // namespace clapper
