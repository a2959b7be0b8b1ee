#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <string>
#include <vector>

namespace sincvae {

using Index = Eigen::Index;
using Shape = std::vector<Index>;
using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(const Shape& shape);
Index shape_size(const Shape& shape);

// Dense row-major tensor of 64-bit floats backed by an Eigen vector.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Eigen::VectorXd data);
  Tensor(Shape shape, std::initializer_list<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor constant(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({}, {value}); }

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<size_t>(axis)); }
  Index size() const noexcept { return data_.size(); }

  Eigen::VectorXd& data() noexcept { return data_; }
  const Eigen::VectorXd& data() const noexcept { return data_; }
  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  // Scalar value of a one-element tensor.
  double item() const;

  // Views the data as a rows x cols row-major matrix.
  Eigen::Map<RowMajorMatrix> matrix(Index rows, Index cols);
  Eigen::Map<const RowMajorMatrix> matrix(Index rows, Index cols) const;

  Tensor reshaped(Shape shape) const;
  bool all_finite() const { return data_.allFinite(); }

 private:
  Shape shape_;
  Eigen::VectorXd data_;
};

}  // namespace sincvae
