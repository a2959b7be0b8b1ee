#include "sincvae/tensor.hpp"

#include "sincvae/error.hpp"

#include <sstream>

namespace sincvae {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNonFinite: return "non_finite";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kEdfTruncated: return "edf_truncated";
    case ErrorCode::kEdfHeaderMismatch: return "edf_header_mismatch";
    case ErrorCode::kEdfUnsupported: return "edf_unsupported";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kState: return "state";
  }
  return "unknown";
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ',';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) {
    require(d >= 0, ErrorCode::kInvalidArgument,
            "negative dimension in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape)
    : shape_(std::move(shape)), data_(Eigen::VectorXd::Zero(shape_size(shape_))) {}

Tensor::Tensor(Shape shape, Eigen::VectorXd data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(shape_size(shape_) == data_.size(), ErrorCode::kShapeMismatch,
          "tensor shape " + shape_string(shape_) + " does not match " +
              std::to_string(data_.size()) + " values");
}

Tensor::Tensor(Shape shape, std::initializer_list<double> values)
    : shape_(std::move(shape)), data_(static_cast<Index>(values.size())) {
  Index i = 0;
  for (double v : values) data_[i++] = v;
  require(shape_size(shape_) == data_.size(), ErrorCode::kShapeMismatch,
          "tensor shape " + shape_string(shape_) + " does not match " +
              std::to_string(data_.size()) + " values");
}

Tensor Tensor::constant(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.data_.setConstant(value);
  return t;
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorCode::kShapeMismatch,
          "item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Eigen::Map<RowMajorMatrix> Tensor::matrix(Index rows, Index cols) {
  require(rows * cols == data_.size(), ErrorCode::kShapeMismatch,
          "matrix view " + std::to_string(rows) + "x" + std::to_string(cols) +
              " of tensor " + shape_string(shape_));
  return {data_.data(), rows, cols};
}

Eigen::Map<const RowMajorMatrix> Tensor::matrix(Index rows, Index cols) const {
  require(rows * cols == data_.size(), ErrorCode::kShapeMismatch,
          "matrix view " + std::to_string(rows) + "x" + std::to_string(cols) +
              " of tensor " + shape_string(shape_));
  return {data_.data(), rows, cols};
}

Tensor Tensor::reshaped(Shape shape) const {
  require(shape_size(shape) == data_.size(), ErrorCode::kShapeMismatch,
          "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

}  // namespace sincvae
