#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace nowcast {

using Index = Eigen::Index;

using MatrixXfRM =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrixXfRM = Eigen::Map<MatrixXfRM>;
using ConstMapMatrixXfRM = Eigen::Map<const MatrixXfRM>;

/// Dense row-major float tensor with a dynamic shape. Value semantics; all
/// network activations, parameters and gradients use this type.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0f) {}

  static Tensor zeros(std::vector<Index> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<Index> shape, float v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index dim(size_t i) const { return shape_.at(i); }
  size_t ndim() const { return shape_.size(); }
  Index numel() const { return static_cast<Index>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](Index i) { return data_[static_cast<size_t>(i)]; }
  float operator[](Index i) const { return data_[static_cast<size_t>(i)]; }

  Eigen::Map<Eigen::ArrayXf> flat() {
    return {data_.data(), static_cast<Index>(data_.size())};
  }
  Eigen::Map<const Eigen::ArrayXf> flat() const {
    return {data_.data(), static_cast<Index>(data_.size())};
  }

  /// View as a (rows, cols) row-major matrix; rows*cols must equal numel().
  MapMatrixXfRM mat(Index rows, Index cols) {
    check_view(rows * cols);
    return {data_.data(), rows, cols};
  }
  ConstMapMatrixXfRM mat(Index rows, Index cols) const {
    check_view(rows * cols);
    return {data_.data(), rows, cols};
  }

  /// For an NCHW (or N-channel-flattened) tensor: view of sample n as a
  /// (channels, inner) matrix, where inner is the product of trailing dims.
  MapMatrixXfRM sample(Index n, Index channels, Index inner) {
    return {data_.data() + n * channels * inner, channels, inner};
  }
  ConstMapMatrixXfRM sample(Index n, Index channels, Index inner) const {
    return {data_.data() + n * channels * inner, channels, inner};
  }

  /// In-place shape change over the same buffer.
  void reshape(std::vector<Index> shape) {
    if (checked_numel(shape) != numel())
      throw std::invalid_argument("Tensor::reshape: element count mismatch");
    shape_ = std::move(shape);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (size_t i = 0; i < shape_.size(); ++i)
      s += (i ? "," : "") + std::to_string(shape_[i]);
    return s + ")";
  }

 private:
  static Index checked_numel(const std::vector<Index>& shape) {
    Index n = 1;
    for (Index d : shape) {
      if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
      n *= d;
    }
    return n;
  }
  void check_view(Index n) const {
    if (n != numel()) throw std::invalid_argument("Tensor: bad view size");
  }

  // Aligned storage keeps Eigen's vectorized reductions on a fixed
  // summation order regardless of where the heap allocation lands, which
  // is required for bit-exact reproducibility across runs.
  std::vector<Index> shape_;
  std::vector<float, Eigen::aligned_allocator<float>> data_;
};

inline void require_shape(const Tensor& t, const std::vector<Index>& shape,
                          const char* what) {
  if (t.shape() != shape)
    throw std::invalid_argument(std::string(what) + ": unexpected shape " +
                                t.shape_str());
}

}  // namespace nowcast
