#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace leosop {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;
using Vec3 = Eigen::Vector3d;

/// Dense row-major grid, used for OFDM symbol x subcarrier planes.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  // vector<bool> hands out proxies, hence the member typedefs.
  typename std::vector<T>::reference operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  typename std::vector<T>::const_reference operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  bool same_shape(std::size_t rows, std::size_t cols) const {
    return rows_ == rows && cols_ == cols;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

}  // namespace leosop
