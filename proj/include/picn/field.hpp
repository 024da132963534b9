#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace picn {

/// Uniform node-centred grid over [x_min,x_max] x [y_min,y_max].
/// Node (i,j) sits at (x_min + j*dx, y_min + i*dy); i indexes y (rows),
/// j indexes x (columns). One-dimensional problems use ny == 1 (dy == 0).
struct GridSpec {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 0.0;
  int nx = 2;
  int ny = 1;

  double dx() const { return nx > 1 ? (x_max - x_min) / (nx - 1) : 0.0; }
  double dy() const { return ny > 1 ? (y_max - y_min) / (ny - 1) : 0.0; }
  double x(int j) const { return x_min + j * dx(); }
  double y(int i) const { return y_min + i * dy(); }
  int nodes() const { return nx * ny; }
  bool one_dimensional() const { return ny == 1; }

  void validate() const {
    if (nx < 2) throw std::invalid_argument("GridSpec: nx must be >= 2");
    if (ny < 1) throw std::invalid_argument("GridSpec: ny must be >= 1");
    if (!(dx() > 0.0)) throw std::invalid_argument("GridSpec: dx must be > 0");
    if (ny > 1 && !(dy() > 0.0))
      throw std::invalid_argument("GridSpec: dy must be > 0 when ny > 1");
  }
};

/// Dense row-major 2D array of doubles. Row count may be 1 (1D fields).
class FieldTensor {
 public:
  FieldTensor() = default;
  FieldTensor(int rows, int cols, double value = 0.0)
      : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, value) {
    if (rows < 1 || cols < 1)
      throw std::invalid_argument("FieldTensor: dimensions must be positive");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }

  double& operator()(int i, int j) { return v_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return v_[static_cast<size_t>(i) * cols_ + j]; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }

  void fill(double value) { v_.assign(v_.size(), value); }

  bool same_shape(const FieldTensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool all_finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> v_;
};

}  // namespace picn
