#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hge/common.hpp"

namespace hge {

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor of doubles, rank 0..2. Value semantics throughout.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(t.count(), 0.0);
    return t;
  }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t = zeros(std::move(shape));
    t.data_.assign(t.data_.size(), v);
    return t;
  }

  static Tensor scalar(double v) {
    Tensor t;
    t.shape_ = {};
    t.data_ = {v};
    return t;
  }

  static Tensor row(std::initializer_list<double> vals) {
    Tensor t;
    t.shape_ = {static_cast<int>(vals.size())};
    t.data_.assign(vals);
    return t;
  }

  static Tensor from(std::vector<int> shape, std::vector<double> vals) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(vals);
    if (static_cast<std::int64_t>(t.data_.size()) != t.count())
      throw DimensionError("tensor data size " + std::to_string(t.data_.size()) +
                           " does not match shape " + shape_str(t.shape_));
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  int rows() const { return rank() == 0 ? 1 : shape_[0]; }
  int cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return 1;
    return 1;
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::int64_t i) { return data_[i]; }
  double operator[](std::int64_t i) const { return data_[i]; }
  double& at(int i, int j) { return data_[static_cast<std::int64_t>(i) * shape_[1] + j]; }
  double at(int i, int j) const { return data_[static_cast<std::int64_t>(i) * shape_[1] + j]; }
  double item() const {
    if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::int64_t count() const {
    std::int64_t n = 1;
    for (int d : shape_) {
      if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape_));
      n *= d;
    }
    return n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

inline DimensionError shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  return DimensionError(op + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
}

// Compressed sparse rows over a fixed column count; the constant-feature input
// to the first aggregation layer (gradients never flow into it).
struct SparseRows {
  int col_count = 0;
  std::vector<std::int64_t> offsets;  // size rows+1
  std::vector<int> index;
  std::vector<double> value;

  int row_count() const { return offsets.empty() ? 0 : static_cast<int>(offsets.size()) - 1; }

  static SparseRows from_dense_rows(const std::vector<std::vector<double>>& rows, int cols) {
    SparseRows s;
    s.col_count = cols;
    s.offsets.reserve(rows.size() + 1);
    s.offsets.push_back(0);
    for (const auto& r : rows) {
      for (int j = 0; j < cols; ++j)
        if (r[j] != 0.0) {
          s.index.push_back(j);
          s.value.push_back(r[j]);
        }
      s.offsets.push_back(static_cast<std::int64_t>(s.index.size()));
    }
    return s;
  }
};

}  // namespace hge
