#pragma once

#include <vector>

namespace crel {

// Dense tensors for the small parameter dimensions used here (d <= 3ish).

class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int d) : d_(d), v_(static_cast<std::size_t>(d) * d * d, 0.0) {}

  int dim() const { return d_; }
  double& operator()(int i, int j, int k) { return v_[idx(i, j, k)]; }
  double operator()(int i, int j, int k) const { return v_[idx(i, j, k)]; }

  // average over all permutations of the three indices
  Tensor3 symmetrized() const;
  double max_abs() const;

 private:
  std::size_t idx(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * d_ + j) * d_ + k;
  }
  int d_ = 0;
  std::vector<double> v_;
};

class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(int d) : d_(d), v_(static_cast<std::size_t>(d) * d * d * d, 0.0) {}

  int dim() const { return d_; }
  double& operator()(int i, int j, int k, int l) { return v_[idx(i, j, k, l)]; }
  double operator()(int i, int j, int k, int l) const { return v_[idx(i, j, k, l)]; }

  Tensor4 symmetrized() const;
  double max_abs() const;

 private:
  std::size_t idx(int i, int j, int k, int l) const {
    return ((static_cast<std::size_t>(i) * d_ + j) * d_ + k) * d_ + l;
  }
  int d_ = 0;
  std::vector<double> v_;
};

}  // namespace crel
