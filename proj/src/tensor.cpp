#include "crel/tensor.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace crel {

Tensor3 Tensor3::symmetrized() const {
  Tensor3 out(d_);
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j)
      for (int k = 0; k < d_; ++k) {
        double s = (*this)(i, j, k) + (*this)(i, k, j) + (*this)(j, i, k) +
                   (*this)(j, k, i) + (*this)(k, i, j) + (*this)(k, j, i);
        out(i, j, k) = s / 6.0;
      }
  return out;
}

double Tensor3::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::fabs(x));
  return m;
}

Tensor4 Tensor4::symmetrized() const {
  Tensor4 out(d_);
  std::array<int, 4> p{};
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j)
      for (int k = 0; k < d_; ++k)
        for (int l = 0; l < d_; ++l) {
          p = {i, j, k, l};
          std::sort(p.begin(), p.end());
          double s = 0.0;
          int cnt = 0;
          do {
            s += (*this)(p[0], p[1], p[2], p[3]);
            ++cnt;
          } while (std::next_permutation(p.begin(), p.end()));
          out(i, j, k, l) = s / cnt;
        }
  return out;
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (double x : v_) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace crel
