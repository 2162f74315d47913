#pragma once

#include <cmath>
#include <vector>

#include "ramtsf/tensor.hpp"

namespace testutil {

inline ramtsf::Tensor rand_tensor(ramtsf::Rng& rng, ramtsf::Shape shape, double scale = 1.0,
                                  bool requires_grad = false) {
  std::vector<double> v(static_cast<size_t>(ramtsf::shape_numel(shape)));
  for (auto& x : v) x = scale * rng.gaussian();
  return ramtsf::Tensor::from_data(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(const ramtsf::Tensor& a, const ramtsf::Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (size_t i = 0; i < da.size(); ++i) m = std::max(m, std::fabs(da[i] - db[i]));
  return m;
}

inline bool bitwise_equal(const ramtsf::Tensor& a, const ramtsf::Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data();
  auto db = b.data();
  for (size_t i = 0; i < da.size(); ++i) {
    if (da[i] != db[i]) return false;
  }
  return true;
}

}  // namespace testutil
