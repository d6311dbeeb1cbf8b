#pragma once

#include <cstdint>
#include <vector>

#include "ctmsm/common.hpp"

namespace ctmsm {

// Logistic regression with an intercept, fitted by Newton-Raphson (IRLS).
struct LogisticFit {
  Vector beta;  // intercept first
  int iterations = 0;

  double predict(const double* x, std::size_t p) const;
};

LogisticFit fit_logistic(const RowMatrix& X, const std::vector<std::uint8_t>& y, double tolerance = 1e-8,
                         int max_iterations = 50);

}  // namespace ctmsm
