#include "qafuse/prob.hpp"

#include <limits>

namespace qafuse {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error("log_sum_exp of empty list");
  double max = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("non-finite score");
    max = std::max(max, v);
  }
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max);
  return max + std::log(sum);
}

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace qafuse
