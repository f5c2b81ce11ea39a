#include "qmcrisk/risk/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qmcrisk/error.hpp"

namespace qmcrisk::risk {
namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::validation, "alpha must lie in (0, 1), got " + std::to_string(alpha),
                {{"alpha", std::to_string(alpha)}});
  }
}

std::uint64_t checked_tail(std::uint64_t n, double alpha) {
  check_alpha(alpha);
  const std::uint64_t k = tail_count(n, alpha);
  if (k == 0) {
    const auto need = minimum_paths(alpha);
    throw Error(ErrorCode::insufficient_paths,
                "floor(N * alpha) is 0 for N = " + std::to_string(n) + "; need N >= " + std::to_string(need),
                {{"paths", std::to_string(n)}, {"required", std::to_string(need)}});
  }
  return k;
}

}  // namespace

std::uint64_t tail_count(std::uint64_t n, double alpha) {
  return static_cast<std::uint64_t>(std::floor(static_cast<double>(n) * alpha + 1e-9));
}

std::uint64_t minimum_paths(double alpha) {
  check_alpha(alpha);
  auto n = static_cast<std::uint64_t>(std::ceil(1.0 / alpha - 1e-9));
  while (tail_count(n, alpha) < 1) ++n;
  return n;
}

TailRisk tail_risk(std::span<const double> returns, double alpha) {
  const std::uint64_t k = checked_tail(returns.size(), alpha);
  std::vector<double> sorted(returns.begin(), returns.end());
  const auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  const double threshold = *kth;
  std::sort(sorted.begin(), kth);  // tail in ascending order, summed in that order

  double sum = 0.0;
  for (auto it = sorted.begin(); it != kth + 1; ++it) sum += *it;
  double mean = sum / static_cast<double>(k);
  // Rounding must not push the tail mean above its own maximum.
  if (sorted.front() == threshold || mean > threshold) mean = threshold;
  return {-threshold, -mean};
}

double sorted_quantile_var(std::span<const double> returns, double alpha) {
  const std::uint64_t k = checked_tail(returns.size(), alpha);
  std::vector<double> sorted(returns.begin(), returns.end());
  const auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  return -*kth;
}

double tail_mean_cvar(std::span<const double> returns, double alpha) { return tail_risk(returns, alpha).cvar; }

}  // namespace qmcrisk::risk
