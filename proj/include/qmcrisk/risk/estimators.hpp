#pragma once

#include <cstdint>
#include <span>

namespace qmcrisk::risk {

/// Tail size k = floor(n * alpha), 1-based rank of the VaR order statistic.
/// A 1e-9 slack absorbs products like 100 * 0.29 landing just under an integer.
std::uint64_t tail_count(std::uint64_t n, double alpha);

/// Smallest n with tail_count(n, alpha) >= 1.
std::uint64_t minimum_paths(double alpha);

struct TailRisk {
  double var = 0.0;
  double cvar = 0.0;
};

/// -R_(k) over ascending returns. Throws ErrorCode::insufficient_paths when k = 0
/// and ErrorCode::validation unless 0 < alpha < 1.
double sorted_quantile_var(std::span<const double> returns, double alpha);

/// Negative mean of the k smallest returns (closed tail, never empty).
double tail_mean_cvar(std::span<const double> returns, double alpha);

/// Both estimates from one selection pass. Never reports cvar < var.
TailRisk tail_risk(std::span<const double> returns, double alpha);

}  // namespace qmcrisk::risk
