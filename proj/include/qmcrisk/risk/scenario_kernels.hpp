#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qmcrisk/qsource/variates.hpp"

namespace qmcrisk::risk {

/// How daily draws combine into one horizon return per asset.
enum class Compounding {
  sum,        // h daily draws, daily returns added
  simple,     // h daily draws, summed log returns converted with expm1
  sqrt_time,  // one draw with mean h*mu and factor sqrt(h)*L
};

/// Flattened simulation inputs. `chol` is the lower Cholesky factor in
/// row-major order; `weights` align with `mean`.
struct ScenarioModel {
  std::size_t assets = 0;
  std::uint32_t horizon = 1;
  Compounding compounding = Compounding::sum;
  std::vector<double> mean;
  std::vector<double> chol;
  std::vector<double> weights;

  /// Normal variates one path consumes: assets * horizon, or assets for sqrt_time.
  std::uint64_t variates_per_path() const noexcept;
};

/// Paths per work unit of the parallel kernel. Fixed, so the variate ranges
/// each unit reads do not depend on the thread count.
inline constexpr std::uint64_t kPathBlock = 2048;

/// Portfolio return of one path from its normals, laid out day-major and
/// asset-innermost. `scratch` holds at least `assets` doubles.
double path_return(const ScenarioModel& model, const double* normals, double* scratch) noexcept;

/// Reference implementation: one path at a time, path i reading variates
/// [i * v, (i + 1) * v) with v = variates_per_path().
void simulate_paths_serial(const ScenarioModel& model, const qsource::UniformStream& stream,
                           std::span<double> out);

/// OpenMP kernel over kPathBlock-sized blocks. Bit-identical to the serial
/// reference for any thread count.
void simulate_paths_parallel(const ScenarioModel& model, const qsource::UniformStream& stream,
                             std::span<double> out);

}  // namespace qmcrisk::risk
