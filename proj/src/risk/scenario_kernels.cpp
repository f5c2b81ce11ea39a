#include "qmcrisk/risk/scenario_kernels.hpp"

#include <cmath>
#include <exception>

#include <omp.h>

namespace qmcrisk::risk {

std::uint64_t ScenarioModel::variates_per_path() const noexcept {
  return compounding == Compounding::sqrt_time ? assets : assets * horizon;
}

double path_return(const ScenarioModel& model, const double* z, double* acc) noexcept {
  const std::size_t m = model.assets;
  const double* L = model.chol.data();
  if (model.compounding == Compounding::sqrt_time) {
    const double h = static_cast<double>(model.horizon);
    const double root_h = std::sqrt(h);
    for (std::size_t j = 0; j < m; ++j) {
      double shock = 0.0;
      for (std::size_t k = 0; k <= j; ++k) shock += L[j * m + k] * z[k];
      acc[j] = h * model.mean[j] + root_h * shock;
    }
  } else {
    for (std::size_t j = 0; j < m; ++j) acc[j] = 0.0;
    for (std::uint32_t day = 0; day < model.horizon; ++day) {
      const double* zd = z + static_cast<std::size_t>(day) * m;
      for (std::size_t j = 0; j < m; ++j) {
        double x = model.mean[j];
        for (std::size_t k = 0; k <= j; ++k) x += L[j * m + k] * zd[k];
        acc[j] += x;
      }
    }
    if (model.compounding == Compounding::simple) {
      for (std::size_t j = 0; j < m; ++j) acc[j] = std::expm1(acc[j]);
    }
  }
  double r = 0.0;
  for (std::size_t j = 0; j < m; ++j) r += model.weights[j] * acc[j];
  return r;
}

void simulate_paths_serial(const ScenarioModel& model, const qsource::UniformStream& stream,
                           std::span<double> out) {
  const std::uint64_t v = model.variates_per_path();
  std::vector<double> z(v);
  std::vector<double> scratch(model.assets);
  for (std::size_t i = 0; i < out.size(); ++i) {
    stream.normals(i * v, z);
    out[i] = path_return(model, z.data(), scratch.data());
  }
}

void simulate_paths_parallel(const ScenarioModel& model, const qsource::UniformStream& stream,
                             std::span<double> out) {
  const std::uint64_t v = model.variates_per_path();
  const std::int64_t paths = static_cast<std::int64_t>(out.size());
  const std::int64_t blocks = (paths + static_cast<std::int64_t>(kPathBlock) - 1) /
                              static_cast<std::int64_t>(kPathBlock);
  std::exception_ptr failure;

#pragma omp parallel
  {
    std::vector<double> z(kPathBlock * v);
    std::vector<double> scratch(model.assets);
#pragma omp for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < blocks; ++b) {
      const std::int64_t first = b * static_cast<std::int64_t>(kPathBlock);
      const std::int64_t count = std::min<std::int64_t>(kPathBlock, paths - first);
      try {
        std::span<double> block(z.data(), static_cast<std::size_t>(count) * v);
        stream.normals(static_cast<std::uint64_t>(first) * v, block);
        for (std::int64_t i = 0; i < count; ++i) {
          out[static_cast<std::size_t>(first + i)] = path_return(model, z.data() + i * v, scratch.data());
        }
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace qmcrisk::risk
