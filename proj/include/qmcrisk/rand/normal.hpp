#pragma once

#include <span>

#include "qmcrisk/rand/bits.hpp"

namespace qmcrisk::rand {

/// Replacement for u == 0 before the inverse CDF (which diverges there).
inline constexpr double kZeroUniform = 0x1p-54;

/// Standard normal CDF, evaluated through erfc for tail accuracy.
double normal_cdf(double x);

/// Standard normal quantile for 0 < u < 1, accurate to 1e-8 absolute.
/// Rational approximation refined by one Halley step against normal_cdf.
/// Throws ErrorCode::domain outside the open unit interval.
double inverse_normal_cdf(double u);

/// Same as inverse_normal_cdf but without the domain check; u == 0 maps to
/// the remapped endpoint. For hot loops over decoded uniforms in [0, 1).
double inverse_normal_cdf_unchecked(double u) noexcept;

/// Elementwise inverse CDF with the u == 0 remap.
NormalBatch uniforms_to_normals(const UniformBatch& batch);

/// In-place transform of uniforms in [0, 1) to standard normals.
void uniforms_to_normals(std::span<double> values) noexcept;

}  // namespace qmcrisk::rand
