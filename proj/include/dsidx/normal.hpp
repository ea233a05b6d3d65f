#pragma once

namespace dsidx {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse standard normal CDF for p in (0,1). Acklam's rational
/// approximation followed by one Halley step, accurate to ~1e-15.
double normal_quantile(double p);

}  // namespace dsidx
