#pragma once

namespace ccplan {

/// Inverse error function on (-1, 1): rational initial guess refined by
/// Newton steps against std::erf.
double erf_inv(double y);

/// Lower regularized incomplete gamma P(a, x) for a > 0, x >= 0.
double gamma_p(double a, double x);

/// P(chi^2_dof <= x).
double chi2_cdf(double x, double dof);

}  // namespace ccplan
