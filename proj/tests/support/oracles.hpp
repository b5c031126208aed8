#pragma once

#include <vector>

namespace oracle {

/// Density at x of the symmetric law with characteristic function exp(-t (xi^2/2)^alpha).
double stable_density(double x, double t, double alpha);

/// -(-Delta/2)^alpha applied to exp(-x^2/2), by Fourier quadrature (no singular-integral constant involved).
double frac_laplacian_gaussian_fourier(double x, double alpha);

/// Same, from the singular integral int_0^inf (u(x+z) + u(x-z) - 2u(x)) c z^{-1-2alpha} dz with the given c.
double frac_laplacian_gaussian_integral(double x, double alpha, double c);

/// E exp(-r S_t) for the listed catalog laws, in closed form written out here.
double stable_laplace(double alpha, double t, double r);

/// Mean of the first-iterate Picard flow for -beta x + gamma m with the mean frozen at m0.
double picard_first_mean(double beta, double gamma, double m0, double t);

}  // namespace oracle
