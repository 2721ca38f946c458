#pragma once

#include <complex>
#include <vector>

namespace homtom {

// Dawson integral F(x) = e^{-x^2} int_0^x e^{t^2} dt.
double dawson(double x);

// Scaled parabolic cylinder values on the imaginary axis,
//   dtilde[k] = e^{-y^2} D_{-k}(-2iy),   k = 0..kmax,
// the building block of the quadrature deconvolution kernels.  Downward
// recurrence is exact for |y| <= 2.5; larger |y| uses a complex-contour
// quadrature routed through the saddle, accurate to ~1e-13 relative for
// k <= 130 and |y| <= 13.
std::vector<std::complex<double>> dtilde_array(double y, int kmax);

// D_nu(z) for integer nu <= 0 and purely imaginary argument z = -2ix.
// Throws DomainError for positive orders or arguments off the imaginary
// axis, where the method used here does not apply.
std::complex<double> parabolic_cylinder_D(int order, std::complex<double> z);

// Regularized incomplete gamma functions P(a,x) and Q(a,x) = 1 - P(a,x).
double gammainc_lower(double a, double x);
double gammainc_upper(double a, double x);

// Upper tail probability of a chi-square statistic with dof degrees of
// freedom, computed as Q(dof/2, chi2/2).
double chi2_survival(double chi2, int dof);

}  // namespace homtom
