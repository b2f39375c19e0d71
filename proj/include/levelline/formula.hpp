#pragma once

#include <complex>
#include <vector>

#include "levelline/boundary.hpp"

namespace levelline {

/// Square root with branch cut along the positive real axis, chosen so the
/// result lies in the closed upper half plane.
std::complex<double> sqrt_uhp(std::complex<double> z);

/// F(x, y, z) = (2 / (x - y)) * sqrt((y - z) / (x - z)), valid for z < x, z < y.
double force_term(double x, double y, double z);

/// One factor of the hitting-probability product, for diagnostics.
struct ProbFactor {
    int index;         // original 1-based index i
    bool same_parity;  // i in I_k
    double value;
};

/// Probability that the level line started at b_k terminates on the free
/// arc (-infinity, a). Strictly positive, equal to 1 iff n == 1.
double hit_free_arc_probability(const BoundaryConfig& config);

/// Same, evaluated on raw images (used along the Loewner flow, where the
/// points may have drifted arbitrarily close together). Lower images that
/// have merged with a within rounding are clamped.
double hit_free_arc_probability(double a, const std::vector<double>& b, int k);

std::vector<ProbFactor> hit_probability_factors(const BoundaryConfig& config);

/// Whether the a -> -inf limit has the closed-form pairing (k = 1, n odd).
bool dirichlet_limit_has_closed_form(int n, int k);

/// Limit of the hitting probability as a -> -infinity. Closed-form product
/// when available, otherwise numeric evaluation at a = -1e8 with
/// cancellation-free factors.
double dirichlet_limit_probability(const std::vector<double>& b, int k);

/// Green function on H with Dirichlet data on (a, inf) and a free
/// (Neumann) arc on (-inf, a). Logarithmic singularity at z = w.
double greens_mix(std::complex<double> z, std::complex<double> w, double a);

/// Bounded harmonic function with alternating values first_sign*(-1)^i*lambda
/// on (b_i, b_{i+1}) (b_0 = a, b_{n+1} = inf) and zero normal derivative on
/// (-inf, a). Built by unfolding u = sqrt(z - a) and even reflection.
double harmonic_phi(std::complex<double> z, const BoundaryConfig& config);

}  // namespace levelline
