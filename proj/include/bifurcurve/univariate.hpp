#pragma once

#include "bifurcurve/polynomial.hpp"

#include <vector>

namespace bifurcurve::univariate {

/// Dense univariate polynomial, coefficient k multiplies u^k.
using Coeffs = std::vector<Rational>;

void trim(Coeffs& p);
int degree(const Coeffs& p);
Coeffs derivative(const Coeffs& p);
Coeffs multiply(const Coeffs& a, const Coeffs& b);
Coeffs add(const Coeffs& a, const Coeffs& b);
Coeffs remainder(const Coeffs& a, const Coeffs& b);
Coeffs gcd(Coeffs a, Coeffs b);
Rational evaluate(const Coeffs& p, const Rational& u);
double evaluate(const std::vector<double>& p, double u);

struct RealRoots {
    std::vector<double> roots;  // distinct real roots, ascending
    bool multiple = false;      // some real root has multiplicity > 1
};

/// Exact distinct-real-root isolation by Sturm sequences, then refinement of
/// each isolating interval to double precision.
RealRoots real_roots(Coeffs p);

}  // namespace bifurcurve::univariate
