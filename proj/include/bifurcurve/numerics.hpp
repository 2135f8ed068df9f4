#pragma once

#include "bifurcurve/polynomial.hpp"

#include <functional>
#include <limits>

namespace bifurcurve {

struct NewtonResult {
    Vec x;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

/// Residual and Jacobian of a square system at x.
using SquareSystem = std::function<void(const Vec& x, Vec& f, Mat& jac)>;

/// Damped Newton for a square system. Steps longer than max_step are scaled
/// down; a step that does not reduce the residual is halved up to 8 times.
NewtonResult newton_square(const SquareSystem& system, Vec x0, double tol, int max_iter,
                           double max_step = std::numeric_limits<double>::infinity());

/// Gauss-Newton with minimum-norm steps for the underdetermined system
/// F(x) = t; converges to a nearby point of the fiber.
NewtonResult project_to_fiber(const PolynomialMap& map, const Vec& t, Vec x0, double tol, int max_iter,
                              double max_step = std::numeric_limits<double>::infinity());

/// Unit vector spanning the null space of a full-rank (n-1) x n matrix,
/// built from signed maximal minors so it varies smoothly with J.
Vec null_direction(const Mat& jac);

/// Orients v so its first non-negligible coordinate is positive.
Vec canonical_orientation(Vec v);

double min_singular_value(const Mat& jac);

/// Distance from p to the segment [a, b].
double point_segment_distance(const Vec& p, const Vec& a, const Vec& b);

}  // namespace bifurcurve
