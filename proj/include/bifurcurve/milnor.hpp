#pragma once

#include "bifurcurve/asymptotics.hpp"

#include <map>
#include <string>
#include <vector>

namespace bifurcurve {

/// Traced branches of {m_c = 0} inside a ball.
struct MilnorSet {
    Vec center;
    Polynomial determinant;
    std::vector<FiberComponent> branches;
    double radius = 0.0;
    bool degenerate = false;
    std::string issue;
};

/// Plane maps only. Traces every branch of the Milnor set in B_radius and
/// marks the set degenerate when m_c vanishes identically or its gradient
/// vanishes along most of a branch.
MilnorSet trace_milnor_set(const PolynomialMap& map, const Vec& center, const TraceConfig& cfg);

struct AsymptoticValue {
    double t0 = 0.0;
    int branch = -1;
    int end = 0;                       // 0: first polyline end, 1: last
    double confidence = 0.0;           // extrapolation residual
    std::vector<double> tail;          // last three F-values, radius increasing
};

struct BranchFlag {
    int branch = -1;
    int end = 0;
    std::string reason;                // oscillating | too_short
};

struct AsymptoticValueEstimate {
    Vec center;
    std::vector<AsymptoticValue> values;
    std::vector<double> radii_used;
    std::vector<BranchFlag> flagged;

    /// Values merged within tol, ascending.
    std::vector<double> distinct(double tol = 1e-2) const;
    bool contains(double a, double tol = 1e-2) const;
};

/// Ladder r0 * {1, 2, 4, 8, 16}.
std::vector<double> milnor_ladder(double r0);

/// Follows each branch end inward from the outer sphere, records F where the
/// branch crosses each ladder radius, and extrapolates converging sequences.
AsymptoticValueEstimate estimate_asymptotic_values(const PolynomialMap& map, const MilnorSet& milnor,
                                                   const std::vector<double>& ladder, const TraceConfig& cfg);

/// Traces M_c in B_{16 r0} and estimates S_c. Retries with perturbed random
/// centres (seeded) while the set is degenerate.
struct CenterEstimate {
    MilnorSet milnor;
    AsymptoticValueEstimate estimate;
    int retries = 0;
};
CenterEstimate estimate_s_c(const PolynomialMap& map, const Vec& center, const TraceConfig& cfg,
                            std::uint64_t seed = 20130611);

/// Default centres: origin plus four random points in [-3, 3]^2.
std::vector<Vec> default_centers(std::uint64_t seed);

struct SInfinityEstimate {
    std::vector<double> values;
    std::vector<Vec> centers_used;
    std::vector<Vec> centers_dropped;
};

/// Intersection (matching tolerance 1e-2) of the per-centre estimates. Throws
/// std::runtime_error when every centre is degenerate.
SInfinityEstimate estimate_s_infinity(const PolynomialMap& map, const std::vector<Vec>& centers,
                                      const TraceConfig& cfg);

struct ParityTrack {
    std::vector<int> ids;          // component id per scale, -1 when lost
    std::vector<int> counts;       // escaping intersections per scale, -1 when skipped
    bool stabilized = false;
    int parity = -1;               // stabilized parity, -1 when not stabilized
};

struct ParityResult {
    Vec a;
    Vec center;
    bool in_s_c = false;
    std::vector<double> s_c_values;
    double inner_radius = 0.0;     // intersections inside this ball persist at a
    double trace_radius = 0.0;
    std::vector<std::vector<ParityTrack>> tracks;  // [direction][track]
    Tri verdict = Tri::Inconclusive;  // Fail = bifurcation, Pass = not a bifurcation value
    std::string reason;
};

/// Approach radius for the parity test at a: eps, capped at half the gap to
/// the nearest other value of the estimate.
double parity_radius(const AsymptoticValueEstimate& s_c, double a, double eps);

/// Parity criterion for plane maps at a. The escaping intersections of a
/// fiber component with M_c are the sign changes of m_c along the component
/// outside the ball that contains every point of X_a meeting M_c.
ParityResult parity_test(const PolynomialMap& map, const Vec& a, const Vec& center, const ApproachSpec& approach,
                         const AnalysisConfig& cfg, const AsymptoticValueEstimate& s_c);
ParityResult parity_test(const PolynomialMap& map, const Vec& a, const Vec& center, const ApproachSpec& approach,
                         const AnalysisConfig& cfg);

}  // namespace bifurcurve
