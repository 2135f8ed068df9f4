#pragma once

#include "bifurcurve/milnor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bifurcurve {

enum class Classification { Typical, BifurcationCandidate, CriticalOrBoundary, Inconclusive };
std::string to_string(Classification c);

/// Box of parameter values sampled on a regular grid.
struct ScanRegion {
    std::vector<double> lo;
    std::vector<double> hi;
    std::vector<int> grid;  // samples per axis, at least 3
    int refine_depth = 3;

    std::size_t dim() const { return lo.size(); }
    void validate() const;
};

/// Two conditions of one route. combined is Fail as soon as
/// one condition fails, Pass when both pass.
struct RouteResult {
    Tri first = Tri::Inconclusive;
    Tri second = Tri::Inconclusive;
    Tri combined = Tri::Inconclusive;
};

struct ParityRoute {
    Tri verdict = Tri::Inconclusive;  // Fail = bifurcation
    bool in_s_c = false;
    double eps = 0.0;
    std::vector<int> parities;        // stabilized parity per track, -1 when not stabilized
    std::string reason;
};

struct Verdict {
    Vec a;
    int level = 0;
    double eps = 0.0;
    Classification classification = Classification::Inconclusive;
    std::string reason;
    FiberTopology topology;
    Tri chi_constant = Tri::Inconclusive;
    Tri betti_constant = Tri::Inconclusive;
    Tri nv = Tri::Inconclusive;
    Tri ns = Tri::Inconclusive;
    Tri sns = Tri::Inconclusive;
    RouteResult route_ab;       // chi constant + NV
    RouteResult route_abprime;  // Betti constant + NS
    RouteResult route_cor;      // SNS + NV
    std::optional<ParityRoute> route_parity;
    bool consistent = true;
    std::vector<Witness> witnesses;
    std::vector<std::vector<double>> mu_series;
    std::size_t fibers = 0;
};

struct ClassifyOptions {
    /// S_c estimate for the parity route; computed on demand when null.
    const AsymptoticValueEstimate* s_c = nullptr;
    Vec center;                 // Milnor centre, origin when empty
    double parity_eps = 0.5;    // capped at half the gap to other S_c values
    bool parity = true;
    /// Exterior mode: values where fibers touch the inner sphere tangentially;
    /// computed on demand for plane maps when null.
    const std::vector<double>* tangency = nullptr;
};

/// Values of a plane map at the points where its fibers are tangent to the
/// circle of the given radius about the origin. Empty when every point is a
/// tangency point.
std::vector<double> sphere_tangency_values(const PolynomialMap& map, double radius, const TraceConfig& cfg);

/// Classifies a using every route: chi and Betti constancy over the approach
/// samples, NV, NS, SNS, and for plane maps the parity route. The approach
/// uses cfg.approach; cfg.exterior_radius switches on exterior mode.
Verdict classify_value(const FiberSystem& sys, const Vec& a, const AnalysisConfig& cfg,
                       const ClassifyOptions& opts = {});
Verdict classify_value(const PolynomialMap& map, const Vec& a, const AnalysisConfig& cfg,
                       const ClassifyOptions& opts = {});

struct Cell {
    Vec lo;
    Vec hi;
};

struct ScanStats {
    std::size_t nodes = 0;
    std::size_t fibers = 0;
    std::size_t typical = 0;
    std::size_t candidates = 0;
    std::size_t critical = 0;
    std::size_t inconclusive = 0;
    std::size_t inconsistent = 0;
    std::vector<std::size_t> nodes_per_level;
};

struct ScanReport {
    ScanRegion region;
    std::optional<double> exterior_radius;
    std::vector<Verdict> samples;        // sorted by parameter value
    std::vector<Cell> candidate_set;     // disjoint, inside the region
    std::vector<Cell> excluded_critical;
    std::vector<double> s_c_values;      // plane maps, full mode
    std::vector<double> tangency_values; // plane maps, exterior mode
    ScanStats stats;
};

/// Classifies every grid node, then refines around non-typical nodes by
/// bisection up to region.refine_depth. Approach radius at each node is half
/// its grid spacing. Candidate cells are the finest cells touching a
/// candidate node.
ScanReport scan(const PolynomialMap& map, const ScanRegion& region, const AnalysisConfig& cfg);

/// scan with every fiber restricted to |x| >= inner_radius.
ScanReport exterior_scan(const PolynomialMap& map, const ScanRegion& region, double inner_radius,
                         const AnalysisConfig& cfg);

}  // namespace bifurcurve
