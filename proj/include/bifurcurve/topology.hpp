#pragma once

#include "bifurcurve/tracer.hpp"

#include <stdexcept>
#include <vector>

namespace bifurcurve {

class ClassificationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Circle iff the trace closed with no boundary hits; Arc iff it has exactly
/// two. Anything else is inconsistent and throws.
ComponentKind classify(const FiberComponent& component);

struct FiberTopology {
    Vec b;
    int s = 0;
    int l = 0;
    int b0 = 0;
    int b1 = 0;
    int chi_components = 0;
    int chi_sphere = 0;
    double mu = 0.0;              // NaN for an empty fiber
    bool mu_lower_bound = false;  // some infimum is approached at the boundary
    bool stabilized = false;
    double radius_used = 0.0;
    std::vector<double> ladder;   // radii actually probed (after tangency nudges)
    std::vector<int> crossing_counts;
    bool reliable = true;         // snapshot untainted and complete
    std::string issue;
};

struct EulerEstimate {
    int chi = 0;
    bool stabilized = false;
    std::vector<double> radii;
    std::vector<int> counts;
    std::size_t stable_from = 0;  // first rung of the agreeing tail
};

/// Default ladder R0 * {1, 2, 4, 8}.
std::vector<double> default_ladder(double r0);

/// Transversal crossings of X_t with S_R. A tangential sphere is replaced by
/// one 1% larger, up to three times; the radius actually used is returned.
SphereCrossings transversal_crossings(const FiberSystem& sys, const Vec& t, double radius, const TraceConfig& cfg);

/// Half the stabilised crossing count over the ladder. Stabilised when the
/// counts agree and are even on a tail of at least the last two rungs.
EulerEstimate euler_via_sphere(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg,
                               const std::vector<double>& ladder);

/// Invariants of one snapshot; chi_sphere is half the crossing count at the
/// snapshot radius.
FiberTopology invariants(const FiberSnapshot& snapshot, const FiberSystem& sys, const TraceConfig& cfg);

/// Snapshot and invariants at the radius where the sphere count stabilises.
/// The default ladder is doubled up to three more times while unstable, and
/// the radius is escalated once if the two Euler routes disagree.
struct FiberAnalysis {
    FiberSnapshot snapshot;
    FiberTopology topology;
};

FiberAnalysis analyze_fiber(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg);

/// Exterior variant: components are restricted to R0 <= |x| <= R and every
/// interval counts once toward chi.
FiberAnalysis analyze_exterior_fiber(const FiberSystem& sys, const Vec& t, double inner_radius,
                                     const TraceConfig& cfg);

}  // namespace bifurcurve
