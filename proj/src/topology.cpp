#include "bifurcurve/topology.hpp"

#include <cmath>
#include <limits>

namespace bifurcurve {

ComponentKind classify(const FiberComponent& c)
{
    if (c.closed && !c.boundary_hits.empty()) {
        throw ClassificationError("component is closed and also meets the sphere");
    }
    if (c.closed) {
        return ComponentKind::Circle;
    }
    if (c.boundary_hits.size() == 2) {
        return ComponentKind::Arc;
    }
    throw ClassificationError("open component with " + std::to_string(c.boundary_hits.size()) + " boundary hits");
}

std::vector<double> default_ladder(double r0)
{
    return {r0, 2 * r0, 4 * r0, 8 * r0};
}

SphereCrossings transversal_crossings(const FiberSystem& sys, const Vec& t, double radius, const TraceConfig& cfg)
{
    SphereCrossings sc = sphere_crossings(sys, t, radius, cfg);
    for (int k = 0; k < 3 && sc.tangential; ++k) {
        radius *= 1.01;
        sc = sphere_crossings(sys, t, radius, cfg);
    }
    return sc;
}

namespace {

// Stabilised when the counts agree and are even on a tail of at least two rungs.
void settle(EulerEstimate& e, bool tangential)
{
    const std::size_t n = e.counts.size();
    e.stabilized = false;
    e.stable_from = n - 1;
    for (std::size_t k = 0; k + 1 < n; ++k) {
        bool ok = true;
        for (std::size_t i = k; i < n; ++i) {
            ok = ok && e.counts[i] == e.counts[k] && e.counts[i] % 2 == 0;
        }
        if (ok) {
            e.stable_from = k;
            e.stabilized = !tangential;
            break;
        }
    }
    e.chi = e.counts.back() / 2;
}

}  // namespace

EulerEstimate euler_via_sphere(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg,
                               const std::vector<double>& ladder)
{
    if (ladder.size() < 3) {
        throw std::invalid_argument("ladder needs at least three radii");
    }
    for (std::size_t i = 1; i < ladder.size(); ++i) {
        if (!(ladder[i] > ladder[i - 1])) {
            throw std::invalid_argument("ladder must be strictly increasing");
        }
    }
    EulerEstimate e;
    bool tangential = false;
    for (double r : ladder) {
        const SphereCrossings sc = transversal_crossings(sys, t, r, cfg);
        tangential = tangential || sc.tangential;
        e.radii.push_back(sc.radius);
        e.counts.push_back(static_cast<int>(sc.points.size()));
    }
    settle(e, tangential);
    return e;
}

namespace {

// Default ladder, doubled up to three more times while the tail disagrees.
EulerEstimate extended_estimate(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg, double r0)
{
    std::vector<double> ladder = default_ladder(r0);
    EulerEstimate e = euler_via_sphere(sys, t, cfg, ladder);
    bool tangential = false;
    for (int extra = 0; extra < 3 && !e.stabilized && !tangential; ++extra) {
        const SphereCrossings sc = transversal_crossings(sys, t, 2.0 * e.radii.back(), cfg);
        tangential = sc.tangential;
        e.radii.push_back(sc.radius);
        e.counts.push_back(static_cast<int>(sc.points.size()));
        settle(e, tangential);
    }
    return e;
}

}  // namespace

namespace {

void count_components(const FiberSnapshot& snap, FiberTopology& topo)
{
    topo.b = snap.t;
    topo.radius_used = snap.radius;
    topo.reliable = snap.reliable();
    if (snap.tainted) {
        topo.issue = "near-singular Jacobian on the fiber";
    } else if (snap.incomplete) {
        topo.issue = "incomplete trace";
    }
    topo.s = 0;
    topo.l = 0;
    for (const auto& c : snap.components) {
        ComponentKind k = c.kind;
        try {
            k = classify(c);
        } catch (const ClassificationError& e) {
            topo.reliable = false;
            topo.issue = e.what();
        }
        (k == ComponentKind::Circle ? topo.s : topo.l) += 1;
    }
    topo.b0 = topo.s + topo.l;
    topo.b1 = topo.s;
    topo.chi_components = topo.l;
    if (snap.components.empty()) {
        topo.mu = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    topo.mu = 0.0;
    topo.mu_lower_bound = false;
    for (const auto& c : snap.components) {
        topo.mu = std::max(topo.mu, c.min_norm);
        topo.mu_lower_bound = topo.mu_lower_bound || c.min_norm_at_boundary;
    }
}

}  // namespace

FiberTopology invariants(const FiberSnapshot& snapshot, const FiberSystem& sys, const TraceConfig& cfg)
{
    FiberTopology topo;
    count_components(snapshot, topo);
    const SphereCrossings sc = transversal_crossings(sys, snapshot.t, snapshot.radius, cfg);
    const int count = static_cast<int>(sc.points.size());
    topo.ladder = {sc.radius};
    topo.crossing_counts = {count};
    topo.chi_sphere = count / 2;
    topo.stabilized = !sc.tangential && count % 2 == 0 && topo.chi_sphere == topo.chi_components;
    return topo;
}

FiberAnalysis analyze_fiber(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg)
{
    const EulerEstimate e = extended_estimate(sys, t, cfg, cfg.radius);
    double r_use = e.radii[e.stable_from];
    int count = e.counts[e.stable_from];
    FiberAnalysis out;
    out.snapshot = enumerate_fiber(sys, t, cfg.with_radius(r_use));
    count_components(out.snapshot, out.topology);
    out.topology.ladder = e.radii;
    out.topology.crossing_counts = e.counts;
    bool match = count % 2 == 0 && count / 2 == out.topology.chi_components;
    if (!match) {
        // One escalation: double the radius and recount both routes.
        r_use *= 2;
        const SphereCrossings sc = transversal_crossings(sys, t, r_use, cfg);
        r_use = sc.radius;
        count = static_cast<int>(sc.points.size());
        out.snapshot = enumerate_fiber(sys, t, cfg.with_radius(r_use));
        count_components(out.snapshot, out.topology);
        out.topology.ladder.push_back(r_use);
        out.topology.crossing_counts.push_back(count);
        match = !sc.tangential && count % 2 == 0 && count / 2 == out.topology.chi_components;
        if (!match && out.topology.issue.empty()) {
            out.topology.issue = "sphere count and component count disagree";
        }
    }
    out.topology.chi_sphere = count / 2;
    out.topology.stabilized = e.stabilized && match;
    return out;
}

FiberAnalysis analyze_exterior_fiber(const FiberSystem& sys, const Vec& t, double inner_radius,
                                     const TraceConfig& cfg)
{
    const double r_out = std::max(cfg.radius, 2.0 * inner_radius);
    const EulerEstimate e = extended_estimate(sys, t, cfg, r_out);
    const double r_use = e.radii[e.stable_from];
    const SphereCrossings inner = sphere_crossings(sys, t, inner_radius, cfg);
    const TraceConfig tcfg = cfg.with_radius(r_use);
    const FiberSnapshot full = enumerate_fiber(sys, t, tcfg);
    FiberAnalysis out;
    out.snapshot = restrict_to_exterior(full, inner_radius, sys, tcfg);
    out.snapshot.radius = r_use;
    count_components(out.snapshot, out.topology);
    out.topology.ladder = e.radii;
    out.topology.crossing_counts = e.counts;
    const int endpoints = static_cast<int>(inner.points.size()) + e.counts[e.stable_from];
    out.topology.chi_sphere = endpoints / 2;
    const bool match = endpoints % 2 == 0 && out.topology.chi_sphere == out.topology.chi_components;
    out.topology.stabilized = e.stabilized && match && !inner.tangential;
    if (inner.tangential) {
        out.topology.reliable = false;
        out.topology.issue = "fiber not transversal to the inner sphere";
    } else if (!match && out.topology.issue.empty()) {
        out.topology.issue = "sphere count and component count disagree";
    }
    return out;
}

}  // namespace bifurcurve
