#include "bifurcurve/scanner.hpp"

#include "bifurcurve/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace bifurcurve {

std::string to_string(Classification c)
{
    switch (c) {
    case Classification::Typical:
        return "typical";
    case Classification::BifurcationCandidate:
        return "bifurcation_candidate";
    case Classification::CriticalOrBoundary:
        return "critical_or_boundary";
    case Classification::Inconclusive:
        return "inconclusive";
    }
    return "inconclusive";
}

void ScanRegion::validate() const
{
    if (lo.empty() || lo.size() != hi.size() || lo.size() != grid.size()) {
        throw std::invalid_argument("region needs matching lo, hi and grid per axis");
    }
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!(std::isfinite(lo[i]) && std::isfinite(hi[i]) && lo[i] < hi[i])) {
            throw std::invalid_argument("region box is degenerate on axis " + std::to_string(i));
        }
        if (grid[i] < 3) {
            throw std::invalid_argument("grid needs at least 3 samples per axis");
        }
    }
    if (refine_depth < 0 || refine_depth > 12) {
        throw std::invalid_argument("refine_depth must lie in [0, 12]");
    }
}

namespace {

Tri combine(Tri a, Tri b)
{
    if (a == Tri::Fail || b == Tri::Fail) {
        return Tri::Fail;
    }
    if (a == Tri::Pass && b == Tri::Pass) {
        return Tri::Pass;
    }
    return Tri::Inconclusive;
}

RouteResult route(Tri a, Tri b)
{
    return {a, b, combine(a, b)};
}

bool usable(const FiberTopology& t)
{
    return t.reliable && t.stabilized;
}

// Compares a topological key of the base fiber with every approach sample.
template <typename Key>
Tri constancy(const ApproachData& data, Key key)
{
    const FiberTopology& base = data.base.topology;
    bool jump = false;
    bool unknown = !usable(base);
    for (const auto& ray : data.samples) {
        for (const auto& s : ray) {
            if (!usable(s.topology)) {
                unknown = true;
            } else if (usable(base) && key(s.topology) != key(base)) {
                jump = true;
            }
        }
    }
    if (jump) {
        return Tri::Fail;
    }
    return unknown ? Tri::Inconclusive : Tri::Pass;
}

ParityRoute parity_route(const FiberSystem& sys, const Vec& a, const AnalysisConfig& cfg,
                         const AsymptoticValueEstimate& s_c, const Vec& center, double parity_eps)
{
    ParityRoute out;
    out.in_s_c = s_c.contains(a[0]);
    if (!out.in_s_c) {
        out.verdict = Tri::Pass;
        out.reason = "a is not in the S_c estimate";
        return out;
    }
    const double eps = parity_radius(s_c, a[0], parity_eps);
    out.eps = eps;
    ApproachParams p = cfg.approach;
    p.eps = eps;
    const ApproachSpec spec = make_approach(a, p);
    const ParityResult pr = parity_test(sys.map(), a, center, spec, cfg, s_c);
    out.verdict = pr.verdict;
    out.reason = pr.reason;
    for (const auto& dir : pr.tracks) {
        for (const auto& tr : dir) {
            out.parities.push_back(tr.parity);
        }
    }
    return out;
}

}  // namespace

std::vector<double> sphere_tangency_values(const PolynomialMap& map, double radius, const TraceConfig& cfg)
{
    if (map.domain_dim() != 2 || map.codomain_dim() != 1) {
        throw DimensionError("tangency values need a map from the plane to the line");
    }
    const Polynomial m = milnor_polynomial(map, Vec(Vec::Zero(2)));
    if (m.is_zero()) {
        return {};
    }
    const FiberSystem sys(PolynomialMap({m}));
    const SphereCrossings sc = sphere_crossings(sys, Vec::Zero(1), radius, cfg);
    std::vector<double> out;
    for (const Vec& p : sc.points) {
        out.push_back(map.evaluate(p)[0]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Verdict classify_value(const FiberSystem& sys, const Vec& a, const AnalysisConfig& cfg, const ClassifyOptions& opts)
{
    const PolynomialMap& map = sys.map();
    if (static_cast<std::size_t>(a.size()) != map.codomain_dim()) {
        throw DimensionError("parameter dimension mismatch");
    }
    Verdict v;
    v.a = a;
    v.eps = cfg.approach.eps;
    const ApproachSpec spec = make_approach(a, cfg.approach);
    const ApproachData data = sample_approach(sys, spec, cfg);
    v.fibers = 1 + spec.directions.size() * spec.scales.size();
    v.topology = data.base.topology;

    const InfinityVerdict iv = diagnose_infinity(sys, data, cfg);
    v.nv = iv.nv;
    v.ns = iv.ns;
    v.sns = iv.sns;
    v.mu_series = iv.mu_series;
    v.witnesses = iv.witnesses;
    v.chi_constant = constancy(data, [](const FiberTopology& t) { return t.chi_components; });
    v.betti_constant = constancy(data, [](const FiberTopology& t) { return std::make_pair(t.b0, t.b1); });
    v.route_ab = route(v.chi_constant, v.nv);
    v.route_abprime = route(v.betti_constant, v.ns);
    v.route_cor = route(v.sns, v.nv);

    if (map.domain_dim() == 2 && !cfg.exterior_radius && opts.parity) {
        Vec center = opts.center.size() == 2 ? opts.center : Vec(Vec::Zero(2));
        if (opts.s_c) {
            v.route_parity = parity_route(sys, a, cfg, *opts.s_c, center, opts.parity_eps);
        } else {
            const CenterEstimate ce = estimate_s_c(map, center, cfg.trace, cfg.approach.seed);
            v.route_parity = parity_route(sys, a, cfg, ce.estimate, ce.milnor.center, opts.parity_eps);
        }
    }

    std::vector<Tri> routes{v.route_ab.combined, v.route_abprime.combined, v.route_cor.combined};
    if (v.route_parity) {
        routes.push_back(v.route_parity->verdict);
    }
    const bool any_pass = std::count(routes.begin(), routes.end(), Tri::Pass) > 0;
    const bool any_fail = std::count(routes.begin(), routes.end(), Tri::Fail) > 0;
    v.consistent = !(any_pass && any_fail);

    bool touches_inner_sphere = false;
    if (cfg.exterior_radius && map.domain_dim() == 2 && map.codomain_dim() == 1) {
        std::vector<double> own;
        const std::vector<double>* tangency = opts.tangency;
        if (!tangency) {
            own = sphere_tangency_values(map, *cfg.exterior_radius, cfg.trace);
            tangency = &own;
        }
        const double reach = cfg.approach.eps * (1.0 + 1e-9);
        for (double tau : *tangency) {
            touches_inner_sphere = touches_inner_sphere || std::abs(tau - a[0]) <= reach;
        }
    }

    bool tainted = data.base.snapshot.tainted;
    bool emptiness_changes = false;
    const bool base_empty = data.base.snapshot.components.empty();
    for (const auto& ray : data.samples) {
        for (const auto& s : ray) {
            tainted = tainted || s.snapshot.tainted;
            emptiness_changes = emptiness_changes || s.snapshot.components.empty() != base_empty;
        }
    }
    const bool sound_failure = v.chi_constant == Tri::Fail || v.betti_constant == Tri::Fail || v.nv == Tri::Fail ||
                               v.ns == Tri::Fail ||
                               (v.route_parity && v.route_parity->verdict == Tri::Fail);
    if (tainted) {
        v.classification = Classification::CriticalOrBoundary;
        v.reason = "Jacobian nearly singular on a traced fiber";
    } else if (touches_inner_sphere) {
        v.classification = Classification::CriticalOrBoundary;
        v.reason = "a fiber within the approach radius is tangent to the inner sphere";
    } else if (emptiness_changes && !cfg.exterior_radius) {
        v.classification = Classification::CriticalOrBoundary;
        v.reason = "fibers are empty on one side: a lies on the boundary of the image";
    } else if (sound_failure) {
        v.classification = Classification::BifurcationCandidate;
        v.reason = "observed failure of a necessary condition";
    } else if (any_pass && !any_fail) {
        v.classification = Classification::Typical;
        v.reason = "a route passes and none fails";
    } else {
        v.classification = Classification::Inconclusive;
        v.reason = "no route is conclusive";
    }
    return v;
}

Verdict classify_value(const PolynomialMap& map, const Vec& a, const AnalysisConfig& cfg, const ClassifyOptions& opts)
{
    return classify_value(FiberSystem(map, cfg.trace.rng_seed), a, cfg, opts);
}

namespace {

using Key = std::vector<long>;

std::vector<Cell> merge_cells(const std::set<Key>& cells, const ScanRegion& region, const std::vector<double>& h)
{
    // Merge consecutive cells along the last axis into disjoint boxes.
    std::vector<Cell> out;
    const std::size_t d = region.dim();
    auto it = cells.begin();
    while (it != cells.end()) {
        Key start = *it;
        Key last = *it;
        ++it;
        while (it != cells.end()) {
            Key expect = last;
            expect[d - 1] += 1;
            if (*it != expect) {
                break;
            }
            last = *it;
            ++it;
        }
        Cell c;
        c.lo.resize(static_cast<Eigen::Index>(d));
        c.hi.resize(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            c.lo[ii] = region.lo[i] + static_cast<double>(start[i]) * h[i];
            c.hi[ii] = region.lo[i] + static_cast<double>(last[i] + 1) * h[i];
            c.hi[ii] = std::min(c.hi[ii], region.hi[i]);
        }
        out.push_back(std::move(c));
    }
    return out;
}

}  // namespace

ScanReport scan(const PolynomialMap& map, const ScanRegion& region, const AnalysisConfig& cfg)
{
    region.validate();
    const std::size_t d = region.dim();
    if (d != map.codomain_dim()) {
        throw DimensionError("region dimension does not match the parameter space");
    }
    ScanReport report;
    report.region = region;
    report.exterior_radius = cfg.exterior_radius;
    const FiberSystem sys(map, cfg.trace.rng_seed);

    const int D = region.refine_depth;
    const long scale = 1L << D;
    std::vector<double> h(d);       // finest spacing
    std::vector<long> extent(d);    // largest finest index
    for (std::size_t i = 0; i < d; ++i) {
        h[i] = (region.hi[i] - region.lo[i]) / (region.grid[i] - 1) / static_cast<double>(scale);
        extent[i] = static_cast<long>(region.grid[i] - 1) * scale;
    }
    const double h_min = *std::min_element(h.begin(), h.end());
    auto point = [&](const Key& k) {
        Vec a(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            a[static_cast<Eigen::Index>(i)] =
                k[i] == extent[i] ? region.hi[i] : region.lo[i] + static_cast<double>(k[i]) * h[i];
        }
        return a;
    };

    ClassifyOptions opts;
    CenterEstimate ce;
    if (d == 1 && map.domain_dim() == 2 && !cfg.exterior_radius) {
        ce = estimate_s_c(map, Vec::Zero(2), cfg.trace, cfg.approach.seed);
        opts.s_c = &ce.estimate;
        opts.center = ce.milnor.center;
        report.s_c_values = ce.estimate.distinct();
    }

    std::vector<double> tangency;
    if (cfg.exterior_radius && map.domain_dim() == 2 && d == 1) {
        tangency = sphere_tangency_values(map, *cfg.exterior_radius, cfg.trace);
        opts.tangency = &tangency;
        report.tangency_values = tangency;
    }

    std::map<Key, Verdict> nodes;
    auto classify_batch = [&](const std::vector<Key>& keys, int level) {
        const double spacing = h_min * static_cast<double>(1L << (D - level));
        std::vector<Verdict> out(keys.size());
        parallel_for(keys.size(), cfg.jobs, [&](std::size_t i) {
            AnalysisConfig c = cfg;
            c.jobs = 1;
            c.approach.eps = 0.5 * spacing;
            out[i] = classify_value(sys, point(keys[i]), c, opts);
            out[i].level = level;
        });
        for (std::size_t i = 0; i < keys.size(); ++i) {
            nodes.emplace(keys[i], std::move(out[i]));
        }
        report.stats.nodes_per_level.push_back(keys.size());
    };

    std::vector<Key> level0;
    {
        Key k(d, 0);
        while (true) {
            level0.push_back(k);
            std::size_t i = 0;
            while (i < d) {
                k[i] += scale;
                if (k[i] <= extent[i]) {
                    break;
                }
                k[i] = 0;
                ++i;
            }
            if (i == d) {
                break;
            }
        }
        std::sort(level0.begin(), level0.end());
    }
    classify_batch(level0, 0);

    for (int level = 1; level <= D; ++level) {
        const long step = 1L << (D - level);
        std::set<Key> fresh;
        for (const auto& [k, v] : nodes) {
            if (v.classification == Classification::Typical) {
                continue;
            }
            std::vector<int> delta(d, -1);
            while (true) {
                bool zero = true;
                Key n = k;
                bool inside = true;
                for (std::size_t i = 0; i < d; ++i) {
                    zero = zero && delta[i] == 0;
                    n[i] += delta[i] * step;
                    inside = inside && n[i] >= 0 && n[i] <= extent[i];
                }
                if (!zero && inside && !nodes.count(n)) {
                    fresh.insert(n);
                }
                std::size_t i = 0;
                while (i < d && ++delta[i] > 1) {
                    delta[i] = -1;
                    ++i;
                }
                if (i == d) {
                    break;
                }
            }
        }
        if (fresh.empty()) {
            report.stats.nodes_per_level.push_back(0);
            continue;
        }
        classify_batch(std::vector<Key>(fresh.begin(), fresh.end()), level);
    }

    std::set<Key> candidate_cells;
    std::set<Key> critical_cells;
    for (const auto& [k, v] : nodes) {
        std::set<Key>* target = nullptr;
        if (v.classification == Classification::BifurcationCandidate) {
            target = &candidate_cells;
        } else if (v.classification == Classification::CriticalOrBoundary) {
            target = &critical_cells;
        }
        if (target) {
            // the 2^d finest cells with a corner at k
            for (unsigned mask = 0; mask < (1u << d); ++mask) {
                Key c = k;
                bool inside = true;
                for (std::size_t i = 0; i < d; ++i) {
                    c[i] -= (mask >> i) & 1u;
                    inside = inside && c[i] >= 0 && c[i] < extent[i];
                }
                if (inside) {
                    target->insert(c);
                }
            }
        }
        ScanStats& s = report.stats;
        ++s.nodes;
        s.fibers += v.fibers;
        switch (v.classification) {
        case Classification::Typical:
            ++s.typical;
            break;
        case Classification::BifurcationCandidate:
            ++s.candidates;
            break;
        case Classification::CriticalOrBoundary:
            ++s.critical;
            break;
        case Classification::Inconclusive:
            ++s.inconclusive;
            break;
        }
        if (!v.consistent) {
            ++s.inconsistent;
        }
        report.samples.push_back(v);
    }
    report.candidate_set = merge_cells(candidate_cells, region, h);
    report.excluded_critical = merge_cells(critical_cells, region, h);
    return report;
}

ScanReport exterior_scan(const PolynomialMap& map, const ScanRegion& region, double inner_radius,
                         const AnalysisConfig& cfg)
{
    if (!(inner_radius > 0) || !std::isfinite(inner_radius)) {
        throw std::invalid_argument("exterior radius must be positive");
    }
    AnalysisConfig c = cfg;
    c.exterior_radius = inner_radius;
    return scan(map, region, c);
}

}  // namespace bifurcurve
