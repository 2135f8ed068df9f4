#include "bifurcurve/milnor.hpp"

#include "bifurcurve/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace bifurcurve {

namespace {

void require_plane(const PolynomialMap& map)
{
    if (map.domain_dim() != 2) {
        throw DimensionError("Milnor-set tracing needs a plane map (n = 2)");
    }
}

// m_c divided by (1 + |x|^2)^((d-1)/2) so that far residuals are relative.
PolynomialMap weighted_milnor_map(const Polynomial& m)
{
    const unsigned d = m.total_degree();
    return PolynomialMap({m}).weighted(d > 1 ? static_cast<double>(d - 1) : 0.0);
}

double norm_ratio(double a, double b)
{
    return std::abs(b) / std::max(std::abs(a), std::numeric_limits<double>::min());
}

double aitken(double v0, double v1, double v2)
{
    const double d1 = v1 - v0;
    const double d2 = v2 - v1;
    const double den = d2 - d1;
    if (std::abs(den) <= 1e-15 * (std::abs(d1) + std::abs(d2)) || den == 0.0) {
        return v2;
    }
    return v2 - d2 * d2 / den;
}

}  // namespace

std::vector<double> AsymptoticValueEstimate::distinct(double tol) const
{
    std::vector<double> v;
    for (const auto& a : values) {
        v.push_back(a.t0);
    }
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    std::size_t i = 0;
    while (i < v.size()) {
        std::size_t j = i + 1;
        double sum = v[i];
        while (j < v.size() && v[j] - v[j - 1] <= tol) {
            sum += v[j];
            ++j;
        }
        out.push_back(sum / static_cast<double>(j - i));
        i = j;
    }
    return out;
}

bool AsymptoticValueEstimate::contains(double a, double tol) const
{
    for (const auto& v : values) {
        if (std::abs(v.t0 - a) <= tol) {
            return true;
        }
    }
    return false;
}

std::vector<double> milnor_ladder(double r0)
{
    return {r0, 2 * r0, 4 * r0, 8 * r0, 16 * r0};
}

MilnorSet trace_milnor_set(const PolynomialMap& map, const Vec& center, const TraceConfig& cfg)
{
    require_plane(map);
    if (center.size() != 2) {
        throw DimensionError("centre must lie in the plane");
    }
    MilnorSet ms;
    ms.center = center;
    ms.radius = cfg.radius;
    ms.determinant = milnor_polynomial(map, center);
    if (ms.determinant.is_zero()) {
        ms.degenerate = true;
        ms.issue = "m_c vanishes identically";
        return ms;
    }
    if (ms.determinant.is_constant()) {
        return ms;
    }
    const PolynomialMap mmap = weighted_milnor_map(ms.determinant);
    const FiberSystem msys(mmap, cfg.rng_seed);
    const TraceConfig rc = cfg.resolved();
    FiberSnapshot snap = enumerate_fiber(msys, Vec::Zero(1), rc);
    ms.branches = std::move(snap.components);

    if (ms.branches.empty() && snap.seed_audit.rejected > 0) {
        ms.degenerate = true;
        ms.issue = "gradient of m_c vanishes on its zero set";
        return ms;
    }
    for (std::size_t b = 0; b < ms.branches.size(); ++b) {
        const auto& pts = ms.branches[b].points;
        const std::size_t stride = std::max<std::size_t>(1, pts.size() / 64);
        std::size_t sampled = 0;
        std::size_t flat = 0;
        for (std::size_t i = 0; i < pts.size(); i += stride) {
            ++sampled;
            if (mmap.jacobian(pts[i]).norm() < rc.singular_tol) {
                ++flat;
            }
        }
        if (2 * flat > sampled) {
            ms.degenerate = true;
            ms.issue = "gradient of m_c vanishes along branch " + std::to_string(b);
            return ms;
        }
    }
    return ms;
}

AsymptoticValueEstimate estimate_asymptotic_values(const PolynomialMap& map, const MilnorSet& milnor,
                                                   const std::vector<double>& ladder, const TraceConfig& cfg)
{
    require_plane(map);
    if (milnor.degenerate) {
        throw std::invalid_argument("Milnor set is degenerate: " + milnor.issue);
    }
    if (ladder.size() < 4 || !std::is_sorted(ladder.begin(), ladder.end())) {
        throw std::invalid_argument("ladder needs at least four increasing radii");
    }
    AsymptoticValueEstimate est;
    est.center = milnor.center;
    est.radii_used = ladder;
    if (milnor.branches.empty()) {
        return est;
    }
    const PolynomialMap mmap = weighted_milnor_map(milnor.determinant);
    const TraceConfig rc = cfg.resolved();
    const double r_outer = milnor.radius;

    for (std::size_t b = 0; b < milnor.branches.size(); ++b) {
        const FiberComponent& br = milnor.branches[b];
        if (br.closed || br.points.size() < 2) {
            continue;
        }
        for (int end = 0; end < 2; ++end) {
            std::vector<Vec> walk = br.points;
            if (end == 1) {
                std::reverse(walk.begin(), walk.end());
            }
            if (walk.front().norm() < r_outer * (1 - 1e-6)) {
                continue;  // this end stops inside the ball
            }
            // Outermost crossing of each ladder radius, walking inward.
            std::vector<double> vals;
            std::size_t j = 0;
            for (auto it = ladder.rbegin(); it != ladder.rend(); ++it) {
                const double r = *it;
                if (r > r_outer * (1 + 1e-9)) {
                    continue;
                }
                while (j + 1 < walk.size() && walk[j + 1].norm() >= r) {
                    ++j;
                }
                if (j + 1 >= walk.size()) {
                    break;
                }
                const double n0 = walk[j].norm();
                const double n1 = walk[j + 1].norm();
                const double s = n0 > n1 ? (n0 - r) / (n0 - n1) : 0.0;
                Vec p = walk[j] + s * (walk[j + 1] - walk[j]);
                const SquareSystem ring = [&](const Vec& x, Vec& f, Mat& J) {
                    f.resize(2);
                    J.resize(2, 2);
                    f[0] = mmap.evaluate(x)[0];
                    f[1] = (x.squaredNorm() - r * r) / (2 * r);
                    J.row(0) = mmap.jacobian(x).row(0);
                    J.row(1) = x.transpose() / r;
                };
                const NewtonResult nr =
                    newton_square(ring, p, rc.newton_tol, rc.newton_max_iter, (walk[j + 1] - walk[j]).norm());
                if (nr.converged) {
                    p = nr.x;
                }
                vals.push_back(map.evaluate(p)[0]);
                ++j;
            }
            std::reverse(vals.begin(), vals.end());  // radius increasing
            if (vals.size() < 4) {
                est.flagged.push_back({static_cast<int>(b), end, "too_short"});
                continue;
            }
            const std::size_t m = vals.size();
            std::vector<double> d;
            for (std::size_t i = 0; i + 1 < m; ++i) {
                d.push_back(vals[i + 1] - vals[i]);
            }
            const double scale = 1.0 + std::abs(vals.back());
            auto tiny = [&](double x) { return std::abs(x) <= 1e-12 * scale; };
            // The last three differences must each shrink by the contraction
            // factor; the slack below 2 absorbs higher-order terms.
            constexpr double factor = 1.9;
            bool converging = true;
            bool alternating = true;
            for (std::size_t i = d.size() - 3; i + 1 < d.size(); ++i) {
                const bool ok = tiny(d[i + 1]) || norm_ratio(d[i], d[i + 1]) * factor <= 1.0;
                converging = converging && ok;
                alternating = alternating && d[i] * d[i + 1] < 0;
            }
            if (!converging) {
                if (alternating && norm_ratio(d[d.size() - 2], d[d.size() - 1]) >= 0.5) {
                    est.flagged.push_back({static_cast<int>(b), end, "oscillating"});
                }
                continue;
            }
            AsymptoticValue v;
            v.branch = static_cast<int>(b);
            v.end = end;
            v.tail.assign(vals.end() - 3, vals.end());
            v.t0 = aitken(vals[m - 3], vals[m - 2], vals[m - 1]);
            const double prev = aitken(vals[m - 4], vals[m - 3], vals[m - 2]);
            v.confidence = std::max(std::abs(v.t0 - vals.back()), std::abs(v.t0 - prev));
            est.values.push_back(std::move(v));
        }
    }
    return est;
}

std::vector<Vec> default_centers(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<Vec> out{Vec::Zero(2)};
    for (int k = 0; k < 4; ++k) {
        Vec c(2);
        c[0] = u(rng);
        c[1] = u(rng);
        out.push_back(c);
    }
    return out;
}

CenterEstimate estimate_s_c(const PolynomialMap& map, const Vec& center, const TraceConfig& cfg, std::uint64_t seed)
{
    require_plane(map);
    const std::vector<double> ladder = milnor_ladder(cfg.radius);
    const TraceConfig mcfg = cfg.with_radius(ladder.back());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    CenterEstimate out;
    Vec c = center;
    for (int attempt = 0; attempt < 8; ++attempt) {
        out.milnor = trace_milnor_set(map, c, mcfg);
        out.retries = attempt;
        if (!out.milnor.degenerate) {
            out.estimate = estimate_asymptotic_values(map, out.milnor, ladder, mcfg);
            return out;
        }
        c = center;
        c[0] += u(rng);
        c[1] += u(rng);
    }
    throw std::runtime_error("no non-degenerate Milnor centre found near the requested one: " + out.milnor.issue);
}

SInfinityEstimate estimate_s_infinity(const PolynomialMap& map, const std::vector<Vec>& centers,
                                      const TraceConfig& cfg)
{
    require_plane(map);
    if (centers.empty()) {
        throw std::invalid_argument("at least one centre is required");
    }
    const std::vector<double> ladder = milnor_ladder(cfg.radius);
    const TraceConfig mcfg = cfg.with_radius(ladder.back());
    SInfinityEstimate out;
    std::vector<std::vector<double>> per_center;
    for (const Vec& c : centers) {
        const MilnorSet ms = trace_milnor_set(map, c, mcfg);
        if (ms.degenerate) {
            out.centers_dropped.push_back(c);
            continue;
        }
        out.centers_used.push_back(c);
        per_center.push_back(estimate_asymptotic_values(map, ms, ladder, mcfg).distinct());
    }
    if (per_center.empty()) {
        throw std::runtime_error("every centre gave a degenerate Milnor set");
    }
    for (double v : per_center.front()) {
        bool everywhere = true;
        for (std::size_t k = 1; k < per_center.size() && everywhere; ++k) {
            everywhere = std::any_of(per_center[k].begin(), per_center[k].end(),
                                     [&](double w) { return std::abs(w - v) <= 1e-2; });
        }
        if (everywhere) {
            out.values.push_back(v);
        }
    }
    return out;
}

namespace {

struct CrossingCount {
    int count = 0;
    bool tangential = false;
    double max_norm = 0.0;
};

// Sign changes of m_c along a fiber polyline, each refined on {F = t, m_c = 0}.
// Only crossings outside inner_radius are counted.
CrossingCount count_crossings(const PolynomialMap& map, const PolynomialMap& mmap, const Polynomial& m,
                              const FiberComponent& comp, double inner_radius, const TraceConfig& cfg)
{
    CrossingCount out;
    const auto& pts = comp.points;
    const std::size_t n = pts.size();
    if (n < 2) {
        return out;
    }
    const std::size_t segs = comp.closed ? n : n - 1;
    std::vector<double> val(n);
    for (std::size_t i = 0; i < n; ++i) {
        val[i] = m.evaluate(pts[i]);
    }
    const Vec t = comp.t;
    for (std::size_t i = 0; i < segs; ++i) {
        const std::size_t k = (i + 1) % n;
        const bool pos_i = val[i] >= 0;
        const bool pos_k = val[k] >= 0;
        if (pos_i == pos_k) {
            continue;
        }
        const double s = val[i] / (val[i] - val[k]);
        Vec z = pts[i] + s * (pts[k] - pts[i]);
        const SquareSystem sys = [&](const Vec& x, Vec& f, Mat& J) {
            f.resize(2);
            J.resize(2, 2);
            f[0] = map.evaluate(x)[0] - t[0];
            f[1] = mmap.evaluate(x)[0];
            J.row(0) = map.jacobian(x).row(0);
            J.row(1) = mmap.jacobian(x).row(0);
        };
        const NewtonResult nr = newton_square(sys, z, cfg.newton_tol, 12, (pts[k] - pts[i]).norm());
        if (nr.converged && (nr.x - z).norm() <= (pts[k] - pts[i]).norm()) {
            z = nr.x;
        }
        out.max_norm = std::max(out.max_norm, z.norm());
        if (z.norm() <= inner_radius) {
            continue;
        }
        ++out.count;
        const Vec tf = null_direction(map.jacobian(z));
        Vec gm(2);
        gm[0] = m.derivative(0).evaluate(z);
        gm[1] = m.derivative(1).evaluate(z);
        const double g = gm.norm();
        if (g > 0 && std::abs(tf.dot(gm)) / g < cfg.tangency_angle) {
            out.tangential = true;
        }
    }
    return out;
}

}  // namespace

ParityResult parity_test(const PolynomialMap& map, const Vec& a, const Vec& center, const ApproachSpec& approach,
                         const AnalysisConfig& cfg, const AsymptoticValueEstimate& s_c)
{
    require_plane(map);
    approach.validate();
    ParityResult out;
    out.a = a;
    out.center = center;
    out.s_c_values = s_c.distinct();
    out.in_s_c = s_c.contains(a[0]);

    const Polynomial m = milnor_polynomial(map, center);
    if (m.is_zero()) {
        out.reason = "m_c vanishes identically";
        return out;
    }
    const PolynomialMap mmap = weighted_milnor_map(m);
    out.trace_radius = 20.0 * cfg.trace.radius;
    const TraceConfig pcfg = cfg.trace.with_radius(out.trace_radius).resolved();
    const FiberSystem sys(map, pcfg.rng_seed);

    const FiberSnapshot base = enumerate_fiber(sys, a, pcfg);
    double persist = 0.0;
    for (const auto& c : base.components) {
        persist = std::max(persist, count_crossings(map, mmap, m, c, 0.0, pcfg).max_norm);
    }
    out.inner_radius = std::max(1.0, 1.5 * persist);

    const std::size_t D = approach.directions.size();
    const std::size_t K = approach.scales.size();
    std::vector<std::vector<FiberAnalysis>> rays(D, std::vector<FiberAnalysis>(K));
    parallel_for(D * K, cfg.jobs, [&](std::size_t i) {
        const std::size_t d = i / K;
        const std::size_t k = i % K;
        rays[d][k].snapshot = enumerate_fiber(sys, approach.point(d, k), pcfg);
    });

    out.tracks.resize(D);
    bool all_stable = true;
    bool odd = false;
    bool unreliable = base.tainted;
    for (std::size_t d = 0; d < D; ++d) {
        for (const auto& r : rays[d]) {
            unreliable = unreliable || r.snapshot.tainted;
        }
        const auto ids = build_tracks(sys, rays[d], pcfg);
        for (const auto& track_ids : ids) {
            ParityTrack tr;
            tr.ids = track_ids;
            tr.counts.assign(K, -1);
            for (std::size_t k = 0; k < K; ++k) {
                if (track_ids[k] < 0) {
                    continue;
                }
                const auto& comp = rays[d][k].snapshot.components[static_cast<std::size_t>(track_ids[k])];
                const CrossingCount cc = count_crossings(map, mmap, m, comp, out.inner_radius, pcfg);
                if (!cc.tangential) {
                    tr.counts[k] = cc.count;
                }
            }
            if (K >= 3) {
                const int c0 = tr.counts[K - 3];
                const int c1 = tr.counts[K - 2];
                const int c2 = tr.counts[K - 1];
                tr.stabilized = c0 >= 0 && c1 >= 0 && c2 >= 0 && c0 % 2 == c1 % 2 && c1 % 2 == c2 % 2;
            }
            if (tr.stabilized) {
                tr.parity = tr.counts[K - 1] % 2;
                odd = odd || tr.parity == 1;
            } else {
                all_stable = false;
            }
            out.tracks[d].push_back(std::move(tr));
        }
    }

    if (!out.in_s_c) {
        out.verdict = Tri::Pass;
        out.reason = "a is not in the S_c estimate";
    } else if (unreliable) {
        out.verdict = Tri::Inconclusive;
        out.reason = "near-singular Jacobian on a sampled fiber (a may be a critical value)";
    } else if (odd) {
        out.verdict = Tri::Fail;
        out.reason = "a component track has odd escaping parity";
    } else if (all_stable) {
        out.verdict = Tri::Pass;
        out.reason = "every component track has even escaping parity";
    } else {
        out.verdict = Tri::Inconclusive;
        out.reason = "parity not stabilized over the last three scales";
    }
    return out;
}

ParityResult parity_test(const PolynomialMap& map, const Vec& a, const Vec& center, const ApproachSpec& approach,
                         const AnalysisConfig& cfg)
{
    const CenterEstimate ce = estimate_s_c(map, center, cfg.trace, cfg.approach.seed);
    return parity_test(map, a, ce.milnor.center, approach, cfg, ce.estimate);
}

double parity_radius(const AsymptoticValueEstimate& s_c, double a, double eps)
{
    for (double v : s_c.distinct()) {
        const double gap = std::abs(v - a);
        if (gap > 1e-2) {
            eps = std::min(eps, 0.5 * gap);
        }
    }
    return eps;
}

}  // namespace bifurcurve
