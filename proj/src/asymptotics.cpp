#include "bifurcurve/asymptotics.hpp"

#include "bifurcurve/locator.hpp"
#include "bifurcurve/parallel.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace bifurcurve {

std::string to_string(Tri v)
{
    switch (v) {
    case Tri::Pass:
        return "pass";
    case Tri::Fail:
        return "fail";
    default:
        return "inconclusive";
    }
}

void ApproachSpec::validate() const
{
    if (scales.empty() || directions.empty()) {
        throw std::invalid_argument("approach needs at least one direction and one scale");
    }
    for (std::size_t k = 0; k < scales.size(); ++k) {
        if (!(scales[k] > 0) || (k > 0 && !(scales[k] < scales[k - 1]))) {
            throw std::invalid_argument("approach scales must be positive and strictly decreasing");
        }
    }
    for (const auto& d : directions) {
        if (d.size() != target.size() || std::abs(d.norm() - 1.0) > 1e-12) {
            throw std::invalid_argument("approach directions must be unit vectors of the parameter dimension");
        }
    }
}

ApproachSpec make_approach(const Vec& target, const ApproachParams& p)
{
    if (!(p.eps > 0) || !(p.ratio > 0 && p.ratio < 1) || p.levels < 1 || p.random_directions < 0) {
        throw std::invalid_argument("approach needs eps > 0, 0 < ratio < 1, levels >= 1");
    }
    ApproachSpec s;
    s.target = target;
    const Eigen::Index m = target.size();
    auto add = [&](const Vec& d) {
        for (const auto& e : s.directions) {
            if ((e - d).norm() < 1e-6) {
                return;
            }
        }
        s.directions.push_back(d);
    };
    for (Eigen::Index i = 0; i < m; ++i) {
        add(Vec::Unit(m, i));
        add(-Vec::Unit(m, i));
    }
    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> g;
    for (int k = 0; k < p.random_directions; ++k) {
        Vec d(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            d[i] = g(rng);
        }
        add(d / d.norm());
    }
    double scale = p.eps;
    for (int k = 0; k < p.levels; ++k) {
        s.scales.push_back(scale);
        scale *= p.ratio;
    }
    s.validate();
    return s;
}

FiberAnalysis analyze(const FiberSystem& sys, const Vec& t, const AnalysisConfig& cfg)
{
    if (cfg.exterior_radius) {
        return analyze_exterior_fiber(sys, t, *cfg.exterior_radius, cfg.trace);
    }
    return analyze_fiber(sys, t, cfg.trace);
}

ApproachData sample_approach(const FiberSystem& sys, const ApproachSpec& spec, const AnalysisConfig& cfg)
{
    spec.validate();
    ApproachData data;
    data.spec = spec;
    const std::size_t D = spec.directions.size();
    const std::size_t K = spec.scales.size();
    std::vector<FiberAnalysis> slots(1 + D * K);
    parallel_for(slots.size(), cfg.jobs, [&](std::size_t i) {
        const Vec t = i == 0 ? spec.target : spec.point((i - 1) / K, (i - 1) % K);
        slots[i] = analyze(sys, t, cfg);
    });
    data.base = std::move(slots[0]);
    data.samples.resize(D);
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t k = 0; k < K; ++k) {
            data.samples[d].push_back(std::move(slots[1 + d * K + k]));
        }
    }
    return data;
}

Vec anchor_point(const FiberComponent& c)
{
    if (!c.min_norm_at_boundary && c.min_norm_point.size() > 0) {
        return c.min_norm_point;
    }
    if (c.points.empty()) {
        return c.min_norm_point;
    }
    double total = 0.0;
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        total += (c.points[i] - c.points[i - 1]).norm();
    }
    double acc = 0.0;
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        acc += (c.points[i] - c.points[i - 1]).norm();
        if (acc >= 0.5 * total) {
            return c.points[i];
        }
    }
    return c.points.back();
}

namespace {

ComponentLocator make_locator(const FiberSnapshot& snap, double tol)
{
    ComponentLocator loc(std::max(snap.radius, 1e-12), tol);
    for (std::size_t i = 0; i < snap.components.size(); ++i) {
        loc.add(snap.components[i].points, static_cast<int>(i));
    }
    return loc;
}

double snapshot_tol(const FiberSnapshot& snap, const TraceConfig& cfg)
{
    return cfg.with_radius(snap.radius).member_tol();
}

}  // namespace

ComponentMatching match_components(const FiberSystem& sys, const FiberSnapshot& base, const FiberSnapshot& other,
                                   const TraceConfig& cfg_in)
{
    const TraceConfig cfg = cfg_in.with_radius(base.radius).resolved();
    const PolynomialMap& map = sys.map();
    ComponentMatching m;
    m.base_t = base.t;
    m.other_t = other.t;
    const double tol = snapshot_tol(other, cfg_in);
    const ComponentLocator loc = make_locator(other, tol);
    std::vector<int> hits(other.components.size(), 0);
    const Eigen::Index r = static_cast<Eigen::Index>(map.codomain_dim());
    for (std::size_t j = 0; j < base.components.size(); ++j) {
        const Vec z = anchor_point(base.components[j]);
        const Vec T = null_direction(map.jacobian(z));
        const SquareSystem slice = [&](const Vec& x, Vec& f, Mat& J) {
            f.resize(r + 1);
            J.resize(r + 1, x.size());
            f.head(r) = map.evaluate(x) - other.t;
            f[r] = T.dot(x - z);
            J.topRows(r) = map.jacobian(x);
            J.row(r) = T.transpose();
        };
        const NewtonResult nr = newton_square(slice, z, cfg.newton_tol, cfg.newton_max_iter, cfg.step_max);
        int id = -1;
        if (nr.converged && nr.x.norm() <= other.radius) {
            id = loc.locate(nr.x);
        }
        m.assignment.push_back(id);
        if (id < 0) {
            m.unmatched_base.push_back(static_cast<int>(j));
        } else {
            ++hits[static_cast<std::size_t>(id)];
        }
    }
    bool injective = true;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (hits[i] == 0) {
            m.unmatched_other.push_back(static_cast<int>(i));
        }
        injective = injective && hits[i] <= 1;
    }
    m.is_bijection = m.unmatched_base.empty() && m.unmatched_other.empty() && injective;
    return m;
}

ComponentMatching match_components(const FiberSystem& sys, const FiberSnapshot& base, const Vec& b,
                                   const TraceConfig& cfg)
{
    const FiberSnapshot other = enumerate_fiber(sys, b, cfg.with_radius(base.radius));
    return match_components(sys, base, other, cfg);
}

LimitSetEstimate limit_set(const FiberSystem& sys, const FiberSnapshot& base, const FiberComponent& tracked,
                           double scale, const TraceConfig& cfg_in)
{
    const TraceConfig cfg = cfg_in.with_radius(base.radius).resolved();
    const PolynomialMap& map = sys.map();
    LimitSetEstimate out;
    const double tol = snapshot_tol(base, cfg_in);
    const ComponentLocator loc = make_locator(base, tol);
    const std::size_t n = tracked.points.size();
    const std::size_t samples = std::min<std::size_t>(200, n);
    const double reach = std::sqrt(scale);
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t i = samples == 1 ? 0 : s * (n - 1) / (samples - 1);
        const Vec& p = tracked.points[i];
        const NewtonResult nr = project_to_fiber(map, base.t, p, cfg.newton_tol, cfg.newton_max_iter, reach);
        if (!nr.converged || (nr.x - p).norm() > reach || nr.x.norm() > base.radius) {
            continue;
        }
        int first = -1;
        int count = 0;
        for (std::size_t c = 0; c < base.components.size(); ++c) {
            if (loc.distance_to(static_cast<int>(c), nr.x) <= tol) {
                if (first < 0) {
                    first = static_cast<int>(c);
                }
                ++count;
            }
        }
        if (count > 1) {
            out.ambiguous = true;
        }
        if (first >= 0) {
            out.receiving_base_components.insert(first);
        }
    }
    out.empty = out.receiving_base_components.empty();
    return out;
}

std::vector<std::vector<int>> build_tracks(const FiberSystem& sys, const std::vector<FiberAnalysis>& ray,
                                           const TraceConfig& cfg)
{
    const std::size_t K = ray.size();
    std::vector<std::vector<int>> tracks;
    if (K == 0) {
        return tracks;
    }
    std::vector<ComponentMatching> up(K);
    for (std::size_t k = 0; k + 1 < K; ++k) {
        up[k + 1] = match_components(sys, ray[k + 1].snapshot, ray[k].snapshot, cfg);
    }
    for (std::size_t j = 0; j < ray[K - 1].snapshot.components.size(); ++j) {
        std::vector<int> track(K, -1);
        int id = static_cast<int>(j);
        track[K - 1] = id;
        for (std::size_t k = K - 1; k > 0 && id >= 0; --k) {
            id = up[k].assignment[static_cast<std::size_t>(id)];
            track[k - 1] = id;
        }
        tracks.push_back(std::move(track));
    }
    return tracks;
}

namespace {

bool ray_reliable(const std::vector<FiberAnalysis>& ray)
{
    for (const auto& a : ray) {
        if (!a.topology.reliable) {
            return false;
        }
    }
    return true;
}

bool all_reliable(const ApproachData& data)
{
    if (!data.base.topology.reliable) {
        return false;
    }
    for (const auto& ray : data.samples) {
        if (!ray_reliable(ray)) {
            return false;
        }
    }
    return true;
}

Witness make_witness(const ApproachData& data, std::string kind, std::size_t d, std::size_t k, int comp)
{
    Witness w;
    w.kind = std::move(kind);
    w.direction = static_cast<int>(d);
    w.direction_vector = data.spec.directions[d];
    w.scale = data.spec.scales[k];
    w.component = comp;
    return w;
}

}  // namespace

VanishingResult detect_vanishing(const ApproachData& data, const AnalysisConfig& cfg)
{
    VanishingResult out;
    // Exterior fibers are measured from the inner sphere.
    const double inner = cfg.exterior_radius.value_or(0.0);
    const double R = (cfg.exterior_radius ? std::max(cfg.trace.radius, 2.0 * inner) : cfg.trace.radius) - inner;
    const std::size_t K = data.spec.scales.size();
    bool bounded = true;
    for (std::size_t d = 0; d < data.samples.size(); ++d) {
        std::vector<double> series;
        for (const auto& a : data.samples[d]) {
            series.push_back(a.topology.mu);
        }
        out.mu_series.push_back(series);
        for (double mu : series) {
            if (std::isfinite(mu) && mu - inner > cfg.nv_pass_fraction * R) {
                bounded = false;
            }
        }
        if (K < 4 || !ray_reliable(data.samples[d])) {
            continue;
        }
        const double last = series[K - 1];
        bool growing = std::isfinite(last) && last - inner > 0.5 * R;
        for (std::size_t k = K - 3; k < K && growing; ++k) {
            growing = std::isfinite(series[k - 1]) && series[k] > series[k - 1] * (1.0 + 1e-6);
        }
        if (growing) {
            Witness w = make_witness(data, "vanishing", d, K - 1, -1);
            w.detail = "mu increases over the last 4 scales and exceeds R/2";
            out.witnesses.push_back(std::move(w));
            out.verdict = Tri::Fail;
        }
    }
    if (out.verdict == Tri::Fail) {
        return out;
    }
    if (!all_reliable(data)) {
        Witness w;
        w.kind = "tainted";
        w.detail = "unreliable fiber at some sample";
        out.witnesses.push_back(std::move(w));
        out.verdict = Tri::Inconclusive;
        return out;
    }
    out.verdict = bounded ? Tri::Pass : Tri::Inconclusive;
    return out;
}

SplittingResult detect_splitting(const FiberSystem& sys, const ApproachData& data, const AnalysisConfig& cfg)
{
    SplittingResult out;
    bool ambiguous = false;
    bool bijective = true;
    const FiberSnapshot& base = data.base.snapshot;
    for (std::size_t d = 0; d < data.samples.size(); ++d) {
        for (std::size_t k = 0; k < data.samples[d].size(); ++k) {
            const FiberSnapshot& snap = data.samples[d][k].snapshot;
            const double scale = data.spec.scales[k];
            for (std::size_t c = 0; c < snap.components.size(); ++c) {
                const LimitSetEstimate L = limit_set(sys, base, snap.components[c], scale, cfg.trace);
                ambiguous = ambiguous || L.ambiguous;
                if (L.receiving_base_components.size() >= 2 && !L.ambiguous) {
                    Witness w = make_witness(data, "splitting", d, k, static_cast<int>(c));
                    w.receiving.assign(L.receiving_base_components.begin(), L.receiving_base_components.end());
                    w.detail = "limit set meets " + std::to_string(w.receiving.size()) + " base components";
                    out.witnesses.push_back(std::move(w));
                    out.verdict = Tri::Fail;
                }
            }
            const ComponentMatching m = match_components(sys, base, snap, cfg.trace);
            if (!m.is_bijection) {
                bijective = false;
                if (out.verdict != Tri::Fail) {
                    Witness w = make_witness(data, "non_bijective", d, k, -1);
                    w.detail = std::to_string(m.unmatched_base.size()) + " unmatched base, " +
                               std::to_string(m.unmatched_other.size()) + " unmatched nearby";
                    out.witnesses.push_back(std::move(w));
                }
            }
        }
    }
    if (out.verdict == Tri::Fail) {
        std::erase_if(out.witnesses, [](const Witness& w) { return w.kind != "splitting"; });
        return out;
    }
    out.verdict = (bijective && !ambiguous && all_reliable(data)) ? Tri::Pass : Tri::Inconclusive;
    return out;
}

SplittingResult detect_strong_splitting(const FiberSystem& sys, const ApproachData& data, const AnalysisConfig& cfg,
                                        const SplittingResult& ns)
{
    SplittingResult out;
    if (ns.verdict == Tri::Fail) {
        out.verdict = Tri::Fail;
        return out;
    }
    const double R = cfg.trace.radius;
    const FiberSnapshot& base = data.base.snapshot;
    for (std::size_t d = 0; d < data.samples.size(); ++d) {
        const auto& ray = data.samples[d];
        const std::size_t K = ray.size();
        const auto tracks = build_tracks(sys, ray, cfg.trace);
        for (const auto& track : tracks) {
            const int j = track[K - 1];
            const FiberComponent& c = ray[K - 1].snapshot.components[static_cast<std::size_t>(j)];
            if (c.kind != ComponentKind::Circle) {
                continue;
            }
            const LimitSetEstimate L = limit_set(sys, base, c, data.spec.scales[K - 1], cfg.trace);
            for (int id : L.receiving_base_components) {
                if (base.components[static_cast<std::size_t>(id)].kind == ComponentKind::Arc) {
                    Witness w = make_witness(data, "circle_breaking", d, K - 1, j);
                    w.receiving.assign(L.receiving_base_components.begin(), L.receiving_base_components.end());
                    w.detail = "compact component limits onto a line";
                    out.witnesses.push_back(std::move(w));
                    out.verdict = Tri::Fail;
                    break;
                }
            }
            if (K >= 3 && track[K - 3] >= 0 && track[K - 2] >= 0) {
                const double d1 = ray[K - 3].snapshot.components[static_cast<std::size_t>(track[K - 3])].diameter();
                const double d2 = ray[K - 2].snapshot.components[static_cast<std::size_t>(track[K - 2])].diameter();
                const double d3 = c.diameter();
                if (d2 > 2 * d1 && d3 > 2 * d2 && d3 > 0.5 * R) {
                    Witness w = make_witness(data, "circle_escape", d, K - 1, j);
                    w.detail = "compact component diameter more than doubles per scale";
                    out.witnesses.push_back(std::move(w));
                    out.verdict = Tri::Fail;
                }
            }
        }
    }
    if (out.verdict != Tri::Fail) {
        out.verdict = ns.verdict;
    }
    return out;
}

InfinityVerdict diagnose_infinity(const FiberSystem& sys, const ApproachData& data, const AnalysisConfig& cfg)
{
    InfinityVerdict v;
    VanishingResult nv = detect_vanishing(data, cfg);
    if (nv.verdict == Tri::Inconclusive && all_reliable(data)) {
        AnalysisConfig wide = cfg;
        wide.trace.radius *= 2;
        const ApproachData again = sample_approach(sys, data.spec, wide);
        nv = detect_vanishing(again, wide);
    }
    const SplittingResult ns = detect_splitting(sys, data, cfg);
    const SplittingResult sns = detect_strong_splitting(sys, data, cfg, ns);
    v.nv = nv.verdict;
    v.ns = ns.verdict;
    v.sns = sns.verdict;
    v.mu_series = std::move(nv.mu_series);
    v.witnesses = nv.witnesses;
    v.witnesses.insert(v.witnesses.end(), ns.witnesses.begin(), ns.witnesses.end());
    v.witnesses.insert(v.witnesses.end(), sns.witnesses.begin(), sns.witnesses.end());
    return v;
}

VanishingResult detect_vanishing(const FiberSystem& sys, const Vec& a, const ApproachSpec& spec,
                                 const AnalysisConfig& cfg)
{
    ApproachSpec s = spec;
    s.target = a;
    VanishingResult r = detect_vanishing(sample_approach(sys, s, cfg), cfg);
    if (r.verdict == Tri::Inconclusive) {
        AnalysisConfig wide = cfg;
        wide.trace.radius *= 2;
        const ApproachData data = sample_approach(sys, s, wide);
        if (all_reliable(data)) {
            r = detect_vanishing(data, wide);
        }
    }
    return r;
}

SplittingResult detect_splitting(const FiberSystem& sys, const Vec& a, const ApproachSpec& spec,
                                 const AnalysisConfig& cfg)
{
    ApproachSpec s = spec;
    s.target = a;
    return detect_splitting(sys, sample_approach(sys, s, cfg), cfg);
}

Tri detect_strong_splitting(const FiberSystem& sys, const Vec& a, const ApproachSpec& spec, const AnalysisConfig& cfg)
{
    ApproachSpec s = spec;
    s.target = a;
    const ApproachData data = sample_approach(sys, s, cfg);
    return detect_strong_splitting(sys, data, cfg, detect_splitting(sys, data, cfg)).verdict;
}

}  // namespace bifurcurve
