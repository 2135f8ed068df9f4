#include "bifurcurve/tracer.hpp"

#include "bifurcurve/univariate.hpp"
#include "bifurcurve/locator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bifurcurve {

// ---------------------------------------------------------------------------
// TraceConfig
// ---------------------------------------------------------------------------

TraceConfig TraceConfig::with_radius(double r) const
{
    TraceConfig c = *this;
    c.radius = r;
    return c;
}

TraceConfig TraceConfig::resolved() const
{
    TraceConfig c = *this;
    const double R = c.radius;
    if (c.step_max <= 0) {
        c.step_max = R / 40.0;
    }
    if (c.step_init <= 0) {
        c.step_init = std::min(c.step_max, R / 400.0);
    }
    if (c.step_min <= 0) {
        c.step_min = std::min(c.step_init, R * 1e-9);
    }
    if (c.loop_close_tol <= 0) {
        c.loop_close_tol = 10.0 * c.step_min;
    }
    if (c.dedup_tol <= 0) {
        c.dedup_tol = 1e-6 * R;
    }
    if (c.chord_tol <= 0) {
        c.chord_tol = 5e-7 * R;
    }
    return c;
}

void TraceConfig::validate() const
{
    const TraceConfig c = resolved();
    if (!(c.radius > 0) || !std::isfinite(c.radius)) {
        throw std::invalid_argument("radius must be positive");
    }
    if (!(c.step_min <= c.step_init && c.step_init <= c.step_max)) {
        throw std::invalid_argument("need step_min <= step_init <= step_max");
    }
    if (!(c.newton_tol > 0 && c.loop_close_tol > 0 && c.dedup_tol > 0 && c.chord_tol > 0 && c.max_turn > 0)) {
        throw std::invalid_argument("tolerances must be positive");
    }
    if (c.newton_max_iter < 1 || c.seed_grid < 2) {
        throw std::invalid_argument("newton_max_iter >= 1 and seed_grid >= 2 required");
    }
}

double TraceConfig::member_tol() const
{
    const TraceConfig c = resolved();
    return std::max(c.dedup_tol, 4.0 * c.chord_tol);
}

std::string to_string(ComponentKind k)
{
    return k == ComponentKind::Circle ? "circle" : "arc";
}

double FiberComponent::diameter() const
{
    if (points.empty()) {
        return 0.0;
    }
    Vec lo = points.front();
    Vec hi = points.front();
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

int FiberSnapshot::component_of(const Vec& p, double tol) const
{
    int best = -1;
    double best_d = tol;
    for (std::size_t c = 0; c < components.size(); ++c) {
        const double d = polyline_distance(p, components[c].points);
        if (d <= best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// FiberSystem
// ---------------------------------------------------------------------------

FiberSystem::FiberSystem(PolynomialMap map, std::uint64_t seed) : map_(std::move(map))
{
    const std::size_t n = map_.domain_dim();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    centers_.push_back(Vec::Zero(static_cast<Eigen::Index>(n)));
    for (int k = 0; k < 3; ++k) {
        Vec c(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            c[static_cast<Eigen::Index>(i)] = u(rng);
        }
        centers_.push_back(c);
    }
    for (const auto& c : centers_) {
        Polynomial m = milnor_polynomial(map_, c);
        std::vector<Polynomial> grad;
        if (m.is_zero()) {
            milnor_.emplace_back(std::nullopt);
        } else {
            for (std::size_t j = 0; j < n; ++j) {
                grad.push_back(m.derivative(j));
            }
            milnor_.emplace_back(std::move(m));
        }
        milnor_grad_.push_back(std::move(grad));
    }
}

Vec FiberSystem::milnor_gradient(std::size_t k, const Vec& x) const
{
    Vec g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        g[j] = milnor_grad_[k][static_cast<std::size_t>(j)].evaluate(x);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Sphere crossings
// ---------------------------------------------------------------------------

namespace {

SquareSystem sphere_system(const PolynomialMap& map, const Vec& t, double radius)
{
    return [&map, t, radius](const Vec& x, Vec& f, Mat& J) {
        const Eigen::Index m = static_cast<Eigen::Index>(map.codomain_dim());
        const Eigen::Index n = x.size();
        f.resize(m + 1);
        J.resize(m + 1, n);
        f.head(m) = map.evaluate(x) - t;
        f[m] = 0.5 * (x.squaredNorm() - radius * radius);
        J.topRows(m) = map.jacobian(x);
        J.row(m) = x.transpose();
    };
}

double crossing_angle(const PolynomialMap& map, const Vec& x)
{
    const Vec T = null_direction(map.jacobian(x));
    const double s = std::abs(T.dot(x)) / std::max(x.norm(), 1e-300);
    return std::asin(std::min(1.0, s));
}

void finish_crossings(const PolynomialMap& map, const Vec& t, const TraceConfig& cfg, SphereCrossings& out)
{
    out.min_angle = std::numbers::pi / 2;
    std::vector<Vec> polished;
    const double dup = 1e-9 * std::max(1.0, cfg.radius);
    for (const auto& p : out.points) {
        NewtonResult r = newton_square(sphere_system(map, t, out.radius), p, cfg.newton_tol, 20, 1e-3 * out.radius);
        Vec q = r.converged ? r.x : p;
        bool seen = false;
        for (const auto& o : polished) {
            if ((o - q).norm() <= dup) {
                seen = true;
                break;
            }
        }
        if (!seen) {
            polished.push_back(q);
        }
    }
    out.points = std::move(polished);
    for (const auto& p : out.points) {
        out.min_angle = std::min(out.min_angle, crossing_angle(map, p));
    }
    if (out.min_angle < cfg.tangency_angle) {
        out.tangential = true;
    }
}

SphereCrossings circle_crossings_exact(const PolynomialMap& map, const Vec& t, double radius, const TraceConfig& cfg)
{
    using univariate::Coeffs;
    SphereCrossings out;
    out.radius = radius;
    out.exact = true;
    const auto& vars = map.variables();
    const Polynomial q = map.components()[0] - Polynomial::constant(vars, to_rational(t[0]));
    const unsigned d = q.total_degree();
    if (q.is_zero() || d == 0) {
        out.min_angle = std::numbers::pi / 2;
        return out;
    }
    const Rational R = to_rational(radius);
    // Rational points on the unit circle used to rotate the half-angle
    // parametrisation so that u = infinity is not a root.
    static const int kRot[][3] = {{3, 4, 5}, {5, 12, 13}, {8, 15, 17}, {7, 24, 25}, {20, 21, 29}, {12, 35, 37}};
    for (const auto& rot : kRot) {
        const Rational cr(rot[0], rot[2]);
        const Rational sr(rot[1], rot[2]);
        const Coeffs A{cr, Rational(-2 * rot[1], rot[2]), -cr};
        const Coeffs B{sr, Rational(2 * rot[0], rot[2]), -sr};
        const Coeffs W{Rational(1), Rational(0), Rational(1)};
        std::vector<Coeffs> pa{Coeffs{Rational(1)}}, pb{Coeffs{Rational(1)}}, pw{Coeffs{Rational(1)}};
        std::vector<Rational> pr{Rational(1)};
        for (unsigned k = 1; k <= d; ++k) {
            pa.push_back(univariate::multiply(pa.back(), A));
            pb.push_back(univariate::multiply(pb.back(), B));
            pw.push_back(univariate::multiply(pw.back(), W));
            pr.push_back(pr.back() * R);
        }
        Coeffs phi;
        for (const auto& [e, c] : q.terms()) {
            const unsigned a = e[0];
            const unsigned b = e[1];
            Coeffs term = univariate::multiply(univariate::multiply(pa[a], pb[b]), pw[d - a - b]);
            for (auto& x : term) {
                x *= c * pr[a + b];
            }
            phi = univariate::add(phi, term);
        }
        if (phi.empty()) {
            // The whole sphere lies in the fiber.
            out.tangential = true;
            out.min_angle = 0.0;
            return out;
        }
        if (univariate::degree(phi) < static_cast<int>(2 * d)) {
            continue;
        }
        const auto roots = univariate::real_roots(phi);
        out.tangential = roots.multiple;
        const double crd = cr.get_d();
        const double srd = sr.get_d();
        for (double u : roots.roots) {
            const double w = 1.0 + u * u;
            Vec p(2);
            p[0] = radius * (crd * (1.0 - u * u) - 2.0 * srd * u) / w;
            p[1] = radius * (srd * (1.0 - u * u) + 2.0 * crd * u) / w;
            out.points.push_back(p);
        }
        finish_crossings(map, t, cfg, out);
        return out;
    }
    throw std::runtime_error("circle parametrisation degenerate for every rotation");
}

SphereCrossings sphere_crossings_newton(const PolynomialMap& map, const Vec& t, double radius,
                                        const TraceConfig& cfg)
{
    SphereCrossings out;
    out.radius = radius;
    const Eigen::Index n = static_cast<Eigen::Index>(map.domain_dim());
    const std::size_t count = static_cast<std::size_t>(cfg.seed_grid) * static_cast<std::size_t>(cfg.seed_grid);
    std::vector<Vec> starts;
    if (n == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (std::size_t i = 0; i < count; ++i) {
            const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden * static_cast<double>(i);
            Vec p(3);
            p << r * std::cos(phi), r * std::sin(phi), z;
            starts.push_back(radius * p);
        }
    } else {
        std::mt19937_64 rng(cfg.rng_seed);
        std::normal_distribution<double> g;
        for (std::size_t i = 0; i < count; ++i) {
            Vec p(n);
            for (Eigen::Index k = 0; k < n; ++k) {
                p[k] = g(rng);
            }
            starts.push_back(radius * p / p.norm());
        }
    }
    const double spacing = radius * std::sqrt(4.0 * std::numbers::pi / static_cast<double>(count));
    const auto sys = sphere_system(map, t, radius);
    const double dup = 1e-9 * std::max(1.0, radius);
    for (const auto& s : starts) {
        Vec f;
        Mat J;
        sys(s, f, J);
        const Vec step = J.partialPivLu().solve(f);
        if (!(step.norm() <= 3.0 * spacing)) {
            continue;
        }
        NewtonResult r = newton_square(sys, s, cfg.newton_tol, cfg.newton_max_iter, spacing);
        if (!r.converged) {
            continue;
        }
        const bool seen = std::any_of(out.points.begin(), out.points.end(),
                                      [&](const Vec& o) { return (o - r.x).norm() <= dup; });
        if (!seen) {
            out.points.push_back(r.x);
        }
    }
    finish_crossings(map, t, cfg, out);
    return out;
}

}  // namespace

SphereCrossings sphere_crossings(const FiberSystem& sys, const Vec& t, double radius, const TraceConfig& cfg_in)
{
    const TraceConfig cfg = cfg_in.resolved();
    if (sys.dim() == 2) {
        return circle_crossings_exact(sys.map(), t, radius, cfg);
    }
    return sphere_crossings_newton(sys.map(), t, radius, cfg);
}

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

namespace {

template <typename Fn>
void for_each_lattice_point(std::size_t n, int grid, double radius, Fn&& fn)
{
    const double h = 2.0 * radius / grid;
    std::vector<int> idx(n, 0);
    Vec p(static_cast<Eigen::Index>(n));
    while (true) {
        for (std::size_t i = 0; i < n; ++i) {
            p[static_cast<Eigen::Index>(i)] = -radius + (idx[i] + 0.5) * h;
        }
        if (p.norm() <= radius) {
            fn(p, h);
        }
        std::size_t k = 0;
        while (k < n && ++idx[k] == grid) {
            idx[k] = 0;
            ++k;
        }
        if (k == n) {
            break;
        }
    }
}

}  // namespace

namespace {

// Gauss-Newton step -J^+ (F(p) - t), a first-order move onto the fiber.
// Buffers are reused across the lattice.
class NewtonProbe {
public:
    NewtonProbe(const PolynomialMap& map, const Vec& t) : map_(map), t_(t) {}

    /// False where J is rank deficient.
    bool step(const Vec& p)
    {
        map_.evaluate(p, f_);
        f_ -= t_;
        map_.jacobian(p, J_);
        G_.noalias() = J_ * J_.transpose();
        ldlt_.compute(G_);
        if (ldlt_.info() != Eigen::Success) {
            return false;
        }
        y_ = ldlt_.solve(f_);
        step_.noalias() = -J_.transpose() * y_;
        return step_.allFinite();
    }
    const Vec& last() const { return step_; }

private:
    const PolynomialMap& map_;
    const Vec& t_;
    Vec f_;
    Vec y_;
    Vec step_;
    Mat J_;
    Mat G_;
    Eigen::LDLT<Mat> ldlt_;
};

// Seeds in family order. `skip(q, h)` may veto the Newton solve for a lattice
// point whose Gauss-Newton image q is already accounted for.
template <typename Emit, typename Skip>
void generate_seeds(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg, SeedAudit& audit, Emit&& emit,
                    Skip&& skip)
{
    const PolynomialMap& map = sys.map();
    const std::size_t n = sys.dim();
    const double R = cfg.radius;

    // (i) the sphere catches every arc
    const SphereCrossings sc = sphere_crossings(sys, t, R, cfg);
    for (const auto& p : sc.points) {
        ++audit.sphere;
        ++audit.found;
        emit(p);
    }

    const double sqrt_n = std::sqrt(static_cast<double>(n));
    NewtonProbe probe(map, t);

    // (iii) distance-critical points catch compact components
    // Per-axis density drops with the dimension so the lattice stays a few
    // thousand points.
    const int grid = n <= 2 ? cfg.seed_grid : std::max(8, cfg.seed_grid / 2);
    const int coarse = std::max(8, grid / 2);
    std::vector<Vec> critical;
    for (std::size_t k = 0; k < sys.num_centers(); ++k) {
        const auto& m = sys.milnor(k);
        if (!m) {
            continue;
        }
        const SquareSystem msys = [&map, &t, &m, &sys, k](const Vec& x, Vec& f, Mat& J) {
            const Eigen::Index r = static_cast<Eigen::Index>(map.codomain_dim());
            f.resize(r + 1);
            J.resize(r + 1, x.size());
            f.head(r) = map.evaluate(x) - t;
            f[r] = m->evaluate(x);
            J.topRows(r) = map.jacobian(x);
            J.row(r) = sys.milnor_gradient(k, x).transpose();
        };
        for_each_lattice_point(n, coarse, R, [&](const Vec& p, double h) {
            if (!probe.step(p) || probe.last().norm() > 2.0 * h * sqrt_n) {
                return;
            }
            Vec f0;
            Mat J0;
            msys(p, f0, J0);
            const Vec step = J0.partialPivLu().solve(f0);
            if (!(step.norm() <= 2.0 * h * sqrt_n) || skip(Vec(p - step), h)) {
                return;
            }
            NewtonResult r = newton_square(msys, p, cfg.newton_tol, cfg.newton_max_iter, h);
            if (!r.converged || r.x.norm() > R) {
                return;
            }
            // isolated solutions: many lattice points reach the same one
            for (const auto& q : critical) {
                if ((q - r.x).norm() <= cfg.dedup_tol) {
                    return;
                }
            }
            critical.push_back(r.x);
            ++audit.min_norm;
            ++audit.found;
            emit(r.x);
        });
    }

    // (ii) interior lattice
    for_each_lattice_point(n, grid, R, [&](const Vec& p, double h) {
        if (!probe.step(p) || probe.last().norm() > 1.5 * h * sqrt_n || skip(Vec(p + probe.last()), h)) {
            return;
        }
        NewtonResult r = project_to_fiber(map, t, p, cfg.newton_tol, cfg.newton_max_iter, h);
        if (r.converged && r.x.norm() <= R) {
            ++audit.lattice;
            ++audit.found;
            emit(r.x);
        }
    });
}

}  // namespace

std::vector<Vec> find_seeds(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg_in, SeedAudit* audit)
{
    const TraceConfig cfg = cfg_in.resolved();
    std::vector<Vec> seeds;
    SeedAudit local;
    generate_seeds(
        sys, t, cfg, local, [&](const Vec& p) { seeds.push_back(p); }, [](const Vec&, double) { return false; });
    if (audit) {
        *audit = local;
    }
    return seeds;
}

// ---------------------------------------------------------------------------
// Tracing
// ---------------------------------------------------------------------------

namespace {

enum class MarchEnd { Boundary, Closed, Aborted };

struct MarchResult {
    std::vector<Vec> points;
    MarchEnd end = MarchEnd::Aborted;
    Vec hit;
    bool tainted = false;
    double min_singular = std::numeric_limits<double>::infinity();
    std::string issue;
};

MarchResult march(const PolynomialMap& map, const Vec& t, const TraceConfig& cfg, const Vec& start, const Vec& dir,
                  bool detect_loop)
{
    MarchResult out;
    const double R = cfg.radius;
    const double close_tol = std::max(cfg.loop_close_tol, 3.0 * cfg.chord_tol);
    if (start.norm() >= R * (1.0 - 1e-12) && dir.dot(start) > 0) {
        out.end = MarchEnd::Boundary;
        out.hit = start;
        return out;
    }
    const Eigen::Index m = static_cast<Eigen::Index>(map.codomain_dim());
    const Eigen::Index n = start.size();
    Vec x = start;
    Vec T = dir;
    double h = cfg.step_init;
    std::size_t accepted = 0;
    std::size_t attempts = 0;
    const auto hit_sys = sphere_system(map, t, R);
    // The sign of det [J; T] flips when the path runs through a singular point.
    auto orientation = [&](const Mat& J, const Vec& tangent) {
        Mat A(n, n);
        A.topRows(m) = J;
        A.row(m) = tangent.transpose();
        return A.determinant() > 0;
    };
    bool orient = orientation(map.jacobian(start), T);

    while (true) {
        if (++attempts > cfg.max_steps) {
            out.end = MarchEnd::Aborted;
            out.issue = "step budget exhausted";
            return out;
        }
        const Vec pred = x + h * T;
        const Vec Tcur = T;
        const SquareSystem corr_sys = [&](const Vec& y, Vec& f, Mat& J) {
            f.resize(m + 1);
            J.resize(m + 1, n);
            f.head(m) = map.evaluate(y) - t;
            f[m] = Tcur.dot(y - pred);
            J.topRows(m) = map.jacobian(y);
            J.row(m) = Tcur.transpose();
        };
        NewtonResult corr = newton_square(corr_sys, pred, cfg.newton_tol, 8, h);
        bool reject = !corr.converged;
        Vec y;
        Mat Jy;
        Vec Ty;
        double theta = 0.0;
        if (!reject) {
            y = corr.x;
            Jy = map.jacobian(y);
            Ty = null_direction(Jy);
            if (Ty.dot(T) < 0) {
                Ty = -Ty;
            }
            theta = std::acos(std::clamp(Ty.dot(T), -1.0, 1.0));
            const double dev = (y - pred).norm();
            const double step = (y - x).norm();
            if (theta > cfg.max_turn || h * theta / 8.0 > cfg.chord_tol || dev > h * theta + cfg.chord_tol ||
                step > 1.5 * h || step < 0.25 * h) {
                reject = true;
            }
        }
        if (reject) {
            h *= 0.5;
            if (h < cfg.step_min) {
                out.end = MarchEnd::Aborted;
                out.issue = "step underflow";
                return out;
            }
            continue;
        }
        const double sing = min_singular_value(Jy);
        out.min_singular = std::min(out.min_singular, sing);
        if (sing < cfg.singular_tol) {
            out.tainted = true;
        }
        if (orientation(Jy, Ty) != orient) {
            orient = !orient;
            out.tainted = true;
            out.issue = "path crossed a singular point";
        }
        if (y.norm() > R) {
            // Boundary hit on the segment x -> y.
            const Vec d = y - x;
            const double a = d.squaredNorm();
            const double b = 2.0 * x.dot(d);
            const double c = x.squaredNorm() - R * R;
            const double s = std::clamp((-b + std::sqrt(std::max(0.0, b * b - 4 * a * c))) / (2 * a), 0.0, 1.0);
            const Vec z0 = x + s * d;
            NewtonResult hit = newton_square(hit_sys, z0, cfg.newton_tol, 12, h);
            if (hit.converged && (hit.x - z0).norm() <= h) {
                out.points.push_back(hit.x);
                out.hit = hit.x;
                out.end = MarchEnd::Boundary;
                return out;
            }
            h *= 0.5;
            if (h < cfg.step_min) {
                out.end = MarchEnd::Aborted;
                out.issue = "boundary hit not resolved";
                return out;
            }
            continue;
        }
        if (detect_loop && accepted >= 2 && point_segment_distance(start, x, y) <= close_tol &&
            Ty.dot(dir) > 0.5) {
            out.points.push_back(start);
            out.end = MarchEnd::Closed;
            return out;
        }
        out.points.push_back(y);
        ++accepted;
        x = y;
        T = Ty;
        if (corr.iterations <= 3 && theta < 0.5 * cfg.max_turn && h * theta / 8.0 < 0.25 * cfg.chord_tol) {
            h = std::min(1.5 * h, cfg.step_max);
        }
    }
}

void refine_min_norm(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg, FiberComponent& c)
{
    const auto& pts = c.points;
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].squaredNorm() < pts[best].squaredNorm()) {
            best = i;
        }
    }
    c.min_norm_point = pts[best];
    c.min_norm = pts[best].norm();
    const bool endpoint = (best == 0 || best + 1 == pts.size());
    if (!c.closed && endpoint) {
        c.min_norm_at_boundary = true;
        return;
    }
    if (pts.size() < 3) {
        return;
    }
    // Golden-section search along the curve near the best vertex, using
    // projections of base + s*T back onto the fiber.
    const PolynomialMap& map = sys.map();
    const std::size_t prev = best == 0 ? pts.size() - 2 : best - 1;
    const std::size_t next = best + 1 == pts.size() ? 1 : best + 1;
    const Vec& base = pts[best];
    const Vec T = null_direction(map.jacobian(base));
    const double span = std::max((pts[prev] - base).norm(), (pts[next] - base).norm());
    auto on_fiber = [&](double s) {
        NewtonResult r = project_to_fiber(map, t, base + s * T, 0.0, 8, span);
        return r.residual <= cfg.newton_tol ? r.x : Vec();
    };
    auto cost = [&](double s) {
        const Vec x = on_fiber(s);
        return x.size() ? x.norm() : std::numeric_limits<double>::infinity();
    };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = -span;
    double hi = span;
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = cost(x1);
    double f2 = cost(x2);
    for (int it = 0; it < 60 && hi - lo > 1e-12 * std::max(1.0, span); ++it) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = cost(x2);
        }
    }
    Vec z = on_fiber(0.5 * (lo + hi));
    if (z.size() == 0) {
        z = on_fiber(0.0);
    }
    if (z.size() == 0) {
        z = base;
    }
    const auto& m0 = sys.milnor_origin();
    if (m0) {
        const Eigen::Index r = static_cast<Eigen::Index>(map.codomain_dim());
        const SquareSystem msys = [&](const Vec& x, Vec& f, Mat& J) {
            f.resize(r + 1);
            J.resize(r + 1, x.size());
            f.head(r) = map.evaluate(x) - t;
            f[r] = m0->evaluate(x);
            J.topRows(r) = map.jacobian(x);
            J.row(r) = sys.milnor_gradient(0, x).transpose();
        };
        NewtonResult nr = newton_square(msys, z, cfg.newton_tol, 15, cfg.step_max);
        if (nr.converged && (nr.x - z).norm() <= 2.0 * cfg.step_max && nr.x.norm() < z.norm()) {
            z = nr.x;
        }
    }
    c.min_norm_point = z;
    c.min_norm = z.norm();
}

}  // namespace

FiberComponent trace_component(const FiberSystem& sys, const Vec& t, const Vec& seed_in, const TraceConfig& cfg_in)
{
    const TraceConfig cfg = cfg_in.resolved();
    const PolynomialMap& map = sys.map();
    FiberComponent c;
    c.t = t;
    Vec seed = seed_in;
    if ((map.evaluate(seed) - t).norm() > cfg.newton_tol) {
        NewtonResult r = project_to_fiber(map, t, seed, cfg.newton_tol, cfg.newton_max_iter);
        if (!r.converged) {
            c.incomplete = true;
            c.issue = "seed not on fiber";
            c.points.push_back(seed);
            c.min_norm_point = seed;
            c.min_norm = seed.norm();
            return c;
        }
        seed = r.x;
    }
    const Mat J0 = map.jacobian(seed);
    c.min_singular = min_singular_value(J0);
    if (c.min_singular < cfg.singular_tol) {
        c.tainted = true;
        c.issue = "rank-deficient Jacobian";
    }
    const Vec T0 = canonical_orientation(null_direction(J0));

    MarchResult fwd = march(map, t, cfg, seed, T0, true);
    c.tainted = c.tainted || fwd.tainted;
    c.min_singular = std::min(c.min_singular, fwd.min_singular);
    if (fwd.end == MarchEnd::Closed) {
        c.points.reserve(fwd.points.size() + 1);
        c.points.push_back(seed);
        for (auto& p : fwd.points) {
            c.points.push_back(std::move(p));
        }
        c.closed = true;
        c.kind = ComponentKind::Circle;
    } else {
        MarchResult bwd = march(map, t, cfg, seed, -T0, false);
        c.tainted = c.tainted || bwd.tainted;
        c.min_singular = std::min(c.min_singular, bwd.min_singular);
        c.points.reserve(fwd.points.size() + bwd.points.size() + 1);
        for (auto it = bwd.points.rbegin(); it != bwd.points.rend(); ++it) {
            c.points.push_back(*it);
        }
        if (bwd.points.empty() || (bwd.points.back() - seed).norm() > 0) {
            if (c.points.empty() || (c.points.back() - seed).norm() > 0) {
                c.points.push_back(seed);
            }
        }
        for (auto& p : fwd.points) {
            if ((c.points.back() - p).norm() > 0) {
                c.points.push_back(std::move(p));
            }
        }
        if (bwd.end == MarchEnd::Boundary) {
            c.boundary_hits.push_back(bwd.hit);
        }
        if (fwd.end == MarchEnd::Boundary) {
            c.boundary_hits.push_back(fwd.hit);
        }
        c.kind = ComponentKind::Arc;
        if (fwd.end == MarchEnd::Aborted || bwd.end == MarchEnd::Aborted) {
            c.incomplete = true;
            c.issue = fwd.end == MarchEnd::Aborted ? fwd.issue : bwd.issue;
        }
    }
    if (c.tainted && c.issue.empty()) {
        c.issue = "rank-deficient Jacobian";
    }
    for (const auto& p : c.points) {
        c.max_residual = std::max(c.max_residual, (map.evaluate(p) - t).norm());
    }
    refine_min_norm(sys, t, cfg, c);
    return c;
}

FiberSnapshot enumerate_fiber(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg_in)
{
    cfg_in.validate();
    const TraceConfig cfg = cfg_in.resolved();
    const PolynomialMap& map = sys.map();
    if (static_cast<std::size_t>(t.size()) != map.codomain_dim()) {
        throw DimensionError("parameter dimension mismatch");
    }
    FiberSnapshot snap;
    snap.t = t;
    snap.radius = cfg.radius;
    const double tol = cfg.member_tol();
    ComponentLocator locator(cfg.radius, tol);
    // Coarse index used only to skip lattice points that project onto a
    // component already traced.
    const int grid = map.domain_dim() <= 2 ? cfg.seed_grid : cfg.seed_grid / 2;
    const double skip_tol = 0.25 * 2.0 * cfg.radius / std::max(8, grid);
    ComponentLocator near(cfg.radius, skip_tol);
    auto emit = [&](const Vec& seed) {
        const Mat J = map.jacobian(seed);
        const double sing = min_singular_value(J);
        if (sing < cfg.singular_tol) {
            ++snap.seed_audit.rejected;
            snap.tainted = true;
            snap.min_singular = std::min(snap.min_singular, sing);
            return;
        }
        if (locator.locate(seed, null_direction(J)) >= 0) {
            ++snap.seed_audit.merged;
            return;
        }
        FiberComponent comp = trace_component(sys, t, seed, cfg);
        snap.tainted = snap.tainted || comp.tainted;
        snap.incomplete = snap.incomplete || comp.incomplete;
        snap.min_singular = std::min(snap.min_singular, comp.min_singular);
        locator.add(comp.points, static_cast<int>(snap.components.size()));
        near.add(comp.points, static_cast<int>(snap.components.size()));
        snap.components.push_back(std::move(comp));
    };
    auto skip = [&](const Vec& q, double) {
        if (near.locate(q) < 0) {
            return false;
        }
        ++snap.seed_audit.skipped;
        return true;
    };
    generate_seeds(sys, t, cfg, snap.seed_audit, emit, skip);
    // Safety net: drop traces that duplicate an earlier one.
    std::vector<bool> drop(snap.components.size(), false);
    for (std::size_t j = 0; j < snap.components.size(); ++j) {
        for (std::size_t i = 0; i < j && !drop[j]; ++i) {
            if (drop[i]) {
                continue;
            }
            const auto& pj = snap.components[j].points;
            bool all_on = true;
            const std::size_t stride = std::max<std::size_t>(1, pj.size() / 32);
            for (std::size_t k = 0; k < pj.size() && all_on; k += stride) {
                all_on = locator.distance_to(static_cast<int>(i), pj[k]) <= tol;
            }
            if (all_on) {
                drop[j] = true;
                ++snap.seed_audit.merged;
            }
        }
    }
    std::vector<FiberComponent> kept;
    for (std::size_t j = 0; j < snap.components.size(); ++j) {
        if (!drop[j]) {
            kept.push_back(std::move(snap.components[j]));
        }
    }
    std::sort(kept.begin(), kept.end(), [](const FiberComponent& a, const FiberComponent& b) {
        for (Eigen::Index i = 0; i < a.min_norm_point.size(); ++i) {
            if (a.min_norm_point[i] != b.min_norm_point[i]) {
                return a.min_norm_point[i] < b.min_norm_point[i];
            }
        }
        return false;
    });
    snap.components = std::move(kept);
    return snap;
}

std::vector<Vec> find_seeds(const PolynomialMap& map, const Vec& t, const TraceConfig& cfg)
{
    return find_seeds(FiberSystem(map, cfg.rng_seed), t, cfg);
}

FiberComponent trace_component(const PolynomialMap& map, const Vec& t, const Vec& seed, const TraceConfig& cfg)
{
    return trace_component(FiberSystem(map, cfg.rng_seed), t, seed, cfg);
}

FiberSnapshot enumerate_fiber(const PolynomialMap& map, const Vec& t, const TraceConfig& cfg)
{
    return enumerate_fiber(FiberSystem(map, cfg.rng_seed), t, cfg);
}

// ---------------------------------------------------------------------------
// Geometry helpers
// ---------------------------------------------------------------------------

double polyline_distance(const Vec& p, const std::vector<Vec>& poly)
{
    if (poly.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    if (poly.size() == 1) {
        return (p - poly[0]).norm();
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
        best = std::min(best, point_segment_distance(p, poly[i], poly[i + 1]));
    }
    return best;
}

double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b)
{
    double d = 0.0;
    for (const auto& p : a) {
        d = std::max(d, polyline_distance(p, b));
    }
    for (const auto& p : b) {
        d = std::max(d, polyline_distance(p, a));
    }
    return d;
}

// ---------------------------------------------------------------------------
// Exterior restriction
// ---------------------------------------------------------------------------

FiberSnapshot restrict_to_exterior(const FiberSnapshot& snap, double inner_radius, const FiberSystem& sys,
                                   const TraceConfig& cfg_in)
{
    const TraceConfig cfg = cfg_in.resolved();
    const PolynomialMap& map = sys.map();
    FiberSnapshot out;
    out.t = snap.t;
    out.radius = snap.radius;
    out.seed_audit = snap.seed_audit;
    out.tainted = snap.tainted;
    out.incomplete = snap.incomplete;
    out.min_singular = snap.min_singular;
    const auto inner_sys = sphere_system(map, snap.t, inner_radius);

    auto inner_hit = [&](const Vec& a, const Vec& b) {
        // a and b straddle the inner sphere
        const Vec d = b - a;
        double lo = 0.0;
        double hi = 1.0;
        const bool a_out = a.norm() >= inner_radius;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool mid_out = (a + mid * d).norm() >= inner_radius;
            if (mid_out == a_out) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        const Vec z0 = a + 0.5 * (lo + hi) * d;
        NewtonResult r = newton_square(inner_sys, z0, cfg.newton_tol, 12, d.norm());
        return r.converged ? r.x : z0;
    };

    auto finish_piece = [&](FiberComponent piece) {
        if (piece.points.size() < 2) {
            return;
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < piece.points.size(); ++i) {
            if (piece.points[i].squaredNorm() < piece.points[best].squaredNorm()) {
                best = i;
            }
        }
        piece.min_norm_point = piece.points[best];
        piece.min_norm = piece.points[best].norm();
        piece.min_norm_at_boundary = !piece.closed && (best == 0 || best + 1 == piece.points.size());
        piece.max_residual = 0.0;
        for (const auto& p : piece.points) {
            piece.max_residual = std::max(piece.max_residual, (map.evaluate(p) - snap.t).norm());
        }
        out.components.push_back(std::move(piece));
    };

    for (const auto& comp : snap.components) {
        const auto& pts = comp.points;
        const bool all_out =
            std::all_of(pts.begin(), pts.end(), [&](const Vec& p) { return p.norm() >= inner_radius; });
        if (all_out) {
            out.components.push_back(comp);
            continue;
        }
        // Rotate closed loops so the walk starts inside the inner ball.
        std::vector<Vec> walk = pts;
        if (comp.closed) {
            walk.pop_back();
            std::size_t start = 0;
            while (walk[start].norm() >= inner_radius) {
                ++start;
            }
            std::rotate(walk.begin(), walk.begin() + static_cast<std::ptrdiff_t>(start), walk.end());
            walk.push_back(walk.front());
        }
        FiberComponent piece;
        bool open = false;
        for (std::size_t i = 0; i < walk.size(); ++i) {
            const bool outside = walk[i].norm() >= inner_radius;
            if (outside) {
                if (!open) {
                    piece = FiberComponent{};
                    piece.t = comp.t;
                    piece.kind = ComponentKind::Arc;
                    piece.tainted = comp.tainted;
                    piece.incomplete = comp.incomplete;
                    piece.min_singular = comp.min_singular;
                    if (i > 0) {
                        const Vec h = inner_hit(walk[i - 1], walk[i]);
                        piece.points.push_back(h);
                        piece.boundary_hits.push_back(h);
                    } else if (!comp.boundary_hits.empty()) {
                        piece.boundary_hits.push_back(walk[0]);
                    }
                    open = true;
                }
                piece.points.push_back(walk[i]);
            } else if (open) {
                const Vec h = inner_hit(walk[i - 1], walk[i]);
                piece.points.push_back(h);
                piece.boundary_hits.push_back(h);
                finish_piece(std::move(piece));
                open = false;
            }
        }
        if (open) {
            if (!comp.closed && !comp.boundary_hits.empty()) {
                piece.boundary_hits.push_back(walk.back());
            }
            finish_piece(std::move(piece));
        }
    }
    return out;
}

std::string traces_csv(const FiberSnapshot& snap, const PolynomialMap& map)
{
    std::ostringstream os;
    os << "component_id,point_index";
    for (std::size_t i = 0; i < map.domain_dim(); ++i) {
        os << ",x" << (i + 1);
    }
    os << ",residual\n";
    char buf[64];
    for (std::size_t c = 0; c < snap.components.size(); ++c) {
        const auto& pts = snap.components[c].points;
        for (std::size_t k = 0; k < pts.size(); ++k) {
            os << c << "," << k;
            for (Eigen::Index i = 0; i < pts[k].size(); ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", pts[k][i]);
                os << "," << buf;
            }
            std::snprintf(buf, sizeof buf, "%.17g", (map.evaluate(pts[k]) - snap.t).norm());
            os << "," << buf << "\n";
        }
    }
    return os.str();
}

}  // namespace bifurcurve
