#include "bifurcurve/milnor.hpp"

#include "grid_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>

using namespace bifurcurve;

namespace {

const std::vector<std::string> XY{"x", "y"};

PolynomialMap plane(const char* text)
{
    return parse_map(text, XY);
}

Vec v1(double a)
{
    Vec v(1);
    v << a;
    return v;
}

Vec v2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

AnalysisConfig base_config()
{
    AnalysisConfig cfg;
    cfg.trace.radius = 10.0;
    return cfg;
}

// Sign changes of phi along a parametrised curve, counted where the curve is
// outside r_in and inside r_out.
int sign_changes(const std::function<Vec(double)>& curve, const std::function<double(const Vec&)>& phi,
                 double lo, double hi, int samples, double r_in, double r_out)
{
    int count = 0;
    Vec prev = curve(lo);
    double fprev = phi(prev);
    for (int i = 1; i <= samples; ++i) {
        const double s = lo + (hi - lo) * i / samples;
        const Vec p = curve(s);
        const double f = phi(p);
        const double r = 0.5 * (p.norm() + prev.norm());
        if ((f >= 0) != (fprev >= 0) && r > r_in && r <= r_out) {
            ++count;
        }
        prev = p;
        fprev = f;
    }
    return count;
}

}  // namespace

TEST_CASE("weighted map keeps its zero set and differentiates consistently")
{
    const PolynomialMap F = plane("x^3 - y - 2*x*y^2");
    const PolynomialMap W = F.weighted(2.0);
    CHECK(W.weight_exponent() == 2.0);
    CHECK_THROWS_AS(F.weighted(-1.0), std::invalid_argument);
    const Vec p = v2(3.0, -1.5);
    const double w = std::pow(1.0 + p.squaredNorm(), 1.0);
    CHECK(W.evaluate(p)[0] == doctest::Approx(F.evaluate(p)[0] / w).epsilon(1e-14));
    const Mat J = W.jacobian(p);
    for (int j = 0; j < 2; ++j) {
        Vec e = Vec::Zero(2);
        e[j] = 1e-6;
        const double fd = (W.evaluate(p + e)[0] - W.evaluate(p - e)[0]) / 2e-6;
        CHECK(J(0, j) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("Milnor set of a coordinate projection is the horizontal axis")
{
    TraceConfig cfg;
    cfg.radius = 10.0;
    const MilnorSet ms = trace_milnor_set(plane("x"), Vec::Zero(2), cfg);
    REQUIRE_FALSE(ms.degenerate);
    REQUIRE(ms.branches.size() == 1);
    CHECK(ms.branches[0].kind == ComponentKind::Arc);
    for (const auto& p : ms.branches[0].points) {
        CHECK(std::abs(p[1]) <= 1e-9);
    }
    CHECK_THROWS_AS(trace_milnor_set(parse_map("x; y", {"x", "y", "z"}), Vec::Zero(3), cfg), DimensionError);
}

TEST_CASE("Milnor branches lie on m_c and match grid marching")
{
    TraceConfig cfg;
    cfg.radius = 10.0;
    const char* fixtures[] = {"x + x^2*y", "y*(2*x^2*y^2 - 9*x*y + 12)", "y*(x^2 + 1)", "(x*y - 1)^2 + y^2"};
    for (const char* text : fixtures) {
        CAPTURE(text);
        const PolynomialMap F = plane(text);
        const MilnorSet ms = trace_milnor_set(F, Vec::Zero(2), cfg);
        REQUIRE_FALSE(ms.degenerate);
        const unsigned d = ms.determinant.total_degree();
        for (const auto& b : ms.branches) {
            for (const auto& p : b.points) {
                const double w = std::pow(1.0 + p.squaredNorm(), 0.5 * (d - 1));
                CHECK(std::abs(ms.determinant.evaluate(p)) / w <= 10 * cfg.newton_tol);
            }
        }
        const auto grid = oracle::grid_components(
            [&](double x, double y) { return ms.determinant.evaluate(v2(x, y)); }, cfg.radius, 1024);
        int circles = 0;
        int arcs = 0;
        for (const auto& b : ms.branches) {
            (b.kind == ComponentKind::Circle ? circles : arcs) += 1;
        }
        CHECK(circles == grid.circles);
        CHECK(arcs == grid.arcs);
    }
}

TEST_CASE("identically vanishing determinant is degenerate and retried")
{
    TraceConfig cfg;
    cfg.radius = 10.0;
    const PolynomialMap F = plane("x^2 + y^2");
    const MilnorSet ms = trace_milnor_set(F, Vec::Zero(2), cfg);
    CHECK(ms.degenerate);
    CHECK_THROWS_AS(estimate_asymptotic_values(F, ms, milnor_ladder(10.0), cfg), std::invalid_argument);
    const CenterEstimate ce = estimate_s_c(F, Vec::Zero(2), cfg);
    CHECK(ce.retries >= 1);
    CHECK_FALSE(ce.milnor.degenerate);
    CHECK(ce.estimate.values.empty());
}

TEST_CASE("asymptotic values at the origin centre")
{
    TraceConfig cfg;
    cfg.radius = 10.0;
    SUBCASE("a line fiber family with a fold pair at infinity contains 0")
    {
        const PolynomialMap f = plane("y*(2*x^2*y^2 - 9*x*y + 12)");
        const CenterEstimate ce = estimate_s_c(f, Vec::Zero(2), cfg);
        REQUIRE_FALSE(ce.estimate.values.empty());
        CHECK(ce.estimate.contains(0.0, 1e-3));
        CHECK(ce.estimate.radii_used == milnor_ladder(10.0));
        for (const auto& v : ce.estimate.values) {
            REQUIRE(v.tail.size() == 3);
            CHECK(std::abs(v.tail[2] - v.tail[1]) < std::abs(v.tail[1] - v.tail[0]));
            // some traced Milnor point far out has F close to t0
            bool witnessed = false;
            for (const auto& p : ce.milnor.branches[static_cast<std::size_t>(v.branch)].points) {
                if (p.norm() >= ce.milnor.radius / 2 && std::abs(f.evaluate(p)[0] - v.t0) <= 10 * v.confidence) {
                    witnessed = true;
                }
            }
            CHECK(witnessed);
        }
    }
    SUBCASE("every branch of g diverges")
    {
        const CenterEstimate ce = estimate_s_c(plane("y*(x^2 + 1)"), Vec::Zero(2), cfg);
        CHECK_FALSE(ce.milnor.branches.empty());
        CHECK(ce.estimate.values.empty());
    }
    SUBCASE("coordinate projection")
    {
        const CenterEstimate ce = estimate_s_c(plane("x"), Vec::Zero(2), cfg);
        CHECK(ce.estimate.values.empty());
    }
    SUBCASE("x + x^2 y has 0 at infinity")
    {
        const CenterEstimate ce = estimate_s_c(plane("x + x^2*y"), Vec::Zero(2), cfg);
        CHECK(ce.estimate.contains(0.0, 1e-3));
        for (double t : ce.estimate.distinct()) {
            CHECK(std::abs(t) <= 1e-2);
        }
    }
    SUBCASE("ladder validation")
    {
        const PolynomialMap F = plane("x");
        const MilnorSet ms = trace_milnor_set(F, Vec::Zero(2), cfg.with_radius(160.0));
        CHECK_THROWS_AS(estimate_asymptotic_values(F, ms, {10.0, 20.0, 40.0}, cfg), std::invalid_argument);
        CHECK_THROWS_AS(estimate_asymptotic_values(F, ms, {10.0, 40.0, 20.0, 80.0}, cfg), std::invalid_argument);
    }
}

TEST_CASE("S_infinity over several centres")
{
    TraceConfig cfg;
    cfg.radius = 10.0;
    const auto centers = default_centers(7);
    REQUIRE(centers.size() == 5);
    CHECK(centers[0].norm() == 0.0);
    for (const auto& c : centers) {
        CHECK(c.cwiseAbs().maxCoeff() <= 3.0);
    }
    CHECK(estimate_s_infinity(plane("y*(x^2 + 1)"), centers, cfg).values.empty());
    CHECK(estimate_s_infinity(plane("x"), centers, cfg).values.empty());
    const SInfinityEstimate sf = estimate_s_infinity(plane("y*(2*x^2*y^2 - 9*x*y + 12)"), centers, cfg);
    MESSAGE("S_inf estimate for the fold family has " << sf.values.size() << " values, first "
                                                     << (sf.values.empty() ? std::nan("") : sf.values[0]));
    CHECK(sf.centers_used.size() + sf.centers_dropped.size() == centers.size());
    CHECK_THROWS_AS(estimate_s_infinity(plane("x^2 + y^2"), {Vec::Zero(2)}, cfg), std::runtime_error);
    CHECK_THROWS_AS(estimate_s_infinity(plane("x"), {}, cfg), std::invalid_argument);
}

TEST_CASE("escaping intersections oracle for x + x^2 y")
{
    // X_t splits into the graphs y = (t - x)/x^2 over x > 0 and x < 0. X_0 meets
    // M_0 at the origin and at (1,-1), (-1,1), so every persisting
    // intersection stays inside 1.5*sqrt(2).
    const PolynomialMap F = plane("x + x^2*y");
    const Polynomial m = milnor_polynomial(F, Vec::Zero(2));
    const auto phi = [&](const Vec& p) { return m.evaluate(p); };
    const double r_in = 1.5 * std::sqrt(2.0);
    const double t = 1.0 / 128;
    auto right = [&](double s) {
        const double x = std::exp(s);
        return v2(x, (t - x) / (x * x));
    };
    auto left = [&](double s) {
        const double x = -std::exp(s);
        return v2(x, (t - x) / (x * x));
    };
    const int odd_side = sign_changes(right, phi, -20.0, 12.0, 400000, r_in, 1e9);
    const int even_side = sign_changes(left, phi, -20.0, 12.0, 400000, r_in, 1e9);
    CHECK(odd_side % 2 == 1);
    CHECK(even_side % 2 == 0);

    AnalysisConfig cfg = base_config();
    const Vec a = v1(0.0);
    const ApproachSpec spec = make_approach(a, cfg.approach);
    const ParityResult pr = parity_test(F, a, Vec::Zero(2), spec, cfg);
    CHECK(pr.in_s_c);
    CHECK(pr.verdict == Tri::Fail);
    CHECK(pr.inner_radius == doctest::Approx(r_in).epsilon(1e-6));
    // At t = +eps/64 the odd track is the component over x > 0.
    REQUIRE(spec.directions[0][0] > 0);
    const std::size_t K = spec.scales.size();
    REQUIRE(spec.scales[K - 1] == doctest::Approx(t));
    const FiberSystem sys(F);
    const FiberSnapshot snap =
        enumerate_fiber(sys, spec.point(0, K - 1), cfg.trace.with_radius(pr.trace_radius));
    bool found = false;
    for (const auto& tr : pr.tracks[0]) {
        REQUIRE(tr.ids[K - 1] >= 0);
        const Vec anchor = anchor_point(snap.components[static_cast<std::size_t>(tr.ids[K - 1])]);
        CHECK(tr.stabilized);
        if (anchor[0] > 0) {
            CHECK(tr.parity == odd_side % 2);
            found = true;
        } else {
            CHECK(tr.parity == even_side % 2);
        }
    }
    CHECK(found);
}

TEST_CASE("parity verdicts on the fixtures")
{
    AnalysisConfig cfg = base_config();
    const Vec a = v1(0.0);
    const ApproachSpec spec = make_approach(a, cfg.approach);
    SUBCASE("fold family: every track even, not a bifurcation value")
    {
        const PolynomialMap f = plane("y*(2*x^2*y^2 - 9*x*y + 12)");
        // Closed-form oracle: x = u q(u)/t, y = t/q(u) with q(u) = 2u^2 - 9u + 12.
        const Polynomial m = milnor_polynomial(f, Vec::Zero(2));
        const double t = 1.0 / 128;
        auto curve = [&](double u) {
            const double q = 2 * u * u - 9 * u + 12;
            return v2(u * q / t, t / q);
        };
        const int oracle = sign_changes(curve, [&](const Vec& p) { return m.evaluate(p); }, -50.0, 50.0, 400000,
                                        1.0, 1e12);
        CHECK(oracle == 2);
        const ParityResult pr = parity_test(f, a, Vec::Zero(2), spec, cfg);
        CHECK(pr.in_s_c);
        CHECK(pr.verdict == Tri::Pass);
        for (const auto& dir : pr.tracks) {
            for (const auto& tr : dir) {
                CHECK(tr.stabilized);
                CHECK(tr.parity == 0);
            }
        }
    }
    SUBCASE("g: 0 is not in S_0")
    {
        const ParityResult pr = parity_test(plane("y*(x^2 + 1)"), a, Vec::Zero(2), spec, cfg);
        CHECK_FALSE(pr.in_s_c);
        CHECK(pr.verdict == Tri::Pass);
    }
}

TEST_CASE("parity counts survive a twofold refinement of the polylines")
{
    AnalysisConfig cfg = base_config();
    AnalysisConfig fine = cfg;
    fine.trace.chord_tol = 0.25 * cfg.trace.resolved().chord_tol * 20;
    fine.trace.step_max = 0.5 * cfg.trace.resolved().step_max * 20;
    const PolynomialMap F = plane("x + x^2*y");
    const Vec a = v1(0.0);
    const ApproachSpec spec = make_approach(a, cfg.approach);
    const CenterEstimate ce = estimate_s_c(F, Vec::Zero(2), cfg.trace);
    const ParityResult p1 = parity_test(F, a, Vec::Zero(2), spec, cfg, ce.estimate);
    const ParityResult p2 = parity_test(F, a, Vec::Zero(2), spec, fine, ce.estimate);
    REQUIRE(p1.tracks.size() == p2.tracks.size());
    for (std::size_t d = 0; d < p1.tracks.size(); ++d) {
        REQUIRE(p1.tracks[d].size() == p2.tracks[d].size());
        for (std::size_t j = 0; j < p1.tracks[d].size(); ++j) {
            CHECK(p1.tracks[d][j].counts == p2.tracks[d][j].counts);
        }
    }
}

TEST_CASE("parity verdicts agree for two valid centres")
{
    AnalysisConfig cfg = base_config();
    const Vec a = v1(0.0);
    const ApproachSpec spec = make_approach(a, cfg.approach);
    const char* fixtures[] = {"x + x^2*y", "y*(2*x^2*y^2 - 9*x*y + 12)", "y*(x^2 + 1)"};
    for (const char* text : fixtures) {
        CAPTURE(text);
        const PolynomialMap F = plane(text);
        const ParityResult p0 = parity_test(F, a, Vec::Zero(2), spec, cfg);
        const ParityResult p1 = parity_test(F, a, v2(0.37, -0.21), spec, cfg);
        CHECK(p0.verdict == p1.verdict);
    }
}
