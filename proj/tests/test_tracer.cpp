#include <doctest.h>

#include "bifurcurve/tracer.hpp"
#include "grid_oracle.hpp"

#include <cmath>
#include <random>

using namespace bifurcurve;

namespace {

const std::vector<std::string> XY{"x", "y"};

Vec v1(double t)
{
    Vec v(1);
    v[0] = t;
    return v;
}

Vec v2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

TraceConfig cfg10()
{
    TraceConfig c;
    c.radius = 10.0;
    return c;
}

bool has_point_near(const std::vector<Vec>& pts, const Vec& q, double tol)
{
    for (const auto& p : pts) {
        if ((p - q).norm() <= tol) {
            return true;
        }
    }
    return false;
}

void check_component_invariants(const PolynomialMap& F, const FiberComponent& c, const TraceConfig& cfg_in)
{
    const TraceConfig cfg = cfg_in.resolved();
    CHECK(c.max_residual <= 10 * cfg.newton_tol);
    for (const auto& p : c.points) {
        CHECK((F.evaluate(p) - c.t).norm() <= 10 * cfg.newton_tol);
    }
    if (c.kind == ComponentKind::Circle) {
        CHECK(c.boundary_hits.empty());
        CHECK((c.points.front() - c.points.back()).norm() <= cfg.loop_close_tol);
    } else {
        REQUIRE(c.boundary_hits.size() == 2);
        CHECK(std::abs(c.points.front().norm() - cfg.radius) <= cfg.newton_tol);
        CHECK(std::abs(c.points.back().norm() - cfg.radius) <= cfg.newton_tol);
    }
}

}  // namespace

TEST_CASE("config defaults and validation")
{
    const TraceConfig c = cfg10().resolved();
    CHECK(c.step_min <= c.step_init);
    CHECK(c.step_init <= c.step_max);
    CHECK(c.dedup_tol == doctest::Approx(1e-5));
    CHECK(c.loop_close_tol == doctest::Approx(10 * c.step_min));
    TraceConfig bad = cfg10();
    bad.step_min = 1.0;
    bad.step_init = 0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg10();
    bad.newton_tol = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("vertical line meets the sphere at the poles")
{
    const PolynomialMap F = parse_map("x", XY);
    const auto seeds = find_seeds(F, v1(0.0), cfg10());
    CHECK(has_point_near(seeds, v2(0, 10), 1e-9));
    CHECK(has_point_near(seeds, v2(0, -10), 1e-9));
}

TEST_CASE("seeds lie on the fiber of g")
{
    const PolynomialMap g = parse_map("y*(x^2+1)", XY);
    const auto seeds = find_seeds(g, v1(1.0), cfg10());
    REQUIRE_FALSE(seeds.empty());
    for (const auto& p : seeds) {
        CHECK(std::abs(p[1] - 1.0 / (p[0] * p[0] + 1.0)) <= 1e-9);
    }
}

TEST_CASE("seeds reach every piece of x(1+xy)=0")
{
    const PolynomialMap f = parse_map("x + x^2*y", XY);
    const auto seeds = find_seeds(f, v1(0.0), cfg10());
    bool axis = false;
    bool right = false;
    bool left = false;
    for (const auto& p : seeds) {
        if (std::abs(p[0]) < 1e-9) {
            axis = true;
        } else if (std::abs(p[0] * p[1] + 1.0) < 1e-8) {
            (p[0] > 0 ? right : left) = true;
        }
    }
    CHECK(axis);
    CHECK(right);
    CHECK(left);
}

TEST_CASE("sphere crossings are exact and even")
{
    const PolynomialMap f = parse_map("x + x^2*y", XY);
    const FiberSystem sys(f);
    CHECK(sphere_crossings(sys, v1(0.5), 10.0, cfg10()).points.size() == 4);
    CHECK(sphere_crossings(sys, v1(0.0), 10.0, cfg10()).points.size() == 6);
    const FiberSystem circle(parse_map("x^2 + y^2", XY));
    CHECK(sphere_crossings(circle, v1(1.0), 10.0, cfg10()).points.empty());
    const SphereCrossings tangent = sphere_crossings(circle, v1(100.0), 10.0, cfg10());
    CHECK(tangent.tangential);
}

TEST_CASE("unit circle closes")
{
    const PolynomialMap F = parse_map("x^2 + y^2", XY);
    const FiberComponent c = trace_component(F, v1(1.0), v2(1, 0), cfg10());
    CHECK(c.kind == ComponentKind::Circle);
    CHECK(c.closed);
    CHECK_FALSE(c.incomplete);
    CHECK(c.min_norm == doctest::Approx(1.0).epsilon(1e-9));
    check_component_invariants(F, c, cfg10());
}

TEST_CASE("arc of g hits the sphere twice")
{
    const PolynomialMap g = parse_map("y*(x^2+1)", XY);
    const FiberComponent c = trace_component(g, v1(1.0), v2(0, 1), cfg10());
    CHECK(c.kind == ComponentKind::Arc);
    REQUIRE(c.boundary_hits.size() == 2);
    for (const auto& h : c.boundary_hits) {
        CHECK(h.norm() == doctest::Approx(10.0).epsilon(1e-10));
        CHECK(std::abs(h[1] - 1.0 / (h[0] * h[0] + 1.0)) <= 1e-9);
    }
    check_component_invariants(g, c, cfg10());
}

TEST_CASE("vertical line arc")
{
    const PolynomialMap F = parse_map("x", XY);
    const FiberComponent c = trace_component(F, v1(0.5), v2(0.5, 0), cfg10());
    CHECK(c.kind == ComponentKind::Arc);
    REQUIRE(c.boundary_hits.size() == 2);
    const double y = std::sqrt(100.0 - 0.25);
    CHECK(has_point_near(c.boundary_hits, v2(0.5, y), 1e-9));
    CHECK(has_point_near(c.boundary_hits, v2(0.5, -y), 1e-9));
    CHECK(c.min_norm == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("enumerate fibers of x + x^2 y")
{
    const PolynomialMap f = parse_map("x + x^2*y", XY);
    const FiberSnapshot s1 = enumerate_fiber(f, v1(1.0), cfg10());
    CHECK(s1.components.size() == 2);
    for (const auto& c : s1.components) {
        CHECK(c.kind == ComponentKind::Arc);
        check_component_invariants(f, c, cfg10());
    }
    CHECK(s1.reliable());
    const FiberSnapshot s0 = enumerate_fiber(f, v1(0.0), cfg10());
    CHECK(s0.components.size() == 3);
    for (const auto& c : s0.components) {
        CHECK(c.kind == ComponentKind::Arc);
    }
}

TEST_CASE("fibers of g are single arcs")
{
    const PolynomialMap g = parse_map("y*(x^2+1)", XY);
    for (double t : {-1.0, -0.6, -0.1, 0.0, 0.3, 0.75, 1.0}) {
        const FiberSnapshot s = enumerate_fiber(g, v1(t), cfg10());
        CHECK(s.components.size() == 1);
        CHECK(s.components[0].kind == ComponentKind::Arc);
    }
}

TEST_CASE("no duplicate components and idempotent retracing")
{
    const PolynomialMap f = parse_map("x + x^2*y", XY);
    const TraceConfig cfg = cfg10().resolved();
    const FiberSystem sys(f);
    const FiberSnapshot s = enumerate_fiber(sys, v1(-0.4), cfg);
    REQUIRE(s.components.size() == 2);
    CHECK(hausdorff_distance(s.components[0].points, s.components[1].points) > cfg.dedup_tol);
    for (const auto& c : s.components) {
        const Vec mid = c.points[c.points.size() / 3];
        const FiberComponent again = trace_component(sys, c.t, mid, cfg);
        CHECK(hausdorff_distance(c.points, again.points) <= cfg.dedup_tol);
    }
}

TEST_CASE("component counts agree with the marching-squares oracle")
{
    struct Fixture {
        const char* text;
        std::function<double(double, double)> phi;
        double lo;
        double hi;
    };
    const std::vector<Fixture> fixtures{
        {"x + x^2*y", [](double x, double y) { return x + x * x * y; }, 0.1, 1.0},
        {"y*(x^2+1)", [](double x, double y) { return y * (x * x + 1); }, -1.0, 1.0},
        {"x^2 + y^2", [](double x, double y) { return x * x + y * y; }, 0.5, 60.0},
        {"(x*y - 1)^2 + y^2", [](double x, double y) { return (x * y - 1) * (x * y - 1) + y * y; }, 0.3, 3.0},
    };
    std::mt19937_64 rng(99);
    for (const auto& fx : fixtures) {
        const PolynomialMap F = parse_map(fx.text, XY);
        const FiberSystem sys(F);
        std::uniform_real_distribution<double> u(fx.lo, fx.hi);
        for (int k = 0; k < 4; ++k) {
            double t = u(rng);
            if (fx.lo > 0 && k % 2 == 1 && std::string(fx.text) == "x + x^2*y") {
                t = -t;
            }
            const FiberSnapshot s = enumerate_fiber(sys, v1(t), cfg10());
            const oracle::GridCount g =
                oracle::grid_components([&](double x, double y) { return fx.phi(x, y) - t; }, 10.0);
            int circles = 0;
            for (const auto& c : s.components) {
                circles += c.kind == ComponentKind::Circle;
            }
            INFO(fx.text << " t=" << t);
            CHECK(circles == g.circles);
            CHECK(static_cast<int>(s.components.size()) - circles == g.arcs);
        }
    }
}

TEST_CASE("exterior restriction splits at the inner sphere")
{
    const PolynomialMap F = parse_map("x", XY);
    const FiberSystem sys(F);
    const TraceConfig cfg = cfg10();
    const FiberSnapshot s = enumerate_fiber(sys, v1(0.3), cfg);
    const FiberSnapshot ext = restrict_to_exterior(s, 5.0, sys, cfg);
    REQUIRE(ext.components.size() == 2);
    for (const auto& c : ext.components) {
        CHECK(c.boundary_hits.size() == 2);
        CHECK(c.min_norm == doctest::Approx(5.0).epsilon(1e-8));
    }
}

TEST_CASE("trace csv layout")
{
    const PolynomialMap F = parse_map("x", XY);
    const FiberSnapshot s = enumerate_fiber(F, v1(0.0), cfg10());
    const std::string csv = traces_csv(s, F);
    CHECK(csv.rfind("component_id,point_index,x1,x2,residual\n", 0) == 0);
}

TEST_CASE("a path through a saddle point is tainted")
{
    const FiberSystem saddle(parse_map("x^2 - y^2", XY));
    TraceConfig cfg;
    cfg.radius = 10.0;
    Vec t(1);
    t << 0.0;
    const FiberSnapshot crossing = enumerate_fiber(saddle, t, cfg);
    CHECK(crossing.tainted);
    CHECK_FALSE(crossing.reliable());
    t << 0.3;
    const FiberSnapshot regular = enumerate_fiber(saddle, t, cfg);
    CHECK_FALSE(regular.tainted);
    CHECK(regular.components.size() == 2);
}
