#include <doctest.h>

#include "bifurcurve/polynomial.hpp"

#include <cmath>
#include <cstring>
#include <random>

using namespace bifurcurve;

namespace {

const std::vector<std::string> XY{"x", "y"};
const std::vector<std::string> XYZ{"x", "y", "z"};

Vec pt(std::initializer_list<double> v)
{
    Vec p(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) {
        p[i++] = x;
    }
    return p;
}

std::size_t parse_offset(const std::string& text, const std::vector<std::string>& vars)
{
    try {
        parse_map(text, vars);
    } catch (const ParseError& e) {
        return e.offset();
    }
    return std::string::npos;
}

Mat finite_difference_jacobian(const PolynomialMap& map, const Vec& x)
{
    const double h = 1e-6 * std::max(1.0, x.norm());
    Mat J(static_cast<Eigen::Index>(map.codomain_dim()), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        Vec a = x;
        Vec b = x;
        a[j] += h;
        b[j] -= h;
        J.col(j) = (map.evaluate(a) - map.evaluate(b)) / (2 * h);
    }
    return J;
}

}  // namespace

TEST_CASE("parse the introduction example")
{
    const PolynomialMap f = parse_map("x + x^2*y", XY);
    CHECK(f.codomain_dim() == 1);
    CHECK(f.domain_dim() == 2);
    CHECK(f.total_degree() == 3);
}

TEST_CASE("products are expanded")
{
    const PolynomialMap g = parse_map("y*(x^2+1)", XY);
    CHECK(g.components()[0] == parse_polynomial("x^2*y + y", XY));
    CHECK(g.components()[0].terms().size() == 2);
}

TEST_CASE("parse errors carry offsets")
{
    CHECK(parse_offset("x +* y", XY) == 3);
    CHECK_THROWS_AS(parse_map("x + w", XY), ParseError);
    CHECK_THROWS_AS(parse_map("x^1.5", XY), ParseError);
    CHECK_THROWS_AS(parse_map("x^-2", XY), ParseError);
    CHECK_THROWS_AS(parse_map("x; y", XY), ParseError);
    CHECK_THROWS_AS(parse_map("x", XYZ), ParseError);
    CHECK_THROWS_AS(parse_map("(x + y", XY), ParseError);
    CHECK_THROWS_AS(parse_map("x / y", XY), ParseError);
    CHECK(parse_offset("x + w", XY) == 4);
}

TEST_CASE("decimal literals are exact")
{
    const Polynomial p = parse_polynomial("0.1*x", XY);
    const Rational c = p.terms().begin()->second;
    CHECK(c == Rational(1, 10));
    CHECK(parse_polynomial("x/4", XY) == parse_polynomial("0.25*x", XY));
}

TEST_CASE("evaluation")
{
    const PolynomialMap f = parse_map("x + x^2*y", XY);
    CHECK(evaluate(f, pt({1, 1}))[0] == doctest::Approx(2.0));
    const PolynomialMap g = parse_map("y*(x^2+1)", XY);
    for (double t : {-3.5, 0.0, 0.25, 7.0}) {
        CHECK(evaluate(g, pt({0, t}))[0] == t);
    }
    const PolynomialMap h = parse_map("y*(2*x^2*y^2 - 9*x*y + 12)", XY);
    CHECK(evaluate(h, pt({0, 1}))[0] == 12.0);
    CHECK_THROWS_AS(evaluate(f, pt({1, 2, 3})), DimensionError);
}

TEST_CASE("evaluation is bit-reproducible")
{
    const PolynomialMap h = parse_map("y*(2*x^2*y^2 - 9*x*y + 12) + 0.3*x^5 - 1.7", XY);
    const Vec p = pt({1.234567, -0.987654});
    const double a = h.evaluate(p)[0];
    const double b = h.evaluate(p)[0];
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("jacobian examples")
{
    const PolynomialMap f = parse_map("x + x^2*y", XY);
    const JacobianEval jf = jacobian(f, pt({0, 0}));
    CHECK(jf.matrix(0, 0) == 1.0);
    CHECK(jf.matrix(0, 1) == 0.0);
    const PolynomialMap g = parse_map("y*(x^2+1)", XY);
    const JacobianEval jg = jacobian(g, pt({0, 0}));
    CHECK(jg.matrix(0, 0) == 0.0);
    CHECK(jg.matrix(0, 1) == 1.0);
}

TEST_CASE("jacobian agrees with central differences")
{
    const std::vector<std::pair<std::string, std::vector<std::string>>> maps{
        {"x + x^2*y", XY},
        {"y*(x^2+1)", XY},
        {"y*(2*x^2*y^2 - 9*x*y + 12)", XY},
        {"(x*y - 1)^2 + y^2", XY},
        {"z; x + x^2*y", XYZ},
        {"x*y*z - z^3 + 2; x^2 - y*z", XYZ},
    };
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (const auto& [text, vars] : maps) {
        const PolynomialMap F = parse_map(text, vars);
        for (int k = 0; k < 100; ++k) {
            Vec x(static_cast<Eigen::Index>(vars.size()));
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                x[i] = u(rng);
            }
            const Mat J = F.jacobian(x);
            const Mat fd = finite_difference_jacobian(F, x);
            const double scale = std::max(1.0, J.norm());
            CHECK((J - fd).norm() / scale <= 1e-6);
        }
    }
}

TEST_CASE("printing round-trips")
{
    for (const char* text : {"x + x^2*y", "y*(x^2+1)", "y*(2*x^2*y^2 - 9*x*y + 12)", "(x*y - 1)^2 + y^2",
                             "0.1*x - 3/7*y^4 + 5"}) {
        const PolynomialMap F = parse_map(text, XY);
        const PolynomialMap G = parse_map(F.to_string(), XY);
        CHECK(F.components()[0] == G.components()[0]);
        CHECK(F.to_string() == G.to_string());
    }
    const PolynomialMap F3 = parse_map("z; x + x^2*y", XYZ);
    const PolynomialMap G3 = parse_map(F3.to_string(), XYZ);
    CHECK(F3.components()[1] == G3.components()[1]);
}

TEST_CASE("printed form is graded lex with explicit operators")
{
    CHECK(parse_polynomial("x + x^2*y", XY).to_string() == "x^2*y + x");
    CHECK(parse_polynomial("y*(x^2+1)", XY).to_string() == "x^2*y + y");
}

TEST_CASE("milnor polynomial examples")
{
    const Vec origin = Vec::Zero(2);
    const Polynomial mf = milnor_polynomial(parse_map("x + x^2*y", XY), origin);
    // det[[1+2xy, x^2],[x, y]]
    const Polynomial expected_f = parse_polynomial("y + 2*x*y^2 - x^3", XY);
    CHECK(mf == expected_f);
    CHECK(-mf == parse_polynomial("x^3 - y - 2*x*y^2", XY));

    CHECK(milnor_polynomial(parse_map("x", XY), origin) == parse_polynomial("y", XY));

    const Polynomial mg = milnor_polynomial(parse_map("y*(x^2+1)", XY), origin);
    CHECK(mg == parse_polynomial("2*x*y^2 - x^3 - x", XY));

    const Polynomial mh = milnor_polynomial(parse_map("y*(2*x^2*y^2 - 9*x*y + 12)", XY), origin);
    const Polynomial listed = parse_polynomial("6*x^3*y^2 - 18*x^2*y + 12*x - 4*x*y^4 + 9*y^3", XY);
    CHECK((mh == listed || mh == -listed));
}

TEST_CASE("planar milnor identity on fixtures")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (const char* text : {"x + x^2*y", "y*(x^2+1)", "y*(2*x^2*y^2 - 9*x*y + 12)", "(x*y - 1)^2 + y^2",
                             "x^2 + y^2", "x"}) {
        const PolynomialMap F = parse_map(text, XY);
        for (int k = 0; k < 4; ++k) {
            // Dyadic centres so the double-to-rational conversion is short.
            Vec c(2);
            c << std::round(u(rng) * 8) / 8, std::round(u(rng) * 8) / 8;
            const Polynomial m = milnor_polynomial(F, c);
            const Polynomial xc = Polynomial::variable(XY, 0) - Polynomial::constant(XY, to_rational(c[0]));
            const Polynomial yc = Polynomial::variable(XY, 1) - Polynomial::constant(XY, to_rational(c[1]));
            const Polynomial oracle = xc * F.partial(0, 1) - yc * F.partial(0, 0);
            CHECK((m == oracle || m == -oracle));
        }
    }
}

TEST_CASE("milnor polynomial in three variables matches a numeric determinant")
{
    const PolynomialMap F = parse_map("x*y*z - z^3 + 2; x^2 - y*z", XYZ);
    Vec c(3);
    c << 0.5, -1.25, 2.0;
    const Polynomial m = milnor_polynomial(F, c);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int k = 0; k < 20; ++k) {
        Vec x(3);
        x << u(rng), u(rng), u(rng);
        Mat M(3, 3);
        M.topRows(2) = F.jacobian(x);
        M.row(2) = (x - c).transpose();
        CHECK(m.evaluate(x) == doctest::Approx(M.determinant()).epsilon(1e-10));
    }
}

TEST_CASE("variable lists")
{
    CHECK(parse_variable_list("x,y,z") == XYZ);
    CHECK_THROWS_AS(parse_variable_list("x,,y"), ParseError);
    CHECK_THROWS_AS(parse_variable_list("x,x"), ParseError);
}
