#pragma once

#include <gmpxx.h>

#include <Eigen/Dense>

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bifurcurve {

using Rational = mpq_class;
using Exponents = std::vector<unsigned>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Graded lexicographic order with the largest monomial first: higher total
/// degree wins, ties broken lexicographically (x before y).
struct GrlexGreater {
    bool operator()(const Exponents& a, const Exponents& b) const;
};

/// Raised by the expression parser; offset is the 0-based byte position of
/// the offending token.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t offset, const std::string& message);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Sparse multivariate polynomial with exact rational coefficients.
///
/// Terms are kept in a map keyed by exponent vector, so no two terms share a
/// monomial and zero coefficients are never stored. A double-precision copy of
/// the coefficients is prepared at construction; numeric evaluation sums the
/// terms in graded-lex order and is therefore bit-reproducible.
class Polynomial {
public:
    using TermMap = std::map<Exponents, Rational, GrlexGreater>;

    Polynomial() = default;
    explicit Polynomial(std::vector<std::string> variables);
    Polynomial(std::vector<std::string> variables, TermMap terms);

    static Polynomial constant(std::vector<std::string> variables, const Rational& c);
    static Polynomial variable(std::vector<std::string> variables, std::size_t index);

    const std::vector<std::string>& variables() const noexcept { return vars_; }
    std::size_t num_variables() const noexcept { return vars_.size(); }
    const TermMap& terms() const noexcept { return terms_; }
    bool is_zero() const noexcept { return terms_.empty(); }
    bool is_constant() const;
    unsigned total_degree() const;

    Polynomial derivative(std::size_t var) const;
    Polynomial pow(unsigned e) const;

    double evaluate(std::span<const double> x) const;
    double evaluate(const Vec& x) const { return evaluate(std::span<const double>(x.data(), x.size())); }
    Rational evaluate_exact(std::span<const Rational> x) const;

    /// Canonical form: graded-lex order, explicit `*` and `^`, rational
    /// coefficients written as `p/q`.
    std::string to_string() const;

    Polynomial operator-() const;
    Polynomial& operator+=(const Polynomial& o);
    Polynomial& operator-=(const Polynomial& o);
    Polynomial& operator*=(const Polynomial& o);
    Polynomial& operator*=(const Rational& c);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
    friend Polynomial operator*(Polynomial a, const Polynomial& b) { return a *= b; }
    friend Polynomial operator*(Polynomial a, const Rational& c) { return a *= c; }
    friend bool operator==(const Polynomial& a, const Polynomial& b);

private:
    void require_same_variables(const Polynomial& o) const;
    void compile();

    std::vector<std::string> vars_;
    TermMap terms_;
    std::vector<double> coeffs_;
    std::vector<unsigned> exps_;
    unsigned max_exp_ = 0;
};

/// Polynomial map F: R^n -> R^(n-1); fibers of regular values are curves.
class PolynomialMap {
public:
    PolynomialMap() = default;
    explicit PolynomialMap(std::vector<Polynomial> components);

    std::size_t domain_dim() const noexcept { return vars_.size(); }
    std::size_t codomain_dim() const noexcept { return components_.size(); }
    const std::vector<std::string>& variables() const noexcept { return vars_; }
    const std::vector<Polynomial>& components() const noexcept { return components_; }
    /// Symbolic dF_i/dx_j.
    const Polynomial& partial(std::size_t i, std::size_t j) const { return partials_[i * vars_.size() + j]; }
    unsigned total_degree() const;

    Vec evaluate(const Vec& x) const;
    Mat jacobian(const Vec& x) const;
    /// Buffer-reusing forms for hot loops.
    void evaluate(const Vec& x, Vec& out) const;
    void jacobian(const Vec& x, Mat& out) const;
    std::string to_string() const;

    /// Copy whose numeric evaluation returns F(x) / (1 + |x|^2)^(e/2). The zero
    /// set is unchanged; residuals of far points become relative. Symbolic
    /// components and partials are not affected.
    PolynomialMap weighted(double exponent) const;
    double weight_exponent() const noexcept { return weight_; }

private:
    double weight_ = 0.0;
    std::vector<std::string> vars_;
    std::vector<Polynomial> components_;
    std::vector<Polynomial> partials_;
};

struct JacobianEval {
    Vec point;
    Mat matrix;
};

/// Parses a single polynomial expression.
///
/// Grammar (whitespace ignored):
///   expr    := ['+'|'-'] term { ('+'|'-') term }
///   term    := factor { ('*'|'/') factor }      division only by constants
///   factor  := ('+'|'-') factor | primary [ '^' uint ]
///   primary := number | identifier | '(' expr ')'
///   number  := digits [ '.' digits ] | '.' digits
Polynomial parse_polynomial(std::string_view text, const std::vector<std::string>& variables);

/// Parses `expr; expr; ...` with exactly variables.size() - 1 components.
PolynomialMap parse_map(std::string_view text, const std::vector<std::string>& variables);

/// Splits "x,y,z" into names, rejecting empty or duplicate names.
std::vector<std::string> parse_variable_list(std::string_view text);

Vec evaluate(const PolynomialMap& map, const Vec& point);
JacobianEval jacobian(const PolynomialMap& map, const Vec& point);

/// Exact conversion of a finite double to a rational.
Rational to_rational(double v);

/// Laplace-expansion determinant of a square polynomial matrix.
Polynomial determinant(const std::vector<std::vector<Polynomial>>& rows);

/// Determinant of the n x n matrix whose first n-1 rows are the symbolic
/// Jacobian of F and whose last row is (x_1 - c_1, ..., x_n - c_n). Its zero
/// set is the Milnor set M_c(F) off Sing F.
Polynomial milnor_polynomial(const PolynomialMap& map, std::span<const double> center);
inline Polynomial milnor_polynomial(const PolynomialMap& map, const Vec& center)
{
    return milnor_polynomial(map, std::span<const double>(center.data(), center.size()));
}

}  // namespace bifurcurve
