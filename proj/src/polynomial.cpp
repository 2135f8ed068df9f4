#include "bifurcurve/polynomial.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace bifurcurve {

bool GrlexGreater::operator()(const Exponents& a, const Exponents& b) const
{
    const unsigned da = std::accumulate(a.begin(), a.end(), 0u);
    const unsigned db = std::accumulate(b.begin(), b.end(), 0u);
    if (da != db) {
        return da > db;
    }
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

ParseError::ParseError(std::size_t offset, const std::string& message)
    : std::runtime_error("offset " + std::to_string(offset) + ": " + message), offset_(offset)
{
}

// ---------------------------------------------------------------------------
// Polynomial
// ---------------------------------------------------------------------------

Polynomial::Polynomial(std::vector<std::string> variables) : vars_(std::move(variables))
{
    compile();
}

Polynomial::Polynomial(std::vector<std::string> variables, TermMap terms)
    : vars_(std::move(variables)), terms_(std::move(terms))
{
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (it->first.size() != vars_.size()) {
            throw DimensionError("exponent vector length does not match variable count");
        }
        if (it->second == 0) {
            it = terms_.erase(it);
        } else {
            ++it;
        }
    }
    compile();
}

Polynomial Polynomial::constant(std::vector<std::string> variables, const Rational& c)
{
    TermMap t;
    if (c != 0) {
        t.emplace(Exponents(variables.size(), 0u), c);
    }
    return Polynomial(std::move(variables), std::move(t));
}

Polynomial Polynomial::variable(std::vector<std::string> variables, std::size_t index)
{
    if (index >= variables.size()) {
        throw DimensionError("variable index out of range");
    }
    Exponents e(variables.size(), 0u);
    e[index] = 1;
    TermMap t;
    t.emplace(std::move(e), Rational(1));
    return Polynomial(std::move(variables), std::move(t));
}

bool Polynomial::is_constant() const
{
    return terms_.empty() || (terms_.size() == 1 && total_degree() == 0);
}

unsigned Polynomial::total_degree() const
{
    if (terms_.empty()) {
        return 0;
    }
    const auto& e = terms_.begin()->first;
    return std::accumulate(e.begin(), e.end(), 0u);
}

void Polynomial::compile()
{
    coeffs_.clear();
    exps_.clear();
    max_exp_ = 0;
    coeffs_.reserve(terms_.size());
    exps_.reserve(terms_.size() * vars_.size());
    for (const auto& [e, c] : terms_) {
        coeffs_.push_back(c.get_d());
        for (unsigned k : e) {
            exps_.push_back(k);
            max_exp_ = std::max(max_exp_, k);
        }
    }
}

void Polynomial::require_same_variables(const Polynomial& o) const
{
    if (vars_ != o.vars_) {
        throw DimensionError("polynomials over different variable lists");
    }
}

Polynomial Polynomial::operator-() const
{
    TermMap t = terms_;
    for (auto& kv : t) {
        kv.second = -kv.second;
    }
    return Polynomial(vars_, std::move(t));
}

Polynomial& Polynomial::operator+=(const Polynomial& o)
{
    require_same_variables(o);
    for (const auto& [e, c] : o.terms_) {
        auto [it, inserted] = terms_.try_emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) {
                terms_.erase(it);
            }
        }
    }
    compile();
    return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o)
{
    return *this += -o;
}

Polynomial& Polynomial::operator*=(const Polynomial& o)
{
    require_same_variables(o);
    TermMap out;
    Exponents e(vars_.size());
    for (const auto& [ea, ca] : terms_) {
        for (const auto& [eb, cb] : o.terms_) {
            for (std::size_t i = 0; i < e.size(); ++i) {
                e[i] = ea[i] + eb[i];
            }
            auto [it, inserted] = out.try_emplace(e, ca * cb);
            if (!inserted) {
                it->second += ca * cb;
            }
        }
    }
    std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
    terms_ = std::move(out);
    compile();
    return *this;
}

Polynomial& Polynomial::operator*=(const Rational& c)
{
    if (c == 0) {
        terms_.clear();
    } else {
        for (auto& kv : terms_) {
            kv.second *= c;
        }
    }
    compile();
    return *this;
}

bool operator==(const Polynomial& a, const Polynomial& b)
{
    return a.vars_ == b.vars_ && a.terms_ == b.terms_;
}

Polynomial Polynomial::pow(unsigned e) const
{
    Polynomial result = constant(vars_, 1);
    Polynomial base = *this;
    while (e > 0) {
        if (e & 1u) {
            result *= base;
        }
        e >>= 1u;
        if (e > 0) {
            base *= base;
        }
    }
    return result;
}

Polynomial Polynomial::derivative(std::size_t var) const
{
    if (var >= vars_.size()) {
        throw DimensionError("derivative variable out of range");
    }
    TermMap out;
    for (const auto& [e, c] : terms_) {
        if (e[var] == 0) {
            continue;
        }
        Exponents d = e;
        d[var] -= 1;
        out.emplace(std::move(d), c * e[var]);
    }
    return Polynomial(vars_, std::move(out));
}

double Polynomial::evaluate(std::span<const double> x) const
{
    const std::size_t n = vars_.size();
    if (x.size() != n) {
        throw DimensionError("point has " + std::to_string(x.size()) + " coordinates, expected " +
                             std::to_string(n));
    }
    constexpr std::size_t kStack = 256;
    const std::size_t width = max_exp_ + 1;
    std::array<double, kStack> stack_table;
    std::vector<double> heap_table;
    double* table = stack_table.data();
    if (n * width > kStack) {
        heap_table.resize(n * width);
        table = heap_table.data();
    }
    for (std::size_t i = 0; i < n; ++i) {
        double* row = table + i * width;
        row[0] = 1.0;
        for (std::size_t k = 1; k < width; ++k) {
            row[k] = row[k - 1] * x[i];
        }
    }
    double sum = 0.0;
    const unsigned* e = exps_.data();
    for (double c : coeffs_) {
        double term = c;
        for (std::size_t i = 0; i < n; ++i, ++e) {
            term *= table[i * width + *e];
        }
        sum += term;
    }
    return sum;
}

Rational Polynomial::evaluate_exact(std::span<const Rational> x) const
{
    if (x.size() != vars_.size()) {
        throw DimensionError("point dimension mismatch");
    }
    Rational sum = 0;
    for (const auto& [e, c] : terms_) {
        Rational term = c;
        for (std::size_t i = 0; i < e.size(); ++i) {
            for (unsigned k = 0; k < e[i]; ++k) {
                term *= x[i];
            }
        }
        sum += term;
    }
    return sum;
}

std::string Polynomial::to_string() const
{
    if (terms_.empty()) {
        return "0";
    }
    std::ostringstream os;
    bool first = true;
    for (const auto& [e, c] : terms_) {
        const bool negative = c < 0;
        if (first) {
            if (negative) {
                os << "-";
            }
        } else {
            os << (negative ? " - " : " + ");
        }
        first = false;
        const Rational mag = abs(c);
        std::string mono;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) {
                continue;
            }
            if (!mono.empty()) {
                mono += "*";
            }
            mono += vars_[i];
            if (e[i] > 1) {
                mono += "^" + std::to_string(e[i]);
            }
        }
        if (mono.empty()) {
            os << mag.get_str();
        } else if (mag == 1) {
            os << mono;
        } else {
            os << mag.get_str() << "*" << mono;
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// PolynomialMap
// ---------------------------------------------------------------------------

PolynomialMap::PolynomialMap(std::vector<Polynomial> components) : components_(std::move(components))
{
    if (components_.empty()) {
        throw DimensionError("polynomial map needs at least one component");
    }
    vars_ = components_.front().variables();
    for (const auto& c : components_) {
        if (c.variables() != vars_) {
            throw DimensionError("map components use different variable lists");
        }
    }
    if (vars_.size() < 2) {
        throw DimensionError("domain dimension must be at least 2");
    }
    if (components_.size() + 1 != vars_.size()) {
        throw DimensionError("map has " + std::to_string(components_.size()) +
                             " components, expected " + std::to_string(vars_.size() - 1));
    }
    partials_.reserve(components_.size() * vars_.size());
    for (const auto& c : components_) {
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            partials_.push_back(c.derivative(j));
        }
    }
}

unsigned PolynomialMap::total_degree() const
{
    unsigned d = 0;
    for (const auto& c : components_) {
        d = std::max(d, c.total_degree());
    }
    return d;
}

Vec PolynomialMap::evaluate(const Vec& x) const
{
    Vec out;
    evaluate(x, out);
    return out;
}

void PolynomialMap::evaluate(const Vec& x, Vec& out) const
{
    if (static_cast<std::size_t>(x.size()) != vars_.size()) {
        throw DimensionError("point dimension mismatch");
    }
    out.resize(static_cast<Eigen::Index>(components_.size()));
    for (std::size_t i = 0; i < components_.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = components_[i].evaluate(x);
    }
    if (weight_ > 0) {
        out /= std::pow(1.0 + x.squaredNorm(), 0.5 * weight_);
    }
}

Mat PolynomialMap::jacobian(const Vec& x) const
{
    Mat J;
    jacobian(x, J);
    return J;
}

void PolynomialMap::jacobian(const Vec& x, Mat& J) const
{
    if (static_cast<std::size_t>(x.size()) != vars_.size()) {
        throw DimensionError("point dimension mismatch");
    }
    const auto m = static_cast<Eigen::Index>(components_.size());
    const auto n = static_cast<Eigen::Index>(vars_.size());
    J.resize(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            J(i, j) = partials_[static_cast<std::size_t>(i * n + j)].evaluate(x);
        }
    }
    if (weight_ > 0) {
        // d(F/w) = dF/w - F dw/w^2 with dw/w = e x / (1 + |x|^2).
        const double s = 1.0 + x.squaredNorm();
        const double w = std::pow(s, 0.5 * weight_);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double f = components_[static_cast<std::size_t>(i)].evaluate(x);
            J.row(i) = (J.row(i) - (f * weight_ / s) * x.transpose()) / w;
        }
    }
}

PolynomialMap PolynomialMap::weighted(double exponent) const
{
    if (!(exponent >= 0) || !std::isfinite(exponent)) {
        throw std::invalid_argument("weight exponent must be finite and non-negative");
    }
    PolynomialMap out = *this;
    out.weight_ = exponent;
    return out;
}

std::string PolynomialMap::to_string() const
{
    std::string s;
    for (std::size_t i = 0; i < components_.size(); ++i) {
        if (i > 0) {
            s += "; ";
        }
        s += components_[i].to_string();
    }
    return s;
}

Vec evaluate(const PolynomialMap& map, const Vec& point)
{
    return map.evaluate(point);
}

JacobianEval jacobian(const PolynomialMap& map, const Vec& point)
{
    return {point, map.jacobian(point)};
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace {

class Parser {
public:
    Parser(std::string_view text, const std::vector<std::string>& vars, std::size_t base)
        : text_(text), vars_(vars), base_(base)
    {
    }

    Polynomial parse_all()
    {
        skip_ws();
        if (pos_ >= text_.size()) {
            fail("empty expression");
        }
        Polynomial p = expr();
        skip_ws();
        if (pos_ < text_.size()) {
            fail(std::string("unexpected '") + text_[pos_] + "'");
        }
        return p;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(base_ + pos_, msg); }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    bool peek(char c)
    {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    Polynomial expr()
    {
        Polynomial acc = Polynomial::constant(vars_, 0);
        bool negate = false;
        if (peek('+') || peek('-')) {
            negate = text_[pos_] == '-';
            ++pos_;
        }
        Polynomial t = term();
        acc = negate ? -t : t;
        while (peek('+') || peek('-')) {
            const bool minus = text_[pos_] == '-';
            ++pos_;
            Polynomial rhs = term();
            if (minus) {
                acc -= rhs;
            } else {
                acc += rhs;
            }
        }
        return acc;
    }

    Polynomial term()
    {
        Polynomial acc = factor();
        while (peek('*') || peek('/')) {
            const bool divide = text_[pos_] == '/';
            const std::size_t at = pos_;
            ++pos_;
            Polynomial rhs = factor();
            if (divide) {
                if (!rhs.is_constant()) {
                    throw ParseError(base_ + at, "division by a non-constant");
                }
                if (rhs.is_zero()) {
                    throw ParseError(base_ + at, "division by zero");
                }
                acc *= Rational(1) / rhs.terms().begin()->second;
            } else {
                acc *= rhs;
            }
        }
        return acc;
    }

    Polynomial factor()
    {
        if (peek('+')) {
            ++pos_;
            return factor();
        }
        if (peek('-')) {
            ++pos_;
            return -factor();
        }
        Polynomial base = primary();
        if (peek('^')) {
            ++pos_;
            skip_ws();
            if (pos_ < text_.size() && text_[pos_] == '-') {
                fail("negative exponent");
            }
            if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                if (pos_ < text_.size() && text_[pos_] == '.') {
                    fail("non-integer exponent");
                }
                fail("expected integer exponent");
            }
            const std::size_t start = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
            if (pos_ < text_.size() && text_[pos_] == '.') {
                throw ParseError(base_ + start, "non-integer exponent");
            }
            const std::string digits(text_.substr(start, pos_ - start));
            if (digits.size() > 4) {
                throw ParseError(base_ + start, "exponent too large");
            }
            return base.pow(static_cast<unsigned>(std::stoul(digits)));
        }
        return base;
    }

    Polynomial primary()
    {
        skip_ws();
        if (pos_ >= text_.size()) {
            fail("unexpected end of expression");
        }
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Polynomial inner = expr();
            if (!peek(')')) {
                fail("expected ')'");
            }
            ++pos_;
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return number();
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const std::size_t start = pos_;
            while (pos_ < text_.size() &&
                   (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
                ++pos_;
            }
            const std::string name(text_.substr(start, pos_ - start));
            const auto it = std::find(vars_.begin(), vars_.end(), name);
            if (it == vars_.end()) {
                throw ParseError(base_ + start, "unknown variable '" + name + "'");
            }
            return Polynomial::variable(vars_, static_cast<std::size_t>(it - vars_.begin()));
        }
        fail(std::string("unexpected '") + c + "'");
    }

    Polynomial number()
    {
        const std::size_t start = pos_;
        std::string int_part;
        std::string frac_part;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            int_part += text_[pos_++];
        }
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                frac_part += text_[pos_++];
            }
            if (int_part.empty() && frac_part.empty()) {
                throw ParseError(base_ + start, "malformed number");
            }
        }
        mpz_class num(int_part.empty() ? std::string("0") : int_part);
        mpz_class den = 1;
        for (char d : frac_part) {
            num = num * 10 + (d - '0');
            den *= 10;
        }
        Rational value(num, den);
        value.canonicalize();
        return Polynomial::constant(vars_, value);
    }

    std::string_view text_;
    const std::vector<std::string>& vars_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(std::string_view text, const std::vector<std::string>& variables)
{
    return Parser(text, variables, 0).parse_all();
}

PolynomialMap parse_map(std::string_view text, const std::vector<std::string>& variables)
{
    if (variables.size() < 2) {
        throw ParseError(0, "need at least two variables");
    }
    std::vector<Polynomial> comps;
    std::size_t start = 0;
    while (true) {
        const std::size_t semi = text.find(';', start);
        const std::size_t end = semi == std::string_view::npos ? text.size() : semi;
        comps.push_back(Parser(text.substr(start, end - start), variables, start).parse_all());
        if (semi == std::string_view::npos) {
            break;
        }
        start = semi + 1;
    }
    if (comps.size() + 1 != variables.size()) {
        throw ParseError(text.size(), "map has " + std::to_string(comps.size()) + " components, expected " +
                                          std::to_string(variables.size() - 1));
    }
    return PolynomialMap(std::move(comps));
}

std::vector<std::string> parse_variable_list(std::string_view text)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = text.find(',', start);
        const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
        std::string name(text.substr(start, end - start));
        std::erase_if(name, [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
        const bool ok = !name.empty() && (std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_') &&
                        std::all_of(name.begin(), name.end(), [](char c) {
                            return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
                        });
        if (!ok) {
            throw ParseError(start, "bad variable name '" + name + "'");
        }
        if (std::find(out.begin(), out.end(), name) != out.end()) {
            throw ParseError(start, "duplicate variable '" + name + "'");
        }
        out.push_back(std::move(name));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Determinants
// ---------------------------------------------------------------------------

Rational to_rational(double v)
{
    if (!std::isfinite(v)) {
        throw std::invalid_argument("cannot convert non-finite value to rational");
    }
    Rational r(v);  // GMP converts doubles exactly
    r.canonicalize();
    return r;
}

Polynomial determinant(const std::vector<std::vector<Polynomial>>& rows)
{
    const std::size_t n = rows.size();
    if (n == 0) {
        throw DimensionError("empty matrix");
    }
    for (const auto& r : rows) {
        if (r.size() != n) {
            throw DimensionError("matrix is not square");
        }
    }
    if (n == 1) {
        return rows[0][0];
    }
    if (n == 2) {
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0];
    }
    // Expansion along the first row.
    const auto& vars = rows[0][0].variables();
    Polynomial sum = Polynomial::constant(vars, 0);
    for (std::size_t j = 0; j < n; ++j) {
        if (rows[0][j].is_zero()) {
            continue;
        }
        std::vector<std::vector<Polynomial>> minor;
        minor.reserve(n - 1);
        for (std::size_t i = 1; i < n; ++i) {
            std::vector<Polynomial> r;
            r.reserve(n - 1);
            for (std::size_t k = 0; k < n; ++k) {
                if (k != j) {
                    r.push_back(rows[i][k]);
                }
            }
            minor.push_back(std::move(r));
        }
        Polynomial term = rows[0][j] * determinant(minor);
        if (j % 2 == 0) {
            sum += term;
        } else {
            sum -= term;
        }
    }
    return sum;
}

Polynomial milnor_polynomial(const PolynomialMap& map, std::span<const double> center)
{
    const std::size_t n = map.domain_dim();
    if (center.size() != n) {
        throw DimensionError("center dimension mismatch");
    }
    const auto& vars = map.variables();
    std::vector<std::vector<Polynomial>> rows;
    rows.reserve(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::vector<Polynomial> r;
        r.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            r.push_back(map.partial(i, j));
        }
        rows.push_back(std::move(r));
    }
    std::vector<Polynomial> last;
    last.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
        last.push_back(Polynomial::variable(vars, j) - Polynomial::constant(vars, to_rational(center[j])));
    }
    rows.push_back(std::move(last));
    return determinant(rows);
}

}  // namespace bifurcurve
