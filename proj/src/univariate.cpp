#include "bifurcurve/univariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bifurcurve::univariate {

void trim(Coeffs& p)
{
    while (!p.empty() && p.back() == 0) {
        p.pop_back();
    }
}

int degree(const Coeffs& p)
{
    return static_cast<int>(p.size()) - 1;
}

Coeffs derivative(const Coeffs& p)
{
    Coeffs d;
    for (std::size_t k = 1; k < p.size(); ++k) {
        d.push_back(p[k] * static_cast<long>(k));
    }
    trim(d);
    return d;
}

Coeffs multiply(const Coeffs& a, const Coeffs& b)
{
    if (a.empty() || b.empty()) {
        return {};
    }
    Coeffs out(a.size() + b.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0) {
            continue;
        }
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    trim(out);
    return out;
}

Coeffs add(const Coeffs& a, const Coeffs& b)
{
    Coeffs out(std::max(a.size(), b.size()), Rational(0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] += a[i];
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        out[i] += b[i];
    }
    trim(out);
    return out;
}

Coeffs remainder(const Coeffs& a, const Coeffs& b)
{
    if (b.empty()) {
        throw std::domain_error("polynomial division by zero");
    }
    Coeffs r = a;
    trim(r);
    const int db = degree(b);
    const Rational lead = b.back();
    while (!r.empty() && degree(r) >= db) {
        const Rational q = r.back() / lead;
        const int shift = degree(r) - db;
        for (int k = 0; k <= db; ++k) {
            r[static_cast<std::size_t>(k + shift)] -= q * b[static_cast<std::size_t>(k)];
        }
        r.back() = 0;
        trim(r);
    }
    return r;
}

Coeffs gcd(Coeffs a, Coeffs b)
{
    trim(a);
    trim(b);
    while (!b.empty()) {
        Coeffs r = remainder(a, b);
        a = std::move(b);
        b = std::move(r);
    }
    if (!a.empty()) {
        const Rational lead = a.back();
        for (auto& c : a) {
            c /= lead;
        }
    }
    return a;
}

Rational evaluate(const Coeffs& p, const Rational& u)
{
    Rational acc = 0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
        acc = acc * u + *it;
    }
    return acc;
}

double evaluate(const std::vector<double>& p, double u)
{
    double acc = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
        acc = acc * u + *it;
    }
    return acc;
}

namespace {

int sign(const Rational& v)
{
    return sgn(v);
}

// Primitive-ish scaling keeps the Sturm chain coefficients from growing: each
// remainder is divided by the absolute value of its leading coefficient,
// which preserves signs.
void normalize(Coeffs& p)
{
    if (p.empty()) {
        return;
    }
    const Rational lead = abs(p.back());
    for (auto& c : p) {
        c /= lead;
    }
}

struct SturmChain {
    std::vector<Coeffs> polys;

    explicit SturmChain(const Coeffs& p)
    {
        polys.push_back(p);
        polys.push_back(derivative(p));
        normalize(polys[0]);
        normalize(polys[1]);
        while (!polys.back().empty()) {
            Coeffs r = remainder(polys[polys.size() - 2], polys.back());
            for (auto& c : r) {
                c = -c;
            }
            normalize(r);
            if (r.empty()) {
                break;
            }
            polys.push_back(std::move(r));
        }
        if (polys.back().empty()) {
            polys.pop_back();
        }
    }

    int variations_at(const Rational& u) const
    {
        int count = 0;
        int prev = 0;
        for (const auto& q : polys) {
            const int s = sign(evaluate(q, u));
            if (s == 0) {
                continue;
            }
            if (prev != 0 && s != prev) {
                ++count;
            }
            prev = s;
        }
        return count;
    }

    int variations_at_infinity(bool positive) const
    {
        int count = 0;
        int prev = 0;
        for (const auto& q : polys) {
            int s = sign(q.back());
            if (!positive && (degree(q) % 2 == 1)) {
                s = -s;
            }
            if (prev != 0 && s != prev) {
                ++count;
            }
            prev = s;
        }
        return count;
    }
};

double refine_root(const std::vector<double>& pd, const Coeffs& p, const Rational& lo_r, const Rational& hi_r)
{
    double lo = lo_r.get_d();
    double hi = hi_r.get_d();
    int slo = sign(evaluate(p, lo_r));
    // Bisection in double on the exact sign where double evaluation is
    // ambiguous; the isolating interval guarantees one simple root.
    for (int it = 0; it < 200 && hi - lo > 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo));
         ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        double v = 0.0;
        double mag = 0.0;
        for (auto c = pd.rbegin(); c != pd.rend(); ++c) {
            v = v * mid + *c;
            mag = mag * std::abs(mid) + std::abs(*c);
        }
        int s;
        if (std::abs(v) > 4.0 * (static_cast<double>(pd.size()) + 2.0) * std::numeric_limits<double>::epsilon() * mag) {
            s = v > 0 ? 1 : -1;
        } else {
            s = sign(evaluate(p, Rational(mid)));
            if (s == 0) {
                return mid;
            }
        }
        if (s == slo) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

RealRoots real_roots(Coeffs p)
{
    trim(p);
    RealRoots out;
    if (p.size() <= 1) {
        return out;
    }
    const Coeffs g = gcd(p, derivative(p));
    if (degree(g) > 0) {
        out.multiple = !real_roots(g).roots.empty();
        // Work with the square-free part so every root is simple.
        Coeffs r = p;
        const int dg = degree(g);
        Coeffs quot(static_cast<std::size_t>(degree(p) - dg + 1), Rational(0));
        while (!r.empty() && degree(r) >= dg) {
            const Rational c = r.back() / g.back();
            const int shift = degree(r) - dg;
            quot[static_cast<std::size_t>(shift)] = c;
            for (int k = 0; k <= dg; ++k) {
                r[static_cast<std::size_t>(k + shift)] -= c * g[static_cast<std::size_t>(k)];
            }
            r.back() = 0;
            trim(r);
        }
        trim(quot);
        p = std::move(quot);
        if (p.size() <= 1) {
            return out;
        }
    }

    const SturmChain chain(p);
    const int total = chain.variations_at_infinity(false) - chain.variations_at_infinity(true);
    if (total <= 0) {
        return out;
    }

    // Cauchy bound on root magnitude.
    Rational bound = 0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        bound = std::max(bound, Rational(abs(p[k] / p.back())));
    }
    bound += 1;

    std::vector<double> pd;
    pd.reserve(p.size());
    for (const auto& c : p) {
        pd.push_back(c.get_d());
    }

    struct Interval {
        Rational lo, hi;
        int vlo, vhi;
    };
    std::vector<Interval> stack;
    const Rational lo0 = -bound;
    const Rational hi0 = bound;
    stack.push_back({lo0, hi0, chain.variations_at(lo0), chain.variations_at(hi0)});
    std::vector<std::pair<Rational, Rational>> isolated;
    while (!stack.empty()) {
        Interval iv = stack.back();
        stack.pop_back();
        const int count = iv.vlo - iv.vhi;
        if (count <= 0) {
            continue;
        }
        if (count == 1) {
            isolated.emplace_back(iv.lo, iv.hi);
            continue;
        }
        Rational mid = (iv.lo + iv.hi) / 2;
        // Never split exactly on a root.
        int nudge = 1;
        while (evaluate(p, mid) == 0) {
            mid = (iv.lo + iv.hi) / 2 + (iv.hi - iv.lo) / Rational(1024 + nudge);
            ++nudge;
        }
        const int vmid = chain.variations_at(mid);
        stack.push_back({mid, iv.hi, vmid, iv.vhi});
        stack.push_back({iv.lo, mid, iv.vlo, vmid});
    }
    for (const auto& [lo, hi] : isolated) {
        if (evaluate(p, hi) == 0) {
            out.roots.push_back(hi.get_d());
        } else {
            out.roots.push_back(refine_root(pd, p, lo, hi));
        }
    }
    std::sort(out.roots.begin(), out.roots.end());
    return out;
}

}  // namespace bifurcurve::univariate
