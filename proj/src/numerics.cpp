#include "bifurcurve/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace bifurcurve {

NewtonResult newton_square(const SquareSystem& system, Vec x0, double tol, int max_iter, double max_step)
{
    NewtonResult r;
    r.x = std::move(x0);
    Vec f;
    Mat J;
    system(r.x, f, J);
    r.residual = f.norm();
    for (int it = 0; it < max_iter; ++it) {
        if (!std::isfinite(r.residual)) {
            return r;
        }
        if (r.residual <= tol) {
            r.converged = true;
            return r;
        }
        Eigen::PartialPivLU<Mat> lu(J);
        Vec dx = lu.solve(-f);
        if (!dx.allFinite()) {
            return r;
        }
        const double len = dx.norm();
        if (len > max_step) {
            dx *= max_step / len;
        }
        double lambda = 1.0;
        Vec trial;
        Vec ft;
        Mat Jt;
        bool improved = false;
        for (int k = 0; k < 8; ++k) {
            trial = r.x + lambda * dx;
            system(trial, ft, Jt);
            const double res = ft.norm();
            if (std::isfinite(res) && (res < r.residual || res <= tol)) {
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        r.iterations = it + 1;
        if (!improved) {
            // Accept the full step anyway once; Newton may need to climb out of
            // a flat region before it contracts.
            trial = r.x + dx;
            system(trial, ft, Jt);
            if (!ft.allFinite()) {
                return r;
            }
        }
        r.x = std::move(trial);
        f = std::move(ft);
        J = std::move(Jt);
        r.residual = f.norm();
        if (lambda * len < 1e-15 * (1.0 + r.x.norm()) && r.residual > tol) {
            return r;
        }
    }
    r.converged = r.residual <= tol;
    return r;
}

NewtonResult project_to_fiber(const PolynomialMap& map, const Vec& t, Vec x0, double tol, int max_iter,
                              double max_step)
{
    NewtonResult r;
    r.x = std::move(x0);
    Vec f = map.evaluate(r.x) - t;
    r.residual = f.norm();
    for (int it = 0; it < max_iter; ++it) {
        if (!std::isfinite(r.residual)) {
            return r;
        }
        if (r.residual <= tol) {
            r.converged = true;
            return r;
        }
        const Mat J = map.jacobian(r.x);
        const Mat JJt = J * J.transpose();
        Eigen::LDLT<Mat> ldlt(JJt);
        Vec dx = -J.transpose() * ldlt.solve(f);
        if (!dx.allFinite()) {
            return r;
        }
        const double len = dx.norm();
        if (len > max_step) {
            dx *= max_step / len;
        }
        double lambda = 1.0;
        Vec trial;
        Vec ft;
        for (int k = 0; k < 8; ++k) {
            trial = r.x + lambda * dx;
            ft = map.evaluate(trial) - t;
            if (ft.norm() < r.residual) {
                break;
            }
            lambda *= 0.5;
        }
        r.iterations = it + 1;
        r.x = std::move(trial);
        f = std::move(ft);
        r.residual = f.norm();
    }
    r.converged = r.residual <= tol;
    return r;
}

Vec null_direction(const Mat& jac)
{
    const Eigen::Index m = jac.rows();
    const Eigen::Index n = jac.cols();
    Vec v(n);
    if (n == 2) {
        v << -jac(0, 1), jac(0, 0);
    } else if (n == 3) {
        const Eigen::Vector3d a = jac.row(0).transpose();
        const Eigen::Vector3d b = jac.row(1).transpose();
        v = a.cross(b);
    } else {
        Mat minor(m, n - 1);
        for (Eigen::Index j = 0; j < n; ++j) {
            Eigen::Index c = 0;
            for (Eigen::Index k = 0; k < n; ++k) {
                if (k != j) {
                    minor.col(c++) = jac.col(k);
                }
            }
            const double d = minor.determinant();
            v[j] = (j % 2 == 0) ? d : -d;
        }
    }
    const double len = v.norm();
    if (len > 0) {
        v /= len;
    }
    return v;
}

Vec canonical_orientation(Vec v)
{
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > 1e-12) {
            if (v[i] < 0) {
                v = -v;
            }
            break;
        }
    }
    return v;
}

double min_singular_value(const Mat& jac)
{
    if (jac.rows() == 1) {
        return jac.row(0).norm();
    }
    Eigen::JacobiSVD<Mat> svd(jac);
    return svd.singularValues().minCoeff();
}

double point_segment_distance(const Vec& p, const Vec& a, const Vec& b)
{
    const Vec ab = b - a;
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) {
        return (p - a).norm();
    }
    const double s = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    return (p - a - s * ab).norm();
}

}  // namespace bifurcurve
