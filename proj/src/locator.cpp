#include "bifurcurve/locator.hpp"

#include "bifurcurve/numerics.hpp"

#include <cmath>
#include <limits>

namespace bifurcurve {

ComponentLocator::ComponentLocator(double radius, double tol)
    : cell_(std::max(radius / 64.0, 4.0 * tol)), tol_(tol)
{
}

std::uint64_t ComponentLocator::key(const std::vector<long>& cell) const
{
    std::uint64_t h = 1469598103934665603ULL;
    for (long c : cell) {
        h ^= static_cast<std::uint64_t>(c) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<long> ComponentLocator::cell_of(const Vec& p) const
{
    std::vector<long> c(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        c[static_cast<std::size_t>(i)] = static_cast<long>(std::floor(p[i] / cell_));
    }
    return c;
}

void ComponentLocator::add(const std::vector<Vec>& polyline, int id)
{
    if (polyline.empty()) {
        return;
    }
    const std::size_t nseg = polyline.size() == 1 ? 1 : polyline.size() - 1;
    for (std::size_t s = 0; s < nseg; ++s) {
        const Vec& a = polyline[s];
        const Vec& b = polyline.size() == 1 ? polyline[s] : polyline[s + 1];
        const std::size_t index = segments_.size();
        segments_.push_back({a, b, id});
        const Vec lo = a.cwiseMin(b).array() - tol_;
        const Vec hi = a.cwiseMax(b).array() + tol_;
        const std::vector<long> clo = cell_of(lo);
        const std::vector<long> chi = cell_of(hi);
        std::vector<long> cur = clo;
        while (true) {
            buckets_[key(cur)].push_back(index);
            std::size_t k = 0;
            while (k < cur.size() && ++cur[k] > chi[k]) {
                cur[k] = clo[k];
                ++k;
            }
            if (k == cur.size()) {
                break;
            }
        }
    }
}

int ComponentLocator::locate(const Vec& p, const Vec& tangent) const
{
    const auto it = buckets_.find(key(cell_of(p)));
    if (it == buckets_.end()) {
        return -1;
    }
    int best = -1;
    double best_d = tol_;
    for (std::size_t idx : it->second) {
        const Segment& s = segments_[idx];
        const double d = point_segment_distance(p, s.a, s.b);
        if (d > best_d) {
            continue;
        }
        if (tangent.size() > 0) {
            const Vec dir = s.b - s.a;
            const double len = dir.norm();
            if (len > 0 && std::abs(tangent.dot(dir)) < 0.7 * len) {
                continue;
            }
        }
        best_d = d;
        best = s.id;
    }
    return best;
}

double ComponentLocator::distance_to(int id, const Vec& p) const
{
    const auto it = buckets_.find(key(cell_of(p)));
    double best = std::numeric_limits<double>::infinity();
    if (it == buckets_.end()) {
        return best;
    }
    for (std::size_t idx : it->second) {
        const Segment& s = segments_[idx];
        if (s.id == id) {
            best = std::min(best, point_segment_distance(p, s.a, s.b));
        }
    }
    return best;
}

}  // namespace bifurcurve
