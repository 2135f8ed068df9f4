#pragma once

#include "bifurcurve/polynomial.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace bifurcurve {

/// Spatial hash over polyline segments, used to decide which traced
/// component (if any) a point lies on.
class ComponentLocator {
public:
    ComponentLocator(double radius, double tol);

    void add(const std::vector<Vec>& polyline, int id);

    /// Id of a component passing within tol of p, or -1. When tangent is
    /// non-empty the segment direction must also be compatible with it.
    int locate(const Vec& p, const Vec& tangent = Vec()) const;

    /// Distance from p to component id, or +inf when farther than the cell
    /// neighbourhood.
    double distance_to(int id, const Vec& p) const;

private:
    struct Segment {
        Vec a;
        Vec b;
        int id;
    };

    std::uint64_t key(const std::vector<long>& cell) const;
    std::vector<long> cell_of(const Vec& p) const;

    double cell_;
    double tol_;
    std::vector<Segment> segments_;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

}  // namespace bifurcurve
