#pragma once

#include "bifurcurve/numerics.hpp"
#include "bifurcurve/polynomial.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bifurcurve {

/// Tracing parameters. Length-valued fields left at 0 are derived from the
/// radius by resolved(), so a copy with a new radius rescales them.
struct TraceConfig {
    double radius = 10.0;
    double step_init = 0.0;       // auto: radius / 400
    double step_min = 0.0;        // auto: radius * 1e-9
    double step_max = 0.0;        // auto: radius / 40
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    double loop_close_tol = 0.0;  // auto: 10 * step_min
    double dedup_tol = 0.0;       // auto: 1e-6 * radius
    int seed_grid = 32;           // lattice points per axis (halved for n >= 3)
    double chord_tol = 0.0;       // auto: 5e-7 * radius; bound on polyline sagitta
    double max_turn = 0.25;       // radians of tangent rotation per step
    double singular_tol = 1e-6;   // Jacobian min singular value that taints a trace
    double tangency_angle = 1e-3; // sphere crossings flatter than this are tangential
    std::size_t max_steps = 400000;
    std::uint64_t rng_seed = 20130611;

    TraceConfig with_radius(double r) const;
    /// Copy with every auto field filled in.
    TraceConfig resolved() const;
    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const;
    double member_tol() const;
};

enum class ComponentKind { Circle, Arc };
std::string to_string(ComponentKind k);

/// One traced connected component of X_t inside the ball B_R.
struct FiberComponent {
    Vec t;
    std::vector<Vec> points;
    ComponentKind kind = ComponentKind::Arc;
    bool closed = false;
    std::vector<Vec> boundary_hits;
    Vec min_norm_point;
    double min_norm = 0.0;
    bool min_norm_at_boundary = false;  // infimum not attained inside B_R
    double max_residual = 0.0;
    double min_singular = std::numeric_limits<double>::infinity();
    bool tainted = false;     // near-singular Jacobian met
    bool incomplete = false;  // step underflow or step budget exhausted
    std::string issue;

    double diameter() const;
};

struct SeedAudit {
    std::size_t sphere = 0;     // family (i): F(x)=t on the sphere
    std::size_t lattice = 0;    // family (ii): Newton from the interior lattice
    std::size_t min_norm = 0;   // family (iii): {F=t, m_c=0}
    std::size_t found = 0;
    std::size_t merged = 0;     // seeds already on a traced component
    std::size_t rejected = 0;   // seeds at a near-singular point
    std::size_t skipped = 0;    // lattice points projecting onto a traced component
};

struct FiberSnapshot {
    Vec t;
    double radius = 0.0;
    std::vector<FiberComponent> components;
    SeedAudit seed_audit;
    bool tainted = false;
    bool incomplete = false;
    double min_singular = std::numeric_limits<double>::infinity();

    bool reliable() const { return !tainted && !incomplete; }
    /// Component containing p (within tol, tangent-compatible), or -1.
    int component_of(const Vec& p, double tol) const;
};

/// Immutable per-map data shared by all tracing calls: the map and the
/// Milnor polynomials used to seed compact components.
class FiberSystem {
public:
    explicit FiberSystem(PolynomialMap map, std::uint64_t seed = 20130611);

    const PolynomialMap& map() const noexcept { return map_; }
    std::size_t dim() const noexcept { return map_.domain_dim(); }

    /// Milnor polynomial for center 0 (empty optional when identically zero).
    const std::optional<Polynomial>& milnor_origin() const noexcept { return milnor_[0]; }
    std::size_t num_centers() const noexcept { return centers_.size(); }
    const Vec& center(std::size_t k) const { return centers_[k]; }
    const std::optional<Polynomial>& milnor(std::size_t k) const { return milnor_[k]; }
    Vec milnor_gradient(std::size_t k, const Vec& x) const;

private:
    PolynomialMap map_;
    std::vector<Vec> centers_;
    std::vector<std::optional<Polynomial>> milnor_;
    std::vector<std::vector<Polynomial>> milnor_grad_;
};

/// Solutions of {F(x) = t, |x| = R}.
struct SphereCrossings {
    double radius = 0.0;
    std::vector<Vec> points;
    double min_angle = 0.0;  // smallest fiber/sphere crossing angle
    bool tangential = false; // multiple root or crossing angle below tolerance
    bool exact = false;      // n = 2 exact Sturm route
};

SphereCrossings sphere_crossings(const FiberSystem& sys, const Vec& t, double radius, const TraceConfig& cfg);

std::vector<Vec> find_seeds(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg, SeedAudit* audit = nullptr);
FiberComponent trace_component(const FiberSystem& sys, const Vec& t, const Vec& seed, const TraceConfig& cfg);
FiberSnapshot enumerate_fiber(const FiberSystem& sys, const Vec& t, const TraceConfig& cfg);

std::vector<Vec> find_seeds(const PolynomialMap& map, const Vec& t, const TraceConfig& cfg);
FiberComponent trace_component(const PolynomialMap& map, const Vec& t, const Vec& seed, const TraceConfig& cfg);
FiberSnapshot enumerate_fiber(const PolynomialMap& map, const Vec& t, const TraceConfig& cfg);

/// Symmetric Hausdorff distance between two polylines (vertices against
/// segments).
double hausdorff_distance(const std::vector<Vec>& a, const std::vector<Vec>& b);

/// Minimum distance from p to a polyline.
double polyline_distance(const Vec& p, const std::vector<Vec>& poly);

/// Restricts every component to the exterior shell R0 <= |x| <= R, splitting
/// polylines where they cross the inner sphere. Inner-sphere points join the
/// boundary hits of each piece.
FiberSnapshot restrict_to_exterior(const FiberSnapshot& snap, double inner_radius, const FiberSystem& sys,
                                   const TraceConfig& cfg);

/// Writes component_id,point_index,x1..xn,residual rows.
std::string traces_csv(const FiberSnapshot& snap, const PolynomialMap& map);

}  // namespace bifurcurve
