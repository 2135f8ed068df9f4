#pragma once

#include "bifurcurve/topology.hpp"

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bifurcurve {

enum class Tri { Pass, Fail, Inconclusive };
std::string to_string(Tri v);

struct ApproachParams {
    double eps = 0.5;
    double ratio = 0.5;
    int levels = 7;               // scales eps * ratio^k, k = 0..levels-1
    int random_directions = 4;
    std::uint64_t seed = 20130611;
};

/// Approach rays a + scale * d. Scales decrease strictly; directions are unit.
struct ApproachSpec {
    Vec target;
    std::vector<Vec> directions;
    std::vector<double> scales;

    Vec point(std::size_t dir, std::size_t scale) const { return target + scales[scale] * directions[dir]; }
    void validate() const;
};

/// Axis directions +-e_i followed by random unit directions; near-duplicates
/// (in particular every random direction when the parameter space is a line)
/// are dropped.
ApproachSpec make_approach(const Vec& target, const ApproachParams& params);

struct AnalysisConfig {
    TraceConfig trace;
    ApproachParams approach;
    unsigned jobs = 1;
    std::optional<double> exterior_radius;
    double nv_pass_fraction = 0.25;
};

/// Fiber analysis in the configured mode (full or exterior).
FiberAnalysis analyze(const FiberSystem& sys, const Vec& t, const AnalysisConfig& cfg);

/// Fibers at the target and at every approach sample.
struct ApproachData {
    ApproachSpec spec;
    FiberAnalysis base;
    std::vector<std::vector<FiberAnalysis>> samples;  // [direction][scale]
};

ApproachData sample_approach(const FiberSystem& sys, const ApproachSpec& spec, const AnalysisConfig& cfg);

/// Point used to identify a component: its min-norm point, or the arc-length
/// midpoint when the minimum sits on the boundary.
Vec anchor_point(const FiberComponent& c);

struct ComponentMatching {
    Vec base_t;
    Vec other_t;
    std::vector<int> assignment;  // per base component, -1 when unmatched
    bool is_bijection = false;
    std::vector<int> unmatched_base;
    std::vector<int> unmatched_other;
};

ComponentMatching match_components(const FiberSystem& sys, const FiberSnapshot& base, const FiberSnapshot& other,
                                   const TraceConfig& cfg);
ComponentMatching match_components(const FiberSystem& sys, const FiberSnapshot& base, const Vec& b,
                                   const TraceConfig& cfg);

struct LimitSetEstimate {
    int track = -1;                       // component id in the tracked snapshot
    std::set<int> receiving_base_components;
    bool empty = true;
    bool ambiguous = false;               // a projection landed on two base components
};

/// Projects up to 200 points of `tracked` onto the base fiber and records
/// which base components receive them within displacement sqrt(scale).
LimitSetEstimate limit_set(const FiberSystem& sys, const FiberSnapshot& base, const FiberComponent& tracked,
                           double scale, const TraceConfig& cfg);

/// Component ids of one smallest-scale component chained up through the
/// larger scales of one direction ([scale] -> id, -1 when the chain breaks).
std::vector<std::vector<int>> build_tracks(const FiberSystem& sys, const std::vector<FiberAnalysis>& ray,
                                           const TraceConfig& cfg);

struct Witness {
    std::string kind;  // vanishing | splitting | non_bijective | circle_breaking | circle_escape | tainted
    int direction = -1;
    Vec direction_vector;
    double scale = 0.0;
    int component = -1;
    std::vector<int> receiving;
    std::string detail;
};

struct InfinityVerdict {
    Tri nv = Tri::Inconclusive;
    Tri ns = Tri::Inconclusive;
    Tri sns = Tri::Inconclusive;
    std::vector<std::vector<double>> mu_series;  // [direction][scale]
    std::vector<Witness> witnesses;
};

struct VanishingResult {
    Tri verdict = Tri::Inconclusive;
    std::vector<std::vector<double>> mu_series;
    std::vector<Witness> witnesses;
};

struct SplittingResult {
    Tri verdict = Tri::Inconclusive;
    std::vector<Witness> witnesses;
};

VanishingResult detect_vanishing(const ApproachData& data, const AnalysisConfig& cfg);
SplittingResult detect_splitting(const FiberSystem& sys, const ApproachData& data, const AnalysisConfig& cfg);
SplittingResult detect_strong_splitting(const FiberSystem& sys, const ApproachData& data, const AnalysisConfig& cfg,
                                        const SplittingResult& ns);

/// All three diagnostics; NV escalates the radius once when inconclusive.
InfinityVerdict diagnose_infinity(const FiberSystem& sys, const ApproachData& data, const AnalysisConfig& cfg);

VanishingResult detect_vanishing(const FiberSystem& sys, const Vec& a, const ApproachSpec& spec,
                                 const AnalysisConfig& cfg);
SplittingResult detect_splitting(const FiberSystem& sys, const Vec& a, const ApproachSpec& spec,
                                 const AnalysisConfig& cfg);
Tri detect_strong_splitting(const FiberSystem& sys, const Vec& a, const ApproachSpec& spec, const AnalysisConfig& cfg);

}  // namespace bifurcurve
