#pragma once

#include "bifurcurve/report.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bifurcurve {

struct OutputPaths {
    std::string report_json;
    std::string invariants_csv;
    std::string traces_csv;
};

/// Everything one invocation needs. Flags fill it first, then --config, then
/// the BIFURCURVE_SEED environment variable.
struct RunConfig {
    std::string command;                // fiber | diagnose | milnor | scan
    std::string map;                    // inline expression, components separated by ';'
    std::string map_file;
    std::vector<std::string> vars;
    TraceConfig trace;
    ApproachParams approach;
    ScanRegion region;
    std::optional<double> exterior;
    std::vector<double> t;              // fiber
    std::vector<double> a;              // diagnose, milnor
    std::vector<double> center;         // milnor
    std::uint64_t seed = 20130611;
    unsigned jobs = 1;
    OutputPaths outputs;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
    /// Reads the map from map or map_file.
    PolynomialMap load_map() const;
};

/// Applies a JSON object onto cfg. Unknown keys are input errors.
void apply_config(RunConfig& cfg, const Json& j);
Json to_json(const RunConfig& cfg);

/// Exit codes: 0 success, 1 computation failure, 2 input error, 3 the
/// requested classification is inconclusive.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace bifurcurve
