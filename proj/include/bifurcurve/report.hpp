#pragma once

#include "bifurcurve/scanner.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace bifurcurve {

using Json = nlohmann::ordered_json;

enum class ReportFormat { Json, InvariantsCsv, TracesCsv };

/// printf "%.17g".
std::string format_double(double v);

/// Pretty-printed JSON with two-space indentation; floating-point numbers
/// carry 17 significant digits and non-finite ones become null.
std::string dump_json(const Json& j);

Json to_json(const Vec& v);
Json to_json(const FiberTopology& t);
Json to_json(const FiberAnalysis& f);
Json to_json(const Witness& w);
Json to_json(const Verdict& v);
Json to_json(const Cell& c);
Json to_json(const ScanReport& r);
Json to_json(const CenterEstimate& c);
Json to_json(const ParityResult& p);

/// Fixed header: b1,...,bp,s,l,b0,b1_betti,chi,mu,stabilized.
std::string invariants_header(std::size_t params);
std::string invariants_row(const FiberTopology& t);
std::string invariants_csv(const std::vector<FiberTopology>& rows, std::size_t params);

/// One row per polyline vertex: fiber,component,kind,point,<variables>.
std::string traces_csv(const std::vector<FiberSnapshot>& fibers, const std::vector<std::string>& variables);
/// One row per polyline vertex: branch,kind,point,<variables>.
std::string traces_csv(const MilnorSet& milnor, const std::vector<std::string>& variables);

/// Writes text to path; throws std::runtime_error on I/O failure.
void write_text(const std::string& path, const std::string& text);

/// Writes a report in the requested format. Traces are not kept in a scan
/// report or a verdict, so TracesCsv throws std::invalid_argument for them.
void write_report(const ScanReport& report, ReportFormat format, const std::string& path);
void write_report(const Verdict& verdict, ReportFormat format, const std::string& path);

}  // namespace bifurcurve
