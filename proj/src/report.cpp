#include "bifurcurve/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bifurcurve {

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

void dump(const Json& j, std::ostringstream& os, int indent)
{
    const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
    const std::string close(static_cast<std::size_t>(indent), ' ');
    switch (j.type()) {
    case Json::value_t::object: {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            os << (first ? "" : ",\n") << pad << Json(it.key()).dump() << ":";
            dump(it.value(), os, indent + 2);
            first = false;
        }
        os << "\n" << close << "}";
        return;
    }
    case Json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            return;
        }
        // Arrays of scalars stay on one line.
        bool flat = true;
        for (const auto& e : j) {
            flat = flat && !e.is_structured();
        }
        os << "[";
        bool first = true;
        for (const auto& e : j) {
            os << (first ? "" : ",") << (flat ? "" : "\n" + pad);
            dump(e, os, indent + 2);
            first = false;
        }
        os << (flat ? "" : "\n" + close) << "]";
        return;
    }
    case Json::value_t::number_float: {
        const double v = j.get<double>();
        os << (std::isfinite(v) ? format_double(v) : "null");
        return;
    }
    default:
        os << j.dump();
    }
}

Json number(double v)
{
    return std::isfinite(v) ? Json(v) : Json(nullptr);
}

Json numbers(const std::vector<double>& v)
{
    Json out = Json::array();
    for (double x : v) {
        out.push_back(number(x));
    }
    return out;
}

}  // namespace

std::string dump_json(const Json& j)
{
    std::ostringstream os;
    dump(j, os, 0);
    os << "\n";
    return os.str();
}

Json to_json(const Vec& v)
{
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(number(v[i]));
    }
    return out;
}

Json to_json(const FiberTopology& t)
{
    Json j;
    j["b"] = to_json(t.b);
    j["s"] = t.s;
    j["l"] = t.l;
    j["b0"] = t.b0;
    j["b1"] = t.b1;
    j["chi"] = t.chi_components;
    j["chi_sphere"] = t.chi_sphere;
    j["mu"] = number(t.mu);
    j["mu_lower_bound"] = t.mu_lower_bound;
    j["stabilized"] = t.stabilized;
    j["reliable"] = t.reliable;
    j["radius_used"] = t.radius_used;
    j["ladder"] = numbers(t.ladder);
    j["crossing_counts"] = t.crossing_counts;
    j["issue"] = t.issue;
    return j;
}

Json to_json(const FiberAnalysis& f)
{
    const FiberSnapshot& s = f.snapshot;
    Json j;
    j["t"] = to_json(s.t);
    j["topology"] = to_json(f.topology);
    Json comps = Json::array();
    for (const auto& c : s.components) {
        Json cj;
        cj["kind"] = to_string(c.kind);
        cj["closed"] = c.closed;
        cj["points"] = c.points.size();
        cj["min_norm"] = number(c.min_norm);
        cj["min_norm_point"] = to_json(c.min_norm_point);
        Json hits = Json::array();
        for (const auto& h : c.boundary_hits) {
            hits.push_back(to_json(h));
        }
        cj["boundary_hits"] = hits;
        cj["max_residual"] = number(c.max_residual);
        cj["min_singular"] = number(c.min_singular);
        cj["tainted"] = c.tainted;
        cj["incomplete"] = c.incomplete;
        cj["issue"] = c.issue;
        comps.push_back(cj);
    }
    j["components"] = comps;
    j["seed_audit"] = {{"sphere", s.seed_audit.sphere},     {"lattice", s.seed_audit.lattice},
                       {"min_norm", s.seed_audit.min_norm}, {"found", s.seed_audit.found},
                       {"merged", s.seed_audit.merged},     {"rejected", s.seed_audit.rejected},
                       {"skipped", s.seed_audit.skipped}};
    j["tainted"] = s.tainted;
    j["incomplete"] = s.incomplete;
    j["min_singular"] = number(s.min_singular);
    return j;
}

Json to_json(const Witness& w)
{
    Json j;
    j["kind"] = w.kind;
    j["direction"] = w.direction;
    j["direction_vector"] = to_json(w.direction_vector);
    j["scale"] = w.scale;
    j["component"] = w.component;
    j["receiving"] = w.receiving;
    j["detail"] = w.detail;
    return j;
}

Json to_json(const Verdict& v)
{
    Json j;
    j["a"] = to_json(v.a);
    j["level"] = v.level;
    j["eps"] = v.eps;
    j["classification"] = to_string(v.classification);
    j["reason"] = v.reason;
    j["topology"] = to_json(v.topology);
    j["route_ab"] = {{"chi_constant", to_string(v.route_ab.first)},
                     {"nv", to_string(v.route_ab.second)},
                     {"combined", to_string(v.route_ab.combined)}};
    j["route_abprime"] = {{"betti_constant", to_string(v.route_abprime.first)},
                          {"ns", to_string(v.route_abprime.second)},
                          {"combined", to_string(v.route_abprime.combined)}};
    j["route_cor"] = {{"sns", to_string(v.route_cor.first)},
                      {"nv", to_string(v.route_cor.second)},
                      {"combined", to_string(v.route_cor.combined)}};
    if (v.route_parity) {
        const ParityRoute& p = *v.route_parity;
        j["route_parity"] = {{"verdict", to_string(p.verdict)},
                             {"in_s_c", p.in_s_c},
                             {"eps", p.eps},
                             {"parities", p.parities},
                             {"reason", p.reason}};
    } else {
        j["route_parity"] = nullptr;
    }
    j["consistent"] = v.consistent;
    Json w = Json::array();
    for (const auto& x : v.witnesses) {
        w.push_back(to_json(x));
    }
    j["witnesses"] = w;
    Json mu = Json::array();
    for (const auto& s : v.mu_series) {
        mu.push_back(numbers(s));
    }
    j["mu_series"] = mu;
    j["fibers"] = v.fibers;
    return j;
}

Json to_json(const Cell& c)
{
    // A cell of a one-parameter scan is [lo, hi]; otherwise one [lo, hi] per axis.
    if (c.lo.size() == 1) {
        return Json::array({c.lo[0], c.hi[0]});
    }
    Json out = Json::array();
    for (Eigen::Index i = 0; i < c.lo.size(); ++i) {
        out.push_back(Json::array({c.lo[i], c.hi[i]}));
    }
    return out;
}

Json to_json(const ScanReport& r)
{
    Json j;
    j["region"] = {{"lo", r.region.lo}, {"hi", r.region.hi}, {"grid", r.region.grid},
                   {"refine_depth", r.region.refine_depth}};
    j["exterior_radius"] = r.exterior_radius ? Json(*r.exterior_radius) : Json(nullptr);
    Json cand = Json::array();
    for (const auto& c : r.candidate_set) {
        cand.push_back(to_json(c));
    }
    j["candidate_set"] = cand;
    Json crit = Json::array();
    for (const auto& c : r.excluded_critical) {
        crit.push_back(to_json(c));
    }
    j["excluded_critical"] = crit;
    j["s_c_values"] = numbers(r.s_c_values);
    j["tangency_values"] = numbers(r.tangency_values);
    const ScanStats& s = r.stats;
    j["stats"] = {{"nodes", s.nodes},           {"fibers", s.fibers},
                  {"typical", s.typical},       {"candidates", s.candidates},
                  {"critical", s.critical},     {"inconclusive", s.inconclusive},
                  {"inconsistent", s.inconsistent}, {"nodes_per_level", s.nodes_per_level}};
    Json samples = Json::array();
    for (const auto& v : r.samples) {
        samples.push_back(to_json(v));
    }
    j["samples"] = samples;
    return j;
}

Json to_json(const CenterEstimate& c)
{
    const MilnorSet& m = c.milnor;
    const AsymptoticValueEstimate& e = c.estimate;
    Json j;
    j["center"] = to_json(m.center);
    j["determinant"] = m.determinant.to_string();
    j["radius"] = m.radius;
    j["degenerate"] = m.degenerate;
    j["issue"] = m.issue;
    j["retries"] = c.retries;
    Json branches = Json::array();
    for (const auto& b : m.branches) {
        branches.push_back({{"kind", to_string(b.kind)},
                            {"points", b.points.size()},
                            {"boundary_hits", b.boundary_hits.size()},
                            {"tainted", b.tainted}});
    }
    j["branches"] = branches;
    j["radii_used"] = numbers(e.radii_used);
    Json values = Json::array();
    for (const auto& v : e.values) {
        values.push_back({{"t0", number(v.t0)},
                          {"branch", v.branch},
                          {"end", v.end},
                          {"confidence", number(v.confidence)},
                          {"tail", numbers(v.tail)}});
    }
    j["asymptotic_values"] = values;
    Json flagged = Json::array();
    for (const auto& f : e.flagged) {
        flagged.push_back({{"branch", f.branch}, {"end", f.end}, {"reason", f.reason}});
    }
    j["flagged"] = flagged;
    j["s_c_values"] = numbers(e.distinct());
    return j;
}

Json to_json(const ParityResult& p)
{
    Json j;
    j["a"] = to_json(p.a);
    j["center"] = to_json(p.center);
    j["in_s_c"] = p.in_s_c;
    j["s_c_values"] = numbers(p.s_c_values);
    j["inner_radius"] = p.inner_radius;
    j["trace_radius"] = p.trace_radius;
    Json dirs = Json::array();
    for (const auto& dir : p.tracks) {
        Json tracks = Json::array();
        for (const auto& t : dir) {
            tracks.push_back(
                {{"ids", t.ids}, {"counts", t.counts}, {"stabilized", t.stabilized}, {"parity", t.parity}});
        }
        dirs.push_back(tracks);
    }
    j["tracks"] = dirs;
    j["verdict"] = to_string(p.verdict);
    j["reason"] = p.reason;
    return j;
}

std::string invariants_header(std::size_t params)
{
    std::string out;
    for (std::size_t i = 1; i <= params; ++i) {
        out += "b" + std::to_string(i) + ",";
    }
    return out + "s,l,b0,b1_betti,chi,mu,stabilized";
}

std::string invariants_row(const FiberTopology& t)
{
    std::string out;
    for (Eigen::Index i = 0; i < t.b.size(); ++i) {
        out += format_double(t.b[i]) + ",";
    }
    out += std::to_string(t.s) + "," + std::to_string(t.l) + "," + std::to_string(t.b0) + "," +
           std::to_string(t.b1) + "," + std::to_string(t.chi_components) + ",";
    out += std::isfinite(t.mu) ? format_double(t.mu) : "";
    out += t.stabilized ? ",true" : ",false";
    return out;
}

std::string invariants_csv(const std::vector<FiberTopology>& rows, std::size_t params)
{
    std::string out = invariants_header(params) + "\n";
    for (const auto& t : rows) {
        if (static_cast<std::size_t>(t.b.size()) != params) {
            throw DimensionError("invariants row has the wrong number of parameters");
        }
        out += invariants_row(t) + "\n";
    }
    return out;
}

namespace {

std::string point_columns(const Vec& p)
{
    std::string out;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        out += "," + format_double(p[i]);
    }
    return out;
}

std::string variable_columns(const std::vector<std::string>& variables)
{
    std::string out;
    for (const auto& v : variables) {
        out += "," + v;
    }
    return out;
}

}  // namespace

std::string traces_csv(const std::vector<FiberSnapshot>& fibers, const std::vector<std::string>& variables)
{
    std::string out = "fiber,component,kind,point" + variable_columns(variables) + "\n";
    for (std::size_t f = 0; f < fibers.size(); ++f) {
        const auto& comps = fibers[f].components;
        for (std::size_t c = 0; c < comps.size(); ++c) {
            const std::string prefix =
                std::to_string(f) + "," + std::to_string(c) + "," + to_string(comps[c].kind) + ",";
            for (std::size_t k = 0; k < comps[c].points.size(); ++k) {
                out += prefix + std::to_string(k) + point_columns(comps[c].points[k]) + "\n";
            }
        }
    }
    return out;
}

std::string traces_csv(const MilnorSet& milnor, const std::vector<std::string>& variables)
{
    std::string out = "branch,kind,point" + variable_columns(variables) + "\n";
    for (std::size_t b = 0; b < milnor.branches.size(); ++b) {
        const auto& br = milnor.branches[b];
        const std::string prefix = std::to_string(b) + "," + to_string(br.kind) + ",";
        for (std::size_t k = 0; k < br.points.size(); ++k) {
            out += prefix + std::to_string(k) + point_columns(br.points[k]) + "\n";
        }
    }
    return out;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    f << text;
    f.flush();
    if (!f) {
        throw std::runtime_error("write to " + path + " failed");
    }
}

void write_report(const ScanReport& report, ReportFormat format, const std::string& path)
{
    switch (format) {
    case ReportFormat::Json:
        write_text(path, dump_json(to_json(report)));
        return;
    case ReportFormat::InvariantsCsv: {
        std::vector<FiberTopology> rows;
        for (const auto& v : report.samples) {
            rows.push_back(v.topology);
        }
        write_text(path, invariants_csv(rows, report.region.dim()));
        return;
    }
    case ReportFormat::TracesCsv:
        break;
    }
    throw std::invalid_argument("a scan report keeps no traces");
}

void write_report(const Verdict& verdict, ReportFormat format, const std::string& path)
{
    switch (format) {
    case ReportFormat::Json:
        write_text(path, dump_json(to_json(verdict)));
        return;
    case ReportFormat::InvariantsCsv:
        write_text(path, invariants_csv({verdict.topology}, static_cast<std::size_t>(verdict.a.size())));
        return;
    case ReportFormat::TracesCsv:
        break;
    }
    throw std::invalid_argument("a verdict keeps no traces");
}

}  // namespace bifurcurve
