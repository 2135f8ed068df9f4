#include "bifurcurve/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bifurcurve {

namespace {

const std::set<std::string> kCommands{"fiber", "diagnose", "milnor", "scan"};

std::vector<std::string> split(const std::string& text, char sep)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, sep)) {
        out.push_back(item);
    }
    if (!text.empty() && text.back() == sep) {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& text)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        throw std::invalid_argument("not a number: '" + text + "'");
    }
    return v;
}

std::vector<double> parse_list(const std::string& text)
{
    std::vector<double> out;
    for (const auto& item : split(text, ',')) {
        out.push_back(parse_double(item));
    }
    if (out.empty()) {
        throw std::invalid_argument("empty list");
    }
    return out;
}

// "lo,hi" per axis, axes separated by '/'.
void parse_box(const std::string& text, ScanRegion& region)
{
    region.lo.clear();
    region.hi.clear();
    for (const auto& axis : split(text, '/')) {
        const std::vector<double> v = parse_list(axis);
        if (v.size() != 2) {
            throw std::invalid_argument("box axis needs lo,hi: '" + axis + "'");
        }
        region.lo.push_back(v[0]);
        region.hi.push_back(v[1]);
    }
}

std::vector<int> parse_grid(const std::string& text)
{
    std::vector<int> out;
    for (double v : parse_list(text)) {
        if (v != std::floor(v) || v < 0 || v > 1e6) {
            throw std::invalid_argument("grid sizes must be whole numbers");
        }
        out.push_back(static_cast<int>(v));
    }
    return out;
}

std::uint64_t parse_seed(const std::string& text)
{
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-') {
        throw std::invalid_argument("seed must be a non-negative integer: '" + text + "'");
    }
    return v;
}

// Shortest text that reads back to v; reports use format_double instead.
std::string short_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string join(const Vec& v, const char* sep = ",")
{
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out += (i ? sep : "") + short_double(v[i]);
    }
    return out;
}

Vec to_vec(const std::vector<double>& v)
{
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const char* yes(bool b)
{
    return b ? "true" : "false";
}

// "--box -1,1" would read -1,1 as an option; glue such values to their flag.
std::vector<std::string> glue_negative_values(int argc, const char* const* argv)
{
    std::vector<std::string> out;
    for (int i = 0; i < argc; ++i) {
        std::string arg = argv[i];
        if (i > 0 && i + 1 < argc && arg.rfind("--", 0) == 0 && arg.find('=') == std::string::npos) {
            const std::string next = argv[i + 1];
            if (next.size() > 1 && next[0] == '-' && (std::isdigit(static_cast<unsigned char>(next[1])) || next[1] == '.')) {
                out.push_back(arg + "=" + next);
                ++i;
                continue;
            }
        }
        out.push_back(arg);
    }
    return out;
}

template <typename T>
T get(const Json& j, const std::string& key)
{
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument("config: wrong type for '" + key + "'");
    }
}

void apply_trace(TraceConfig& t, const Json& j)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config: 'trace' must be an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const Json& v = it.value();
        if (k == "radius") t.radius = get<double>(v, k);
        else if (k == "step_init") t.step_init = get<double>(v, k);
        else if (k == "step_min") t.step_min = get<double>(v, k);
        else if (k == "step_max") t.step_max = get<double>(v, k);
        else if (k == "newton_tol") t.newton_tol = get<double>(v, k);
        else if (k == "newton_max_iter") t.newton_max_iter = get<int>(v, k);
        else if (k == "loop_close_tol") t.loop_close_tol = get<double>(v, k);
        else if (k == "dedup_tol") t.dedup_tol = get<double>(v, k);
        else if (k == "seed_grid") t.seed_grid = get<int>(v, k);
        else if (k == "chord_tol") t.chord_tol = get<double>(v, k);
        else if (k == "max_turn") t.max_turn = get<double>(v, k);
        else if (k == "singular_tol") t.singular_tol = get<double>(v, k);
        else if (k == "tangency_angle") t.tangency_angle = get<double>(v, k);
        else if (k == "max_steps") t.max_steps = get<std::size_t>(v, k);
        else throw std::invalid_argument("config: unknown trace key '" + k + "'");
    }
}

void apply_approach(ApproachParams& a, const Json& j)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config: 'approach' must be an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const Json& v = it.value();
        if (k == "eps") a.eps = get<double>(v, k);
        else if (k == "ratio") a.ratio = get<double>(v, k);
        else if (k == "levels") a.levels = get<int>(v, k);
        else if (k == "random_directions") a.random_directions = get<int>(v, k);
        else throw std::invalid_argument("config: unknown approach key '" + k + "'");
    }
}

void apply_region(ScanRegion& r, const Json& j)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config: 'region' must be an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const Json& v = it.value();
        if (k == "lo") r.lo = get<std::vector<double>>(v, k);
        else if (k == "hi") r.hi = get<std::vector<double>>(v, k);
        else if (k == "grid") r.grid = get<std::vector<int>>(v, k);
        else if (k == "refine_depth") r.refine_depth = get<int>(v, k);
        else throw std::invalid_argument("config: unknown region key '" + k + "'");
    }
}

void apply_outputs(OutputPaths& o, const Json& j)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config: 'outputs' must be an object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const Json& v = it.value();
        if (k == "report_json") o.report_json = get<std::string>(v, k);
        else if (k == "invariants_csv") o.invariants_csv = get<std::string>(v, k);
        else if (k == "traces_csv") o.traces_csv = get<std::string>(v, k);
        else throw std::invalid_argument("config: unknown outputs key '" + k + "'");
    }
}

Json config_section(const TraceConfig& t)
{
    return {{"radius", t.radius},
            {"step_init", t.step_init},
            {"step_min", t.step_min},
            {"step_max", t.step_max},
            {"newton_tol", t.newton_tol},
            {"newton_max_iter", t.newton_max_iter},
            {"loop_close_tol", t.loop_close_tol},
            {"dedup_tol", t.dedup_tol},
            {"seed_grid", t.seed_grid},
            {"chord_tol", t.chord_tol},
            {"max_turn", t.max_turn},
            {"singular_tol", t.singular_tol},
            {"tangency_angle", t.tangency_angle},
            {"max_steps", t.max_steps}};
}

}  // namespace

void RunConfig::validate() const
{
    if (!kCommands.count(command)) {
        throw std::invalid_argument("unknown command '" + command + "'");
    }
    if (map.empty() == map_file.empty()) {
        throw std::invalid_argument("give exactly one of --map and --map-file");
    }
    if (vars.empty()) {
        throw std::invalid_argument("--vars is required");
    }
    if (std::set<std::string>(vars.begin(), vars.end()).size() != vars.size()) {
        throw std::invalid_argument("variables must be distinct");
    }
    trace.validate();
    if (!(approach.eps > 0) || !(approach.ratio > 0 && approach.ratio < 1) || approach.levels < 1 ||
        approach.random_directions < 0) {
        throw std::invalid_argument("approach needs eps > 0, 0 < ratio < 1, levels >= 1");
    }
    if (exterior && !(*exterior > 0 && std::isfinite(*exterior))) {
        throw std::invalid_argument("exterior radius must be positive");
    }
    if (jobs < 1) {
        throw std::invalid_argument("--jobs must be at least 1");
    }
    if (command == "scan") {
        if (region.lo.empty()) {
            throw std::invalid_argument("scan needs --box");
        }
        region.validate();
    }
    if (command == "fiber" && t.empty()) {
        throw std::invalid_argument("fiber needs --t");
    }
    if (command == "diagnose" && a.empty()) {
        throw std::invalid_argument("diagnose needs --a");
    }
    if (command == "milnor" && exterior) {
        throw std::invalid_argument("milnor has no exterior mode");
    }
}

PolynomialMap RunConfig::load_map() const
{
    std::string text = map;
    if (!map_file.empty()) {
        std::ifstream f(map_file);
        if (!f) {
            throw std::invalid_argument("cannot read map file " + map_file);
        }
        std::ostringstream os;
        os << f.rdbuf();
        text = os.str();
        // one component per line is accepted as well as ';'
        std::replace(text.begin(), text.end(), '\n', ';');
        while (!text.empty() && (text.back() == ';' || std::isspace(static_cast<unsigned char>(text.back())))) {
            text.pop_back();
        }
    }
    return parse_map(text, vars);
}

void apply_config(RunConfig& cfg, const Json& j)
{
    if (!j.is_object()) {
        throw std::invalid_argument("config must be a JSON object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const Json& v = it.value();
        if (k == "command") cfg.command = get<std::string>(v, k);
        else if (k == "map") cfg.map = get<std::string>(v, k);
        else if (k == "map_file") cfg.map_file = get<std::string>(v, k);
        else if (k == "vars") cfg.vars = get<std::vector<std::string>>(v, k);
        else if (k == "trace") apply_trace(cfg.trace, v);
        else if (k == "approach") apply_approach(cfg.approach, v);
        else if (k == "region") apply_region(cfg.region, v);
        else if (k == "exterior") cfg.exterior = v.is_null() ? std::nullopt : std::optional<double>(get<double>(v, k));
        else if (k == "t") cfg.t = get<std::vector<double>>(v, k);
        else if (k == "a") cfg.a = get<std::vector<double>>(v, k);
        else if (k == "center") cfg.center = get<std::vector<double>>(v, k);
        else if (k == "seed") cfg.seed = get<std::uint64_t>(v, k);
        else if (k == "jobs") cfg.jobs = get<unsigned>(v, k);
        else if (k == "outputs") apply_outputs(cfg.outputs, v);
        else throw std::invalid_argument("config: unknown key '" + k + "'");
    }
}

Json to_json(const RunConfig& cfg)
{
    Json j;
    j["command"] = cfg.command;
    j["map"] = cfg.map;
    j["map_file"] = cfg.map_file;
    j["vars"] = cfg.vars;
    j["trace"] = config_section(cfg.trace);
    j["approach"] = {{"eps", cfg.approach.eps},
                     {"ratio", cfg.approach.ratio},
                     {"levels", cfg.approach.levels},
                     {"random_directions", cfg.approach.random_directions}};
    j["region"] = {{"lo", cfg.region.lo}, {"hi", cfg.region.hi}, {"grid", cfg.region.grid},
                   {"refine_depth", cfg.region.refine_depth}};
    j["exterior"] = cfg.exterior ? Json(*cfg.exterior) : Json(nullptr);
    j["t"] = cfg.t;
    j["a"] = cfg.a;
    j["center"] = cfg.center;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["outputs"] = {{"report_json", cfg.outputs.report_json},
                    {"invariants_csv", cfg.outputs.invariants_csv},
                    {"traces_csv", cfg.outputs.traces_csv}};
    return j;
}

namespace {

void check_writable(const std::string& path)
{
    if (path.empty()) {
        return;
    }
    std::ofstream f(path, std::ios::app);
    if (!f) {
        throw std::invalid_argument("cannot write " + path);
    }
}

Json envelope(const RunConfig& cfg, const PolynomialMap& map)
{
    Json j;
    j["command"] = cfg.command;
    j["map"] = map.to_string();
    j["config"] = to_json(cfg);
    return j;
}

std::string topology_line(const FiberTopology& t)
{
    return "s=" + std::to_string(t.s) + " l=" + std::to_string(t.l) + " b0=" + std::to_string(t.b0) +
           " b1=" + std::to_string(t.b1) + " chi=" + std::to_string(t.chi_components);
}

std::string cell_text(const Cell& c)
{
    std::string out;
    for (Eigen::Index i = 0; i < c.lo.size(); ++i) {
        out += (i ? "x[" : "[") + short_double(c.lo[i]) + ", " + short_double(c.hi[i]) + "]";
    }
    return out;
}

std::string fixed6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v == 0.0 ? 0.0 : v);
    // -0.000000 reads as a sign error
    std::string s = buf;
    return s == "-0.000000" ? "0.000000" : s;
}

int run_fiber(const RunConfig& cfg, const PolynomialMap& map, const AnalysisConfig& acfg, std::ostream& out)
{
    const FiberSystem sys(map, cfg.trace.rng_seed);
    const Vec t = to_vec(cfg.t);
    const FiberAnalysis f = acfg.exterior_radius ? analyze_exterior_fiber(sys, t, *acfg.exterior_radius, acfg.trace)
                                                 : analyze_fiber(sys, t, acfg.trace);
    const FiberTopology& topo = f.topology;
    out << "t=" << join(t) << " " << topology_line(topo)
        << " mu=" << (std::isfinite(topo.mu) ? short_double(topo.mu) : "nan")
        << " stabilized=" << yes(topo.stabilized) << " reliable=" << yes(topo.reliable) << "\n";
    if (!cfg.outputs.report_json.empty()) {
        Json j = envelope(cfg, map);
        j["fiber"] = to_json(f);
        write_text(cfg.outputs.report_json, dump_json(j));
    }
    if (!cfg.outputs.invariants_csv.empty()) {
        write_text(cfg.outputs.invariants_csv, invariants_csv({topo}, map.codomain_dim()));
    }
    if (!cfg.outputs.traces_csv.empty()) {
        write_text(cfg.outputs.traces_csv, traces_csv({f.snapshot}, map.variables()));
    }
    return 0;
}

int run_diagnose(const RunConfig& cfg, const PolynomialMap& map, const AnalysisConfig& acfg, std::ostream& out)
{
    const Verdict v = classify_value(FiberSystem(map, cfg.trace.rng_seed), to_vec(cfg.a), acfg);
    out << "a=" << join(v.a) << " classification=" << to_string(v.classification)
        << " consistent=" << yes(v.consistent) << "\n";
    out << topology_line(v.topology) << " stabilized=" << yes(v.topology.stabilized) << "\n";
    out << "route_ab chi_constant=" << to_string(v.route_ab.first) << " nv=" << to_string(v.route_ab.second)
        << " combined=" << to_string(v.route_ab.combined) << "\n";
    out << "route_abprime betti_constant=" << to_string(v.route_abprime.first)
        << " ns=" << to_string(v.route_abprime.second) << " combined=" << to_string(v.route_abprime.combined)
        << "\n";
    out << "route_cor sns=" << to_string(v.route_cor.first) << " nv=" << to_string(v.route_cor.second)
        << " combined=" << to_string(v.route_cor.combined) << "\n";
    if (v.route_parity) {
        out << "route_parity in_s_c=" << yes(v.route_parity->in_s_c)
            << " verdict=" << to_string(v.route_parity->verdict) << "\n";
    }
    std::set<std::string> kinds;
    for (const auto& w : v.witnesses) {
        kinds.insert(w.kind);
    }
    out << "witnesses:";
    for (const auto& k : kinds) {
        out << " " << k;
    }
    out << (kinds.empty() ? " none\n" : "\n");
    out << "reason: " << v.reason << "\n";
    if (!cfg.outputs.report_json.empty()) {
        Json j = envelope(cfg, map);
        j["verdict"] = to_json(v);
        write_text(cfg.outputs.report_json, dump_json(j));
    }
    if (!cfg.outputs.invariants_csv.empty()) {
        write_report(v, ReportFormat::InvariantsCsv, cfg.outputs.invariants_csv);
    }
    return v.classification == Classification::Inconclusive ? 3 : 0;
}

int run_milnor(const RunConfig& cfg, const PolynomialMap& map, const AnalysisConfig& acfg, std::ostream& out)
{
    if (map.domain_dim() != 2) {
        throw DimensionError("milnor needs a map from the plane to the line");
    }
    const Vec center = cfg.center.empty() ? Vec(Vec::Zero(2)) : to_vec(cfg.center);
    if (center.size() != 2) {
        throw DimensionError("--center needs two coordinates");
    }
    const CenterEstimate ce = estimate_s_c(map, center, cfg.trace, cfg.seed);
    const std::vector<double> values = ce.estimate.distinct();
    out << "center=" << join(ce.milnor.center) << " branches=" << ce.milnor.branches.size()
        << " retries=" << ce.retries << "\n";
    out << "s_c:";
    for (double v : values) {
        out << " " << fixed6(v);
    }
    out << (values.empty() ? " empty\n" : "\n");
    std::optional<ParityResult> parity;
    int code = 0;
    if (!cfg.a.empty()) {
        const Vec a = to_vec(cfg.a);
        if (a.size() != 1) {
            throw DimensionError("--a needs one value");
        }
        ApproachParams p = cfg.approach;
        p.eps = parity_radius(ce.estimate, a[0], p.eps);
        parity = parity_test(map, a, ce.milnor.center, make_approach(a, p), acfg, ce.estimate);
        int odd = 0;
        int even = 0;
        int open = 0;
        for (const auto& dir : parity->tracks) {
            for (const auto& tr : dir) {
                (tr.parity == 1 ? odd : tr.parity == 0 ? even : open) += 1;
            }
        }
        out << "a=" << join(a) << " in_s_c=" << yes(parity->in_s_c) << " parity=" << to_string(parity->verdict)
            << " odd=" << odd << " even=" << even << " unstabilized=" << open << "\n";
        code = parity->verdict == Tri::Inconclusive ? 3 : 0;
    }
    if (!cfg.outputs.report_json.empty()) {
        Json j = envelope(cfg, map);
        j["milnor"] = to_json(ce);
        j["parity"] = parity ? to_json(*parity) : Json(nullptr);
        write_text(cfg.outputs.report_json, dump_json(j));
    }
    if (!cfg.outputs.traces_csv.empty()) {
        write_text(cfg.outputs.traces_csv, traces_csv(ce.milnor, map.variables()));
    }
    return code;
}

int run_scan(const RunConfig& cfg, const PolynomialMap& map, const AnalysisConfig& acfg, std::ostream& out)
{
    const ScanReport r = scan(map, cfg.region, acfg);
    const ScanStats& s = r.stats;
    out << "nodes=" << s.nodes << " typical=" << s.typical << " candidates=" << s.candidates
        << " critical=" << s.critical << " inconclusive=" << s.inconclusive << " inconsistent=" << s.inconsistent
        << "\n";
    for (const auto& c : r.candidate_set) {
        out << "candidate " << cell_text(c) << "\n";
    }
    if (r.candidate_set.empty()) {
        out << "candidate_set empty\n";
    }
    for (const auto& c : r.excluded_critical) {
        out << "critical " << cell_text(c) << "\n";
    }
    if (!cfg.outputs.report_json.empty()) {
        Json j = envelope(cfg, map);
        j["report"] = to_json(r);
        write_text(cfg.outputs.report_json, dump_json(j));
    }
    if (!cfg.outputs.invariants_csv.empty()) {
        write_report(r, ReportFormat::InvariantsCsv, cfg.outputs.invariants_csv);
    }
    return 0;
}

}  // namespace

int run(const RunConfig& cfg_in, std::ostream& out, std::ostream& err)
{
    RunConfig cfg = cfg_in;
    PolynomialMap map;
    AnalysisConfig acfg;
    try {
        cfg.trace.rng_seed = cfg.seed;
        cfg.approach.seed = cfg.seed;
        cfg.validate();
        map = cfg.load_map();
        if (map.domain_dim() != map.codomain_dim() + 1) {
            throw DimensionError("the map must go from n to n - 1 variables");
        }
        const std::size_t p = map.codomain_dim();
        if (cfg.command == "fiber" && cfg.t.size() != p) {
            throw DimensionError("--t needs " + std::to_string(p) + " values");
        }
        if (cfg.command == "diagnose" && cfg.a.size() != p) {
            throw DimensionError("--a needs " + std::to_string(p) + " values");
        }
        if (cfg.command == "scan" && cfg.region.dim() != p) {
            throw DimensionError("--box needs " + std::to_string(p) + " axes");
        }
        if (cfg.outputs.traces_csv.size() && (cfg.command == "scan" || cfg.command == "diagnose")) {
            throw std::invalid_argument(cfg.command + " keeps no traces; --traces-csv applies to fiber and milnor");
        }
        if (cfg.outputs.invariants_csv.size() && cfg.command == "milnor") {
            throw std::invalid_argument("milnor writes no invariants; use --json");
        }
        for (const auto* path : {&cfg.outputs.report_json, &cfg.outputs.invariants_csv, &cfg.outputs.traces_csv}) {
            check_writable(*path);
        }
        acfg.trace = cfg.trace;
        acfg.approach = cfg.approach;
        acfg.jobs = cfg.jobs;
        acfg.exterior_radius = cfg.exterior;
    } catch (const std::exception& e) {
        err << "bifurcurve: " << e.what() << "\n";
        return 2;
    }
    try {
        if (cfg.command == "fiber") {
            return run_fiber(cfg, map, acfg, out);
        }
        if (cfg.command == "diagnose") {
            return run_diagnose(cfg, map, acfg, out);
        }
        if (cfg.command == "milnor") {
            return run_milnor(cfg, map, acfg, out);
        }
        return run_scan(cfg, map, acfg, out);
    } catch (const std::invalid_argument& e) {
        err << "bifurcurve: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "bifurcurve: " << e.what() << "\n";
        return 1;
    }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Bifurcation values of polynomial maps R^n -> R^(n-1)", "bifurcurve"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string vars;
    std::string t_text;
    std::string a_text;
    std::string center_text;
    std::string box_text;
    std::string grid_text = "17";
    std::string seed_text;
    std::string config_path;
    double exterior = 0.0;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--map", cfg.map, "map components separated by ';'");
        sub->add_option("--map-file", cfg.map_file, "file with one component per line");
        sub->add_option("--vars", vars, "comma-separated variable names");
        sub->add_option("--radius", cfg.trace.radius, "tracing radius R");
        sub->add_option("--seed-grid", cfg.trace.seed_grid, "seed lattice points per axis");
        sub->add_option("--step-max", cfg.trace.step_max, "largest continuation step (0: auto)");
        sub->add_option("--chord-tol", cfg.trace.chord_tol, "polyline sagitta bound (0: auto)");
        sub->add_option("--newton-tol", cfg.trace.newton_tol, "Newton residual tolerance");
        sub->add_option("--singular-tol", cfg.trace.singular_tol, "Jacobian singular value that taints a trace");
        sub->add_option("--tangency-angle", cfg.trace.tangency_angle, "sphere crossings flatter than this are tangential");
        sub->add_option("--eps", cfg.approach.eps, "approach radius");
        sub->add_option("--ratio", cfg.approach.ratio, "approach scale ratio");
        sub->add_option("--levels", cfg.approach.levels, "approach scales");
        sub->add_option("--random-directions", cfg.approach.random_directions, "random approach directions");
        sub->add_option("--seed", seed_text, "random seed");
        sub->add_option("--jobs", cfg.jobs, "worker threads");
        sub->add_option("--config", config_path, "JSON run configuration overriding the flags");
        sub->add_option("--json", cfg.outputs.report_json, "report JSON path");
    };

    CLI::App* fiber = app.add_subcommand("fiber", "enumerate X_t and its invariants");
    common(fiber);
    fiber->add_option("--t", t_text, "parameter value, comma-separated");
    fiber->add_option("--exterior", exterior, "discard the part of the fiber inside this radius");
    fiber->add_option("--invariants-csv", cfg.outputs.invariants_csv, "invariants CSV path");
    fiber->add_option("--traces-csv", cfg.outputs.traces_csv, "traced polylines CSV path");

    CLI::App* diagnose = app.add_subcommand("diagnose", "classify one parameter value");
    common(diagnose);
    diagnose->add_option("--a", a_text, "parameter value, comma-separated");
    diagnose->add_option("--exterior", exterior, "restrict to the exterior of this radius");
    diagnose->add_option("--invariants-csv", cfg.outputs.invariants_csv, "invariants CSV path");

    CLI::App* milnor = app.add_subcommand("milnor", "Milnor set, S_c and the parity test");
    common(milnor);
    milnor->add_option("--a", a_text, "value for the parity test");
    milnor->add_option("--center", center_text, "Milnor centre cx,cy (default origin)");
    milnor->add_option("--traces-csv", cfg.outputs.traces_csv, "Milnor branches CSV path");

    CLI::App* scan_cmd = app.add_subcommand("scan", "sweep a parameter box");
    common(scan_cmd);
    scan_cmd->add_option("--box", box_text, "lo,hi per axis, axes separated by '/'");
    scan_cmd->add_option("--grid", grid_text, "samples per axis (one value or one per axis)");
    scan_cmd->add_option("--depth", cfg.region.refine_depth, "refinement levels");
    scan_cmd->add_option("--exterior", exterior, "exterior mode with inner radius R0");
    scan_cmd->add_option("--invariants-csv", cfg.outputs.invariants_csv, "invariants CSV path");

    const std::vector<std::string> args = glue_negative_values(argc, argv);
    std::vector<const char*> ptrs;
    for (const auto& s : args) {
        ptrs.push_back(s.c_str());
    }
    try {
        app.parse(static_cast<int>(ptrs.size()), ptrs.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "bifurcurve: " << e.what() << "\n";
        return 2;
    }

    try {
        for (CLI::App* sub : {fiber, diagnose, milnor, scan_cmd}) {
            if (sub->parsed()) {
                cfg.command = sub->get_name();
                const CLI::Option* ext = sub->get_option_no_throw("--exterior");
                if (ext && ext->count()) {
                    cfg.exterior = exterior;
                }
                if (sub == scan_cmd && !box_text.empty()) {
                    parse_box(box_text, cfg.region);
                }
                if (sub == scan_cmd) {
                    cfg.region.grid = parse_grid(grid_text);
                }
            }
        }
        if (!vars.empty()) {
            cfg.vars = split(vars, ',');
        }
        if (!t_text.empty()) {
            cfg.t = parse_list(t_text);
        }
        if (!a_text.empty()) {
            cfg.a = parse_list(a_text);
        }
        if (!center_text.empty()) {
            cfg.center = parse_list(center_text);
        }
        if (!seed_text.empty()) {
            cfg.seed = parse_seed(seed_text);
        }
        if (!config_path.empty()) {
            std::ifstream f(config_path);
            if (!f) {
                throw std::invalid_argument("cannot read config " + config_path);
            }
            Json j;
            try {
                j = Json::parse(f);
            } catch (const nlohmann::json::exception& e) {
                throw std::invalid_argument("config " + config_path + ": " + e.what());
            }
            const std::string command = cfg.command;
            apply_config(cfg, j);
            if (cfg.command != command) {
                throw std::invalid_argument("config command '" + cfg.command + "' differs from the subcommand");
            }
        }
        if (const char* env = std::getenv("BIFURCURVE_SEED")) {
            cfg.seed = parse_seed(env);
        }
        // A single grid value applies to every axis.
        if (cfg.command == "scan" && cfg.region.grid.size() == 1 && cfg.region.dim() > 1) {
            cfg.region.grid.assign(cfg.region.dim(), cfg.region.grid[0]);
        }
    } catch (const std::exception& e) {
        err << "bifurcurve: " << e.what() << "\n";
        return 2;
    }
    return run(cfg, out, err);
}

}  // namespace bifurcurve
