#include "bifurcurve/cli.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace bifurcurve;

namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome run_args(const std::vector<std::string>& args)
{
    std::vector<const char*> argv{"bifurcurve"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    Outcome o;
    o.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

// Whitespace-separated words; double quotes group.
std::vector<std::string> shell_words(const std::string& line)
{
    std::vector<std::string> out;
    std::string word;
    bool quoted = false;
    bool any = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
            any = true;
        } else if (!quoted && (c == ' ' || c == '\t')) {
            if (any) {
                out.push_back(word);
            }
            word.clear();
            any = false;
        } else {
            word += c;
            any = true;
        }
    }
    if (any) {
        out.push_back(word);
    }
    return out;
}

struct Example {
    std::string command;
    std::vector<std::string> args;
    int code = 0;
    std::string expected;
};

std::vector<Example> readme_examples()
{
    std::ifstream f(std::string(BIFURCURVE_SOURCE_DIR) + "/README.md");
    REQUIRE(f);
    std::vector<Example> out;
    std::string line;
    bool in_block = false;
    while (std::getline(f, line)) {
        if (!in_block) {
            in_block = line == "```console";
            continue;
        }
        if (line == "```") {
            in_block = false;
            continue;
        }
        if (line.rfind("$ ", 0) == 0) {
            Example e;
            std::string cmd = line.substr(2);
            const auto hash = cmd.find("  # exit ");
            if (hash != std::string::npos) {
                e.code = std::stoi(cmd.substr(hash + 9));
                cmd = cmd.substr(0, hash);
            }
            e.command = cmd;
            e.args = shell_words(cmd);
            REQUIRE(e.args.front() == "bifurcurve");
            e.args.erase(e.args.begin());
            out.push_back(e);
        } else {
            REQUIRE_FALSE(out.empty());
            out.back().expected += line + "\n";
        }
    }
    return out;
}

fs::path scratch()
{
    const fs::path dir = fs::temp_directory_path() / "bifurcurve_test_cli";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("every console example in the README reproduces")
{
    const std::vector<Example> examples = readme_examples();
    CHECK(examples.size() >= 10);
    for (const Example& e : examples) {
        INFO("example: " << e.command);
        const Outcome o = run_args(e.args);
        CHECK(o.code == e.code);
        CHECK(o.out == e.expected);
        CHECK(o.err.empty());
    }
}

TEST_CASE("number formatting and JSON layout")
{
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-0.015625) == "-0.015625");
    Json j;
    j["x"] = 0.1;
    j["bad"] = std::numeric_limits<double>::quiet_NaN();
    j["list"] = {1, 2.5};
    j["nested"] = Json::array({Json::array({0.0, 1.0})});
    const std::string text = dump_json(j);
    CHECK(text.find("\"x\":0.10000000000000001") != std::string::npos);
    CHECK(text.find("\"bad\":null") != std::string::npos);
    CHECK(text.find("\"list\":[1,2.5]") != std::string::npos);
    const Json back = Json::parse(text);
    CHECK(back["x"].get<double>() == 0.1);
    CHECK(back["nested"][0][1].get<double>() == 1.0);
}

TEST_CASE("invariants CSV schema")
{
    CHECK(invariants_header(1) == "b1,s,l,b0,b1_betti,chi,mu,stabilized");
    CHECK(invariants_header(2) == "b1,b2,s,l,b0,b1_betti,chi,mu,stabilized");
    FiberTopology t;
    t.b = Vec::Constant(1, 0.25);
    t.s = 1;
    t.l = 2;
    t.b0 = 3;
    t.b1 = 1;
    t.chi_components = 2;
    t.mu = 0.5;
    t.stabilized = true;
    CHECK(invariants_row(t) == "0.25,1,2,3,1,2,0.5,true");
    t.mu = std::nan("");
    t.stabilized = false;
    CHECK(invariants_row(t) == "0.25,1,2,3,1,2,,false");
    CHECK_THROWS_AS(invariants_csv({t}, 2), DimensionError);
}

TEST_CASE("report files")
{
    const fs::path dir = scratch();

    SUBCASE("verdict JSON for y (x^2 + 1) at 0 is typical")
    {
        const fs::path json = dir / "g.json";
        const fs::path csv = dir / "g.csv";
        const Outcome o = run_args({"diagnose", "--map", "y*(x^2+1)", "--vars", "x,y", "--a", "0", "--json",
                                    json.string(), "--invariants-csv", csv.string()});
        REQUIRE(o.code == 0);
        const std::string text = slurp(json);
        CHECK(text.find("\"classification\":\"typical\"") != std::string::npos);
        const Json j = Json::parse(text);
        CHECK(j["command"] == "diagnose");
        CHECK(j["verdict"]["topology"]["l"] == 1);
        CHECK(j["config"]["vars"] == Json::array({"x", "y"}));
        const std::string rows = slurp(csv);
        CHECK(rows.rfind("b1,s,l,b0,b1_betti,chi,mu,stabilized\n0,0,1,1,0,1,", 0) == 0);
    }
    SUBCASE("scan JSON for x + x^2 y has one cell around 0")
    {
        const fs::path json = dir / "f.json";
        const fs::path csv = dir / "f.csv";
        const Outcome o = run_args({"scan", "--map", "x + x^2*y", "--vars", "x,y", "--box", "-1,1", "--grid", "17",
                                    "--json", json.string(), "--invariants-csv", csv.string()});
        REQUIRE(o.code == 0);
        const Json j = Json::parse(slurp(json));
        const Json& cells = j["report"]["candidate_set"];
        REQUIRE(cells.size() == 1);
        CHECK(cells[0].size() == 2);
        CHECK(cells[0][0].get<double>() < 0.0);
        CHECK(cells[0][1].get<double>() > 0.0);
        CHECK(j["report"]["samples"].size() == j["report"]["stats"]["nodes"]);
        std::istringstream rows(slurp(csv));
        std::string line;
        std::size_t n = 0;
        while (std::getline(rows, line)) {
            ++n;
        }
        CHECK(n == 1 + j["report"]["samples"].size());
    }
    SUBCASE("traces CSV lists the polylines")
    {
        const fs::path csv = dir / "t.csv";
        const Outcome o = run_args(
            {"fiber", "--map", "x^2 + y^2", "--vars", "x,y", "--t", "4", "--traces-csv", csv.string()});
        REQUIRE(o.code == 0);
        std::istringstream rows(slurp(csv));
        std::string line;
        std::getline(rows, line);
        CHECK(line == "fiber,component,kind,point,x,y");
        std::size_t n = 0;
        while (std::getline(rows, line)) {
            CHECK(line.rfind("0,0,circle,", 0) == 0);
            const auto last = line.rfind(',');
            const auto prev = line.rfind(',', last - 1);
            const double x = std::stod(line.substr(prev + 1, last - prev - 1));
            const double y = std::stod(line.substr(last + 1));
            CHECK(std::hypot(x, y) == doctest::Approx(2.0).epsilon(1e-9));
            ++n;
        }
        CHECK(n > 10);
    }
    SUBCASE("milnor traces")
    {
        const fs::path csv = dir / "m.csv";
        const Outcome o = run_args({"milnor", "--map", "x", "--vars", "x,y", "--traces-csv", csv.string()});
        REQUIRE(o.code == 0);
        CHECK(o.out == "center=0,0 branches=1 retries=0\ns_c: empty\n");
        std::istringstream rows(slurp(csv));
        std::string line;
        std::getline(rows, line);
        CHECK(line == "branch,kind,point,x,y");
    }
}

TEST_CASE("identical configurations give byte-identical reports")
{
    const fs::path dir = scratch();
    const std::vector<std::string> base{"diagnose", "--map", "x + x^2*y", "--vars", "x,y", "--a", "0", "--json"};
    auto with = [&](const fs::path& p) {
        std::vector<std::string> v = base;
        v.push_back(p.string());
        return v;
    };
    REQUIRE(run_args(with(dir / "d1.json")).code == 0);
    REQUIRE(run_args(with(dir / "d2.json")).code == 0);
    std::string a = slurp(dir / "d1.json");
    std::string b = slurp(dir / "d2.json");
    // The echoed output path is the only difference.
    const auto strip = [](std::string s, const std::string& name) {
        const auto pos = s.find(name);
        REQUIRE(pos != std::string::npos);
        s.erase(pos, name.size());
        return s;
    };
    CHECK(strip(a, "d1.json") == strip(b, "d2.json"));

    // Worker count does not change the result.
    const std::vector<std::string> scan_args{"scan", "--map", "y*(x^2+1)", "--vars", "x,y", "--box", "-1,1",
                                             "--grid", "9", "--depth", "1"};
    std::vector<std::string> one = scan_args;
    one.insert(one.end(), {"--jobs", "1", "--json", (dir / "s1.json").string()});
    std::vector<std::string> two = scan_args;
    two.insert(two.end(), {"--jobs", "2", "--json", (dir / "s2.json").string()});
    REQUIRE(run_args(one).code == 0);
    REQUIRE(run_args(two).code == 0);
    CHECK(Json::parse(slurp(dir / "s1.json"))["report"] == Json::parse(slurp(dir / "s2.json"))["report"]);
}

TEST_CASE("config file and seed override")
{
    const fs::path dir = scratch();
    const fs::path cfg = dir / "run.json";
    {
        std::ofstream f(cfg);
        f << R"({"approach": {"eps": 0.25}, "seed": 7, "trace": {"radius": 12}})";
    }
    const fs::path json = dir / "c.json";
    Outcome o = run_args({"diagnose", "--map", "y*(x^2+1)", "--vars", "x,y", "--a", "0.5", "--eps", "0.4",
                          "--seed", "3", "--config", cfg.string(), "--json", json.string()});
    REQUIRE(o.code == 0);
    Json j = Json::parse(slurp(json));
    CHECK(j["config"]["approach"]["eps"] == 0.25);
    CHECK(j["config"]["trace"]["radius"] == 12);
    CHECK(j["config"]["seed"] == 7);
    CHECK(j["verdict"]["eps"] == 0.25);

    ::setenv("BIFURCURVE_SEED", "99", 1);
    o = run_args({"diagnose", "--map", "y*(x^2+1)", "--vars", "x,y", "--a", "0.5", "--config", cfg.string(),
                  "--json", json.string()});
    CHECK(o.code == 0);
    CHECK(Json::parse(slurp(json))["config"]["seed"] == 99);
    ::setenv("BIFURCURVE_SEED", "-4", 1);
    o = run_args({"fiber", "--map", "x", "--vars", "x,y", "--t", "0"});
    CHECK(o.code == 2);
    ::unsetenv("BIFURCURVE_SEED");

    RunConfig rc;
    CHECK_THROWS_AS(apply_config(rc, Json::parse(R"({"trace": {"radius": "big"}})")), std::invalid_argument);
    CHECK_THROWS_AS(apply_config(rc, Json::parse(R"({"region": {"corners": 4}})")), std::invalid_argument);
    apply_config(rc, Json::parse(R"({"region": {"lo": [-1], "hi": [1], "grid": [5]}, "exterior": 3})"));
    CHECK(rc.region.grid == std::vector<int>{5});
    CHECK(rc.exterior == 3.0);
    // to_json and apply_config round-trip
    RunConfig copy;
    apply_config(copy, to_json(rc));
    CHECK(to_json(copy) == to_json(rc));
}

TEST_CASE("input errors exit with 2 and one line on the error stream")
{
    const fs::path dir = scratch();
    {
        std::ofstream f(dir / "bad.json");
        f << R"({"bogus": 1})";
    }
    {
        std::ofstream f(dir / "broken.json");
        f << "{";
    }
    const std::vector<std::vector<std::string>> cases{
        {"diagnose", "--map", "x +", "--vars", "x,y", "--a", "0"},
        {"diagnose", "--map", "x + z", "--vars", "x,y", "--a", "0"},
        {"fiber", "--map", "x", "--vars", "x,y", "--t", "0", "--frobnicate"},
        {"fiber", "--map", "x", "--vars", "x,y", "--t", "zero"},
        {"fiber", "--map", "x", "--t", "0"},
        {"fiber", "--map", "x", "--vars", "x,y"},
        {"fiber", "--map", "x", "--vars", "x,y", "--t", "0,1"},
        {"fiber", "--map", "x", "--vars", "x,y", "--t", "0", "--json", "/nonexistent/dir/r.json"},
        {"fiber", "--map", "x", "--vars", "x,y", "--t", "0", "--config", (dir / "bad.json").string()},
        {"fiber", "--map", "x", "--vars", "x,y", "--t", "0", "--config", (dir / "broken.json").string()},
        {"fiber", "--map", "x", "--vars", "x,y", "--t", "0", "--radius", "-1"},
        {"scan", "--map", "x", "--vars", "x,y"},
        {"scan", "--map", "x", "--vars", "x,y", "--box", "1,1"},
        {"scan", "--map", "x", "--vars", "x,y", "--box", "-1,1", "--grid", "2"},
        {"scan", "--map", "x", "--vars", "x,y", "--box", "-1,1", "--exterior", "-5"},
        {"scan", "--map", "x", "--vars", "x,y", "--box", "-1,1", "--traces-csv", "t.csv"},
        {"milnor", "--map", "z; x", "--vars", "x,y,z"},
        {"frobnicate"},
        {},
    };
    for (const auto& args : cases) {
        std::string joined;
        for (const auto& a : args) {
            joined += a + " ";
        }
        INFO("args: " << joined);
        const Outcome o = run_args(args);
        CHECK(o.code == 2);
        CHECK(o.out.empty());
        CHECK_FALSE(o.err.empty());
        CHECK(o.err.find('\n') == o.err.size() - 1);
    }
    CHECK(run_args({"--help"}).code == 0);
    CHECK(run_args({"scan", "--help"}).code == 0);
}

TEST_CASE("map files hold one component per line")
{
    const fs::path dir = scratch();
    {
        std::ofstream f(dir / "map.txt");
        f << "z\nx + x^2*y\n";
    }
    const Outcome o =
        run_args({"fiber", "--map-file", (dir / "map.txt").string(), "--vars", "x,y,z", "--t", "0.3,0.5"});
    CHECK(o.code == 0);
    CHECK(o.out.rfind("t=0.3,0.5 s=0 l=2 b0=2 b1=0 chi=2 ", 0) == 0);
    CHECK(run_args({"fiber", "--map-file", (dir / "missing.txt").string(), "--vars", "x,y", "--t", "0"}).code == 2);
    CHECK(run_args({"fiber", "--map", "x", "--map-file", (dir / "map.txt").string(), "--vars", "x,y", "--t", "0"})
              .code == 2);
}
