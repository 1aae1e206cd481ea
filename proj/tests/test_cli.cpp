#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "plab/io.hpp"
#include "plab/plot.hpp"

using namespace plab;
using io::json;
namespace fs = std::filesystem;

namespace {

struct Proc {
    int rc = -1;
    std::string out;
};

// runs the CLI with stderr folded into stdout
Proc cli(const std::string& args)
{
    fs::path dir = fs::temp_directory_path() / "plab_cli_test";
    fs::create_directories(dir);
    std::string cmd = "PLAB_OUTPUT_DIR=" + dir.string() + " " + PLAB_CLI_PATH + " " + args + " 2>&1";
    Proc p;
    FILE* f = popen(cmd.c_str(), "r");
    if (!f) return p;
    std::array<char, 4096> buf{};
    size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), f)) > 0) p.out.append(buf.data(), n);
    int st = pclose(f);
    p.rc = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return p;
}

fs::path tmp_file(const std::string& name, const std::string& body)
{
    fs::path p = fs::temp_directory_path() / "plab_cli_test" / name;
    fs::create_directories(p.parent_path());
    std::ofstream(p) << body;
    return p;
}

size_t data_rows(const std::string& csv)
{
    std::istringstream is(csv);
    std::string line;
    size_t n = 0;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        ++n;
    }
    return n;
}

json minimal()
{
    return {{"version", 1}, {"kind", "audit"}, {"model", {{"type", "empty-space"}}}, {"params", {{"audit", "poincare"}}}, {"seed", 1}, {"replicas", 100}};
}

}  // namespace

TEST(Grid, ColonSyntax)
{
    auto g = io::parse_grid("0.2:2.0:10");
    ASSERT_EQ(g.size(), 10u);
    EXPECT_DOUBLE_EQ(g.front(), 0.2);
    EXPECT_DOUBLE_EQ(g.back(), 2.0);
    EXPECT_NEAR(g[1] - g[0], 0.2, 1e-12);
    EXPECT_EQ(io::parse_grid("0.5:0.9:1"), std::vector<double>{0.5});
    EXPECT_EQ(io::parse_grid(json::array({1, 2, 3})).size(), 3u);
}

TEST(Grid, Malformed)
{
    EXPECT_THROW(io::parse_grid("0.2:2.0"), io::SchemaError);
    EXPECT_THROW(io::parse_grid("0.2-2.0-10"), io::SchemaError);
    EXPECT_THROW(io::parse_grid("0.2:2.0:10x"), io::SchemaError);
    EXPECT_THROW(io::parse_grid("0.2:2.0:0"), io::SchemaError);
    EXPECT_THROW(io::parse_grid(json::array({3, 1})), io::SchemaError);
    EXPECT_THROW(io::parse_grid(json::array()), io::SchemaError);
    EXPECT_THROW(io::parse_grid(5), io::SchemaError);
}

TEST(Config, MinimalParses)
{
    auto c = io::parse_config(minimal());
    EXPECT_EQ(c.kind, "audit");
    EXPECT_EQ(c.replicas, 100u);
    EXPECT_DOUBLE_EQ(c.sigma, 3.0);
}

TEST(Config, SchemaViolations)
{
    auto bad = [](auto edit) {
        json j = minimal();
        edit(j);
        return j;
    };
    EXPECT_THROW(io::parse_config(bad([](json& j) { j.erase("kind"); })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["kind"] = "bogus"; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["version"] = 2; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["replicas"] = 0; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["seed"] = -1; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["seed"] = 1.5; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["extra"] = 1; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["model"] = 3; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["outputs"] = {{"svg", "x"}}; })), io::SchemaError);
    EXPECT_THROW(io::parse_config(bad([](json& j) { j["tolerances"] = {{"sigma", -1}}; })), io::SchemaError);
}

TEST(Config, ModelErrorsSurfaceAtRun)
{
    json j = minimal();
    j["model"] = {{"type", "empty-space"}, {"radius", 2}};
    EXPECT_THROW(io::run(io::parse_config(j)), io::SchemaError);
    j["model"] = {{"type", "boolean"}, {"gamma", 0.3}, {"radius", {{"law", "pareto"}, {"scale", 1}, {"shape", 2.5}, {"alpha", 1}}}};
    try {
        io::run(io::parse_config(j));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.where(), "core_pp");
    }
}

TEST(Fixtures, RegistryParses)
{
    auto names = io::fixture_names();
    ASSERT_GE(names.size(), 10u);
    for (auto& n : names) {
        SCOPED_TRACE(n);
        auto c = io::load_fixture(n);
        EXPECT_FALSE(c.description.empty());
        EXPECT_TRUE(c.outputs.contains("json"));
    }
    EXPECT_THROW(io::load_fixture("no-such-fixture"), Error);
}

TEST(Run, ScanShapeAndDeterminism)
{
    auto c = io::load_fixture("boolean-k1");
    c.params["grid"] = "0.2:2.0:10";
    c.params["n"] = 6;
    c.replicas = 50;
    auto a = io::run(c), b = io::run(c);
    EXPECT_EQ(data_rows(a.csv), 10u);
    EXPECT_EQ(a.csv.substr(0, a.csv.find('\n')), "param,n,estimate,se,samples,seed");
    EXPECT_EQ(io::csv_header(c) + a.csv, io::csv_header(c) + b.csv);
    EXPECT_EQ(a.verdict.dump(), b.verdict.dump());
}

TEST(Run, HeaderRecordsResolvedConfig)
{
    auto c = io::load_fixture("boolean-k1");
    c.replicas = 20;
    auto line = io::csv_header(c);
    ASSERT_EQ(line.substr(0, 2), "# ");
    auto h = json::parse(line.substr(2));
    EXPECT_EQ(h["plab_version"], io::version());
    auto back = io::parse_config(h["config"]);
    EXPECT_EQ(back.resolved().dump(), c.resolved().dump());
}

TEST(Run, ChaosFixtureExact)
{
    auto r = io::run(io::load_fixture("chaos-oracle"));
    auto& w = r.verdict["result"]["weights"];
    for (int k = 1; k <= 6; ++k) EXPECT_NEAR(w[size_t(k - 1)].get<double>(), std::pow(0.5, k) * std::exp(-1.0) / std::tgamma(k + 1.0), 1e-12);
    EXPECT_TRUE(r.passed);
}

TEST(Run, CondMomentAndTruncationFixtures)
{
    auto r = io::run(io::load_fixture("cond-moment"));
    EXPECT_TRUE(r.passed);
    EXPECT_LE(r.verdict["result"]["lhs"].get<double>(), r.verdict["result"]["rhs"].get<double>() + 1e-12);
    auto c = io::load_fixture("truncation-pareto");
    c.replicas = 200;
    auto t = io::run(c);
    EXPECT_TRUE(t.passed);
    EXPECT_DOUBLE_EQ(t.verdict["result"]["r_n"].get<double>(), 16.0);
}

TEST(Run, StoppingAuditCatchesBrokenSet)
{
    json j = {{"version", 1},
              {"kind", "audit"},
              {"model", {{"type", "empty-space"}, {"area", 4}, {"gamma", 3}}},
              {"params", {{"audit", "stopping-axiom"}, {"set", "broken"}, {"probes", 50}}},
              {"seed", 1},
              {"replicas", 200}};
    auto r = io::run(io::parse_config(j));
    EXPECT_FALSE(r.passed);
    EXPECT_GT(r.verdict["result"]["failures"].get<int>(), 0);
    EXPECT_FALSE(r.verdict["result"]["counterexamples"].empty());
    j["params"]["set"] = "ball-growth";
    EXPECT_TRUE(io::run(io::parse_config(j)).passed);
}

TEST(Run, WritesOutputsUnderOutputDir)
{
    fs::path dir = fs::temp_directory_path() / "plab_io_test";
    fs::remove_all(dir);
    setenv("PLAB_OUTPUT_DIR", dir.c_str(), 1);
    auto c = io::load_fixture("boolean-k1");
    c.replicas = 10;
    auto files = io::write_outputs(c, io::run(c));
    unsetenv("PLAB_OUTPUT_DIR");
    ASSERT_EQ(files.size(), 2u);
    std::ifstream in(dir / "boolean-k1.csv");
    std::string first;
    std::getline(in, first);
    EXPECT_EQ(first.substr(0, 2), "# ");
    EXPECT_TRUE(fs::exists(dir / "boolean-k1.json"));
}

TEST(Plot, DetectsSchemas)
{
    std::istringstream scan("# hdr\nparam,n,estimate,se,samples,seed\n0.1,4,0.2,0.01,10,1\n0.2,4,0.6,0.02,10,1\n");
    auto svg = plot::svg_from_csv(scan);
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("polyline"), std::string::npos);
    std::istringstream cov("t,cov,se\n0.1,0.2,0.01\n1,0.05,0.01\n");
    EXPECT_NE(plot::svg_from_csv(cov).find("(log)"), std::string::npos);
    std::istringstream cov2("t,cov,se\n0.1,0.2,0.01\n");
    EXPECT_THROW(plot::svg_from_csv(cov2, "scan"), Error);
}

TEST(Plot, RejectsEmptyAndUnknown)
{
    std::istringstream empty("param,n,estimate,se,samples,seed\n");
    EXPECT_THROW(plot::svg_from_csv(empty), Error);
    std::istringstream nothing("");
    EXPECT_THROW(plot::svg_from_csv(nothing), Error);
    std::istringstream other("a,b\n1,2\n");
    EXPECT_THROW(plot::svg_from_csv(other), Error);
}

TEST(Binary, ScanAliasTenRows)
{
    auto p = cli("--no-write scan boolean-k1 --gamma 0.2:2.0:10 --n 16 --replicas 100");
    ASSERT_EQ(p.rc, 0) << p.out;
    EXPECT_EQ(data_rows(p.out), 10u);
    EXPECT_NE(p.out.find("param,n,estimate,se,samples,seed"), std::string::npos);
}

TEST(Binary, AuditFixtureVerdict)
{
    auto p = cli("--no-write audit osss-empty-space");
    ASSERT_EQ(p.rc, 0) << p.out;
    auto j = json::parse(p.out);
    EXPECT_TRUE(j["result"]["passed"].get<bool>());
    EXPECT_EQ(j["config"]["name"], "osss-empty-space");
}

TEST(Binary, MalformedConfigExitsWithSchemaError)
{
    auto f = tmp_file("bad.json", R"({"version": 1, "kind": "scan", "model": {"type": "boolean"}, "seed": "x", "replicas": 5})");
    auto p = cli("run " + f.string());
    EXPECT_EQ(p.rc, 2);
    EXPECT_NE(p.out.find("schema error"), std::string::npos);
    auto g = tmp_file("bad2.json", "{ not json");
    EXPECT_EQ(cli("run " + g.string()).rc, 2);
}

TEST(Binary, AcceptanceByName)
{
    auto p = cli("acceptance chaos-oracle");
    ASSERT_EQ(p.rc, 0) << p.out;
    EXPECT_NE(p.out.find("PASS chaos-oracle"), std::string::npos);
    auto bad = cli("acceptance not-a-criterion");
    EXPECT_NE(bad.rc, 0);
    EXPECT_NE(bad.out.find("unknown criterion"), std::string::npos);
}

TEST(Binary, StoppingAuditNegativeControl)
{
    EXPECT_EQ(cli("stopping audit --set broken --trials 200").rc, 1);
    EXPECT_EQ(cli("stopping audit --set nonattainable --trials 500 --revealment 200").rc, 0);
}

TEST(Binary, SampleRoundTrips)
{
    auto p = cli("sample --gamma 0.5 --side 4 --seed 3");
    ASSERT_EQ(p.rc, 0);
    std::istringstream is(p.out);
    auto cfg = read_csv(is, Window::make_box(Box::cube(2, 0, 4)));
    RngStream rng(3, 0);
    auto direct = sample_poisson(IntensityModel::homogeneous(0.5), Window::make_box(Box::cube(2, 0, 4)), rng);
    EXPECT_TRUE(same_multiset(cfg, direct));
}

TEST(Binary, PlotEmptyCsvFails)
{
    auto f = tmp_file("empty.csv", "t,cov,se\n");
    EXPECT_NE(cli("plot " + f.string()).rc, 0);
    auto g = tmp_file("cov.csv", "t,cov,se\n0.1,1,0.1\n1,0.3,0.05\n");
    auto p = cli("plot " + g.string());
    EXPECT_EQ(p.rc, 0);
    EXPECT_NE(p.out.find("</svg>"), std::string::npos);
}

TEST(Binary, UnknownSubcommand)
{
    EXPECT_NE(cli("frobnicate").rc, 0);
    EXPECT_NE(cli("").rc, 0);
}
