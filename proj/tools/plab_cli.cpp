#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "plab/acceptance.hpp"
#include "plab/io.hpp"
#include "plab/plot.hpp"

using namespace plab;
using io::json;

namespace {

enum Exit { ok = 0, verdict_failed = 1, schema = 2, runtime = 3 };

bool g_no_write = false;

// Prints the CSV artifact (to stdout or `csv_out`) or the JSON verdict.
int execute(const io::ExperimentConfig& c, bool want_csv, const std::string& csv_out = "")
{
    auto r = io::run(c);
    if (!g_no_write) {
        for (auto& f : io::write_outputs(c, r)) std::cerr << "wrote " << f.string() << "\n";
    }
    if (want_csv && !r.csv.empty()) {
        std::string body = io::csv_header(c) + r.csv;
        if (csv_out.empty())
            std::cout << body;
        else
            io::write_file(csv_out, body);
    } else {
        std::cout << r.verdict.dump(2) << "\n";
    }
    return r.passed ? ok : verdict_failed;
}

io::ExperimentConfig fixture_or_config(const std::string& fixture, const std::string& config)
{
    if (!config.empty()) return io::load_config(config);
    return io::load_fixture(fixture);
}

void require_kind(const io::ExperimentConfig& c, const std::string& kind)
{
    if (c.kind != kind) throw io::SchemaError("'" + c.name + "' is a " + c.kind + " experiment, expected " + kind);
}

json stopping_model(const std::string& set, double gamma, double n)
{
    if (set == "nonattainable") return {{"type", "discrete"}, {"masses", {0.25, 0.35, 0.4}}, {"tail", 1e-15}};
    if (set == "line-exploration" || set == "randomized-line-exploration")
        return {{"type", "boolean"}, {"dim", 2}, {"gamma", gamma}, {"radius", {{"law", "fixed"}, {"r", 1}}}};
    (void)n;
    return {{"type", "empty-space"}, {"area", 4.0}, {"gamma", gamma}};
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"plab: stopping sets, chaos audits, Poisson dynamics and continuum percolation"};
    app.set_version_flag("--version", std::string(PLAB_VERSION));
    app.require_subcommand(1);
    app.add_flag("--no-write", g_no_write, "do not write the output files named in the config");
    std::function<int()> action;

    // sample ----------------------------------------------------------------
    auto* sample = app.add_subcommand("sample", "sample a Poisson configuration on [0,side]^dim and print it as CSV");
    double s_gamma = 1, s_side = 10, s_radius = 0;
    int s_dim = 2;
    uint64_t s_seed = 0;
    std::string s_out;
    sample->add_option("--gamma", s_gamma, "intensity")->check(CLI::PositiveNumber);
    sample->add_option("--side", s_side, "box side")->check(CLI::PositiveNumber);
    sample->add_option("--dim", s_dim, "dimension")->check(CLI::Range(1, 3));
    sample->add_option("--radius", s_radius, "attach fixed grain radii");
    sample->add_option("--seed", s_seed);
    sample->add_option("-o,--output", s_out, "output file (default stdout)");
    sample->callback([&] {
        action = [&] {
            MarkLaw marks;
            if (s_radius > 0) marks = MarkLaw::grains(RadiusLaw::fixed(s_radius), GrainKind::ball);
            auto m = IntensityModel::homogeneous(s_gamma, marks);
            auto w = Window::make_box(Box::cube(s_dim, 0, s_side));
            RngStream rng(s_seed, 0);
            auto cfg = sample_poisson(m, w, rng);
            json h = {{"plab_version", io::version()},
                      {"sample", {{"gamma", s_gamma}, {"side", s_side}, {"dim", s_dim}, {"radius", s_radius}, {"seed", s_seed}}}};
            std::ostringstream os;
            os << "# " << h.dump() << "\n";
            write_csv(cfg, os);
            if (s_out.empty())
                std::cout << os.str();
            else
                io::write_file(io::output_path(s_out), os.str());
            return int(ok);
        };
    });

    // stopping audit --------------------------------------------------------
    auto* stopping = app.add_subcommand("stopping", "stopping-set checks");
    stopping->require_subcommand(1);
    auto* st_audit = stopping->add_subcommand("audit", "stopping axiom, with optional revealment table");
    std::string st_set;
    size_t st_trials = 1000, st_probes = 200, st_rev = 0;
    uint64_t st_seed = 1;
    double st_gamma = 3, st_n = 10;
    st_audit->add_option("--set", st_set, "stopping set")
        ->required()
        ->check(CLI::IsMember({"ball-growth", "nonattainable", "line-exploration", "randomized-line-exploration", "broken", "whole", "empty"}));
    st_audit->add_option("--trials", st_trials);
    st_audit->add_option("--probes", st_probes);
    st_audit->add_option("--revealment", st_rev, "also estimate revealment with this many samples");
    st_audit->add_option("--gamma", st_gamma, "intensity (line sets default to 0.36)");
    st_audit->add_option("--n", st_n, "window size for line sets");
    st_audit->add_option("--seed", st_seed);
    st_audit->callback([&] {
        action = [&] {
            bool line = st_set.find("line") != std::string::npos;
            double g = line && st_audit->count("--gamma") == 0 ? 0.36 : st_gamma;
            json cfg = {{"version", 1},
                        {"name", "stopping-" + st_set},
                        {"kind", "audit"},
                        {"model", stopping_model(st_set, g, st_n)},
                        {"params", {{"audit", "stopping-axiom"}, {"set", st_set}, {"probes", st_probes}}},
                        {"seed", st_seed},
                        {"replicas", st_trials}};
            if (line) cfg["params"]["n"] = st_n;
            auto c = io::parse_config(cfg);
            auto r = io::run(c);
            json out = r.verdict;
            if (st_rev > 0) {
                cfg["params"]["audit"] = "revealment";
                cfg["params"].erase("probes");
                cfg["replicas"] = st_rev;
                out["revealment"] = io::run(io::parse_config(cfg)).verdict["result"];
            }
            std::cout << out.dump(2) << "\n";
            return int(r.passed ? ok : verdict_failed);
        };
    });

    // chaos audit / audit / run ----------------------------------------------
    auto* chaos = app.add_subcommand("chaos", "chaos-expansion audits");
    chaos->require_subcommand(1);
    auto* ch_audit = chaos->add_subcommand("audit", "run an audit fixture");
    std::string ch_fixture;
    ch_audit->add_option("--fixture", ch_fixture, "fixture name")->required();
    ch_audit->callback([&] {
        action = [&] {
            auto c = io::load_fixture(ch_fixture);
            require_kind(c, "audit");
            return execute(c, false);
        };
    });

    auto* audit = app.add_subcommand("audit", "run an audit fixture by name");
    std::string au_fixture;
    audit->add_option("fixture", au_fixture)->required();
    audit->callback([&] {
        action = [&] {
            auto c = io::load_fixture(au_fixture);
            require_kind(c, "audit");
            return execute(c, false);
        };
    });

    auto* run = app.add_subcommand("run", "run an experiment config file");
    std::string run_config;
    bool run_csv = false;
    run->add_option("config", run_config)->required()->check(CLI::ExistingFile);
    run->add_flag("--csv", run_csv, "print the CSV artifact instead of the JSON verdict");
    run->callback([&] { action = [&] { return execute(io::load_config(run_config), run_csv); }; });

    auto* list = app.add_subcommand("fixtures", "list fixture names");
    list->callback([&] {
        action = [&] {
            for (auto& n : io::fixture_names()) std::cout << n << "\n";
            return int(ok);
        };
    });

    // dynamics ---------------------------------------------------------------
    auto* dyn = app.add_subcommand("dynamics", "birth-death dynamics");
    dyn->require_subcommand(1);
    auto* dyn_run = dyn->add_subcommand("run", "covariance curve and one event path");
    std::string dy_fixture = "dynamics-crossing", dy_config;
    bool dy_csv = false;
    dyn_run->add_option("--fixture", dy_fixture);
    dyn_run->add_option("--config", dy_config)->check(CLI::ExistingFile);
    dyn_run->add_flag("--csv", dy_csv, "print the covariance CSV instead of the JSON verdict");
    dyn_run->callback([&] {
        action = [&] {
            auto c = fixture_or_config(dy_fixture, dy_config);
            require_kind(c, "dynamics");
            return execute(c, dy_csv);
        };
    });
    auto* dyn_ex = dyn->add_subcommand("exceptional", "times at which the crossing of [0,n]^2 switches, as CSV");
    double ex_gamma = 0.36, ex_n = 8, ex_h = 1;
    size_t ex_paths = 5;
    uint64_t ex_seed = 1;
    dyn_ex->add_option("--gamma", ex_gamma)->check(CLI::PositiveNumber);
    dyn_ex->add_option("--n", ex_n)->check(CLI::PositiveNumber);
    dyn_ex->add_option("--horizon", ex_h)->check(CLI::PositiveNumber);
    dyn_ex->add_option("--paths", ex_paths);
    dyn_ex->add_option("--seed", ex_seed);
    dyn_ex->callback([&] {
        action = [&] {
            auto m = fixtures::planar_disks(ex_gamma);
            Box rect = Box::rectangle(2, ex_n, ex_n);
            json h = {{"plab_version", io::version()},
                      {"exceptional", {{"gamma", ex_gamma}, {"n", ex_n}, {"horizon", ex_h}, {"paths", ex_paths}, {"seed", ex_seed}}}};
            std::cout << "# " << h.dump() << "\npath,time\n" << std::setprecision(12);
            for (size_t i = 0; i < ex_paths; ++i) {
                RngStream rng(ex_seed, i, 0xe8c);
                auto path = simulate_path(m.intensity(), m.window(rect), ex_h, rng);
                for (double t : exceptional_times_crossing(path, m, rect)) std::cout << i << ',' << t << '\n';
            }
            return int(ok);
        };
    });

    // perc -------------------------------------------------------------------
    auto* perc = app.add_subcommand("perc", "percolation experiments");
    perc->require_subcommand(1);
    std::string sc_fixture = "boolean-k1", sc_gamma, sc_p, sc_out;
    double sc_n = 0;
    size_t sc_rep = 0;
    uint64_t sc_seed = 0;
    auto scan_opts = [&](CLI::App* a) {
        a->add_option("fixture", sc_fixture, "scan fixture (default boolean-k1)");
        a->add_option("--gamma", sc_gamma, "intensity grid lo:hi:count");
        a->add_option("--p", sc_p, "confetti grid lo:hi:count");
        a->add_option("--n", sc_n, "window size")->check(CLI::PositiveNumber);
        a->add_option("--replicas", sc_rep);
        a->add_option("--seed", sc_seed);
        a->add_option("-o,--output", sc_out, "CSV file (default stdout)");
    };
    auto scan_config = [&](CLI::App* a) {
        auto c = io::load_fixture(sc_fixture);
        require_kind(c, "scan");
        if (!sc_gamma.empty()) c.params["grid"] = sc_gamma;
        if (!sc_p.empty()) c.params["grid"] = sc_p;
        if (sc_n > 0) c.params["n"] = sc_n;
        if (sc_rep > 0) c.replicas = sc_rep;
        if (a->count("--seed")) c.seed = sc_seed;
        return c;
    };
    auto* p_scan = perc->add_subcommand("scan", "crossing probability over a parameter grid (CSV)");
    scan_opts(p_scan);
    p_scan->callback([&] { action = [&] { return execute(scan_config(p_scan), true, sc_out.empty() ? "" : io::output_path(sc_out).string()); }; });
    auto* scan = app.add_subcommand("scan", "alias of perc scan");
    scan_opts(scan);
    scan->callback([&] { action = [&] { return execute(scan_config(scan), true, sc_out.empty() ? "" : io::output_path(sc_out).string()); }; });

    auto* p_crit = perc->add_subcommand("critical", "estimate the parameter at which the crossing probability is 1/2");
    scan_opts(p_crit);
    double cr_lo = 0, cr_hi = 0, cr_tol = 0.01;
    p_crit->add_option("--lo", cr_lo);
    p_crit->add_option("--hi", cr_hi);
    p_crit->add_option("--tol", cr_tol)->check(CLI::PositiveNumber);
    p_crit->callback([&] {
        action = [&] {
            auto c = scan_config(p_crit);
            auto grid = io::parse_grid(c.params.at("grid"));
            c.params["critical"] = {{"lo", p_crit->count("--lo") ? cr_lo : grid.front()}, {"hi", p_crit->count("--hi") ? cr_hi : grid.back()}, {"tol", cr_tol}};
            return execute(c, false);
        };
    });

    auto* p_dual = perc->add_subcommand("duality", "planar confetti crossing and raster duality");
    std::string du_fixture = "confetti-half", du_adj;
    double du_n = 0;
    size_t du_rep = 0;
    uint64_t du_seed = 0;
    p_dual->add_option("fixture", du_fixture);
    p_dual->add_option("--n", du_n)->check(CLI::PositiveNumber);
    p_dual->add_option("--replicas", du_rep);
    p_dual->add_option("--seed", du_seed);
    p_dual->add_option("--adjacency", du_adj)->check(CLI::IsMember({"black8_white4", "center_resolved"}));
    p_dual->callback([&] {
        action = [&] {
            auto c = io::load_fixture(du_fixture);
            require_kind(c, "duality");
            if (du_n > 0) c.params["n"] = du_n;
            if (du_rep > 0) c.replicas = du_rep;
            if (p_dual->count("--seed")) c.seed = du_seed;
            if (!du_adj.empty()) c.model["adjacency"] = du_adj;
            return execute(c, false);
        };
    });

    // plot -------------------------------------------------------------------
    auto* plot = app.add_subcommand("plot", "render a scan or covariance CSV as SVG");
    std::string pl_csv, pl_kind = "auto", pl_out;
    plot->add_option("csv", pl_csv)->required()->check(CLI::ExistingFile);
    plot->add_option("--kind", pl_kind)->check(CLI::IsMember({"auto", "scan", "cov"}));
    plot->add_option("-o,--output", pl_out, "SVG file (default stdout)");
    plot->callback([&] {
        action = [&] {
            std::ifstream in(pl_csv);
            auto svg = plot::svg_from_csv(in, pl_kind);
            if (pl_out.empty())
                std::cout << svg;
            else
                io::write_file(io::output_path(pl_out), svg);
            return int(ok);
        };
    });

    // acceptance -------------------------------------------------------------
    auto* acc = app.add_subcommand("acceptance", "run the acceptance criteria (all or by name)");
    std::vector<std::string> acc_names;
    std::string acc_json;
    acc->add_option("names", acc_names, "criterion names or 'all'");
    acc->add_option("--json", acc_json, "write the machine-readable summary here");
    acc->callback([&] {
        action = [&] {
            std::vector<std::string> names;
            for (auto& n : acc_names) {
                if (n == "all") {
                    names = acceptance::Suite::names();
                    break;
                }
                auto& all = acceptance::Suite::names();
                if (std::find(all.begin(), all.end(), n) == all.end()) throw Error("acceptance", "unknown criterion '" + n + "'");
                names.push_back(n);
            }
            if (names.empty()) names = acceptance::Suite::names();
            acceptance::Suite suite;
            json results = json::array();
            int failed = 0;
            for (auto& n : names) {
                auto r = suite.run(n);
                std::cerr << acceptance::line(r) << std::endl;
                failed += !r.passed;
                results.push_back(acceptance::to_json(r));
            }
            json summary = {{"plab_version", io::version()}, {"passed", failed == 0}, {"failed", failed}, {"criteria", results}};
            if (!acc_json.empty()) io::write_file(io::output_path(acc_json), summary.dump(2) + "\n");
            std::cout << summary.dump(2) << "\n";
            return int(failed ? verdict_failed : ok);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        return action ? action() : int(ok);
    } catch (const io::SchemaError& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return schema;
    } catch (const json::exception& e) {
        std::cerr << "schema error: " << e.what() << "\n";
        return schema;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.where() == "acceptance" ? schema : runtime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return runtime;
    }
}
