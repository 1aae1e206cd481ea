#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "plab/chaos.hpp"
#include "plab/dynamics.hpp"
#include "plab/fixtures.hpp"
#include "plab/percolation.hpp"
#include "plab/stopping.hpp"

#ifndef PLAB_VERSION
#define PLAB_VERSION "unknown"
#endif
#ifndef PLAB_FIXTURE_DIR
#define PLAB_FIXTURE_DIR "fixtures"
#endif

namespace plab::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr const char* version() { return PLAB_VERSION; }

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error("config", what) {}
};

// ---------------------------------------------------------------- schema helpers

namespace detail {

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object()) throw SchemaError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!ok.count(it.key())) throw SchemaError(where + ": unknown key '" + it.key() + "'");
}

inline const json& need(const json& j, const std::string& where, const char* key)
{
    if (!j.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
    return j.at(key);
}

inline double num(const json& j, const std::string& where, const char* key, std::optional<double> def = std::nullopt)
{
    if (!j.contains(key)) {
        if (def) return *def;
        throw SchemaError(where + ": missing '" + key + "'");
    }
    if (!j.at(key).is_number()) throw SchemaError(where + "." + key + " must be a number");
    double v = j.at(key).get<double>();
    if (!std::isfinite(v)) throw SchemaError(where + "." + key + " must be finite");
    return v;
}

inline double positive(const json& j, const std::string& where, const char* key, std::optional<double> def = std::nullopt)
{
    double v = num(j, where, key, def);
    if (!(v > 0)) throw SchemaError(where + "." + key + " must be positive");
    return v;
}

inline uint64_t count(const json& j, const std::string& where, const char* key, std::optional<uint64_t> def = std::nullopt)
{
    if (!j.contains(key)) {
        if (def) return *def;
        throw SchemaError(where + ": missing '" + key + "'");
    }
    auto& v = j.at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<int64_t>() < 0)) throw SchemaError(where + "." + key + " must be a nonnegative integer");
    return v.get<uint64_t>();
}

inline std::string str(const json& j, const std::string& where, const char* key, std::optional<std::string> def = std::nullopt)
{
    if (!j.contains(key)) {
        if (def) return *def;
        throw SchemaError(where + ": missing '" + key + "'");
    }
    if (!j.at(key).is_string()) throw SchemaError(where + "." + key + " must be a string");
    return j.at(key).get<std::string>();
}

inline std::string one_of(const json& j, const std::string& where, const char* key, std::initializer_list<const char*> values,
                          std::optional<std::string> def = std::nullopt)
{
    auto v = str(j, where, key, def);
    for (auto* c : values)
        if (v == c) return v;
    std::string all;
    for (auto* c : values) all += std::string(all.empty() ? "" : "|") + c;
    throw SchemaError(where + "." + key + " must be one of " + all + " (got '" + v + "')");
}

}  // namespace detail

// "lo:hi:count" (inclusive, evenly spaced) or a JSON array
inline std::vector<double> parse_grid(const json& j, const std::string& where = "grid")
{
    std::vector<double> g;
    if (j.is_array()) {
        for (auto& v : j) {
            if (!v.is_number()) throw SchemaError(where + " entries must be numbers");
            g.push_back(v.get<double>());
        }
    } else if (j.is_string()) {
        auto s = j.get<std::string>();
        double lo, hi;
        long n;
        char c1, c2;
        std::istringstream is(s);
        if (!(is >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
            throw SchemaError(where + ": expected lo:hi:count, got '" + s + "'");
        if (n < 1) throw SchemaError(where + ": count must be at least 1");
        if (n == 1) return {lo};
        for (long i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * double(i) / double(n - 1));
    } else {
        throw SchemaError(where + " must be an array or a lo:hi:count string");
    }
    if (g.empty()) throw SchemaError(where + " is empty");
    if (!std::is_sorted(g.begin(), g.end())) throw SchemaError(where + " must be increasing");
    return g;
}

// ---------------------------------------------------------------- models

inline RadiusLaw parse_radius(const json& j, const std::string& where)
{
    if (j.is_number()) return RadiusLaw::fixed(j.get<double>());
    auto law = detail::one_of(j, where, "law", {"fixed", "uniform", "pareto"});
    if (law == "fixed") {
        detail::only_keys(j, where, {"law", "r"});
        return RadiusLaw::fixed(detail::positive(j, where, "r"));
    }
    if (law == "uniform") {
        detail::only_keys(j, where, {"law", "lo", "hi"});
        double lo = detail::positive(j, where, "lo"), hi = detail::positive(j, where, "hi");
        if (hi < lo) throw SchemaError(where + ": hi < lo");
        return RadiusLaw::uniform(lo, hi);
    }
    detail::only_keys(j, where, {"law", "scale", "shape", "alpha"});
    return RadiusLaw::pareto(detail::positive(j, where, "scale"), detail::positive(j, where, "shape"), detail::positive(j, where, "alpha"));
}

inline BooleanModel boolean_model(const json& j)
{
    const std::string w = "model";
    detail::only_keys(j, w, {"type", "dim", "gamma", "k", "grain", "radius", "raster_h"});
    BooleanModel m;
    m.dim = int(detail::count(j, w, "dim", 2));
    if (m.dim < 1 || m.dim > 3) throw SchemaError("model.dim must be 1, 2 or 3");
    m.gamma = detail::positive(j, w, "gamma", 1.0);
    m.k = int(detail::count(j, w, "k", 1));
    if (m.k < 1) throw SchemaError("model.k must be at least 1");
    m.grain = detail::one_of(j, w, "grain", {"ball", "cube"}, "ball") == "ball" ? GrainKind::ball : GrainKind::cube;
    if (j.contains("radius")) m.radius = parse_radius(j.at("radius"), "model.radius");
    m.raster_h = detail::num(j, w, "raster_h", 0.0);
    if (m.raster_h < 0) throw SchemaError("model.raster_h must be nonnegative");
    return m;
}

inline ConfettiModel confetti_model(const json& j)
{
    const std::string w = "model";
    detail::only_keys(j, w, {"type", "p", "h", "adjacency", "black", "white", "horizon"});
    ConfettiModel cm;
    cm.p = detail::num(j, w, "p", 0.5);
    if (cm.p < 0 || cm.p > 1) throw SchemaError("model.p must lie in [0,1]");
    cm.h = detail::positive(j, w, "h", 0.1);
    cm.adjacency = detail::one_of(j, w, "adjacency", {"black8_white4", "center_resolved"}, "black8_white4") == "black8_white4"
                       ? Adjacency::black8_white4
                       : Adjacency::center_resolved;
    if (j.contains("black")) cm.black = parse_radius(j.at("black"), "model.black");
    if (j.contains("white")) cm.white = parse_radius(j.at("white"), "model.white");
    cm.horizon = detail::num(j, w, "horizon", 0.0);
    return cm;
}

// A functional together with the ingredients every experiment needs.
struct Setup {
    std::string type;
    Functional f;
    IntensityModel m;
    Window w;
    std::optional<RandomizedStoppingSet> Z;
    std::optional<Box> box;
    std::optional<BooleanModel> boolean;
    std::optional<DiscreteOracleSpace> space;
    double var_exact = -1;  // when known in closed form
};

inline Setup build_setup(const json& model, const json& params)
{
    auto type = detail::one_of(model, "model", "type", {"empty-space", "count", "discrete", "boolean", "confetti"});
    Setup s;
    s.type = type;
    if (type == "empty-space") {
        detail::only_keys(model, "model", {"type", "area", "gamma"});
        auto e = fixtures::empty_space(detail::positive(model, "model", "area", M_PI));
        double g = detail::positive(model, "model", "gamma", 1.0);
        s.f = e.f;
        s.m = IntensityModel::homogeneous(g);
        s.w = e.win;
        s.Z = RandomizedStoppingSet(e.ctdt.terminal());
        s.box = e.box;
        s.var_exact = e.var_exact(g);
    } else if (type == "count") {
        // points in [0, x_max] x [0, side] inside the window [0, side]^2
        detail::only_keys(model, "model", {"type", "gamma", "side", "x_max"});
        double g = detail::positive(model, "model", "gamma"), side = detail::positive(model, "model", "side", 1.0);
        double xm = detail::positive(model, "model", "x_max", side / 2);
        s.f = count_functional([xm](const Point& p) { return p.x[0] < xm; }, "count");
        s.m = IntensityModel::homogeneous(g);
        s.box = Box::cube(2, 0, side);
        s.w = Window::make_box(*s.box);
        s.var_exact = g * xm * side;
    } else if (type == "discrete") {
        detail::only_keys(model, "model", {"type", "masses", "tail", "empty_cells"});
        auto& mj = detail::need(model, "model", "masses");
        if (!mj.is_array() || mj.empty()) throw SchemaError("model.masses must be a nonempty array");
        std::vector<double> masses;
        for (auto& v : mj) {
            if (!v.is_number() || v.get<double>() < 0) throw SchemaError("model.masses entries must be nonnegative numbers");
            masses.push_back(v.get<double>());
        }
        s.space = DiscreteOracleSpace::make(masses, detail::positive(model, "model", "tail", 1e-12));
        std::set<int> cells{0};
        if (model.contains("empty_cells")) {
            cells.clear();
            for (auto& v : model.at("empty_cells")) {
                if (!v.is_number_integer() || v.get<int64_t>() < 0 || v.get<size_t>() >= masses.size()) throw SchemaError("model.empty_cells: bad cell index");
                cells.insert(v.get<int>());
            }
        }
        s.f = {"empty-cells", [cells](const PointConfig& c) {
                   for (auto& p : c.points)
                       if (cells.count(p.cell)) return 0.0;
                   return 1.0;
               },
               1.0};
        s.m = IntensityModel::cells(masses);
        s.w = Window::make_cells(int(masses.size()));
        if (masses.size() == 3) s.Z = RandomizedStoppingSet(nonattainable_fixture({masses[0], masses[1], masses[2]}));
    } else if (type == "boolean") {
        auto bm = boolean_model(model);
        double n = detail::positive(params, "params", "n", 10.0), kappa = detail::positive(params, "params", "kappa", 1.0);
        Box rect = Box::rectangle(bm.dim, kappa * n, n);
        s.boolean = bm;
        s.box = rect;
        s.f = crossing_functional(bm, rect);
        s.m = bm.intensity();
        s.w = bm.window(rect);
        if (bm.dim == 2 && bm.k == 1) s.Z = randomized_line_exploration(bm, rect);
    } else {
        throw SchemaError("model type 'confetti' is only valid for scan and duality experiments");
    }
    return s;
}

// ---------------------------------------------------------------- config

struct ExperimentConfig {
    int version = 1;
    std::string kind;
    std::string name;
    std::string description;
    json model;
    json params = json::object();
    uint64_t seed = 0;
    size_t replicas = 0;
    json outputs = json::object();
    double sigma = 3;  // tolerance in standard errors for statistical verdicts

    json resolved() const
    {
        return {{"version", version}, {"name", name},     {"kind", kind},        {"description", description}, {"model", model},
                {"params", params},   {"seed", seed},     {"replicas", replicas}, {"outputs", outputs},         {"tolerances", {{"sigma", sigma}}}};
    }
};

inline ExperimentConfig parse_config(const json& j)
{
    detail::only_keys(j, "config", {"version", "name", "kind", "description", "model", "params", "seed", "replicas", "outputs", "tolerances"});
    ExperimentConfig c;
    c.version = int(detail::count(j, "config", "version"));
    if (c.version != 1) throw SchemaError("unsupported config version " + std::to_string(c.version));
    c.kind = detail::one_of(j, "config", "kind", {"audit", "scan", "dynamics", "duality", "sensitivity"});
    c.name = detail::str(j, "config", "name", "");
    c.description = detail::str(j, "config", "description", "");
    c.model = detail::need(j, "config", "model");
    if (!c.model.is_object()) throw SchemaError("config.model must be an object");
    detail::str(c.model, "model", "type");
    if (j.contains("params")) {
        c.params = j.at("params");
        if (!c.params.is_object()) throw SchemaError("config.params must be an object");
    }
    c.seed = detail::count(j, "config", "seed");
    c.replicas = detail::count(j, "config", "replicas");
    if (c.replicas == 0) throw SchemaError("config.replicas must be positive");
    if (j.contains("outputs")) {
        c.outputs = j.at("outputs");
        detail::only_keys(c.outputs, "config.outputs", {"csv", "json", "path_csv"});
        for (auto it = c.outputs.begin(); it != c.outputs.end(); ++it)
            if (!it.value().is_string()) throw SchemaError("config.outputs." + it.key() + " must be a string");
    }
    if (j.contains("tolerances")) {
        detail::only_keys(j.at("tolerances"), "config.tolerances", {"sigma"});
        c.sigma = detail::positive(j.at("tolerances"), "config.tolerances", "sigma", 3.0);
    }
    return c;
}

inline json read_json_file(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) throw Error("config", "cannot open " + p.string());
    try {
        return json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw SchemaError(p.string() + ": " + e.what());
    }
}

inline ExperimentConfig load_config(const fs::path& p) { return parse_config(read_json_file(p)); }

// ---------------------------------------------------------------- fixture registry

inline fs::path fixture_dir()
{
    if (const char* e = std::getenv("PLAB_FIXTURES"); e && *e) return e;
    return PLAB_FIXTURE_DIR;
}

inline std::vector<std::string> fixture_names()
{
    std::vector<std::string> out;
    if (!fs::is_directory(fixture_dir())) return out;
    for (auto& e : fs::directory_iterator(fixture_dir()))
        if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

inline ExperimentConfig load_fixture(const std::string& name)
{
    auto p = fixture_dir() / (name + ".json");
    if (!fs::exists(p)) throw Error("config", "unknown fixture '" + name + "' (looked in " + fixture_dir().string() + ")");
    auto c = load_config(p);
    if (c.name.empty()) c.name = name;
    return c;
}

// ---------------------------------------------------------------- outputs

inline fs::path output_dir()
{
    if (const char* e = std::getenv("PLAB_OUTPUT_DIR"); e && *e) return e;
    return ".";
}

inline fs::path output_path(const std::string& p)
{
    fs::path q(p);
    return q.is_absolute() ? q : output_dir() / q;
}

inline json header(const ExperimentConfig& c) { return {{"plab_version", version()}, {"config", c.resolved()}}; }

// CSV outputs start with one comment line holding the resolved config
inline std::string csv_header(const ExperimentConfig& c) { return "# " + header(c).dump() + "\n"; }

inline void write_file(const fs::path& p, const std::string& body)
{
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + p.string());
    out << body;
}

inline json est(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

// ---------------------------------------------------------------- experiments

struct RunResult {
    json verdict;      // header + result, always produced
    std::string csv;   // primary CSV artifact, if any (without header)
    std::string path_csv;
    bool passed = true;
};

namespace detail {

inline bool le_within(const Estimate& lhs, const Estimate& rhs, double sigma) { return lhs.value <= rhs.value + sigma * std::hypot(lhs.se, rhs.se); }

inline StoppingSetOracle named_set(const std::string& name, const Setup& s, const json& params)
{
    if (name == "whole") return whole_space();
    if (name == "empty") return empty_set();
    if (name == "broken") return broken_half_nearest(2, {0, 0, 0}, s.box);
    if (name == "ball-growth") {
        if (s.type != "empty-space") throw SchemaError("set 'ball-growth' needs an empty-space model");
        return s.Z->family(0);
    }
    if (name == "nonattainable") {
        if (!s.space || s.space->masses.size() != 3) throw SchemaError("set 'nonattainable' needs a 3-cell discrete model");
        return s.Z->family(0);
    }
    if (name == "line-exploration") {
        if (!s.boolean) throw SchemaError("set 'line-exploration' needs a boolean model");
        return line_exploration(*s.boolean, *s.box, num(params, "params", "line", s.box->side(1) / 2));
    }
    throw SchemaError("unknown stopping set '" + name + "'");
}

inline RandomizedStoppingSet stopping_set(const Setup& s, const json& params)
{
    auto name = str(params, "params", "set", "");
    if (name == "randomized-line-exploration") {
        if (!s.boolean) throw SchemaError("set 'randomized-line-exploration' needs a boolean model");
        return randomized_line_exploration(*s.boolean, *s.box);
    }
    if (!name.empty()) return named_set(name, s, params);
    if (!s.Z) throw SchemaError("model has no default stopping set; give params.set");
    return *s.Z;
}

inline RunResult run_audit(const ExperimentConfig& c)
{
    auto& p = c.params;
    auto audit = one_of(p, "params", "audit",
                        {"osss", "poincare", "chaos-exact", "cond-moment", "mehler", "schramm-steif", "stopping-axiom", "markov", "revealment", "truncation"});
    RunResult out;
    json r = {{"audit", audit}};
    if (audit == "truncation") {
        if (str(c.model, "model", "type") != "boolean") throw SchemaError("truncation audit needs a boolean model");
        auto ex = truncation_experiment(boolean_model(c.model), positive(p, "params", "n"), positive(p, "params", "epsilon"), c.replicas, c.seed,
                                        positive(p, "params", "kappa", 1.0));
        out.passed = ex.disagreement.value <= ex.bound.bound + c.sigma * ex.disagreement.se;
        r["disagreement"] = est(ex.disagreement);
        r["bound"] = ex.bound.bound;
        r["first_moment_bound"] = ex.bound.first_moment_bound;
        r["r_n"] = ex.bound.r_n;
        r["passed"] = out.passed;
        out.verdict = header(c);
        out.verdict["result"] = r;
        return out;
    }
    auto s = build_setup(c.model, p);
    if (audit == "osss" || audit == "poincare") {
        if (s.type == "discrete") throw SchemaError(audit + " audit needs a continuous model");
        AuditReport rep;
        if (audit == "osss") {
            auto o = osss_audit(s.f, stopping_set(s, p), s.m, s.w, c.replicas, c.seed);
            rep = o;
            r["variance"] = est(o.variance);
        } else {
            rep = poincare_audit(s.f, s.m, s.w, c.replicas, c.seed);
        }
        out.passed = le_within(rep.lhs, rep.rhs, c.sigma);
        r["lhs"] = est(rep.lhs);
        r["rhs"] = est(rep.rhs);
        if (s.var_exact >= 0) r["variance_exact"] = s.var_exact;
    } else if (audit == "chaos-exact") {
        if (!s.space) throw SchemaError("chaos-exact audit needs a discrete model");
        int k_max = int(count(p, "params", "k_max", 12));
        auto sp = chaos_weights_exact(s.f, *s.space, k_max);
        json w = json::array();
        for (auto& e : sp.weights) w.push_back(e.value);
        double err = std::fabs(sp.weight_sum() + sp.mean.value * sp.mean.value - sp.second_moment.value);
        out.passed = err <= num(p, "params", "isometry_tol", 1e-10);
        r["mean"] = sp.mean.value;
        r["second_moment"] = sp.second_moment.value;
        r["weights"] = w;
        r["isometry_error"] = err;
        r["truncation_error"] = sp.truncation_error;
    } else if (audit == "cond-moment") {
        if (!s.space || s.space->masses.size() != 3) throw SchemaError("cond-moment audit needs a 3-cell discrete model");
        int k = int(count(p, "params", "k", 1));
        int cell = int(count(p, "params", "cell", 0));
        CellKernel u = [cell](const std::vector<int>& t) {
            for (int v : t)
                if (v != cell) return 0.0;
            return 1.0;
        };
        auto rep = cond_moment_audit(u, k, s.Z->family(0), *s.space);
        out.passed = rep.passed;
        r["k"] = k;
        r["lhs"] = rep.lhs;
        r["rhs"] = rep.rhs;
        r["margin"] = rep.margin;
        r["truncation_error"] = rep.truncation_error;
    } else if (audit == "mehler") {
        if (s.type == "discrete") throw SchemaError("mehler audit needs a continuous model");
        std::vector<double> times = p.contains("times") ? parse_grid(p.at("times"), "params.times") : geometric_times();
        auto sp = chaos_weights_mehler(s.f, s.m, s.w, times, c.replicas, c.seed, int(count(p, "params", "k_max", 6)));
        json w = json::array();
        for (auto& e : sp.weights) w.push_back(est(e));
        std::ostringstream csv;
        csv << "t,cov,se,fitted\n" << std::setprecision(12);
        for (size_t i = 0; i < sp.times.size(); ++i) csv << sp.times[i] << ',' << sp.cov[i].value << ',' << sp.cov[i].se << ',' << sp.fitted[i] << '\n';
        out.csv = csv.str();
        out.passed = !sp.ill_conditioned;
        r["weights"] = w;
        r["condition"] = sp.condition;
        r["ill_conditioned"] = sp.ill_conditioned;
    } else if (audit == "schramm-steif") {
        if (!s.box || s.type == "discrete") throw SchemaError("schramm-steif audit needs a continuous model");
        double spacing = positive(p, "params", "probe_spacing", s.box->side(0) / 10);
        auto grid = make_probe_grid(*s.box, spacing);
        auto rep = schramm_steif_audit(s.f, stopping_set(s, p), s.m, s.w, grid.points, int(count(p, "params", "k_max", 4)), c.replicas,
                                       count(p, "params", "revealment_samples", 400), c.seed, grid.spacing);
        out.passed = true;
        json rows = json::array();
        for (auto& row : rep.rows) {
            bool ok = le_within(row.weight, row.bound, c.sigma);
            out.passed = out.passed && ok;
            rows.push_back({{"k", row.k}, {"weight", est(row.weight)}, {"bound", est(row.bound)}, {"passed", ok}});
        }
        r["delta"] = est(rep.delta);
        r["rows"] = rows;
    } else if (audit == "stopping-axiom") {
        auto Z = stopping_set(s, p);
        auto rep = verify_stopping_axiom(Z, s.m, s.w, c.replicas, count(p, "params", "probes", 200), c.seed);
        out.passed = rep.passed();
        json ce = json::array();
        for (auto& x : rep.counterexamples)
            ce.push_back({{"trial", x.trial}, {"x", {x.probe.x[0], x.probe.x[1], x.probe.x[2]}}, {"cell", x.probe.cell}, {"before", x.before}, {"after", x.after}});
        r["set"] = rep.name;
        r["trials"] = rep.trials;
        r["failures"] = rep.failures;
        r["counterexamples"] = ce;
    } else if (audit == "markov") {
        if (!s.box) throw SchemaError("markov audit needs a continuous model");
        auto gs = fixtures::five_functionals(*s.box);
        if (s.boolean) gs.back() = s.f;
        auto rep = markov_property_check(stopping_set(s, p), s.m, s.w, gs, c.replicas, c.seed, num(p, "params", "level", 0.01));
        out.passed = rep.passed();
        json t = json::array();
        for (auto& e : rep.entries) t.push_back({{"functional", e.functional}, {"ks_statistic", e.ks.statistic}, {"p_value", e.ks.p_value}, {"passed", e.passed}});
        r["set"] = rep.name;
        r["tests"] = t;
    } else {  // revealment
        auto Z = stopping_set(s, p);
        RevealmentReport rep;
        if (s.space) {
            rep = revealment(Z, s.m, s.w, cell_probes(int(s.space->masses.size())), c.replicas, c.seed);
        } else {
            if (!s.box) throw SchemaError("revealment needs a box");
            rep = revealment(Z, s.m, s.w, make_probe_grid(*s.box, positive(p, "params", "probe_spacing", s.box->side(0) / 10)), c.replicas, c.seed);
        }
        json probes = json::array();
        for (size_t i = 0; i < rep.probes.size(); ++i)
            probes.push_back({{"x", {rep.probes[i].x[0], rep.probes[i].x[1], rep.probes[i].x[2]}}, {"cell", rep.probes[i].cell}, {"p", est(rep.per_probe[i])}});
        r["set"] = rep.name;
        r["delta"] = rep.delta;
        r["argmax"] = rep.argmax;
        r["spacing"] = rep.spacing;
        r["note"] = rep.note;
        r["probes"] = probes;
    }
    r["passed"] = out.passed;
    out.verdict = header(c);
    out.verdict["result"] = r;
    return out;
}

inline RunResult run_scan(const ExperimentConfig& c)
{
    auto& p = c.params;
    only_keys(p, "params", {"grid", "n", "kappa", "critical"});
    auto grid = parse_grid(need(p, "params", "grid"), "params.grid");
    double n = positive(p, "params", "n");
    auto type = one_of(c.model, "model", "type", {"boolean", "confetti"});
    ThresholdScan scan;
    json r;
    if (type == "boolean") {
        auto bm = boolean_model(c.model);
        double kappa = positive(p, "params", "kappa", 1.0);
        scan = threshold_scan(bm, grid, n, c.replicas, c.seed, kappa);
        if (p.contains("critical")) {
            auto& q = p.at("critical");
            only_keys(q, "params.critical", {"lo", "hi", "tol"});
            auto ce = estimate_critical(bm, n, num(q, "params.critical", "lo"), num(q, "params.critical", "hi"), positive(q, "params.critical", "tol", 0.01),
                                        c.replicas, hash_combine(c.seed, 0xc41), kappa);
            r["critical"] = {{"value", ce.value}, {"se", ce.se}, {"ci", {ce.ci_lo, ce.ci_hi}}};
        }
    } else {
        auto cm = confetti_model(c.model);
        scan = confetti_scan(cm, grid, n, c.replicas, c.seed);
        if (p.contains("critical")) {
            auto& q = p.at("critical");
            only_keys(q, "params.critical", {"lo", "hi", "tol"});
            auto ce = estimate_critical_confetti(cm, n, num(q, "params.critical", "lo"), num(q, "params.critical", "hi"),
                                                 positive(q, "params.critical", "tol", 0.01), c.replicas, hash_combine(c.seed, 0xc41));
            r["critical"] = {{"value", ce.value}, {"se", ce.se}, {"ci", {ce.ci_lo, ce.ci_hi}}};
        }
    }
    std::ostringstream csv;
    write_scan_csv(scan, csv);
    RunResult out;
    out.csv = csv.str();
    json rows = json::array();
    for (auto& row : scan.rows) rows.push_back({{"param", row.param}, {"estimate", est(row.estimate)}});
    r["event"] = scan.event;
    r["rows"] = rows;
    out.verdict = header(c);
    out.verdict["result"] = r;
    return out;
}

inline RunResult run_dynamics(const ExperimentConfig& c)
{
    auto& p = c.params;
    only_keys(p, "params", {"n", "kappa", "times", "horizon", "exceptional_paths"});
    auto s = build_setup(c.model, p);
    if (s.type == "discrete") throw SchemaError("dynamics needs a continuous model");
    std::vector<double> times = p.contains("times") ? parse_grid(p.at("times"), "params.times") : std::vector<double>{0.1, 0.5, 1.0, 2.0};
    auto cov = covariance_curve(s.f, s.m, s.w, times, c.replicas, c.seed);
    std::ostringstream csv;
    write_cov_csv(cov, csv);
    RunResult out;
    out.csv = csv.str();

    double horizon = positive(p, "params", "horizon", 1.0);
    RngStream rng(c.seed, 0, 0x9a7);
    auto path = simulate_path(s.m, s.w, horizon, rng);
    std::ostringstream pcsv;
    write_path_csv(path, pcsv);
    out.path_csv = pcsv.str();

    json cj = json::array();
    for (size_t i = 0; i < cov.times.size(); ++i) cj.push_back({{"t", cov.times[i]}, {"cov", est(cov.cov[i])}});
    json r = {{"mean", est(cov.mean)}, {"second_moment", est(cov.second_moment)}, {"covariance", cj}, {"path_events", path.events.size()}};
    size_t paths = count(p, "params", "exceptional_paths", 0);
    if (paths > 0) {
        if (!s.boolean || s.boolean->k != 1) throw SchemaError("exceptional times need a k=1 boolean model");
        json ex = json::array();
        for (size_t i = 0; i < paths; ++i) {
            RngStream pr(c.seed, i, 0xe8c);
            auto pt = simulate_path(s.m, s.w, horizon, pr);
            auto ts = exceptional_times_crossing(pt, *s.boolean, *s.box);
            ex.push_back({{"path", i}, {"switches", ts.size()}, {"times", ts}});
        }
        r["exceptional"] = ex;
    }
    out.verdict = header(c);
    out.verdict["result"] = r;
    return out;
}

inline RunResult run_duality(const ExperimentConfig& c)
{
    auto& p = c.params;
    only_keys(p, "params", {"n"});
    if (one_of(c.model, "model", "type", {"confetti"}) != "confetti") throw SchemaError("duality needs a confetti model");
    auto cm = confetti_model(c.model);
    double n = positive(p, "params", "n", 10.0);
    Box rect = Box::rectangle(2, n, n);
    std::vector<char> cross(c.replicas), ok(c.replicas);
    parallel_for(c.replicas, [&](size_t i) {
        RngStream rng(c.seed, i);
        auto w = sample_confetti(cm, rect, rng);
        cross[i] = confetti_crossing(w, Color::black, 0);
        ok[i] = confetti_duality_check(w);
    });
    auto e = bernoulli_estimate(cross);
    size_t fails = 0;
    for (char v : ok) fails += !v;
    RunResult out;
    out.passed = fails == 0;
    out.verdict = header(c);
    out.verdict["result"] = {{"p_cross", est(e)}, {"xor_failures", fails}, {"samples", c.replicas}, {"passed", out.passed}};
    return out;
}

inline RunResult run_sensitivity(const ExperimentConfig& c)
{
    auto& p = c.params;
    only_keys(p, "params", {"n", "t", "seeds", "revealment_samples", "probe_divisions"});
    if (one_of(c.model, "model", "type", {"boolean"}) != "boolean") throw SchemaError("sensitivity needs a boolean model");
    auto bm = boolean_model(c.model);
    auto ns = parse_grid(need(p, "params", "n"), "params.n");
    double div = positive(p, "params", "probe_divisions", 8.0);
    std::vector<SensitivityMember> fam;
    for (double n : ns) {
        Box rect = Box::rectangle(2, n, n);
        SensitivityMember mem;
        mem.n = n;
        mem.f = crossing_functional(bm, rect);
        mem.model = bm.intensity();
        mem.window = bm.window(rect);
        if (bm.dim == 2 && bm.k == 1) {
            mem.Z = randomized_line_exploration(bm, rect);
            auto grid = make_probe_grid(rect, n / div);
            mem.probes = grid.points;
            mem.probe_spacing = grid.spacing;
        }
        fam.push_back(mem);
    }
    auto rep = noise_sensitivity_report(fam, positive(p, "params", "t", 0.2), c.replicas, count(p, "params", "seeds", 8), c.seed,
                                        count(p, "params", "revealment_samples", 200));
    json rows = json::array();
    for (auto& row : rep.rows) {
        json j = {{"n", row.n}, {"cov", est(row.cov)}, {"second_moment", est(row.second_moment)}};
        if (row.delta) j["delta"] = est(*row.delta);
        if (row.bound) j["bound"] = est(*row.bound);
        rows.push_back(j);
    }
    RunResult out;
    out.passed = rep.bound_ok;
    out.verdict = header(c);
    out.verdict["result"] = {{"t", rep.t}, {"kendall", rep.kendall}, {"bound_ok", rep.bound_ok}, {"rows", rows}, {"per_seed", rep.per_seed}};
    return out;
}

}  // namespace detail

// Runs the experiment; artifacts are returned, not written.
inline RunResult run(const ExperimentConfig& c)
{
    if (c.kind == "audit") return detail::run_audit(c);
    if (c.kind == "scan") return detail::run_scan(c);
    if (c.kind == "dynamics") return detail::run_dynamics(c);
    if (c.kind == "duality") return detail::run_duality(c);
    return detail::run_sensitivity(c);
}

// Writes the configured outputs; returns the files written.
inline std::vector<fs::path> write_outputs(const ExperimentConfig& c, const RunResult& r)
{
    std::vector<fs::path> files;
    auto put = [&](const char* key, const std::string& body, bool csv) {
        if (!c.outputs.contains(key)) return;
        auto p = output_path(c.outputs.at(key).get<std::string>());
        write_file(p, csv ? csv_header(c) + body : body);
        files.push_back(p);
    };
    if (!r.csv.empty()) put("csv", r.csv, true);
    if (!r.path_csv.empty()) put("path_csv", r.path_csv, true);
    put("json", r.verdict.dump(2) + "\n", false);
    return files;
}

}  // namespace plab::io
