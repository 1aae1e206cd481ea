#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "plab/chaos.hpp"
#include "plab/dynamics.hpp"
#include "plab/fixtures.hpp"
#include "plab/percolation.hpp"
#include "plab/stopping.hpp"

namespace plab::acceptance {

using json = nlohmann::ordered_json;

struct Result {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0;
    json data = json::object();
};

inline json to_json(const Estimate& e) { return {{"value", e.value}, {"se", e.se}}; }

inline std::string fmt(double v, int prec = 5)
{
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

inline std::string fmt(const Estimate& e, int prec = 5) { return fmt(e.value, prec) + "±" + fmt(e.se, 2); }

inline bool within(const Estimate& e, double target, double k = 3) { return std::fabs(e.value - target) <= k * e.se; }

class Suite {
public:
    explicit Suite(uint64_t seed = 20240611) : seed_(seed) {}

    static const std::vector<std::string>& names()
    {
        static const std::vector<std::string> n = {"empty-space-sharpness", "poincare-suboptimality", "chaos-oracle",      "mehler-regression",
                                                   "schramm-steif",         "cond-moment",            "confetti-duality",  "markov-property",
                                                   "threshold-decay",       "noise-sensitivity",      "truncation-bound",  "stopping-suite"};
        return n;
    }

    Result run(const std::string& name)
    {
        static const std::map<std::string, Result (Suite::*)()> table = {
            {"empty-space-sharpness", &Suite::empty_space_sharpness},
            {"poincare-suboptimality", &Suite::poincare_suboptimality},
            {"chaos-oracle", &Suite::chaos_oracle},
            {"mehler-regression", &Suite::mehler_regression},
            {"schramm-steif", &Suite::schramm_steif},
            {"cond-moment", &Suite::cond_moment},
            {"confetti-duality", &Suite::confetti_duality},
            {"markov-property", &Suite::markov_property},
            {"threshold-decay", &Suite::threshold_decay},
            {"noise-sensitivity", &Suite::noise_sensitivity},
            {"truncation-bound", &Suite::truncation_bound_check},
            {"stopping-suite", &Suite::stopping_suite},
        };
        auto it = table.find(name);
        if (it == table.end()) throw Error("acceptance", "unknown criterion '" + name + "'");
        auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = (this->*(it->second))();
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("error: ") + e.what();
        }
        r.name = name;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }

    // planar unit-disk crossing of [0,20]^2 at P = 1/2, estimated once per suite
    const CriticalEstimate& gamma_c()
    {
        if (!gc_) gc_ = estimate_critical(fixtures::planar_disks(1), 20, 0.2, 0.6, 0.01, 400, hash_combine(seed_, 0xc41));
        return *gc_;
    }

private:
    uint64_t sub(uint64_t tag) const { return hash_combine(seed_, tag); }

    // 1 -----------------------------------------------------------------
    Result empty_space_sharpness()
    {
        auto e = fixtures::empty_space(M_PI);
        auto m = IntensityModel::homogeneous(1);
        const size_t N = 100000;
        auto rep = osss_audit(e.f, e.ctdt, m, e.win, N, sub(1));
        double target = e.var_exact();
        Estimate half{rep.rhs.value / 2, rep.rhs.se / 2};
        bool var_ok = within(rep.variance, target), rhs_ok = within(half, target);
        double gap = half.value - rep.variance.value, gap_se = std::hypot(half.se, rep.variance.se);
        // gap not distinguishable from zero beyond 2% of the target
        bool sharp = std::fabs(gap) - 3 * gap_se <= 0.02 * target;
        Result r;
        r.passed = var_ok && rhs_ok && sharp && rep.passed;
        r.detail = "Var=" + fmt(rep.variance) + " RHS/2=" + fmt(half) + " target=" + fmt(target) + " rel.gap=" + fmt(gap / target, 3);
        r.data = {{"variance", to_json(rep.variance)}, {"rhs", to_json(rep.rhs)}, {"target", target}, {"relative_gap", gap / target},
                  {"samples", N}};
        return r;
    }

    // 2 -----------------------------------------------------------------
    Result poincare_suboptimality()
    {
        auto e = fixtures::empty_space(4.0);
        auto m = IntensityModel::homogeneous(1);
        const size_t N = 100000;
        auto p = poincare_audit(e.f, m, e.win, N, sub(2));
        auto o = osss_audit(e.f, e.ctdt, m, e.win, N, sub(3));
        double pt = 4 * std::exp(-4.0), vt = e.var_exact();
        bool p_ok = within(p.rhs, pt), v_ok = within(p.lhs, vt);
        bool below = o.rhs.value + 3 * std::hypot(o.rhs.se, p.rhs.se) < p.rhs.value;
        Result r;
        r.passed = p_ok && v_ok && below;
        r.detail = "Poincare RHS=" + fmt(p.rhs) + " (" + fmt(pt) + ") Var=" + fmt(p.lhs) + " (" + fmt(vt) + ") OSSS RHS=" + fmt(o.rhs);
        r.data = {{"poincare_rhs", to_json(p.rhs)}, {"variance", to_json(p.lhs)}, {"osss_rhs", to_json(o.rhs)}};
        return r;
    }

    // 3 -----------------------------------------------------------------
    Result chaos_oracle()
    {
        auto sp = DiscreteOracleSpace::make({0.3, 0.2, 0.5}, 1e-16);
        Functional f{"empty-W", [](const PointConfig& c) {
                         for (auto& p : c.points)
                             if (p.cell <= 1) return 0.0;
                         return 1.0;
                     },
                     1.0};
        double lw = 0.5;
        auto s = chaos_weights_exact(f, sp, 20);
        double worst = 0;
        json w = json::array();
        for (int k = 1; k <= 6; ++k) {
            double closed = std::pow(lw, k) * std::exp(-2 * lw) / std::tgamma(k + 1.0);
            worst = std::max(worst, std::fabs(s.weights[size_t(k - 1)].value - closed));
            w.push_back({{"k", k}, {"exact", s.weights[size_t(k - 1)].value}, {"closed", closed}});
        }
        double total = s.weight_sum() + s.mean.value * s.mean.value;
        double sum_err = std::fabs(total - s.second_moment.value);
        Result r;
        r.passed = worst <= 1e-10 && sum_err <= 1e-10;
        r.detail = "max|W_k - closed|=" + fmt(worst, 3) + " |ΣW+mean²-E f²|=" + fmt(sum_err, 3);
        r.data = {{"weights", w}, {"sum_error", sum_err}, {"truncation_error", s.truncation_error}};
        return r;
    }

    // 4 -----------------------------------------------------------------
    Result mehler_regression()
    {
        // B = [0,0.5] x [0,1] at intensity 4
        auto m = IntensityModel::homogeneous(4);
        Window w = Window::make_box(Box::cube(2, 0, 1));
        auto f = count_functional([](const Point& p) { return p.x[0] < 0.5; }, "count-B");
        auto s = chaos_weights_mehler(f, m, w, geometric_times(), 40000, sub(4));
        bool w1 = within(s.weights[0], 2.0);
        bool higher = true;
        for (size_t k = 1; k < s.weights.size(); ++k) higher = higher && s.weights[k].value <= 3 * s.weights[k].se;
        auto c = covariance_curve(f, m, w, {0.1, 0.5, 1.0}, 40000, sub(5));
        bool curve = true;
        for (size_t j = 0; j < c.times.size(); ++j) curve = curve && within(c.cov[j], 2 * std::exp(-c.times[j]));
        Result r;
        r.passed = w1 && higher && curve && !s.ill_conditioned;
        r.detail = "W1=" + fmt(s.weights[0]) + " W2=" + fmt(s.weights[1]) + " cov(0.1,0.5,1)=" + fmt(c.cov[0]) + "," + fmt(c.cov[1]) + "," + fmt(c.cov[2]);
        json ws = json::array();
        for (auto& e : s.weights) ws.push_back(to_json(e));
        r.data = {{"weights", ws}, {"condition", s.condition}};
        return r;
    }

    // 5 -----------------------------------------------------------------
    Result schramm_steif()
    {
        double g = gamma_c().value;
        auto m = fixtures::planar_disks(g);
        std::vector<double> deltas;
        bool rows_ok = true;
        json rows = json::array();
        std::string det = "gamma_c=" + fmt(g, 4);
        for (double n : {10.0, 20.0, 40.0}) {
            Box rect = Box::rectangle(2, n, n);
            auto f = crossing_functional(m, rect);
            auto Z = randomized_line_exploration(m, rect);
            auto grid = make_probe_grid(rect, n / 10);
            auto rep = schramm_steif_audit(f, Z, m.intensity(), m.window(rect), grid.points, 4, 6000, 400, sub(uint64_t(50 + n)), grid.spacing);
            rows_ok = rows_ok && rep.passed();
            deltas.push_back(rep.delta.value);
            json ks = json::array();
            for (auto& row : rep.rows) ks.push_back({{"k", row.k}, {"W", to_json(row.weight)}, {"bound", to_json(row.bound)}, {"ok", row.passed}});
            rows.push_back({{"n", n}, {"delta", to_json(rep.delta)}, {"rows", ks}});
            det += " n=" + fmt(n, 3) + ":δ=" + fmt(rep.delta.value, 3) + ",W1=" + fmt(rep.rows[0].weight.value, 3);
        }
        bool decreasing = deltas[0] > deltas[1] && deltas[1] > deltas[2];
        Result r;
        r.passed = rows_ok && decreasing;
        r.detail = det;
        r.data = {{"gamma_c", g}, {"windows", rows}};
        return r;
    }

    // 6 -----------------------------------------------------------------
    Result cond_moment()
    {
        std::array<double, 3> masses{0.25, 0.35, 0.4};
        auto sp = DiscreteOracleSpace::make({masses[0], masses[1], masses[2]}, 1e-15);
        auto z = nonattainable_fixture(masses);
        CellKernel u1 = [](const std::vector<int>& t) { return t[0] == 1 ? 1.0 : (t[0] == 0 ? -0.5 : 0.25); };
        CellKernel u2 = [](const std::vector<int>& t) { return t[0] == t[1] ? 1.0 : -0.5; };
        auto r1 = cond_moment_audit(u1, 1, z, sp);
        auto r2 = cond_moment_audit(u2, 2, z, sp);
        Result r;
        r.passed = r1.passed && r2.passed;
        r.detail = "k=1 lhs=" + fmt(r1.lhs, 10) + " rhs=" + fmt(r1.rhs, 10) + " margin=" + fmt(r1.margin, 3) + "; k=2 lhs=" + fmt(r2.lhs, 10) +
                   " rhs=" + fmt(r2.rhs, 10) + " margin=" + fmt(r2.margin, 3);
        r.data = {{"k1", {{"lhs", r1.lhs}, {"rhs", r1.rhs}, {"margin", r1.margin}}}, {"k2", {{"lhs", r2.lhs}, {"rhs", r2.rhs}, {"margin", r2.margin}}}};
        return r;
    }

    // 7 -----------------------------------------------------------------
    Result confetti_duality()
    {
        // The estimate uses the centre-resolved raster, which is colour symmetric.
        // Under black-8/white-4, P(black LR) = 1 - P(black-4 LR) >= 1/2 on every raster.
        ConfettiModel cm;
        cm.p = 0.5;
        cm.h = 0.1;
        cm.adjacency = Adjacency::center_resolved;
        Box rect = Box::rectangle(2, 10, 10);
        const size_t N = 10000;
        std::vector<char> cross(N), cross8(N), xor_ok(N);
        uint64_t sd = sub(7);
        parallel_for(N, [&](size_t i) {
            RngStream rng(sd, i);
            auto w = sample_confetti(cm, rect, rng);
            cross[i] = confetti_crossing(w, Color::black, 0);
            bool x1 = confetti_duality_check(w);
            w.adjacency = Adjacency::black8_white4;
            cross8[i] = confetti_crossing(w, Color::black, 0);
            xor_ok[i] = x1 && confetti_duality_check(w);
        });
        auto p = bernoulli_estimate(cross), p8 = bernoulli_estimate(cross8);
        size_t fails = 0;
        for (char c : xor_ok) fails += !c;
        Result r;
        r.passed = within(p, 0.5) && fails == 0;
        r.detail = "P(cross)=" + fmt(p) + " [black8/white4: " + fmt(p8) + "] duality failures=" + std::to_string(fails) + "/" + std::to_string(N);
        r.data = {{"p_cross", to_json(p)}, {"p_cross_black8_white4", to_json(p8)}, {"xor_failures", fails}, {"samples", N}, {"h", cm.h}};
        return r;
    }

    // 8 -----------------------------------------------------------------
    Result markov_property()
    {
        auto e = fixtures::empty_space(4.0);
        auto bg = markov_property_check(e.ctdt.terminal(), IntensityModel::homogeneous(3.0), e.win, fixtures::five_functionals(e.box), 4000, sub(8));
        auto m = fixtures::planar_disks(0.36);
        Box rect = Box::rectangle(2, 10, 10);
        auto fs = fixtures::five_functionals(rect);
        fs[4] = crossing_functional(m, rect);
        auto le = markov_property_check(randomized_line_exploration(m, rect), m.intensity(), m.window(rect), fs, 2000, sub(9));
        auto minp = [](const MarkovReport& rep) {
            double v = 1;
            for (auto& en : rep.entries) v = std::min(v, en.ks.p_value);
            return v;
        };
        Result r;
        r.passed = bg.passed() && le.passed();
        r.detail = "ball-growth min p=" + fmt(minp(bg), 3) + " line-exploration min p=" + fmt(minp(le), 3) + " (per-test level 0.002)";
        json a = json::array();
        for (auto* rep : {&bg, &le})
            for (auto& en : rep->entries) a.push_back({{"set", rep->name}, {"functional", en.functional}, {"p", en.ks.p_value}});
        r.data = {{"tests", a}};
        return r;
    }

    // 9 -----------------------------------------------------------------
    Result threshold_decay()
    {
        double g = 0.5 * gamma_c().value;
        std::vector<double> s;
        for (int v = 4; v <= 16; ++v) s.push_back(v);
        auto d = one_arm_decay(fixtures::planar_disks(g), s, 500, 24, sub(10));
        Result r;
        r.passed = d.fit.slope < 0 && d.fit.r2 > 0.9 && d.s.size() == s.size();
        r.detail = "gamma=" + fmt(g, 4) + " slope=" + fmt(d.fit.slope, 4) + "±" + fmt(d.fit.slope_se, 2) + " R2=" + fmt(d.fit.r2, 4) +
                   " theta_16=" + fmt(d.theta.back(), 3);
        json th = json::array();
        for (size_t i = 0; i < d.s.size(); ++i) th.push_back({{"s", d.s[i]}, {"theta", to_json(d.theta[i])}});
        r.data = {{"gamma", g}, {"slope", d.fit.slope}, {"r2", d.fit.r2}, {"theta", th}};
        return r;
    }

    // 10 ----------------------------------------------------------------
    Result noise_sensitivity()
    {
        double g = gamma_c().value;
        auto m = fixtures::planar_disks(g);
        std::vector<SensitivityMember> fam;
        for (double n : {8.0, 16.0, 32.0}) {
            Box rect = Box::rectangle(2, n, n);
            SensitivityMember mem;
            mem.n = n;
            mem.f = crossing_functional(m, rect);
            mem.model = m.intensity();
            mem.window = m.window(rect);
            mem.Z = randomized_line_exploration(m, rect);
            auto grid = make_probe_grid(rect, n / 8);
            mem.probes = grid.points;
            mem.probe_spacing = grid.spacing;
            fam.push_back(mem);
        }
        auto rep = noise_sensitivity_report(fam, 0.2, 1500, 8, sub(11), 400);
        Result r;
        r.passed = rep.kendall < 0 && rep.bound_ok;
        std::string det = "kendall=" + fmt(rep.kendall, 3);
        json rows = json::array();
        for (auto& row : rep.rows) {
            det += " n=" + fmt(row.n, 3) + ":cov=" + fmt(row.cov, 3) + ",bound=" + fmt(row.bound->value, 3);
            rows.push_back({{"n", row.n}, {"cov", to_json(row.cov)}, {"delta", to_json(*row.delta)}, {"bound", to_json(*row.bound)}});
        }
        r.detail = det;
        r.data = {{"gamma_c", g}, {"t", 0.2}, {"kendall", rep.kendall}, {"rows", rows}};
        return r;
    }

    // 11 ----------------------------------------------------------------
    Result truncation_bound_check()
    {
        BooleanModel m;
        m.gamma = 0.15;
        m.radius = RadiusLaw::pareto(1, 3.5, 1);
        auto ex = truncation_experiment(m, 32, 0.2, 2000, sub(12));
        Result r;
        r.passed = ex.disagreement.value <= ex.bound.bound + 3 * ex.disagreement.se;
        r.detail = "P(f!=f')=" + fmt(ex.disagreement) + " bound=" + fmt(ex.bound.bound, 4) + " first-moment=" + fmt(ex.bound.first_moment_bound, 4) +
                   " r_n=" + fmt(ex.bound.r_n, 4);
        r.data = {{"disagreement", to_json(ex.disagreement)}, {"bound", ex.bound.bound}, {"first_moment_bound", ex.bound.first_moment_bound},
                  {"r_n", ex.bound.r_n}};
        return r;
    }

    // 12 ----------------------------------------------------------------
    Result stopping_suite()
    {
        const size_t T = 10000, P = 200;
        struct Case {
            RandomizedStoppingSet Z;
            IntensityModel m;
            Window w;
        };
        std::vector<Case> cases;
        Box b = Box::cube(2, -1, 1);
        auto hom = IntensityModel::homogeneous(3.0);
        auto wb = Window::make_box(b);
        cases.push_back({whole_space(), hom, wb});
        cases.push_back({empty_set(), hom, wb});
        cases.push_back({constant_set("left-half", [](const Point& p) { return p.x[0] < 0; }, b), hom, wb});
        auto e = fixtures::empty_space(4.0);
        for (double t : {0.3, 0.8}) cases.push_back({e.ctdt.slice(t), hom, e.win});
        cases.push_back({e.ctdt.terminal(), hom, e.win});
        std::array<double, 3> masses{0.25, 0.35, 0.4};
        cases.push_back({nonattainable_fixture(masses), IntensityModel::cells({masses[0], masses[1], masses[2]}), Window::make_cells(3)});
        auto m = fixtures::planar_disks(0.36);
        Box rect = Box::rectangle(2, 6, 6);
        cases.push_back({line_exploration(m, rect, 3.0), m.intensity(), m.window(rect)});
        cases.push_back({randomized_line_exploration(m, rect), m.intensity(), m.window(rect)});
        auto ct = exploration_ctdt(m, rect, 3.0);
        cases.push_back({ct.slice(1.5), m.intensity(), m.window(rect)});

        bool all = true;
        json sets = json::array();
        std::string det;
        uint64_t k = 0;
        for (auto& c : cases) {
            auto rep = verify_stopping_axiom(c.Z, c.m, c.w, T, c.w.discrete() ? 3 : P, sub(1200 + k++));
            all = all && rep.passed();
            sets.push_back({{"set", rep.name}, {"trials", rep.trials}, {"failures", rep.failures}});
            if (!rep.passed()) det += " FAIL:" + rep.name;
        }
        // negative control
        auto broken = verify_stopping_axiom(broken_half_nearest(2, {0, 0, 0}, b), hom, wb, 2000, P, sub(1299));

        // case table
        struct Row {
            std::array<int64_t, 3> counts;
            int id;
            std::array<bool, 3> mask;
        };
        const Row table[] = {{{0, 0, 0}, 0, {true, true, true}},
                             {{1, 0, 0}, 1, {true, true, false}},
                             {{0, 0, 1}, 2, {true, false, true}},
                             {{0, 1, 0}, 3, {false, true, true}}};
        bool table_ok = true;
        for (auto& row : table) {
            std::array<bool, 3> z{};
            table_ok = table_ok && nonattainable_case(row.counts, z) == row.id && z == row.mask;
        }
        for (int mask = 0; mask < 8; ++mask) {
            std::array<bool, 3> z{};
            try {
                nonattainable_case({mask & 1, (mask >> 1) & 1, (mask >> 2) & 1}, z);
            } catch (const Error&) {
                table_ok = false;
            }
        }
        std::array<size_t, 3> missed{0, 0, 0};
        auto cm = IntensityModel::cells({masses[0], masses[1], masses[2]});
        auto z = nonattainable_fixture(masses);
        for (uint64_t i = 0; i < T; ++i) {
            RngStream rng(sub(1300), i);
            auto mem = z.at(sample_poisson(cm, Window::make_cells(3), rng));
            for (int c = 0; c < 3; ++c) {
                Point p;
                p.cell = c;
                missed[size_t(c)] += !mem(p);
            }
        }
        bool miss_ok = missed[0] > 0 && missed[1] > 0 && missed[2] > 0;
        Result r;
        r.passed = all && !broken.passed() && table_ok && miss_ok;
        r.detail = std::to_string(cases.size()) + " sets x " + std::to_string(T) + " trials" + (all ? " all pass" : det) +
                   "; broken control failures=" + std::to_string(broken.failures) + "; table " + (table_ok ? "ok" : "MISMATCH") +
                   "; P(C_i missed)=" + fmt(double(missed[0]) / T, 3) + "," + fmt(double(missed[1]) / T, 3) + "," + fmt(double(missed[2]) / T, 3);
        r.data = {{"sets", sets}, {"broken_failures", broken.failures}, {"table_ok", table_ok},
                  {"missed_fraction", {double(missed[0]) / T, double(missed[1]) / T, double(missed[2]) / T}}};
        return r;
    }

    uint64_t seed_;
    std::optional<CriticalEstimate> gc_;
};

inline std::string line(const Result& r)
{
    std::ostringstream os;
    os << (r.passed ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "  [" << fmt(r.seconds, 3) << "s]";
    return os.str();
}

inline json to_json(const Result& r)
{
    return {{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}, {"data", r.data}};
}

}  // namespace plab::acceptance
