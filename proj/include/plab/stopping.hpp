#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "plab/core_pp.hpp"

namespace plab {

using Membership = std::function<bool(const Point&)>;
using ProbeList = std::vector<Point>;

// Z(μ) as an executable predicate. `at(μ)` does whatever per-configuration
// work the set needs once and returns the membership test for that μ.
struct StoppingSetOracle {
    std::string name;
    std::function<Membership(const PointConfig&)> at;
    std::optional<Box> support_hint;
    // optional fast path for many probes at once
    std::function<std::vector<char>(const PointConfig&, const ProbeList&)> batch;

    bool member(const Point& x, const PointConfig& mu) const { return at(mu)(x); }

    std::vector<char> mask(const PointConfig& mu, const ProbeList& probes) const
    {
        if (batch) return batch(mu, probes);
        auto z = at(mu);
        std::vector<char> out(probes.size());
        for (size_t i = 0; i < probes.size(); ++i) out[i] = z(probes[i]) ? 1 : 0;
        return out;
    }
};

// Z^Y: a family indexed by y with a law for Y. Evaluations receive y
// explicitly; a plain oracle converts to the degenerate law.
struct RandomizedStoppingSet {
    std::string name;
    std::function<StoppingSetOracle(double)> family;
    std::function<double(RngStream&)> law;
    std::optional<Box> support_hint;

    RandomizedStoppingSet() = default;
    RandomizedStoppingSet(StoppingSetOracle z)  // NOLINT: implicit on purpose
        : name(z.name), support_hint(z.support_hint)
    {
        family = [z](double) { return z; };
        law = [](RngStream&) { return 0.0; };
    }

    double draw(RngStream& rng) const { return law ? law(rng) : 0.0; }
    StoppingSetOracle operator()(double y) const { return family(y); }
};

inline RandomizedStoppingSet randomize(std::string name, std::function<StoppingSetOracle(double)> family, std::function<double(RngStream&)> law,
                                       std::optional<Box> hint = std::nullopt)
{
    RandomizedStoppingSet r;
    r.name = std::move(name);
    r.family = std::move(family);
    r.law = std::move(law);
    r.support_hint = hint;
    return r;
}

// CTDT {Z_t}: membership at (t, x) for a given μ.
struct CTDT {
    std::string name;
    std::function<std::function<bool(double, const Point&)>(const PointConfig&)> at;
    double t_max = 1;
    std::optional<Box> support_hint;

    // Z_t for a fixed t
    StoppingSetOracle slice(double t) const
    {
        auto self = *this;
        StoppingSetOracle z;
        z.name = name + ":t=" + std::to_string(t);
        z.support_hint = support_hint;
        z.at = [self, t](const PointConfig& mu) {
            auto m = self.at(mu);
            return Membership([m, t](const Point& x) { return m(t, x); });
        };
        return z;
    }

    StoppingSetOracle terminal() const
    {
        auto self = *this;
        StoppingSetOracle z;
        z.name = name + ":terminal";
        z.support_hint = support_hint;
        z.at = [self](const PointConfig& mu) {
            auto m = self.at(mu);
            return Membership([m](const Point& x) { return m(kInf, x); });
        };
        return z;
    }
};

// ---------------------------------------------------------------- fixtures

inline StoppingSetOracle constant_set(std::string name, std::function<bool(const Point&)> region, std::optional<Box> hint = std::nullopt)
{
    StoppingSetOracle z;
    z.name = std::move(name);
    z.support_hint = hint;
    z.at = [region](const PointConfig&) { return Membership(region); };
    return z;
}

inline StoppingSetOracle whole_space() { return constant_set("whole", [](const Point&) { return true; }); }
inline StoppingSetOracle empty_set() { return constant_set("empty", [](const Point&) { return false; }); }

// Ball or box region used for W.
struct Region {
    enum class Kind { ball, box };
    Kind kind = Kind::ball;
    int dim = 2;
    Loc center{};
    double radius = 1;
    Box box;

    static Region ball(int dim, Loc c, double r)
    {
        Region g;
        g.dim = dim;
        g.center = c;
        g.radius = r;
        g.box = Box::cube(dim, 0, 0);
        for (int i = 0; i < dim; ++i) {
            g.box.lo[size_t(i)] = c[size_t(i)] - r;
            g.box.hi[size_t(i)] = c[size_t(i)] + r;
        }
        return g;
    }
    static Region of_box(const Box& b)
    {
        Region g;
        g.kind = Kind::box;
        g.dim = b.dim;
        g.box = b;
        return g;
    }
    bool contains(const Loc& x) const { return kind == Kind::ball ? dist2(x, center, dim) <= radius * radius : box.contains(x); }
    double volume() const { return kind == Kind::ball ? unit_ball_volume(dim) * std::pow(radius, dim) : box.volume(); }
    Box bounds() const { return box; }
};

// Z_t(μ) = B(x0, τ(μ) ∧ t) with τ(μ) the distance from x0 to the closest
// point of μ in W.
inline double ball_growth_tau(const Region& W, const Loc& x0, const PointConfig& mu)
{
    double best = kInf;
    for (const auto& p : mu.points)
        if (W.contains(p.x)) best = std::min(best, std::sqrt(dist2(p.x, x0, W.dim)));
    return best;
}

inline CTDT ball_growth_ctdt(const Region& W, const Loc& x0, std::optional<Box> hint = std::nullopt)
{
    CTDT c;
    c.name = "ball-growth";
    Box b = hint ? *hint : W.bounds();
    double tm = 0;
    for (int mask = 0; mask < (1 << W.dim); ++mask) {
        Loc corner{};
        for (int i = 0; i < W.dim; ++i) corner[size_t(i)] = (mask >> i) & 1 ? b.hi[size_t(i)] : b.lo[size_t(i)];
        tm = std::max(tm, std::sqrt(dist2(corner, x0, W.dim)));
    }
    c.t_max = tm;
    c.support_hint = b;
    int dim = W.dim;
    c.at = [W, x0, dim](const PointConfig& mu) {
        // squared τ kept exactly so the closest point itself is a member
        double tau2 = kInf;
        for (const auto& p : mu.points)
            if (W.contains(p.x)) tau2 = std::min(tau2, dist2(p.x, x0, dim));
        return std::function<bool(double, const Point&)>([tau2, x0, dim](double t, const Point& x) {
            double r2 = t * t < tau2 ? t * t : tau2;
            return dist2(x.x, x0, dim) <= r2;
        });
    };
    return c;
}

// Not a stopping set: the closest point sits outside B(x0, d/2), so adding
// a point between d/2 and d outside Z changes Z.
inline StoppingSetOracle broken_half_nearest(int dim, Loc x0, std::optional<Box> hint = std::nullopt)
{
    StoppingSetOracle z;
    z.name = "broken-half-nearest";
    z.support_hint = hint;
    z.at = [dim, x0](const PointConfig& mu) {
        double d = kInf;
        for (const auto& p : mu.points) d = std::min(d, std::sqrt(dist2(p.x, x0, dim)));
        double rad = d / 2;
        return Membership([=](const Point& x) { return dist2(x.x, x0, dim) <= rad * rad; });
    };
    return z;
}

// Three-cell fixture. Cells 0,1,2 play C1,C2,C3; X_i = 1{μ(C_i) > 0}.
// Returns the case number 0..3 (0: all X equal; 1: X1=1,X2=0; 2: X1=0,X3=1;
// 3: X2=1,X3=0) and the cell mask of Z.
inline int nonattainable_case(const std::array<int64_t, 3>& counts, std::array<bool, 3>& zmask)
{
    bool x1 = counts[0] > 0, x2 = counts[1] > 0, x3 = counts[2] > 0;
    if (x1 == x2 && x2 == x3) {
        zmask = {true, true, true};
        return 0;
    }
    if (x1 && !x2) {
        zmask = {true, true, false};
        return 1;
    }
    if (!x1 && x3) {
        zmask = {true, false, true};
        return 2;
    }
    if (x2 && !x3) {
        zmask = {false, true, true};
        return 3;
    }
    throw Error("stopping", "nonattainable fixture: case table not exhaustive");
}

inline std::array<int64_t, 3> cell_counts3(const PointConfig& mu)
{
    std::array<int64_t, 3> c{0, 0, 0};
    for (const auto& p : mu.points)
        if (p.cell >= 0 && p.cell < 3) ++c[size_t(p.cell)];
    return c;
}

inline StoppingSetOracle nonattainable_fixture(const std::array<double, 3>& masses)
{
    for (double m : masses)
        if (!(m > 0)) throw Error("stopping", "nonattainable fixture needs positive cell masses");
    StoppingSetOracle z;
    z.name = "nonattainable";
    z.at = [](const PointConfig& mu) {
        std::array<bool, 3> zm{};
        nonattainable_case(cell_counts3(mu), zm);
        return Membership([zm](const Point& x) { return x.cell >= 0 && x.cell < 3 && zm[size_t(x.cell)]; });
    };
    return z;
}

// ---------------------------------------------------------------- probes

inline ProbeList cell_probes(int m)
{
    ProbeList out;
    for (int i = 0; i < m; ++i) {
        Point p;
        p.cell = i;
        out.push_back(p);
    }
    return out;
}

struct ProbeGrid {
    Box box;
    double spacing = 1;
    std::array<int, 3> n{1, 1, 1};
    ProbeList points;
};

// Lattice nodes lo + i*spacing covering the box (both ends included).
inline ProbeGrid make_probe_grid(const Box& b, double spacing)
{
    if (!(spacing > 0)) throw Error("stopping", "probe spacing must be positive");
    ProbeGrid g;
    g.box = b;
    g.spacing = spacing;
    for (int i = 0; i < b.dim; ++i) g.n[size_t(i)] = int(std::floor(b.side(i) / spacing + 1e-9)) + 1;
    for (int k = 0; k < (b.dim > 2 ? g.n[2] : 1); ++k)
        for (int j = 0; j < (b.dim > 1 ? g.n[1] : 1); ++j)
            for (int i = 0; i < g.n[0]; ++i) {
                Point p;
                p.x = {b.lo[0] + i * spacing, b.dim > 1 ? b.lo[1] + j * spacing : 0.0, b.dim > 2 ? b.lo[2] + k * spacing : 0.0};
                g.points.push_back(p);
            }
    return g;
}

inline ProbeList random_probes(const Window& w, const std::optional<Box>& hint, size_t n, RngStream& rng)
{
    if (w.discrete()) return cell_probes(w.cells);
    Box b = hint ? *hint : w.box;
    ProbeList out(n);
    for (auto& p : out)
        for (int i = 0; i < b.dim; ++i) p.x[size_t(i)] = rng.uniform(b.lo[size_t(i)], b.hi[size_t(i)]);
    return out;
}

// μ_{Z(μ)} : points of μ whose location lies in Z(μ)
inline PointConfig restrict_to(const PointConfig& mu, const Membership& z)
{
    return restrict(mu, [&](const Point& p) { return z(p); });
}

inline PointConfig restrict_outside(const PointConfig& mu, const Membership& z)
{
    return restrict(mu, [&](const Point& p) { return !z(p); });
}

// ---------------------------------------------------------------- audits

struct AxiomCounterexample {
    size_t trial = 0;
    Point probe;
    bool before = false, after = false;
};

struct AxiomReport {
    std::string name;
    size_t trials = 0, probes = 0, failures = 0;
    std::vector<AxiomCounterexample> counterexamples;
    bool passed() const { return failures == 0; }
};

// Z(μ) = Z(μ_{Z(μ)} + ψ_{Z(μ)^c}) checked at probe locations and on the
// revealed points themselves.
inline AxiomReport verify_stopping_axiom(const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, size_t trials, size_t probes,
                                         uint64_t seed)
{
    AxiomReport rep;
    rep.name = Z.name;
    rep.trials = trials;
    rep.probes = probes;
    std::vector<std::vector<AxiomCounterexample>> bad(trials);
    parallel_for(trials, [&](size_t i) {
        RngStream rng(seed, i);
        double y = Z.draw(rng);
        auto z = Z(y);
        auto mu = sample_poisson(m, w, rng);
        auto psi = sample_poisson(m, w, rng);
        auto zmu = z.at(mu);
        auto mixed = superpose(restrict_to(mu, zmu), restrict_outside(psi, zmu));
        auto zmix = z.at(mixed);
        ProbeList pr = random_probes(w, Z.support_hint ? Z.support_hint : z.support_hint, probes, rng);
        for (const auto& p : mu.points) pr.push_back(p);
        for (const auto& p : psi.points) pr.push_back(p);
        for (const auto& p : pr) {
            bool a = zmu(p), b = zmix(p);
            if (a != b) bad[i].push_back({i, p, a, b});
        }
    });
    for (auto& v : bad) {
        rep.failures += v.size();
        for (auto& c : v)
            if (rep.counterexamples.size() < 10) rep.counterexamples.push_back(c);
    }
    return rep;
}

// t(x,μ) = inf{t : x ∈ Z_t(μ)} by bisection on [0, t_max]. The map
// t -> membership is also scanned on a coarse grid to catch non-monotone input.
inline double entry_time(const CTDT& ctdt, const Point& x, const PointConfig& mu, double resolution = 0)
{
    double tmax = ctdt.t_max;
    if (resolution <= 0) resolution = 1e-6 * tmax;
    auto m = ctdt.at(mu);
    bool seen = false;
    for (int k = 0; k <= 64; ++k) {
        bool in = m(tmax * k / 64.0, x);
        if (seen && !in) throw Error("stopping", "entry_time: CTDT is not monotone in t");
        seen = seen || in;
    }
    if (!m(tmax, x)) return kInf;
    if (m(0, x)) return 0;
    double lo = 0, hi = tmax;
    while (hi - lo > resolution) {
        double mid = 0.5 * (lo + hi);
        bool in = m(mid, x);
        if (in)
            hi = mid;
        else
            lo = mid;
    }
    if (m(lo, x)) throw Error("stopping", "entry_time: CTDT is not monotone in t");
    return hi;
}

struct MonotonicityReport {
    size_t checks = 0, violations = 0;
};

// For random μ and probes, t -> membership must be a single step 0 -> 1.
inline MonotonicityReport check_ctdt_monotone(const CTDT& ctdt, const IntensityModel& m, const Window& w, size_t trials, size_t probes, size_t times,
                                              uint64_t seed)
{
    MonotonicityReport rep;
    std::vector<size_t> viol(trials, 0);
    parallel_for(trials, [&](size_t i) {
        RngStream rng(seed, i);
        auto mu = sample_poisson(m, w, rng);
        auto mt = ctdt.at(mu);
        for (const auto& p : random_probes(w, ctdt.support_hint, probes, rng)) {
            bool seen = false;
            for (size_t k = 0; k <= times; ++k) {
                bool in = mt(ctdt.t_max * double(k) / double(times), p);
                if (seen && !in) ++viol[i];
                seen = seen || in;
            }
        }
    });
    rep.checks = trials * probes;
    for (auto v : viol) rep.violations += v;
    return rep;
}

struct RevealmentReport {
    std::string name;
    double delta = 0;
    size_t argmax = 0;
    double spacing = 0;  // 0 for discrete spaces
    size_t samples = 0;
    ProbeList probes;
    std::vector<Estimate> per_probe;
    std::string note = "grid maximum; the supremum over all locations may be larger by the within-grid variation";
};

inline RevealmentReport revealment(const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, const ProbeList& probes, size_t samples,
                                   uint64_t seed, double spacing = 0)
{
    RevealmentReport rep;
    rep.name = Z.name;
    rep.spacing = spacing;
    rep.samples = samples;
    rep.probes = probes;
    std::vector<std::vector<char>> masks(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        double y = Z.draw(rng);
        auto eta = sample_poisson(m, w, rng);
        masks[i] = Z(y).mask(eta, probes);
    });
    std::vector<double> hits(probes.size(), 0.0);
    for (auto& mk : masks)
        for (size_t j = 0; j < probes.size(); ++j) hits[j] += mk[j];
    rep.per_probe.resize(probes.size());
    double n = double(samples);
    for (size_t j = 0; j < probes.size(); ++j) {
        double p = hits[j] / n;
        rep.per_probe[j] = {p, std::sqrt(p * (1 - p) / std::max(1.0, n - 1))};
        if (p > rep.delta) {
            rep.delta = p;
            rep.argmax = j;
        }
    }
    return rep;
}

inline RevealmentReport revealment(const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, const ProbeGrid& grid, size_t samples,
                                   uint64_t seed)
{
    return revealment(Z, m, w, grid.points, samples, seed, grid.spacing);
}

struct RevealedPointsReport {
    Estimate points;  // E[η(Z)]
    Estimate volume;  // E[λ(Z)]
    bool passed = false;
};

// E[η(Z)] against E[λ(Z)]; λ(Z) by midpoint quadrature with the given
// spacing on the support hint (box windows) or exactly (discrete windows).
inline RevealedPointsReport expected_revealed_points(const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, size_t samples,
                                                     uint64_t seed, double spacing = 0.02)
{
    ProbeList quad;
    double cell_mass = 0;
    if (w.discrete()) {
        quad = cell_probes(w.cells);
    } else {
        Box b = Z.support_hint ? *Z.support_hint : w.box;
        Box inner = b;
        for (int i = 0; i < b.dim; ++i) {
            inner.lo[size_t(i)] += spacing / 2;
            inner.hi[size_t(i)] -= spacing / 2;
        }
        quad = make_probe_grid(inner, spacing).points;
        quad.erase(std::remove_if(quad.begin(), quad.end(), [&](const Point& p) { return !w.box.contains(p.x); }), quad.end());
        cell_mass = m.gamma * std::pow(spacing, b.dim);
    }
    std::vector<double> np(samples), vol(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        double y = Z.draw(rng);
        auto eta = sample_poisson(m, w, rng);
        auto z = Z(y);
        auto mem = z.at(eta);
        np[i] = double(count_in(eta, [&](const Point& p) { return mem(p); }));
        auto mk = z.mask(eta, quad);
        double v = 0;
        for (size_t j = 0; j < quad.size(); ++j)
            if (mk[j]) v += w.discrete() ? m.masses[size_t(quad[j].cell)] : cell_mass;
        vol[i] = v;
    });
    RevealedPointsReport rep{mean_estimate(np), mean_estimate(vol)};
    rep.passed = std::fabs(rep.points.value - rep.volume.value) <= 3 * std::hypot(rep.points.se, rep.volume.se) + 1e-12;
    return rep;
}

// Checks that the set determines f: f(μ) = f(μ_{Z(μ)}).
inline size_t determination_failures(const Functional& f, const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, size_t samples,
                                      uint64_t seed)
{
    std::vector<char> bad(samples, 0);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        double y = Z.draw(rng);
        auto eta = sample_poisson(m, w, rng);
        auto mem = Z(y).at(eta);
        bad[i] = f(eta) != f(restrict_to(eta, mem)) ? 1 : 0;
    });
    size_t n = 0;
    for (char b : bad) n += size_t(b);
    return n;
}

struct MarkovEntry {
    std::string functional;
    KsResult ks;
    bool passed = false;
};

struct MarkovReport {
    std::string name;
    double level = 0.01;
    std::vector<MarkovEntry> entries;
    bool passed() const
    {
        for (auto& e : entries)
            if (!e.passed) return false;
        return !entries.empty();
    }
};

// Two-sample KS on g(η) against g(η_{Z(η)} + η'_{Z(η)^c}) with η' an
// independent copy; level Bonferroni-split over the functionals.
inline MarkovReport markov_property_check(const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, const std::vector<Functional>& gs,
                                          size_t samples, uint64_t seed, double level = 0.01)
{
    MarkovReport rep;
    rep.name = Z.name;
    rep.level = level;
    std::vector<std::vector<double>> a(gs.size(), std::vector<double>(samples)), b = a;
    parallel_for(samples, [&](size_t i) {
        RngStream r1(seed, i, 1), r2(seed, i, 2);
        auto eta = sample_poisson(m, w, r1);
        for (size_t k = 0; k < gs.size(); ++k) a[k][i] = gs[k](eta);
        // fresh configuration for the second route
        double y = Z.draw(r2);
        auto eta2 = sample_poisson(m, w, r2);
        auto fresh = sample_poisson(m, w, r2);
        auto mem = Z(y).at(eta2);
        auto mixed = superpose(restrict_to(eta2, mem), restrict_outside(fresh, mem));
        for (size_t k = 0; k < gs.size(); ++k) b[k][i] = gs[k](mixed);
    });
    double per = level / double(std::max<size_t>(1, gs.size()));
    for (size_t k = 0; k < gs.size(); ++k) {
        MarkovEntry e;
        e.functional = gs[k].name;
        e.ks = ks_two_sample(a[k], b[k]);
        e.passed = e.ks.p_value >= per;
        rep.entries.push_back(e);
    }
    return rep;
}

}  // namespace plab
