#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "plab/error.hpp"
#include "plab/geometry.hpp"
#include "plab/rng.hpp"
#include "plab/stats.hpp"

namespace plab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class MarkKind { none, radius, spacetime };
enum class Color : unsigned char { black = 0, white = 1 };

struct Point {
    Loc x{};
    int cell = -1;  // discrete spaces only
    MarkKind kind = MarkKind::none;
    double radius = 0;  // grain size (ball radius or cube half-side)
    double birth = 0;   // space-time marks
    Color color = Color::black;
    double aux = 0;  // uniform tag used for monotone couplings across intensities
};

// Radius distribution Q.
struct RadiusLaw {
    enum class Kind { fixed, uniform, pareto };
    Kind kind = Kind::fixed;
    double a = 1;      // fixed radius; uniform lower end; pareto scale
    double b = 1;      // uniform upper end
    double shape = 0;  // pareto shape
    double alpha = 0;  // declared moment exponent: ∫ r^{2+alpha} Q(dr) < ∞

    static RadiusLaw fixed(double r) { return {Kind::fixed, r, r, 0, 0}; }
    static RadiusLaw uniform(double lo, double hi) { return {Kind::uniform, lo, hi, 0, 0}; }
    static RadiusLaw pareto(double scale, double shape, double alpha)
    {
        if (!(shape > 2 + alpha)) throw Error("core_pp", "pareto shape must exceed 2+alpha for a finite (2+alpha)-moment");
        return {Kind::pareto, scale, scale, shape, alpha};
    }

    bool bounded() const { return kind != Kind::pareto; }
    double max_radius() const { return kind == Kind::fixed ? a : kind == Kind::uniform ? b : kInf; }
    double min_radius() const { return a; }

    double sample(RngStream& rng) const
    {
        switch (kind) {
        case Kind::fixed: return a;
        case Kind::uniform: return rng.uniform(a, b);
        case Kind::pareto: return a * std::pow(rng.uniform_pos(), -1.0 / shape);
        }
        return a;
    }

    double tail_prob(double t) const { return tail_moment(0, t); }

    // ∫_{(t,∞)} ρ^j Q(dρ)
    double tail_moment(double j, double t) const
    {
        switch (kind) {
        case Kind::fixed: return a > t ? std::pow(a, j) : 0.0;
        case Kind::uniform: {
            double lo = std::max(a, t);
            if (lo >= b) return 0.0;
            if (b == a) return std::pow(a, j);
            return (std::pow(b, j + 1) - std::pow(lo, j + 1)) / ((j + 1) * (b - a));
        }
        case Kind::pareto: {
            if (j >= shape) return kInf;
            double lo = std::max(a, t);
            return shape * std::pow(a, shape) * std::pow(lo, j - shape) / (shape - j);
        }
        }
        return 0;
    }

    double moment(double j) const { return tail_moment(j, -1.0); }

    // sample from ρ^j Q(dρ) restricted to (t,∞), normalized
    double sample_tilted_tail(double j, double t, RngStream& rng) const
    {
        switch (kind) {
        case Kind::fixed: return a;
        case Kind::uniform: {
            double lo = std::max(a, t), u = rng.uniform();
            if (b == lo) return b;
            return std::pow(std::pow(lo, j + 1) + u * (std::pow(b, j + 1) - std::pow(lo, j + 1)), 1.0 / (j + 1));
        }
        case Kind::pareto: {
            double lo = std::max(a, t);
            return lo * std::pow(rng.uniform_pos(), -1.0 / (shape - j));
        }
        }
        return a;
    }
};

struct MarkLaw {
    enum class Kind { none, radius, confetti };
    Kind kind = Kind::none;
    GrainKind grain = GrainKind::ball;
    RadiusLaw radius;  // Kind::radius
    // Kind::confetti: black grains use law `black` (probability p), white use `white`
    double p = 0.5;
    RadiusLaw black, white;
    double horizon = 0;  // 0 selects the default rule

    static MarkLaw none() { return {}; }
    static MarkLaw grains(RadiusLaw q, GrainKind g = GrainKind::ball)
    {
        MarkLaw m;
        m.kind = Kind::radius;
        m.grain = g;
        m.radius = q;
        return m;
    }
    static MarkLaw confetti(double p, RadiusLaw q1, RadiusLaw q2, double horizon = 0)
    {
        if (p < 0 || p > 1) throw Error("core_pp", "confetti colour probability outside [0,1]");
        MarkLaw m;
        m.kind = Kind::confetti;
        m.p = p;
        m.black = q1;
        m.white = q2;
        m.horizon = horizon;
        return m;
    }

    double max_radius() const
    {
        switch (kind) {
        case Kind::none: return 0;
        case Kind::radius: return radius.max_radius();
        case Kind::confetti: return std::max(black.max_radius(), white.max_radius());
        }
        return 0;
    }
};

// Horizon making the uncoloured-cell bound exp(-a^d β1 β2 h) smaller than
// `target`, with a the side of a cube of diameter r0/4 and βi = Qi(ρ >= r0).
inline double confetti_default_horizon(const MarkLaw& m, int dim, double target = 1e-8)
{
    auto lower = [](const RadiusLaw& q) { return q.min_radius() > 0 ? q.min_radius() : q.max_radius() / 2; };
    double r0 = std::min(lower(m.black), lower(m.white));
    if (!(r0 > 0)) throw Error("core_pp", "confetti grains must contain a ball of positive radius");
    auto beta = [r0](const RadiusLaw& q) { return q.kind == RadiusLaw::Kind::fixed ? (q.a >= r0 ? 1.0 : 0.0) : q.tail_prob(r0); };
    double b1 = beta(m.black), b2 = beta(m.white);
    if (!(b1 > 0 && b2 > 0)) throw Error("core_pp", "confetti grain laws give zero coverage probability");
    double a = r0 / (4 * std::sqrt(double(dim)));
    return -std::log(target) / (std::pow(a, dim) * b1 * b2);
}

struct Window {
    enum class Kind { box, cells };
    Kind kind = Kind::box;
    Box box;
    int cells = 0;

    static Window make_box(const Box& b)
    {
        for (int i = 0; i < b.dim; ++i)
            if (!(b.hi[size_t(i)] > b.lo[size_t(i)])) throw Error("core_pp", "window box must have positive side lengths");
        Window w;
        w.box = b;
        return w;
    }
    static Window make_cells(int m)
    {
        if (m <= 0) throw Error("core_pp", "discrete window needs at least one cell");
        Window w;
        w.kind = Kind::cells;
        w.cells = m;
        return w;
    }
    int dim() const { return kind == Kind::box ? box.dim : 0; }
    bool discrete() const { return kind == Kind::cells; }
    bool operator==(const Window& o) const
    {
        if (kind != o.kind) return false;
        return kind == Kind::box ? box == o.box : cells == o.cells;
    }
};

struct IntensityModel {
    double gamma = 1;            // homogeneous intensity on a box window
    std::vector<double> masses;  // per-cell masses on a discrete window
    MarkLaw marks;

    static IntensityModel homogeneous(double gamma, MarkLaw m = {})
    {
        if (!(gamma >= 0) || !std::isfinite(gamma)) throw Error("core_pp", "intensity must be finite and nonnegative");
        IntensityModel im;
        im.gamma = gamma;
        im.marks = m;
        return im;
    }
    static IntensityModel cells(std::vector<double> masses)
    {
        for (double v : masses)
            if (!(v >= 0) || !std::isfinite(v)) throw Error("core_pp", "cell masses must be finite and nonnegative");
        IntensityModel im;
        im.masses = std::move(masses);
        return im;
    }
    bool discrete() const { return !masses.empty(); }

    double time_horizon(int dim) const
    {
        if (marks.kind != MarkLaw::Kind::confetti) return 1.0;
        return marks.horizon > 0 ? marks.horizon : confetti_default_horizon(marks, dim);
    }
};

inline void check_compatible(const IntensityModel& m, const Window& w)
{
    if (m.discrete() != w.discrete()) throw Error("core_pp", "intensity and window disagree on discrete vs continuous space");
    if (w.discrete() && int(m.masses.size()) != w.cells) throw Error("core_pp", "number of cell masses differs from window size");
}

// λ(X) on the window (space-time mass for confetti marks)
inline double total_mass(const IntensityModel& m, const Window& w)
{
    check_compatible(m, w);
    double mass = 0;
    if (w.discrete()) {
        for (double v : m.masses) mass += v;
    } else {
        mass = m.gamma * w.box.volume() * m.time_horizon(w.box.dim);
    }
    if (!std::isfinite(mass)) throw Error("core_pp", "intensity has infinite mass on the window");
    return mass;
}

struct PointConfig {
    std::vector<Point> points;
    Window window;

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

using RegionPredicate = std::function<bool(const Point&)>;

inline void sample_mark(const IntensityModel& m, Point& p, RngStream& rng, int dim)
{
    switch (m.marks.kind) {
    case MarkLaw::Kind::none: break;
    case MarkLaw::Kind::radius:
        p.kind = MarkKind::radius;
        p.radius = m.marks.radius.sample(rng);
        break;
    case MarkLaw::Kind::confetti: {
        p.kind = MarkKind::spacetime;
        p.birth = rng.uniform(0, m.time_horizon(dim));
        bool black = rng.bernoulli(m.marks.p);
        p.color = black ? Color::black : Color::white;
        p.radius = black ? m.marks.black.sample(rng) : m.marks.white.sample(rng);
        break;
    }
    }
}

// One point from the normalized intensity measure.
inline Point sample_point(const IntensityModel& m, const Window& w, RngStream& rng)
{
    Point p;
    if (w.discrete()) {
        double total = 0;
        for (double v : m.masses) total += v;
        double u = rng.uniform() * total, acc = 0;
        p.cell = int(m.masses.size()) - 1;
        for (size_t i = 0; i < m.masses.size(); ++i) {
            acc += m.masses[i];
            if (u < acc && m.masses[i] > 0) {
                p.cell = int(i);
                break;
            }
        }
        while (m.masses[size_t(p.cell)] <= 0) --p.cell;
    } else {
        for (int i = 0; i < w.box.dim; ++i) p.x[size_t(i)] = rng.uniform(w.box.lo[size_t(i)], w.box.hi[size_t(i)]);
    }
    sample_mark(m, p, rng, w.dim());
    p.aux = rng.uniform();
    return p;
}

inline PointConfig sample_poisson(const IntensityModel& m, const Window& w, RngStream& rng)
{
    double mass = total_mass(m, w);
    PointConfig c;
    c.window = w;
    if (mass <= 0) return c;
    int64_t n = rng.poisson(mass);
    c.points.reserve(size_t(n));
    for (int64_t i = 0; i < n; ++i) c.points.push_back(sample_point(m, w, rng));
    if (m.marks.kind == MarkLaw::Kind::confetti)
        std::sort(c.points.begin(), c.points.end(), [](const Point& a, const Point& b) { return a.birth < b.birth; });
    return c;
}

inline PointConfig restrict(const PointConfig& c, const RegionPredicate& region)
{
    PointConfig r;
    r.window = c.window;
    for (const auto& p : c.points)
        if (region(p)) r.points.push_back(p);
    return r;
}

inline PointConfig superpose(const PointConfig& a, const PointConfig& b)
{
    if (!(a.window == b.window)) throw Error("core_pp", "superpose: window mismatch");
    PointConfig r = a;
    r.points.insert(r.points.end(), b.points.begin(), b.points.end());
    return r;
}

inline PointConfig add_point(const PointConfig& c, const Point& p)
{
    PointConfig r = c;
    r.points.push_back(p);
    return r;
}

inline PointConfig thin(const PointConfig& c, double keep_prob, RngStream& rng)
{
    if (!(keep_prob >= 0 && keep_prob <= 1)) throw Error("core_pp", "thin: keep probability outside [0,1]");
    PointConfig r;
    r.window = c.window;
    for (const auto& p : c.points)
        if (rng.uniform() < keep_prob) r.points.push_back(p);
    return r;
}

inline size_t count_in(const PointConfig& c, const RegionPredicate& region)
{
    size_t n = 0;
    for (const auto& p : c.points)
        if (region(p)) ++n;
    return n;
}

// Multiset equality on (location, cell, marks).
inline bool same_multiset(const PointConfig& a, const PointConfig& b)
{
    if (a.size() != b.size()) return false;
    auto key = [](const Point& p) { return std::make_tuple(p.cell, p.x[0], p.x[1], p.x[2], p.radius, p.birth, int(p.color), p.aux); };
    std::vector<decltype(key(Point{}))> ka, kb;
    for (auto& p : a.points) ka.push_back(key(p));
    for (auto& p : b.points) kb.push_back(key(p));
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    return ka == kb;
}

// Scalar functional f(μ).
struct Functional {
    std::string name;
    std::function<double(const PointConfig&)> eval;
    std::optional<double> range_bound;

    double operator()(const PointConfig& c) const { return eval(c); }
};

inline Functional constant_functional(double v)
{
    return {"constant", [v](const PointConfig&) { return v; }, std::fabs(v)};
}

inline Functional count_functional(RegionPredicate region, std::string name = "count")
{
    return {std::move(name), [region](const PointConfig& c) { return double(count_in(c, region)); }, std::nullopt};
}

using PointFunctional = std::function<double(const Point&, const PointConfig&)>;

struct MeckeReport {
    Estimate lhs, rhs;
    bool passed = false;
};

// E[Σ_{x∈η} f(x,η)] against ∫ E[f(x, η+δ_x)] λ(dx).
inline MeckeReport mecke_check(const PointFunctional& f, const IntensityModel& m, const Window& w, size_t samples, uint64_t seed,
                               double overflow_guard = 1e12)
{
    double mass = total_mass(m, w);
    std::vector<double> lhs(samples), rhs(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream r1(seed, i, 1), r2(seed, i, 2);
        auto eta = sample_poisson(m, w, r1);
        double s = 0;
        for (const auto& p : eta.points) {
            double v = f(p, eta);
            if (!std::isfinite(v) || std::fabs(v) > overflow_guard) throw Error("core_pp", "mecke_check: functional is not bounded");
            if (v < 0) throw Error("core_pp", "mecke_check: functional must be nonnegative");
            s += v;
        }
        lhs[i] = s;
        auto eta2 = sample_poisson(m, w, r2);
        double v = 0;
        if (mass > 0) {
            Point x = sample_point(m, w, r2);
            v = f(x, add_point(eta2, x));
            if (!std::isfinite(v) || std::fabs(v) > overflow_guard) throw Error("core_pp", "mecke_check: functional is not bounded");
        }
        rhs[i] = mass * v;
    });
    MeckeReport rep{mean_estimate(lhs), mean_estimate(rhs)};
    rep.passed = std::fabs(rep.lhs.value - rep.rhs.value) <= 3 * (rep.lhs.se + rep.rhs.se) + 1e-12;
    return rep;
}

// CSV: one point per row.
inline void write_csv(const PointConfig& c, std::ostream& os)
{
    os << "x0,x1,x2,cell,mark,radius,birth,color,aux\n";
    os << std::setprecision(17);
    for (const auto& p : c.points) {
        const char* mk = p.kind == MarkKind::none ? "none" : p.kind == MarkKind::radius ? "radius" : "spacetime";
        os << p.x[0] << ',' << p.x[1] << ',' << p.x[2] << ',' << p.cell << ',' << mk << ',' << p.radius << ',' << p.birth << ','
           << (p.color == Color::black ? "black" : "white") << ',' << p.aux << '\n';
    }
}

inline PointConfig read_csv(std::istream& is, const Window& w)
{
    PointConfig c;
    c.window = w;
    std::string line;
    bool got = bool(std::getline(is, line));
    while (got && !line.empty() && line[0] == '#') got = bool(std::getline(is, line));
    if (!got || line.rfind("x0,x1,x2,cell", 0) != 0) throw Error("core_pp", "csv: missing or unknown header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 9) throw Error("core_pp", "csv: expected 9 fields, got " + std::to_string(f.size()));
        Point p;
        for (int i = 0; i < 3; ++i) p.x[size_t(i)] = std::stod(f[size_t(i)]);
        p.cell = std::stoi(f[3]);
        p.kind = f[4] == "none" ? MarkKind::none : f[4] == "radius" ? MarkKind::radius : MarkKind::spacetime;
        p.radius = std::stod(f[5]);
        p.birth = std::stod(f[6]);
        p.color = f[7] == "black" ? Color::black : Color::white;
        p.aux = std::stod(f[8]);
        c.points.push_back(p);
    }
    return c;
}

}  // namespace plab
