#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "plab/core_pp.hpp"
#include "plab/percolation.hpp"
#include "plab/stopping.hpp"

namespace plab {

// Resampling time; t = ∞ is a flag rather than a float.
struct ResampleTime {
    double t = 0;
    bool infinite = false;

    static ResampleTime at(double t)
    {
        if (!(t >= 0) || std::isinf(t)) throw Error("dynamics", "resample time must be finite and nonnegative (use ResampleTime::infinity())");
        return {t, false};
    }
    static ResampleTime infinity() { return {0, true}; }
    double keep_prob() const { return infinite ? 0.0 : std::exp(-t); }
};

inline IntensityModel scaled(const IntensityModel& m, double factor)
{
    IntensityModel r = m;
    r.gamma *= factor;
    for (auto& v : r.masses) v *= factor;
    return r;
}

// η^t: keep each point with probability e^{-t}, add an independent Poisson
// process of intensity (1 - e^{-t}) λ.
inline PointConfig resample(const PointConfig& c, ResampleTime t, const IntensityModel& m, RngStream& rng)
{
    double keep = t.keep_prob();
    if (keep == 1.0) return c;
    PointConfig out = thin(c, keep, rng);
    auto fresh = sample_poisson(scaled(m, 1 - keep), c.window, rng);
    out.points.insert(out.points.end(), fresh.points.begin(), fresh.points.end());
    return out;
}

// ---------------------------------------------------------------- paths

struct PathEvent {
    double time = 0;
    bool birth = true;
    size_t id = 0;  // point identity; death events name a point alive at that time
    Point point;
};

struct BirthDeathPath {
    PointConfig initial;  // ids 0..initial.size()-1
    std::vector<PathEvent> events;
    double horizon = 0;

    // alive configuration at time t (right-continuous)
    PointConfig alive_at(double t) const
    {
        std::unordered_map<size_t, Point> alive;
        for (size_t i = 0; i < initial.size(); ++i) alive.emplace(i, initial.points[i]);
        for (const auto& e : events) {
            if (e.time > t) break;
            if (e.birth)
                alive.emplace(e.id, e.point);
            else
                alive.erase(e.id);
        }
        PointConfig c;
        c.window = initial.window;
        std::vector<std::pair<size_t, Point>> v(alive.begin(), alive.end());
        std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first < b.first; });
        for (auto& [id, p] : v) c.points.push_back(p);
        return c;
    }
};

// Stationary free birth-death process: initial state Poisson(λ), births at
// total rate λ(X), unit-rate exponential lifetimes.
inline BirthDeathPath simulate_path(const IntensityModel& m, const Window& w, double horizon, RngStream& rng)
{
    if (!(horizon > 0)) throw Error("dynamics", "path horizon must be positive");
    BirthDeathPath path;
    path.horizon = horizon;
    path.initial = sample_poisson(m, w, rng);
    double mass = total_mass(m, w);
    size_t next = path.initial.size();
    for (size_t i = 0; i < path.initial.size(); ++i) {
        double d = rng.exponential(1.0);
        if (d <= horizon) path.events.push_back({d, false, i, path.initial.points[i]});
    }
    if (mass > 0) {
        double t = rng.exponential(mass);
        while (t <= horizon) {
            Point p = sample_point(m, w, rng);
            size_t id = next++;
            path.events.push_back({t, true, id, p});
            double d = t + rng.exponential(1.0);
            if (d <= horizon) path.events.push_back({d, false, id, p});
            t += rng.exponential(mass);
        }
    }
    std::sort(path.events.begin(), path.events.end(), [](const PathEvent& a, const PathEvent& b) { return a.time < b.time; });
    return path;
}

inline void write_path_csv(const BirthDeathPath& p, std::ostream& os)
{
    os << "time,type,id,x0,x1,x2,cell,radius\n" << std::setprecision(17);
    for (size_t i = 0; i < p.initial.size(); ++i) {
        const auto& q = p.initial.points[i];
        os << 0 << ",initial," << i << ',' << q.x[0] << ',' << q.x[1] << ',' << q.x[2] << ',' << q.cell << ',' << q.radius << '\n';
    }
    for (const auto& e : p.events)
        os << e.time << ',' << (e.birth ? "birth" : "death") << ',' << e.id << ',' << e.point.x[0] << ',' << e.point.x[1] << ',' << e.point.x[2] << ','
           << e.point.cell << ',' << e.point.radius << '\n';
}

// ---------------------------------------------------------------- covariance

struct CovCurve {
    std::vector<double> times;
    std::vector<Estimate> cov;
    Estimate mean, second_moment;
    size_t samples = 0;
};

// Per-replica values f(η) and f(η^{t_j}) for every time in the grid.
struct PairedSamples {
    std::vector<double> f0;
    std::vector<std::vector<double>> ft;  // [time][replica]
};

inline PairedSamples paired_samples(const Functional& f, const IntensityModel& m, const Window& w, const std::vector<double>& times, size_t samples,
                                    uint64_t seed)
{
    PairedSamples ps;
    ps.f0.resize(samples);
    ps.ft.assign(times.size(), std::vector<double>(samples));
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        auto eta = sample_poisson(m, w, rng);
        ps.f0[i] = f(eta);
        for (size_t j = 0; j < times.size(); ++j) {
            RngStream rj = rng.child(j);
            ps.ft[j][i] = f(resample(eta, ResampleTime::at(times[j]), m, rj));
        }
    });
    return ps;
}

inline CovCurve covariance_curve(const Functional& f, const IntensityModel& m, const Window& w, const std::vector<double>& times, size_t samples,
                                 uint64_t seed)
{
    auto ps = paired_samples(f, m, w, times, samples, seed);
    CovCurve c;
    c.times = times;
    c.samples = samples;
    for (size_t j = 0; j < times.size(); ++j) c.cov.push_back(covariance_estimate(ps.f0, ps.ft[j]));
    c.mean = mean_estimate(ps.f0);
    std::vector<double> sq(samples);
    for (size_t i = 0; i < samples; ++i) sq[i] = ps.f0[i] * ps.f0[i];
    c.second_moment = mean_estimate(sq);
    return c;
}

inline void write_cov_csv(const CovCurve& c, std::ostream& os)
{
    os << "t,cov,se\n" << std::setprecision(12);
    for (size_t j = 0; j < c.times.size(); ++j) os << c.times[j] << ',' << c.cov[j].value << ',' << c.cov[j].se << '\n';
}

// ---------------------------------------------------------------- sensitivity

struct SensitivityMember {
    double n = 0;
    Functional f;
    IntensityModel model;
    Window window;
    std::optional<RandomizedStoppingSet> Z;  // supplies the revealment bound
    ProbeList probes;
    double probe_spacing = 0;
};

struct SensitivityRow {
    double n = 0;
    Estimate cov, second_moment;
    std::optional<Estimate> delta;
    std::optional<Estimate> bound;  // δ E[f²] e^{-t}/(1-e^{-t})²
};

struct SensitivityReport {
    double t = 0;
    std::vector<SensitivityRow> rows;
    std::vector<std::vector<double>> per_seed;  // [seed][member] covariance
    double kendall = 0;                          // τ between n and covariance over all seeds
    bool bound_ok = true;
};

inline double sensitivity_factor(double t) { return std::exp(-t) / ((1 - std::exp(-t)) * (1 - std::exp(-t))); }

inline SensitivityReport noise_sensitivity_report(const std::vector<SensitivityMember>& family, double t, size_t samples, size_t seeds, uint64_t seed,
                                                  size_t revealment_samples = 200)
{
    if (!(t > 0)) throw Error("dynamics", "noise sensitivity needs t > 0");
    SensitivityReport rep;
    rep.t = t;
    rep.per_seed.assign(seeds, std::vector<double>(family.size()));
    std::vector<double> ns, cs;
    for (size_t k = 0; k < family.size(); ++k) {
        const auto& mem = family[k];
        std::vector<double> f0, ft;
        for (size_t s = 0; s < seeds; ++s) {
            auto ps = paired_samples(mem.f, mem.model, mem.window, {t}, samples, hash_combine(seed, hash_combine(k, s)));
            rep.per_seed[s][k] = covariance_estimate(ps.f0, ps.ft[0]).value;
            ns.push_back(mem.n);
            cs.push_back(rep.per_seed[s][k]);
            f0.insert(f0.end(), ps.f0.begin(), ps.f0.end());
            ft.insert(ft.end(), ps.ft[0].begin(), ps.ft[0].end());
        }
        SensitivityRow row;
        row.n = mem.n;
        row.cov = covariance_estimate(f0, ft);
        std::vector<double> sq(f0.size());
        for (size_t i = 0; i < f0.size(); ++i) sq[i] = f0[i] * f0[i];
        row.second_moment = mean_estimate(sq);
        if (mem.Z) {
            auto rv = revealment(*mem.Z, mem.model, mem.window, mem.probes, revealment_samples, hash_combine(seed, 0xde17a + k), mem.probe_spacing);
            row.delta = rv.per_probe[rv.argmax];
            double fac = sensitivity_factor(t);
            auto b = product(*row.delta, row.second_moment);
            row.bound = Estimate{b.value * fac, b.se * fac};
            if (row.cov.value > row.bound->value + 3 * std::hypot(row.cov.se, row.bound->se)) rep.bound_ok = false;
        }
        rep.rows.push_back(row);
    }
    if (ns.size() >= 2) rep.kendall = kendall_tau(ns, cs);
    return rep;
}

struct StabilityReport {
    Estimate disagree;     // P(f ≠ f^t)
    Estimate correlation;  // E[f f^t]
    Estimate energy;       // ∫ E|D_x f|² λ(dx)
    double bound = 0;      // exp(-t · energy)
    bool passed = false;
};

// E[f f^t] >= exp(-t ∫E|D_x f|² λ(dx)) for {-1,1}-valued f.
inline StabilityReport noise_stability_bound(const Functional& f, double t, const IntensityModel& m, const Window& w, size_t samples, uint64_t seed)
{
    double mass = total_mass(m, w);
    std::vector<double> dis(samples), cor(samples), en(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        auto eta = sample_poisson(m, w, rng);
        double a = f(eta);
        auto et = resample(eta, ResampleTime::at(t), m, rng);
        double b = f(et);
        if ((a != 1 && a != -1) || (b != 1 && b != -1)) throw Error("dynamics", "noise stability bound needs a {-1,1}-valued functional");
        dis[i] = a != b;
        cor[i] = a * b;
        double d = 0;
        if (mass > 0) {
            Point x = sample_point(m, w, rng);
            double c = f(add_point(eta, x));
            if (c != 1 && c != -1) throw Error("dynamics", "noise stability bound needs a {-1,1}-valued functional");
            d = (c - a) * (c - a);
        }
        en[i] = mass * d;
    });
    StabilityReport r;
    r.disagree = mean_estimate(dis);
    r.correlation = mean_estimate(cor);
    r.energy = mean_estimate(en);
    r.bound = std::exp(-t * r.energy.value);
    // energy shifted up by 3 SE gives the smaller, statistically safe bound
    double loose = std::exp(-t * (r.energy.value + 3 * r.energy.se));
    r.passed = r.correlation.value >= loose - 3 * r.correlation.se;
    return r;
}

// ---------------------------------------------------------------- exceptional times

// Times at which f changes value along the path; f is evaluated after each event.
inline std::vector<double> exceptional_times(const BirthDeathPath& path, const Functional& f)
{
    std::vector<double> out;
    std::vector<std::pair<size_t, Point>> alive;
    for (size_t i = 0; i < path.initial.size(); ++i) alive.push_back({i, path.initial.points[i]});
    auto current = [&] {
        PointConfig c;
        c.window = path.initial.window;
        for (auto& a : alive) c.points.push_back(a.second);
        return f(c);
    };
    double v = current();
    for (const auto& e : path.events) {
        if (e.birth)
            alive.push_back({e.id, e.point});
        else {
            auto it = std::find_if(alive.begin(), alive.end(), [&](auto& a) { return a.first == e.id; });
            if (it == alive.end()) throw Error("dynamics", "death event for a point that is not alive");
            alive.erase(it);
        }
        double nv = current();
        if (nv != v) out.push_back(e.time);
        v = nv;
    }
    return out;
}

// Crossing tracked incrementally: births extend the union-find and merge
// boundary flags; deaths rebuild the structure.
class IncrementalCrossing {
public:
    IncrementalCrossing(const BooleanModel& m, const Box& rect, const Window& win) : m_(m), rect_(rect), win_(win)
    {
        if (m.k != 1) throw Error("dynamics", "incremental crossing is implemented for k = 1");
    }

    void reset(const std::vector<std::pair<size_t, Point>>& alive)
    {
        PointConfig c;
        c.window = win_;
        world_ = BooleanWorld(c, m_, rect_, false);
        ids_.clear();
        slot_.clear();
        left_.clear();
        right_.clear();
        crossed_ = false;
        for (auto& [id, p] : alive) birth(id, p);
    }

    void birth(size_t id, const Point& p)
    {
        int j = world_.add_grain({p.x, p.radius});
        ids_.push_back(id);
        slot_[id] = j;
        const auto& g = world_.grains[size_t(j)];
        bool act = world_.active[size_t(j)];
        left_.push_back(act && grain_meets_box(m_.grain, g.c, g.rho, rect_.face(0, 0)));
        right_.push_back(act && grain_meets_box(m_.grain, g.c, g.rho, rect_.face(0, 1)));
        if (!act) return;
        // merge flags of every component the new grain touches
        bool l = left_.back(), r = right_.back();
        std::vector<size_t> roots;
        world_.index.near(g.c, g.rho, [&](int i) {
            if (i != j && world_.active[size_t(i)] && world_.meets(i, j)) roots.push_back(world_.component(i));
        });
        for (size_t rt : roots) {
            l = l || left_[rt];
            r = r || right_[rt];
        }
        world_.link(j);
        size_t root = world_.component(j);
        left_[root] = left_[root] || l;
        right_[root] = right_[root] || r;
        if (left_[root] && right_[root]) crossed_ = true;
    }

    void death(size_t id, std::vector<std::pair<size_t, Point>>& alive)
    {
        auto it = std::find_if(alive.begin(), alive.end(), [&](auto& a) { return a.first == id; });
        if (it == alive.end()) throw Error("dynamics", "death event for a point that is not alive");
        alive.erase(it);
        reset(alive);
    }

    bool crossed() const { return crossed_; }

private:
    BooleanModel m_;
    Box rect_;
    Window win_;
    BooleanWorld world_;
    std::vector<size_t> ids_;
    std::unordered_map<size_t, int> slot_;
    std::vector<char> left_, right_;
    bool crossed_ = false;
};

inline std::vector<double> exceptional_times_crossing(const BirthDeathPath& path, const BooleanModel& m, const Box& rect)
{
    IncrementalCrossing ic(m, rect, path.initial.window);
    std::vector<std::pair<size_t, Point>> alive;
    for (size_t i = 0; i < path.initial.size(); ++i) alive.push_back({i, path.initial.points[i]});
    ic.reset(alive);
    bool v = ic.crossed();
    std::vector<double> out;
    for (const auto& e : path.events) {
        if (e.birth) {
            alive.push_back({e.id, e.point});
            ic.birth(e.id, e.point);
        } else {
            ic.death(e.id, alive);
        }
        if (ic.crossed() != v) out.push_back(e.time);
        v = ic.crossed();
    }
    return out;
}

// ---------------------------------------------------------------- critical window

struct WindowMember {
    double n = 0;
    double c = 0;  // relative intensity shift c_n
    Functional f;
    IntensityModel model;  // at the reference intensity
    Window window;
};

struct WindowRow {
    double n = 0, c = 0;
    Estimate minus, plus;  // E f at (1-c)γ and (1+c)γ
};

// Checks that f is increasing on sampled (μ, μ+δ_x) pairs, then tabulates
// the means at the shifted intensities.
inline std::vector<WindowRow> critical_window_probe(const std::vector<WindowMember>& family, size_t samples, uint64_t seed, size_t monotone_checks = 50)
{
    std::vector<WindowRow> rows;
    for (size_t k = 0; k < family.size(); ++k) {
        const auto& mem = family[k];
        if (!(mem.c >= 0 && mem.c < 1)) throw Error("dynamics", "window shift c must lie in [0,1)");
        for (size_t i = 0; i < monotone_checks; ++i) {
            RngStream rng(hash_combine(seed, 0x5151 + k), i);
            auto mu = sample_poisson(mem.model, mem.window, rng);
            Point x = sample_point(mem.model, mem.window, rng);
            if (mem.f(add_point(mu, x)) < mem.f(mu)) throw Error("dynamics", "critical window probe needs an increasing functional");
        }
        auto mean_at = [&](double factor, uint64_t sd) {
            std::vector<double> v(samples);
            auto mm = scaled(mem.model, factor);
            parallel_for(samples, [&](size_t i) {
                RngStream rng(sd, i);
                v[i] = mem.f(sample_poisson(mm, mem.window, rng));
            });
            return mean_estimate(v);
        };
        rows.push_back({mem.n, mem.c, mean_at(1 - mem.c, hash_combine(seed, 2 * k)), mean_at(1 + mem.c, hash_combine(seed, 2 * k + 1))});
    }
    return rows;
}

}  // namespace plab
