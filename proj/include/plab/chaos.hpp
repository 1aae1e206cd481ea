#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "plab/core_pp.hpp"
#include "plab/dynamics.hpp"
#include "plab/stopping.hpp"

namespace plab {

inline double add_one_cost(const Functional& f, const PointConfig& c, const Point& x) { return f(add_point(c, x)) - f(c); }

// D^k_{x1..xk} f(μ) = Σ_{J ⊆ [k]} (-1)^{k-|J|} f(μ + Σ_{j∈J} δ_{xj})
inline double iterated_difference(const Functional& f, const PointConfig& c, const std::vector<Point>& xs)
{
    size_t k = xs.size();
    if (k == 0) throw Error("chaos", "iterated difference needs at least one point");
    if (k > 20) throw Error("chaos", "iterated difference order above 20 (2^k evaluations)");
    double s = 0;
    for (uint32_t J = 0; J < (1u << k); ++J) {
        PointConfig cj = c;
        int bits = 0;
        for (size_t j = 0; j < k; ++j)
            if (J >> j & 1u) {
                cj.points.push_back(xs[j]);
                ++bits;
            }
        s += ((int(k) - bits) % 2 ? -1.0 : 1.0) * f(cj);
    }
    return s;
}

// u_k(x1..xk) = E[D^k f(η)] / k!
inline Estimate kernel_mc(const Functional& f, const IntensityModel& m, const Window& w, const std::vector<Point>& xs, size_t samples, uint64_t seed)
{
    std::vector<double> v(samples);
    double kf = std::tgamma(double(xs.size()) + 1);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        auto eta = sample_poisson(m, w, rng);
        double d = iterated_difference(f, eta, xs);
        if (!std::isfinite(d)) throw Error("chaos", "kernel_mc: functional is not bounded");
        v[i] = d / kf;
    });
    return mean_estimate(v);
}

// ---------------------------------------------------------------- exact

struct ChaosSpectrum {
    Estimate mean;           // u_0
    Estimate second_moment;  // E[f²]
    std::vector<Estimate> weights;  // weights[k-1] = W_k
    bool exact = false;
    double truncation_error = 0;  // exact mode: probability mass outside the enumeration
    // Mehler mode
    std::vector<double> times;
    std::vector<Estimate> cov;
    std::vector<double> fitted;
    double condition = 0;
    bool ill_conditioned = false;

    double weight_sum() const
    {
        double s = 0;
        for (auto& w : weights) s += w.value;
        return s;
    }
};

// Finite space of m cells with Poisson counts truncated at n_max per cell.
struct DiscreteOracleSpace {
    std::vector<double> masses;
    int n_max = 0;
    double tail_mass = 0;  // Σ_i P(N_i > n_max)

    static DiscreteOracleSpace make(std::vector<double> masses, double tail = 1e-12, double max_outcomes = 1e7)
    {
        if (masses.empty()) throw Error("chaos", "discrete space needs at least one cell");
        for (double v : masses)
            if (!(v >= 0) || !std::isfinite(v)) throw Error("chaos", "cell masses must be finite and nonnegative");
        DiscreteOracleSpace s;
        s.masses = std::move(masses);
        for (int n = 0; n < 400; ++n) {
            double t = 0;
            for (double v : s.masses) t += boost::math::gamma_p(double(n + 1), v) * (v > 0);
            if (t < tail) {
                s.n_max = n;
                s.tail_mass = t;
                break;
            }
            if (n == 399) throw Error("chaos", "tail-mass bound cannot be met");
        }
        if (std::pow(double(s.n_max + 1), double(s.masses.size())) > max_outcomes) throw Error("chaos", "tail-mass bound violated: enumeration too large");
        return s;
    }

    size_t cells() const { return masses.size(); }
    Window window() const { return Window::make_cells(int(masses.size())); }
    IntensityModel intensity() const { return IntensityModel::cells(masses); }

    PointConfig config(const std::vector<int>& counts) const
    {
        PointConfig c;
        c.window = window();
        for (size_t i = 0; i < counts.size(); ++i)
            for (int k = 0; k < counts[i]; ++k) {
                Point p;
                p.cell = int(i);
                c.points.push_back(p);
            }
        return c;
    }

    // fn(counts, probability) over all count vectors with entries <= n_max
    template <class Fn>
    void enumerate(Fn&& fn) const
    {
        size_t m = masses.size();
        std::vector<std::vector<double>> pmf(m, std::vector<double>(size_t(n_max + 1)));
        for (size_t i = 0; i < m; ++i)
            for (int n = 0; n <= n_max; ++n) pmf[i][size_t(n)] = poisson_pmf(n, masses[i]);
        std::vector<int> c(m, 0);
        while (true) {
            double p = 1;
            for (size_t i = 0; i < m; ++i) p *= pmf[i][size_t(c[i])];
            fn(static_cast<const std::vector<int>&>(c), p);
            size_t i = 0;
            while (i < m && c[i] == n_max) c[i++] = 0;
            if (i == m) break;
            ++c[i];
        }
    }
};

namespace detail {

// all multi-indices of length m with |j| <= K
inline void multi_indices(size_t m, int K, std::vector<std::vector<int>>& out)
{
    std::vector<int> cur(m, 0);
    std::function<void(size_t, int)> rec = [&](size_t pos, int left) {
        if (pos == m) {
            out.push_back(cur);
            return;
        }
        for (int v = 0; v <= left; ++v) {
            cur[pos] = v;
            rec(pos + 1, left - v);
        }
        cur[pos] = 0;
    };
    rec(0, K);
}

inline double binom(int n, int k) { return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0))); }

}  // namespace detail

// W_k = Σ_{|m|=k} (Δ^m g(0))² Π λ_i^{m_i} / Π m_i!   with g(j) = E[f(η + j)],
// where j adds j_i points to cell i and Δ^m is the forward difference.
inline ChaosSpectrum chaos_weights_exact(const Functional& f, const DiscreteOracleSpace& sp, int k_max)
{
    if (k_max < 1 || k_max > 20) throw Error("chaos", "exact chaos order must lie in 1..20");
    size_t m = sp.cells();
    int side = sp.n_max + k_max + 1;
    // f on the count lattice
    std::vector<double> F(size_t(std::pow(double(side), double(m))));
    auto flat = [&](const std::vector<int>& c) {
        size_t id = 0;
        for (size_t i = m; i-- > 0;) id = id * size_t(side) + size_t(c[i]);
        return id;
    };
    {
        std::vector<int> c(m, 0);
        while (true) {
            F[flat(c)] = f(sp.config(c));
            size_t i = 0;
            while (i < m && c[i] == side - 1) c[i++] = 0;
            if (i == m) break;
            ++c[i];
        }
    }
    ChaosSpectrum s;
    s.exact = true;
    s.truncation_error = sp.tail_mass;
    double mean = 0, sq = 0;
    std::vector<std::pair<std::vector<int>, double>> outcomes;
    sp.enumerate([&](const std::vector<int>& c, double p) { outcomes.push_back({c, p}); });
    for (auto& [c, p] : outcomes) {
        double v = F[flat(c)];
        mean += p * v;
        sq += p * v * v;
    }
    s.mean = {mean, 0};
    s.second_moment = {sq, 0};
    std::vector<std::vector<int>> js;
    detail::multi_indices(m, k_max, js);
    std::map<std::vector<int>, double> g;
    for (auto& j : js) {
        double v = 0;
        std::vector<int> cj(m);
        for (auto& [c, p] : outcomes) {
            for (size_t i = 0; i < m; ++i) cj[i] = c[i] + j[i];
            v += p * F[flat(cj)];
        }
        g[j] = v;
    }
    s.weights.assign(size_t(k_max), {0, 0});
    for (auto& mi : js) {
        int k = std::accumulate(mi.begin(), mi.end(), 0);
        if (k == 0) continue;
        // Δ^m g(0) = Σ_{j <= m} Π (-1)^{m_i - j_i} C(m_i, j_i) g(j)
        double d = 0;
        std::vector<int> j(m, 0);
        while (true) {
            double coef = 1;
            for (size_t i = 0; i < m; ++i) coef *= ((mi[i] - j[i]) % 2 ? -1.0 : 1.0) * detail::binom(mi[i], j[i]);
            d += coef * g[j];
            size_t i = 0;
            while (i < m && j[i] == mi[i]) j[i++] = 0;
            if (i == m) break;
            ++j[i];
        }
        double wgt = d * d;
        for (size_t i = 0; i < m; ++i) wgt *= std::pow(sp.masses[i], mi[i]) / std::tgamma(mi[i] + 1.0);
        s.weights[size_t(k - 1)].value += wgt;
    }
    return s;
}

// ---------------------------------------------------------------- Mehler

inline std::vector<double> geometric_times(size_t n = 12, double lo = 0.05, double hi = 3.0)
{
    std::vector<double> t(n);
    for (size_t i = 0; i < n; ++i) t[i] = lo * std::pow(hi / lo, double(i) / double(n - 1));
    return t;
}

namespace detail {

inline Eigen::VectorXd mehler_fit(const std::vector<double>& times, const std::vector<double>& cov, int k_max)
{
    Eigen::MatrixXd A(Eigen::Index(times.size()), k_max);
    Eigen::VectorXd b(Eigen::Index(times.size()));
    for (size_t i = 0; i < times.size(); ++i) {
        for (int k = 0; k < k_max; ++k) A(Eigen::Index(i), k) = std::exp(-(k + 1) * times[i]);
        b(Eigen::Index(i)) = cov[i];
    }
    return nnls(A, b);
}

}  // namespace detail

// Cov(f(η), f(η^t)) = Σ_k e^{-kt} W_k fitted by nonnegative least squares;
// standard errors from a bootstrap over replicas.
inline ChaosSpectrum chaos_weights_mehler(const Functional& f, const IntensityModel& m, const Window& w, const std::vector<double>& times, size_t samples,
                                          uint64_t seed, int k_max = 6, int bootstrap = 200)
{
    if (k_max < 1) throw Error("chaos", "k_max must be positive");
    std::vector<double> ts = times;
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    if (int(ts.size()) < k_max) throw Error("chaos", "Mehler regression needs at least k_max distinct times");
    auto ps = paired_samples(f, m, w, ts, samples, seed);
    ChaosSpectrum s;
    s.times = ts;
    s.mean = mean_estimate(ps.f0);
    std::vector<double> sq(samples);
    for (size_t i = 0; i < samples; ++i) sq[i] = ps.f0[i] * ps.f0[i];
    s.second_moment = mean_estimate(sq);
    std::vector<double> c(ts.size());
    for (size_t j = 0; j < ts.size(); ++j) {
        s.cov.push_back(covariance_estimate(ps.f0, ps.ft[j]));
        c[j] = s.cov.back().value;
    }
    {
        Eigen::MatrixXd A(Eigen::Index(ts.size()), k_max);
        for (size_t i = 0; i < ts.size(); ++i)
            for (int k = 0; k < k_max; ++k) A(Eigen::Index(i), k) = std::exp(-(k + 1) * ts[i]);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        auto sv = svd.singularValues();
        s.condition = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : kInf;
        s.ill_conditioned = !(s.condition < 1e12);
    }
    Eigen::VectorXd fit = detail::mehler_fit(ts, c, k_max);
    for (size_t j = 0; j < ts.size(); ++j) {
        double v = 0;
        for (int k = 0; k < k_max; ++k) v += fit(k) * std::exp(-(k + 1) * ts[j]);
        s.fitted.push_back(v);
    }
    std::vector<Accumulator> acc(static_cast<size_t>(k_max));
    RngStream br(seed, 0, 0xb007);
    std::vector<double> a0(samples), at(samples), cb(ts.size());
    for (int b = 0; b < bootstrap; ++b) {
        std::vector<size_t> idx(samples);
        for (auto& v : idx) v = br.below(samples);
        for (size_t i = 0; i < samples; ++i) a0[i] = ps.f0[idx[i]];
        for (size_t j = 0; j < ts.size(); ++j) {
            for (size_t i = 0; i < samples; ++i) at[i] = ps.ft[j][idx[i]];
            cb[j] = covariance_estimate(a0, at).value;
        }
        auto fb = detail::mehler_fit(ts, cb, k_max);
        for (int k = 0; k < k_max; ++k) acc[size_t(k)].add(fb(k));
    }
    for (int k = 0; k < k_max; ++k) s.weights.push_back({fit(k), std::sqrt(acc[size_t(k)].variance())});
    return s;
}

// ---------------------------------------------------------------- audits

struct AuditReport {
    std::string name;
    Estimate lhs, rhs;
    bool passed = false;
    std::string note;
};

inline double audit_margin(const AuditReport& r) { return r.rhs.value - r.lhs.value; }

// lhs ≤ rhs up to 3 combined standard errors
inline AuditReport make_audit(std::string name, Estimate lhs, Estimate rhs)
{
    AuditReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.passed = lhs.value <= rhs.value + 3 * std::hypot(lhs.se, rhs.se);
    return r;
}

// Var f ≤ ∫ E[(D_x f)²] λ(dx)
inline AuditReport poincare_audit(const Functional& f, const IntensityModel& m, const Window& w, size_t samples, uint64_t seed)
{
    double mass = total_mass(m, w);
    std::vector<double> v(samples), d(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream r1(seed, i, 1), r2(seed, i, 2);
        v[i] = f(sample_poisson(m, w, r1));
        auto eta = sample_poisson(m, w, r2);
        double dx = 0;
        if (mass > 0) dx = add_one_cost(f, eta, sample_point(m, w, r2));
        if (!std::isfinite(dx)) throw Error("chaos", "poincare_audit: functional is not bounded");
        d[i] = mass * dx * dx;
    });
    return make_audit("poincare", variance_estimate(v), mean_estimate(d));
}

struct OsssReport : AuditReport {
    Estimate lhs_pairing;   // E|f(η) - f(η')| by direct pairing
    Estimate lhs_binary;    // 2 p(1-p) for {0,1}-valued f
    Estimate variance;
    bool binary = false;
    size_t determination_failures = 0;
};

namespace detail {

inline void check_determined(const Functional& f, const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, size_t n, uint64_t seed)
{
    if (determination_failures(f, Z, m, w, n, seed) != 0) throw Error("chaos", "the stopping set does not determine f");
}

// ∫ P(x ∈ Z(η)) E[|D_x g(η')|] λ(dx) per replica, averaged over `inner` draws
inline std::vector<double> revealment_weighted_cost(const Functional& g, const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w,
                                                    size_t samples, size_t inner, uint64_t seed)
{
    double mass = total_mass(m, w);
    std::vector<double> out(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i, 3);
        double s = 0;
        for (size_t k = 0; k < inner; ++k) {
            if (mass <= 0) break;
            Point x = sample_point(m, w, rng);
            double y = Z.draw(rng);
            auto eta = sample_poisson(m, w, rng);
            bool in = Z(y).at(eta)(x);
            auto eta2 = sample_poisson(m, w, rng);
            if (in) s += std::fabs(add_one_cost(g, eta2, x));
        }
        out[i] = mass * s / double(std::max<size_t>(1, inner));
    });
    return out;
}

}  // namespace detail

// E|f(η) - f(η')| ≤ 2 ∫ P(x ∈ Z) E|D_x f| λ(dx)
inline OsssReport osss_audit(const Functional& f, const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, size_t samples, uint64_t seed,
                             size_t inner = 8, size_t determination_checks = 2000)
{
    detail::check_determined(f, Z, m, w, std::min(samples, determination_checks), hash_combine(seed, 0xde7));
    std::vector<double> a(samples), pair(samples);
    bool binary = true;
    parallel_for(samples, [&](size_t i) {
        RngStream r1(seed, i, 1), r2(seed, i, 2);
        a[i] = f(sample_poisson(m, w, r1));
        double b = f(sample_poisson(m, w, r2));
        pair[i] = std::fabs(a[i] - b);
    });
    for (double v : a)
        if (v != 0 && v != 1) binary = false;
    auto rhs = detail::revealment_weighted_cost(f, Z, m, w, samples, inner, seed);
    for (auto& v : rhs) v *= 2;
    OsssReport r;
    r.name = "osss";
    r.lhs_pairing = mean_estimate(pair);
    r.variance = variance_estimate(a);
    r.binary = binary;
    if (binary) {
        auto p = mean_estimate(a);
        r.lhs_binary = {2 * p.value * (1 - p.value), 2 * std::fabs(1 - 2 * p.value) * p.se};
        r.lhs = r.lhs_binary;
    } else {
        r.lhs = r.lhs_pairing;
    }
    r.rhs = mean_estimate(rhs);
    r.passed = r.lhs.value <= r.rhs.value + 3 * std::hypot(r.lhs.se, r.rhs.se);
    return r;
}

inline OsssReport osss_audit(const Functional& f, const CTDT& ctdt, const IntensityModel& m, const Window& w, size_t samples, uint64_t seed,
                             size_t inner = 8, size_t determination_checks = 2000)
{
    return osss_audit(f, RandomizedStoppingSet(ctdt.terminal()), m, w, samples, seed, inner, determination_checks);
}

// |Cov(f, g)| ≤ 2 ∫ P(x ∈ Z) E|D_x g| λ(dx) with f ∈ [-1,1] determined by Z
inline AuditReport osss_cov_audit(const Functional& f, const Functional& g, const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w,
                                  size_t samples, uint64_t seed, size_t inner = 8)
{
    detail::check_determined(f, Z, m, w, std::min<size_t>(samples, 2000), hash_combine(seed, 0xde7));
    std::vector<double> a(samples), b(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i, 1);
        auto eta = sample_poisson(m, w, rng);
        a[i] = f(eta);
        if (std::fabs(a[i]) > 1) throw Error("chaos", "osss_cov_audit: f must take values in [-1,1]");
        b[i] = g(eta);
    });
    auto cov = covariance_estimate(a, b);
    auto rhs = detail::revealment_weighted_cost(g, Z, m, w, samples, inner, seed);
    for (auto& v : rhs) v *= 2;
    return make_audit("osss-cov", {std::fabs(cov.value), cov.se}, mean_estimate(rhs));
}

struct SchrammSteifRow {
    int k = 0;
    Estimate weight, bound;
    bool passed = false;
};

struct SchrammSteifReport {
    Estimate delta, second_moment;
    ChaosSpectrum spectrum;
    std::vector<SchrammSteifRow> rows;
    bool passed() const
    {
        for (auto& r : rows)
            if (!r.passed) return false;
        return !rows.empty();
    }
};

inline SchrammSteifReport schramm_steif_from(const ChaosSpectrum& sp, Estimate delta, int k_max)
{
    SchrammSteifReport rep;
    rep.delta = delta;
    rep.second_moment = sp.second_moment;
    rep.spectrum = sp;
    auto base = product(delta, sp.second_moment);
    for (int k = 1; k <= k_max && k <= int(sp.weights.size()); ++k) {
        SchrammSteifRow row;
        row.k = k;
        row.weight = sp.weights[size_t(k - 1)];
        row.bound = {k * base.value, k * base.se};
        row.passed = row.weight.value <= row.bound.value + 3 * std::hypot(row.weight.se, row.bound.se);
        rep.rows.push_back(row);
    }
    return rep;
}

// W_k ≤ k δ(Z) E[f²]; weights from Mehler regression, δ as the probe maximum.
inline SchrammSteifReport schramm_steif_audit(const Functional& f, const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w,
                                              const ProbeList& probes, int k_max, size_t samples, size_t revealment_samples, uint64_t seed,
                                              double spacing = 0)
{
    detail::check_determined(f, Z, m, w, std::min<size_t>(samples, 1000), hash_combine(seed, 0xde7));
    auto rv = revealment(Z, m, w, probes, revealment_samples, hash_combine(seed, 0x4e7), spacing);
    auto sp = chaos_weights_mehler(f, m, w, geometric_times(), samples, seed, std::max(6, k_max));
    return schramm_steif_from(sp, rv.per_probe[rv.argmax], k_max);
}

// ---------------------------------------------------------------- conditional moments

// Symmetric kernel on cell tuples of length k.
using CellKernel = std::function<double(const std::vector<int>&)>;

namespace detail {

inline double falling(int n, int j)
{
    double r = 1;
    for (int i = 0; i < j; ++i) r *= double(n - i);
    return r;
}

// Pathwise multiple integral on a finite space:
// I_k(u)(μ) = Σ_{j=0}^k C(k,j) (-1)^{k-j} ∫ u d(μ^{(j)} ⊗ λ^{k-j})
// with μ^{(j)} the factorial measure.
inline double multiple_integral(const CellKernel& u, int k, const std::vector<int>& counts, const std::vector<double>& masses)
{
    size_t m = masses.size();
    std::vector<int> tup(size_t(k), 0);
    double total = 0;
    while (true) {
        double uv = u(tup);
        if (uv != 0) {
            for (int j = 0; j <= k; ++j) {
                // first j coordinates against μ^{(j)}, the rest against λ
                std::vector<int> mult(m, 0);
                for (int a = 0; a < j; ++a) ++mult[size_t(tup[size_t(a)])];
                double fm = 1;
                for (size_t c = 0; c < m; ++c) fm *= falling(counts[c], mult[c]);
                double lm = 1;
                for (int a = j; a < k; ++a) lm *= masses[size_t(tup[size_t(a)])];
                total += binom(k, j) * ((k - j) % 2 ? -1.0 : 1.0) * uv * fm * lm;
            }
        }
        size_t i = 0;
        while (i < size_t(k) && tup[i] == int(m) - 1) tup[i++] = 0;
        if (i == size_t(k)) break;
        ++tup[i];
    }
    return total;
}

}  // namespace detail

struct CondMomentReport {
    double lhs = 0, rhs = 0, margin = 0;
    double truncation_error = 0;
    bool passed = false;
};

// E[E[I_k(u) | η_Z]²] ≤ k! ∫ u² P({x1..xk} ∩ Z ≠ ∅) λ^k by exact enumeration.
inline CondMomentReport cond_moment_audit(const CellKernel& u, int k, const StoppingSetOracle& Z, const DiscreteOracleSpace& sp)
{
    if (k < 1 || k > 3) throw Error("chaos", "conditional-moment audit supports k in 1..3");
    size_t m = sp.cells();
    // key: Z mask and counts on Z
    std::map<std::vector<int>, std::pair<double, double>> groups;  // key -> (P, Σ P I)
    std::vector<std::vector<char>> zmask_of;
    std::vector<double> hit_prob_by_mask;
    std::map<std::vector<char>, double> mask_prob;
    sp.enumerate([&](const std::vector<int>& c, double p) {
        auto cfg = sp.config(c);
        auto mem = Z.at(cfg);
        std::vector<int> key(2 * m, -1);
        std::vector<char> mask(m, 0);
        for (size_t i = 0; i < m; ++i) {
            Point q;
            q.cell = int(i);
            mask[i] = mem(q) ? 1 : 0;
            key[i] = mask[i];
            key[m + i] = mask[i] ? c[i] : -1;
        }
        double I = detail::multiple_integral(u, k, c, sp.masses);
        auto& g = groups[key];
        g.first += p;
        g.second += p * I;
        mask_prob[mask] += p;
    });
    CondMomentReport r;
    r.truncation_error = sp.tail_mass;
    for (auto& [key, g] : groups)
        if (g.first > 0) r.lhs += g.second * g.second / g.first;
    std::vector<int> tup(size_t(k), 0);
    double kf = std::tgamma(k + 1.0);
    while (true) {
        double uv = u(tup);
        if (uv != 0) {
            double ph = 0;
            for (auto& [mask, p] : mask_prob) {
                bool hit = false;
                for (int a : tup) hit = hit || mask[size_t(a)];
                if (hit) ph += p;
            }
            double lm = 1;
            for (int a : tup) lm *= sp.masses[size_t(a)];
            r.rhs += kf * uv * uv * ph * lm;
        }
        size_t i = 0;
        while (i < size_t(k) && tup[i] == int(m) - 1) tup[i++] = 0;
        if (i == size_t(k)) break;
        ++tup[i];
    }
    r.margin = r.rhs - r.lhs;
    r.passed = r.lhs <= r.rhs + 1e-10;
    return r;
}

// Var f ≤ 3 √δ(Z) ∫ E|D_x f|² λ(dx)
inline AuditReport sqrt_osss_audit(const Functional& f, const RandomizedStoppingSet& Z, const IntensityModel& m, const Window& w, const ProbeList& probes,
                                   size_t samples, uint64_t seed, double spacing = 0)
{
    detail::check_determined(f, Z, m, w, std::min<size_t>(samples, 2000), hash_combine(seed, 0xde7));
    auto pc = poincare_audit(f, m, w, samples, seed);
    auto rv = revealment(Z, m, w, probes, std::min<size_t>(samples, 2000), hash_combine(seed, 0x4e7), spacing);
    auto d = rv.per_probe[rv.argmax];
    double sd = std::sqrt(d.value);
    // delta method for √δ; a zero estimate gets no spread
    Estimate root{sd, sd > 0 ? d.se / (2 * sd) : 0.0};
    auto prod = product(root, pc.rhs);
    return make_audit("sqrt-osss", pc.lhs, {3 * prod.value, 3 * prod.se});
}

}  // namespace plab
