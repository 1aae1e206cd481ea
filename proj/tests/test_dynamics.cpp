#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plab/chaos.hpp"
#include "plab/dynamics.hpp"

using namespace plab;

namespace {

Window unit_square() { return Window::make_box(Box::cube(2, 0, 1)); }

// a handful of functionals used for law comparisons
std::vector<Functional> probe_functionals()
{
    auto left = [](const Point& p) { return p.x[0] < 0.5; };
    auto disk = [](const Point& p) { return (p.x[0] - 0.5) * (p.x[0] - 0.5) + (p.x[1] - 0.5) * (p.x[1] - 0.5) < 0.09; };
    return {
        count_functional([](const Point&) { return true; }, "total"),
        count_functional(left, "left"),
        count_functional(disk, "disk"),
        {"sum-x", [](const PointConfig& c) {
             double s = 0;
             for (auto& p : c.points) s += p.x[0];
             return s;
         },
         std::nullopt},
        {"min-y", [](const PointConfig& c) {
             double m = 1;
             for (auto& p : c.points) m = std::min(m, p.x[1]);
             return m;
         },
         1.0},
    };
}

double se_diff(Estimate a, Estimate b) { return std::hypot(a.se, b.se); }

}  // namespace

TEST(Resample, ZeroIsIdentity)
{
    auto m = IntensityModel::homogeneous(20);
    RngStream rng(1, 0);
    auto c = sample_poisson(m, unit_square(), rng);
    auto r = resample(c, ResampleTime::at(0), m, rng);
    EXPECT_TRUE(same_multiset(c, r));
}

TEST(Resample, InfinityIsFreshSample)
{
    auto m = IntensityModel::homogeneous(20);
    RngStream rng(2, 0);
    auto c = sample_poisson(m, unit_square(), rng);
    auto r = resample(c, ResampleTime::infinity(), m, rng);
    for (auto& p : r.points)
        for (auto& q : c.points) EXPECT_FALSE(p.x == q.x);
    EXPECT_TRUE(ResampleTime::infinity().infinite);
    EXPECT_THROW(ResampleTime::at(-1), Error);
    EXPECT_THROW(ResampleTime::at(INFINITY), Error);
}

TEST(Resample, SemigroupTwoRoutes)
{
    auto m = IntensityModel::homogeneous(6);
    auto w = unit_square();
    auto fs = probe_functionals();
    const size_t N = 20000;
    for (auto& f : fs) {
        // compare f(η) · f(resample twice) with f(η) · f(resample once), same η law
        std::vector<double> a(N), b(N);
        for (size_t i = 0; i < N; ++i) {
            RngStream r1(3, i), r2(4, i);
            auto e1 = sample_poisson(m, w, r1);
            auto e2 = sample_poisson(m, w, r2);
            a[i] = f(e1) * f(resample(resample(e1, ResampleTime::at(0.3), m, r1), ResampleTime::at(0.5), m, r1));
            b[i] = f(e2) * f(resample(e2, ResampleTime::at(0.8), m, r2));
        }
        auto ea = mean_estimate(a), eb = mean_estimate(b);
        EXPECT_LE(std::fabs(ea.value - eb.value), 3 * se_diff(ea, eb)) << f.name;
    }
}

TEST(Resample, PreservesPoissonLaw)
{
    auto m = IntensityModel::cells({1.0, 2.0});
    auto w = Window::make_cells(2);
    for (double t : {0.1, 1.0}) {
        std::vector<int64_t> c0(5000), c1(5000);
        for (size_t i = 0; i < c0.size(); ++i) {
            RngStream rng(5, i);
            auto r = resample(sample_poisson(m, w, rng), ResampleTime::at(t), m, rng);
            c0[i] = int64_t(count_in(r, [](const Point& p) { return p.cell == 0; }));
            c1[i] = int64_t(count_in(r, [](const Point& p) { return p.cell == 1; }));
        }
        EXPECT_GT(chi_square_poisson(c0, 1.0).p_value, 0.001);
        EXPECT_GT(chi_square_poisson(c1, 2.0).p_value, 0.001);
    }
}

TEST(Path, EmptyIntensityGivesEmptyPath)
{
    RngStream rng(6, 0);
    auto p = simulate_path(IntensityModel::homogeneous(0), unit_square(), 5, rng);
    EXPECT_EQ(p.initial.size(), 0u);
    EXPECT_TRUE(p.events.empty());
    EXPECT_THROW(simulate_path(IntensityModel::homogeneous(1), unit_square(), 0, rng), Error);
}

TEST(Path, EventsAreOrderedAndDeathsReferenceLivePoints)
{
    RngStream rng(7, 0);
    auto p = simulate_path(IntensityModel::homogeneous(10), unit_square(), 3, rng);
    std::vector<size_t> alive;
    for (size_t i = 0; i < p.initial.size(); ++i) alive.push_back(i);
    double last = 0;
    for (auto& e : p.events) {
        EXPECT_GE(e.time, last);
        EXPECT_LE(e.time, p.horizon);
        last = e.time;
        if (e.birth) {
            alive.push_back(e.id);
        } else {
            auto it = std::find(alive.begin(), alive.end(), e.id);
            ASSERT_NE(it, alive.end());
            alive.erase(it);
        }
    }
    EXPECT_EQ(alive.size(), p.alive_at(p.horizon).size());
    std::ostringstream os;
    write_path_csv(p, os);
    EXPECT_EQ(os.str().rfind("time,type,id,x0,x1,x2,cell,radius\n", 0), 0u);
}

TEST(Path, AliveCountAtHorizonIsPoisson)
{
    auto m = IntensityModel::homogeneous(3);
    std::vector<int64_t> counts(10000);
    for (size_t i = 0; i < counts.size(); ++i) {
        RngStream rng(8, i);
        counts[i] = int64_t(simulate_path(m, unit_square(), 2, rng).alive_at(2).size());
    }
    EXPECT_GT(chi_square_poisson(counts, 3.0).p_value, 0.01);
}

TEST(Path, MarginalMatchesResample)
{
    auto m = IntensityModel::homogeneous(5);
    auto w = unit_square();
    const double t = 0.7;
    const size_t N = 3000;
    auto fs = probe_functionals();
    std::vector<std::vector<double>> a(fs.size(), std::vector<double>(N)), b = a;
    for (size_t i = 0; i < N; ++i) {
        RngStream r1(9, i), r2(10, i);
        auto pt = simulate_path(m, w, 1.0, r1).alive_at(t);
        auto rs = resample(sample_poisson(m, w, r2), ResampleTime::at(t), m, r2);
        for (size_t k = 0; k < fs.size(); ++k) {
            a[k][i] = fs[k](pt);
            b[k][i] = fs[k](rs);
        }
    }
    for (size_t k = 0; k < fs.size(); ++k) EXPECT_GT(ks_two_sample(a[k], b[k]).p_value, 0.01 / double(fs.size())) << fs[k].name;
}

TEST(Path, Stationarity)
{
    auto m = IntensityModel::homogeneous(4);
    const double h = 2;
    const size_t N = 5000;
    auto f = probe_functionals()[3];
    std::vector<std::vector<double>> v(3, std::vector<double>(N));
    for (size_t i = 0; i < N; ++i) {
        RngStream rng(11, i);
        auto p = simulate_path(m, unit_square(), h, rng);
        v[0][i] = f(p.alive_at(0));
        v[1][i] = f(p.alive_at(h / 2));
        v[2][i] = f(p.alive_at(h));
    }
    auto e0 = mean_estimate(v[0]), e1 = mean_estimate(v[1]), e2 = mean_estimate(v[2]);
    EXPECT_LE(std::fabs(e0.value - e1.value), 3 * se_diff(e0, e1));
    EXPECT_LE(std::fabs(e0.value - e2.value), 3 * se_diff(e0, e2));
    EXPECT_NEAR(e0.value, 2.0, 3 * e0.se);
}

TEST(Covariance, CountIsPureFirstChaos)
{
    // B = [0,0.5] x [0,1] at intensity 4, so λ(B) = 2
    auto m = IntensityModel::homogeneous(4);
    auto f = count_functional([](const Point& p) { return p.x[0] < 0.5; });
    std::vector<double> ts = {0.0, 0.1, 0.5, 1.0, 2.0};
    auto c = covariance_curve(f, m, unit_square(), ts, 20000, 12);
    for (size_t j = 0; j < ts.size(); ++j) EXPECT_NEAR(c.cov[j].value, 2 * std::exp(-ts[j]), 3 * c.cov[j].se) << ts[j];
    // cross-check against exact enumeration on two cells of mass 2
    auto sp = DiscreteOracleSpace::make({2.0, 2.0});
    auto fc = count_functional([](const Point& p) { return p.cell == 0; });
    auto spectrum = chaos_weights_exact(fc, sp, 4);
    EXPECT_NEAR(spectrum.weights[0].value, 2.0, 1e-9);
    for (size_t k = 1; k < spectrum.weights.size(); ++k) EXPECT_NEAR(spectrum.weights[k].value, 0.0, 1e-9);
}

TEST(Covariance, ConstantIsZeroAndCurveIsMonotone)
{
    auto m = IntensityModel::homogeneous(3);
    std::vector<double> ts = {0.0, 0.2, 0.5, 1.0, 2.0};
    auto c0 = covariance_curve(constant_functional(2.5), m, unit_square(), ts, 500, 13);
    for (auto& e : c0.cov) EXPECT_EQ(e.value, 0.0);

    auto f = probe_functionals()[4];
    auto c = covariance_curve(f, m, unit_square(), ts, 20000, 14);
    auto var = variance_estimate(paired_samples(f, m, unit_square(), {}, 20000, 14).f0);
    EXPECT_NEAR(c.cov[0].value, var.value, 1e-12);
    for (size_t j = 0; j < ts.size(); ++j) {
        EXPECT_GE(c.cov[j].value, -3 * c.cov[j].se);
        if (j > 0) {
            EXPECT_LE(c.cov[j].value, c.cov[j - 1].value + 3 * se_diff(c.cov[j], c.cov[j - 1]));
        }
    }
    std::ostringstream os;
    write_cov_csv(c, os);
    EXPECT_EQ(os.str().rfind("t,cov,se\n", 0), 0u);
}

TEST(Sensitivity, ConstantFamilyGivesZeros)
{
    std::vector<SensitivityMember> fam;
    for (double n : {1.0, 2.0, 3.0}) {
        SensitivityMember mem;
        mem.n = n;
        mem.f = constant_functional(1);
        mem.model = IntensityModel::homogeneous(2);
        mem.window = Window::make_box(Box::cube(2, 0, n));
        fam.push_back(mem);
    }
    auto rep = noise_sensitivity_report(fam, 0.5, 200, 3, 15);
    for (auto& row : rep.rows) EXPECT_EQ(row.cov.value, 0.0);
    EXPECT_TRUE(rep.bound_ok);
    EXPECT_THROW(noise_sensitivity_report(fam, 0.0, 10, 1, 1), Error);
}

TEST(Sensitivity, FactorClosedForm)
{
    double t = 0.2, e = std::exp(-0.2);
    EXPECT_DOUBLE_EQ(sensitivity_factor(t), e / ((1 - e) * (1 - e)));
}

TEST(Stability, ConstantAndZeroTime)
{
    auto m = IntensityModel::homogeneous(2);
    auto one = constant_functional(1);
    auto r = noise_stability_bound(one, 0.5, m, unit_square(), 500, 16);
    EXPECT_EQ(r.disagree.value, 0.0);
    EXPECT_EQ(r.energy.value, 0.0);
    EXPECT_TRUE(r.passed);
    Functional sgn{"sign", [](const PointConfig& c) { return c.size() > 0 ? 1.0 : -1.0; }, 1.0};
    auto r0 = noise_stability_bound(sgn, 0.0, m, unit_square(), 500, 17);
    EXPECT_EQ(r0.disagree.value, 0.0);
    EXPECT_THROW(noise_stability_bound(count_functional([](const Point&) { return true; }), 0.5, m, unit_square(), 50, 18), Error);
}

TEST(Stability, SignOfCountSatisfiesBound)
{
    // small λ(B): f = sign(count(B) - 0.5)
    auto m = IntensityModel::homogeneous(0.5);
    Functional sgn{"sign", [](const PointConfig& c) { return c.size() > 0 ? 1.0 : -1.0; }, 1.0};
    for (double t : {0.1, 0.5, 1.0}) {
        auto r = noise_stability_bound(sgn, t, m, unit_square(), 40000, 19);
        EXPECT_TRUE(r.passed) << t;
        // energy = 4 λ e^{-λ}
        EXPECT_NEAR(r.energy.value, 4 * 0.5 * std::exp(-0.5), 3 * r.energy.se);
    }
}

TEST(Exceptional, ConstantAndParity)
{
    RngStream rng(20, 0);
    auto p = simulate_path(IntensityModel::homogeneous(8), unit_square(), 2, rng);
    EXPECT_TRUE(exceptional_times(p, constant_functional(3)).empty());
    Functional parity{"parity", [](const PointConfig& c) { return double(c.size() % 2); }, 1.0};
    auto s = exceptional_times(p, parity);
    ASSERT_EQ(s.size(), p.events.size());
    for (size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i], p.events[i].time);
}

TEST(Exceptional, IncrementalCrossingMatchesGeneric)
{
    BooleanModel bm;
    bm.gamma = 0.4;
    Box rect = Box::rectangle(2, 6, 6);
    auto f = crossing_functional(bm, rect);
    for (size_t i = 0; i < 10; ++i) {
        RngStream rng(21, i);
        auto p = simulate_path(bm.intensity(), bm.window(rect), 1.0, rng);
        EXPECT_EQ(exceptional_times_crossing(p, bm, rect), exceptional_times(p, f)) << i;
    }
}

TEST(Exceptional, CrossingJumpsGrowWithWindow)
{
    BooleanModel bm;
    bm.gamma = 0.36;
    std::vector<double> medians;
    for (double n : {4.0, 8.0, 16.0}) {
        Box rect = Box::rectangle(2, n, n);
        std::vector<double> counts;
        for (size_t s = 0; s < 21; ++s) {
            RngStream rng(22, s + 100 * size_t(n));
            auto p = simulate_path(bm.intensity(), bm.window(rect), 1.0, rng);
            counts.push_back(double(exceptional_times_crossing(p, bm, rect).size()));
        }
        std::nth_element(counts.begin(), counts.begin() + 10, counts.end());
        medians.push_back(counts[10]);
    }
    EXPECT_LE(medians[0], medians[1]);
    EXPECT_LE(medians[1], medians[2]);
    EXPECT_LT(medians[0], medians[2]);
}

TEST(Window, DeepSubAndSupercritical)
{
    BooleanModel bm;
    Box rect = Box::rectangle(2, 8, 8);
    auto f = crossing_functional(bm, rect);
    std::vector<WindowMember> fam;
    for (double g : {0.1, 1.5}) {
        auto mm = bm.with_gamma(g);
        fam.push_back({g, 0.5, f, mm.intensity(), mm.window(rect)});
    }
    auto rows = critical_window_probe(fam, 400, 23);
    EXPECT_LT(rows[0].minus.value, 0.02);
    EXPECT_LT(rows[0].plus.value, 0.1);
    EXPECT_GT(rows[1].plus.value, 0.98);
    EXPECT_GT(rows[1].minus.value, 0.5);
    for (auto& r : rows) EXPECT_LE(r.minus.value, r.plus.value);
}

TEST(Window, ConstantFlatAndDecreasingRejected)
{
    auto m = IntensityModel::homogeneous(3);
    std::vector<WindowMember> fam = {{1, 0.3, constant_functional(0.25), m, unit_square()}};
    auto rows = critical_window_probe(fam, 100, 24);
    EXPECT_EQ(rows[0].minus.value, 0.25);
    EXPECT_EQ(rows[0].plus.value, 0.25);
    Functional dec{"empty", [](const PointConfig& c) { return c.size() == 0 ? 1.0 : 0.0; }, 1.0};
    std::vector<WindowMember> bad = {{1, 0.3, dec, IntensityModel::homogeneous(0.5), unit_square()}};
    EXPECT_THROW(critical_window_probe(bad, 10, 25), Error);
    bad[0].f = constant_functional(0);
    bad[0].c = 1.0;
    EXPECT_THROW(critical_window_probe(bad, 10, 25), Error);
}

TEST(Window, ShrinkingWindowTrends)
{
    // fixed c: the shifted means move toward 0 and 1 as n grows
    BooleanModel bm;
    bm.gamma = 0.36;
    std::vector<WindowMember> fam;
    for (double n : {4.0, 8.0, 16.0}) {
        Box rect = Box::rectangle(2, n, n);
        fam.push_back({n, 0.6, crossing_functional(bm, rect), bm.intensity(), bm.window(rect)});
    }
    auto rows = critical_window_probe(fam, 600, 26);
    EXPECT_GT(rows[0].minus.value, rows[2].minus.value);
    EXPECT_LT(rows[0].plus.value, rows[2].plus.value);
}
