#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "plab/core_pp.hpp"

using namespace plab;

namespace {

Window unit_square() { return Window::make_box(Box::cube(2, 0, 1)); }

// Poisson expectation of g(N) by summing the pmf; used as an oracle.
double poisson_expect(double mean, const std::function<double(int)>& g)
{
    double s = 0;
    for (int n = 0; n < 200; ++n) s += g(n) * poisson_pmf(n, mean);
    return s;
}

}  // namespace

TEST(Rng, PhiloxKnownAnswers)
{
    auto a = philox4x32({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(a[0], 0x6627e8d5u);
    EXPECT_EQ(a[1], 0xe169c58du);
    EXPECT_EQ(a[2], 0xbc57ac4cu);
    EXPECT_EQ(a[3], 0x9b00dbd8u);
    auto b = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(b[0], 0x408f276du);
    EXPECT_EQ(b[1], 0x41c83b0eu);
    EXPECT_EQ(b[2], 0xa20bc7c6u);
    EXPECT_EQ(b[3], 0x6d5451fdu);
}

TEST(Rng, StreamsReproducibleAndDistinct)
{
    RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 100; ++i) {
        auto va = a();
        EXPECT_EQ(va, b());
        (void)c;
    }
    RngStream a2(42, 7);
    EXPECT_NE(a2(), c());
    RngStream a3(42, 7);
    EXPECT_NE(a3(), d());
}

TEST(Rng, ParallelForIsScheduleIndependent)
{
    std::vector<double> x(1000), y(1000);
    parallel_for(x.size(), [&](size_t i) {
        RngStream r(5, i);
        x[i] = r.uniform();
    });
    for (size_t i = 0; i < y.size(); ++i) {
        RngStream r(5, i);
        y[i] = r.uniform();
    }
    EXPECT_EQ(x, y);
}

TEST(CorePP, HomogeneousMeanCount)
{
    auto m = IntensityModel::homogeneous(2.0);
    auto w = unit_square();
    Accumulator acc;
    for (size_t i = 0; i < 100000; ++i) {
        RngStream r(1, i);
        acc.add(double(sample_poisson(m, w, r).size()));
    }
    EXPECT_NEAR(acc.mean(), 2.0, 3 * acc.se());
}

TEST(CorePP, ZeroMassCellGetsNoPoints)
{
    auto m = IntensityModel::cells({0.0, 5.0});
    auto w = Window::make_cells(2);
    for (size_t i = 0; i < 2000; ++i) {
        RngStream r(2, i);
        for (const auto& p : sample_poisson(m, w, r).points) EXPECT_EQ(p.cell, 1);
    }
}

TEST(CorePP, ChiSquareCountsInBoxes)
{
    auto m = IntensityModel::homogeneous(3.0);
    auto w = unit_square();
    Box b1 = Box::cube(2, 0, 0.5), b2;
    b2.dim = 2;
    b2.lo = {0.5, 0.2, 0};
    b2.hi = {1.0, 0.9, 0};
    std::vector<int64_t> c1, c2;
    for (size_t i = 0; i < 100000; ++i) {
        RngStream r(3, i);
        auto eta = sample_poisson(m, w, r);
        c1.push_back(int64_t(count_in(eta, [&](const Point& p) { return b1.contains(p.x); })));
        c2.push_back(int64_t(count_in(eta, [&](const Point& p) { return b2.contains(p.x); })));
    }
    EXPECT_GE(chi_square_poisson(c1, 3.0 * 0.25).p_value, 0.01);
    EXPECT_GE(chi_square_poisson(c2, 3.0 * 0.35).p_value, 0.01);
    std::vector<double> d1(c1.begin(), c1.end()), d2(c2.begin(), c2.end());
    auto cov = covariance_estimate(d1, d2);
    EXPECT_LE(std::fabs(cov.value), 3 * cov.se);
}

TEST(CorePP, DuplicateLocationRateIsZero)
{
    auto m = IntensityModel::homogeneous(20.0);
    auto w = unit_square();
    for (size_t i = 0; i < 10000; ++i) {
        RngStream r(4, i);
        auto eta = sample_poisson(m, w, r);
        std::set<std::pair<double, double>> seen;
        for (auto& p : eta.points) ASSERT_TRUE(seen.insert({p.x[0], p.x[1]}).second);
    }
}

TEST(CorePP, InfiniteWindowRejected)
{
    Box b = Box::cube(2, 0, 1);
    b.hi[0] = kInf;
    auto w = Window::make_box(b);
    RngStream r(0, 0);
    EXPECT_THROW(sample_poisson(IntensityModel::homogeneous(1.0), w, r), Error);
}

TEST(CorePP, RestrictAndSuperposeIdentities)
{
    auto m = IntensityModel::homogeneous(10.0);
    auto w = unit_square();
    for (size_t i = 0; i < 200; ++i) {
        RngStream r(5, i);
        auto c = sample_poisson(m, w, r);
        auto d = sample_poisson(m, w, r);
        double a0 = r.uniform(), b0 = r.uniform();
        RegionPredicate A = [&](const Point& p) { return p.x[0] < a0; };
        RegionPredicate B = [&](const Point& p) { return p.x[1] > b0; };
        RegionPredicate AB = [&](const Point& p) { return A(p) && B(p); };
        EXPECT_TRUE(same_multiset(restrict(c, [](const Point&) { return true; }), c));
        EXPECT_TRUE(same_multiset(restrict(restrict(c, A), B), restrict(c, AB)));
        PointConfig empty;
        empty.window = w;
        EXPECT_TRUE(same_multiset(superpose(c, empty), c));
        EXPECT_TRUE(same_multiset(superpose(c, d), superpose(d, c)));
        EXPECT_EQ(superpose(c, d).size(), c.size() + d.size());
        EXPECT_EQ(count_in(superpose(c, d), A), count_in(c, A) + count_in(d, A));
    }
}

TEST(CorePP, RestrictSmallExample)
{
    PointConfig c;
    c.window = unit_square();
    for (double x : {0.1, 0.5, 0.9}) {
        Point p;
        p.x = {x, 0.5, 0};
        c.points.push_back(p);
    }
    EXPECT_EQ(restrict(c, [](const Point& p) { return p.x[0] > 0.7; }).size(), 1u);
}

TEST(CorePP, SuperposeWindowMismatch)
{
    PointConfig a, b;
    a.window = unit_square();
    b.window = Window::make_box(Box::cube(2, 0, 2));
    EXPECT_THROW(superpose(a, b), Error);
}

TEST(CorePP, Thinning)
{
    auto w = Window::make_box(Box::cube(1, 0, 1));
    auto m = IntensityModel::homogeneous(4.0);
    RngStream r0(6, 0);
    auto c = sample_poisson(m, w, r0);
    EXPECT_TRUE(same_multiset(thin(c, 1.0, r0), c));
    EXPECT_EQ(thin(c, 0.0, r0).size(), 0u);
    EXPECT_THROW(thin(c, 1.5, r0), Error);
    Accumulator acc;
    std::vector<int64_t> counts;
    for (size_t i = 0; i < 100000; ++i) {
        RngStream r(6, i + 1);
        auto t = thin(sample_poisson(m, w, r), 0.5, r);
        acc.add(double(t.size()));
        counts.push_back(int64_t(t.size()));
    }
    EXPECT_NEAR(acc.mean(), 2.0, 3 * acc.se());
    EXPECT_GE(chi_square_poisson(counts, 2.0).p_value, 0.01);
}

TEST(CorePP, MeckeConstant)
{
    auto w = Window::make_box(Box::cube(1, 0, 1));
    auto rep = mecke_check([](const Point&, const PointConfig&) { return 1.0; }, IntensityModel::homogeneous(2.0), w, 50000, 7);
    EXPECT_TRUE(rep.passed);
    EXPECT_NEAR(rep.lhs.value, 2.0, 3 * rep.lhs.se);
    EXPECT_NEAR(rep.rhs.value, 2.0, 1e-12);
}

TEST(CorePP, MeckeSingleCell)
{
    // oracle: both sides equal P(N = 1) = P(N = 0) for N ~ Poisson(1)
    double lhs_exact = poisson_expect(1.0, [](int n) { return n == 1 ? 1.0 : 0.0; });
    double rhs_exact = poisson_expect(1.0, [](int n) { return n + 1 == 1 ? 1.0 : 0.0; });
    EXPECT_NEAR(lhs_exact, 0.36787944117144233, 1e-15);
    EXPECT_NEAR(rhs_exact, 0.36787944117144233, 1e-15);
    auto rep = mecke_check([](const Point&, const PointConfig& mu) { return mu.size() == 1 ? 1.0 : 0.0; }, IntensityModel::cells({1.0}),
                           Window::make_cells(1), 100000, 8);
    EXPECT_TRUE(rep.passed);
    EXPECT_NEAR(rep.lhs.value, 0.36787944117144233, 3 * rep.lhs.se);
    EXPECT_NEAR(rep.rhs.value, 0.36787944117144233, 3 * rep.rhs.se);
}

TEST(CorePP, MeckeRegionW)
{
    // W = [0,1/2] in [0,2] with γ = 2, so λ(W) = 1
    auto w = Window::make_box(Box::cube(1, 0, 2));
    auto inW = [](const Point& p) { return p.x[0] <= 0.5; };
    auto f = [&](const Point& x, const PointConfig& mu) { return inW(x) && count_in(mu, inW) == 1 ? 1.0 : 0.0; };
    auto rep = mecke_check(f, IntensityModel::homogeneous(2.0), w, 100000, 9);
    EXPECT_TRUE(rep.passed);
    EXPECT_NEAR(rep.lhs.value, 0.36787944117144233, 3 * rep.lhs.se);
}

TEST(CorePP, MeckeRandomFunctionals)
{
    auto w = unit_square();
    auto m = IntensityModel::homogeneous(3.0, MarkLaw::grains(RadiusLaw::uniform(0.05, 0.2)));
    for (uint64_t k = 0; k < 5; ++k) {
        RngStream g(100 + k, 0);
        double cx = g.uniform(), cy = g.uniform(), s = g.uniform(0.2, 0.8);
        int cap = int(g.below(4)) + 1;
        PointFunctional f = [=](const Point& x, const PointConfig& mu) {
            double d = std::hypot(x.x[0] - cx, x.x[1] - cy);
            size_t near = count_in(mu, [&](const Point& p) { return std::hypot(p.x[0] - x.x[0], p.x[1] - x.x[1]) < s; });
            return (d < s ? 1.0 : 0.5) * double(std::min<size_t>(near, size_t(cap))) * x.radius;
        };
        auto rep = mecke_check(f, m, w, 40000, 200 + k);
        EXPECT_TRUE(rep.passed) << "functional " << k << " lhs " << rep.lhs.value << " rhs " << rep.rhs.value;
    }
}

TEST(CorePP, MeckeRejectsUnbounded)
{
    auto w = Window::make_box(Box::cube(1, 0, 1));
    EXPECT_THROW(mecke_check([](const Point&, const PointConfig&) { return kInf; }, IntensityModel::homogeneous(5.0), w, 10, 1), Error);
}

TEST(CorePP, CsvRoundTrip)
{
    auto w = unit_square();
    auto m = IntensityModel::homogeneous(5.0, MarkLaw::grains(RadiusLaw::uniform(0.1, 0.3)));
    RngStream r(10, 0);
    auto c = sample_poisson(m, w, r);
    std::stringstream ss;
    write_csv(c, ss);
    auto back = read_csv(ss, w);
    EXPECT_TRUE(same_multiset(c, back));
}

TEST(CorePP, RadiusLawMoments)
{
    auto q = RadiusLaw::pareto(0.5, 4.0, 1.0);
    // ∫_t^∞ r^3 Q(dr) for Pareto(0.5, 4): 4 * 0.5^4 * t^{-1}
    EXPECT_NEAR(q.tail_moment(3, 2.0), 4 * 0.0625 / 2.0, 1e-15);
    EXPECT_NEAR(q.tail_prob(1.0), 0.0625, 1e-15);
    EXPECT_THROW(RadiusLaw::pareto(1.0, 3.0, 1.0), Error);
    Accumulator acc;
    for (size_t i = 0; i < 200000; ++i) {
        RngStream r(11, i);
        acc.add(q.sample(r) > 1.0 ? 1.0 : 0.0);
    }
    EXPECT_NEAR(acc.mean(), 0.0625, 3 * acc.se());
}

TEST(CorePP, ConfettiHorizonRule)
{
    auto m = MarkLaw::confetti(0.5, RadiusLaw::fixed(1.0), RadiusLaw::fixed(1.0));
    double h = confetti_default_horizon(m, 2);
    // a = 1/(4 sqrt 2), a^2 = 1/32
    EXPECT_NEAR(h, 32 * std::log(1e8), 1e-9);
    EXPECT_LT(std::exp(-h / 32.0), 1.0000001e-8);
}
