#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "plab/percolation.hpp"

using namespace plab;

namespace {

Point grain(double x, double y, double r, double birth = 0, Color c = Color::black)
{
    Point p;
    p.x = {x, y, 0};
    p.radius = r;
    p.kind = MarkKind::radius;
    p.birth = birth;
    p.color = c;
    return p;
}

PointConfig config(const Box& win, std::vector<Point> pts)
{
    PointConfig c;
    c.window = Window::make_box(win);
    c.points = std::move(pts);
    return c;
}

BooleanModel unit_disks(double gamma, int k = 1)
{
    BooleanModel m;
    m.gamma = gamma;
    m.k = k;
    return m;
}

// covered-cell components of a raster (4-adjacency)
int raster_components(const Raster& r, int k)
{
    std::vector<char> seen(r.size(), 0);
    int comps = 0;
    for (int j = 0; j < r.n[1]; ++j)
        for (int i = 0; i < r.n[0]; ++i) {
            if (seen[r.idx(i, j)] || r.val[r.idx(i, j)] < k) continue;
            ++comps;
            std::vector<std::pair<int, int>> st{{i, j}};
            seen[r.idx(i, j)] = 1;
            while (!st.empty()) {
                auto [a, b] = st.back();
                st.pop_back();
                const int d[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
                for (auto& s : d) {
                    int x = a + s[0], y = b + s[1];
                    if (x < 0 || y < 0 || x >= r.n[0] || y >= r.n[1]) continue;
                    size_t id = r.idx(x, y);
                    if (!seen[id] && r.val[id] >= k) {
                        seen[id] = 1;
                        st.push_back({x, y});
                    }
                }
            }
        }
    return comps;
}

}  // namespace

TEST(World, TwoOverlappingBallsFormOneComponent)
{
    auto cfg = config(Box::cube(2, -3, 3), {grain(0, 0, 1), grain(1.5, 0, 1)});
    BooleanWorld w(cfg, unit_disks(1), std::nullopt);
    EXPECT_EQ(w.component(0), w.component(1));
    auto far = config(Box::cube(2, -3, 3), {grain(0, 0, 1), grain(2.5, 0, 1)});
    BooleanWorld w2(far, unit_disks(1), std::nullopt);
    EXPECT_NE(w2.component(0), w2.component(1));
}

TEST(World, TwoCoveredRegionIsALens)
{
    auto cfg = config(Box::cube(2, -3, 3), {grain(0, 0, 1), grain(1.5, 0, 1)});
    Box clip = Box::rectangle(2, 3.5, 3);
    clip.lo = {-2, -1.5, 0};
    clip.hi = {3.5, 1.5, 0};
    BooleanWorld w(cfg, unit_disks(1, 2), clip);
    double h = 0.01;
    auto r = w.coverage_raster(h);
    EXPECT_EQ(raster_components(r, 2), 1);
    double area = 0;
    for (auto v : r.val) area += v >= 2;
    area *= r.cell_volume();
    double lens = 2 * std::acos(0.75) - 0.75 * std::sqrt(4 - 1.5 * 1.5);
    // perimeter of the lens is 4 acos(0.75)
    EXPECT_NEAR(area, lens, 2 * h * 4 * std::acos(0.75));
    EXPECT_TRUE(is_k_covered(w, {0.75, 0, 0}));
    EXPECT_FALSE(is_k_covered(w, {-0.5, 0, 0}));
}

TEST(World, KCovered)
{
    auto empty = config(Box::cube(2, -3, 3), {});
    BooleanWorld w0(empty, unit_disks(1), std::nullopt);
    EXPECT_FALSE(is_k_covered(w0, {0, 0, 0}));
    auto cfg = config(Box::cube(2, -3, 3), {grain(0, 0, 1), grain(0.5, 0, 1), grain(-0.5, 0, 1)});
    BooleanWorld w3(cfg, unit_disks(1, 3), std::nullopt);
    EXPECT_TRUE(is_k_covered(w3, {0, 0, 0}));
    EXPECT_FALSE(is_k_covered(w3, {1.2, 0, 0}));
    BooleanWorld w1(cfg, unit_disks(1), std::nullopt);
    EXPECT_FALSE(is_k_covered(w1, {2.5, 2.5, 0}));
    EXPECT_EQ(w1.covering_count({0.2, 0, 0}), 3);
}

TEST(World, UnboundedRadiiNeedTruncation)
{
    BooleanModel m;
    m.radius = RadiusLaw::pareto(1, 3.5, 1);
    EXPECT_THROW(m.window(Box::rectangle(2, 4, 4)), Error);
}

TEST(Crossing, EmptyAndHugeGrain)
{
    Box rect = Box::rectangle(2, 3, 1);
    BooleanWorld e(config(rect.padded(1), {}), unit_disks(1), rect);
    EXPECT_FALSE(crossing(e));
    BooleanWorld h(config(rect.padded(5), {grain(1.5, 0.5, 5)}), unit_disks(1), rect);
    EXPECT_TRUE(crossing(h));
    EXPECT_TRUE(crossing(h, 1));
}

TEST(Crossing, ThreeBallChain)
{
    Box rect = Box::rectangle(2, 3, 1);
    std::vector<Point> chain = {grain(0.5, 0.5, 0.6), grain(1.5, 0.5, 0.6), grain(2.5, 0.5, 0.6)};
    BooleanWorld w(config(rect.padded(1), chain), unit_disks(1), rect);
    EXPECT_TRUE(crossing(w));
    EXPECT_TRUE(raster_crossing_of(w, 0.01));
    chain.erase(chain.begin() + 1);
    BooleanWorld g(config(rect.padded(1), chain), unit_disks(1), rect);
    EXPECT_FALSE(crossing(g));
    EXPECT_FALSE(raster_crossing_of(g, 0.01));
}

TEST(Crossing, ExactAgreesWithFineRaster)
{
    // a raster path is a path in the covered region, so the raster can only
    // miss crossings through necks narrower than h; refinement recovers them
    auto m = unit_disks(0.36);
    Box rect = Box::rectangle(2, 4, 4);
    int raster_only = 0, exact_only = 0, crossed = 0;
    for (size_t i = 0; i < 500; ++i) {
        RngStream rng(31, i);
        auto cfg = sample_boolean(m, rect, rng);
        BooleanWorld w(cfg, m, rect);
        bool a = crossing(w), b = raster_crossing_of(w, 1.0 / 20);
        crossed += a;
        raster_only += b && !a;
        if (a && !b) {
            ++exact_only;
            EXPECT_TRUE(raster_crossing_of(w, 1.0 / 100)) << i;
        }
    }
    EXPECT_EQ(raster_only, 0);
    EXPECT_LE(exact_only, 2);
    EXPECT_GT(crossed, 50);
    EXPECT_LT(crossed, 450);
}

TEST(Crossing, NearTangentBallsStaySeparate)
{
    Box rect = Box::rectangle(2, 3.8, 1);
    auto cfg = config(rect.padded(1), {grain(0.9, 0.5, 1), grain(2.9005, 0.5, 1)});
    BooleanWorld w(cfg, unit_disks(1), rect);
    EXPECT_FALSE(crossing(w));
    EXPECT_FALSE(raster_crossing_of(w, 0.05));
    cfg.points[1].x[0] = 2.899;
    BooleanWorld v(cfg, unit_disks(1), rect);
    EXPECT_TRUE(crossing(v));
    EXPECT_TRUE(raster_crossing_of(v, 0.01));
}

TEST(Crossing, KTwoRasterRefinement)
{
    auto m = unit_disks(1.2, 2);
    Box rect = Box::rectangle(2, 4, 4);
    int disagree = 0;
    for (size_t i = 0; i < 100; ++i) {
        RngStream rng(32, i);
        BooleanWorld w(sample_boolean(m, rect, rng), m, rect);
        disagree += raster_crossing_of(w, 0.125) != raster_crossing_of(w, 0.0625);
    }
    EXPECT_LE(disagree, 5);
}

TEST(Crossing, MonotoneUnderThinning)
{
    auto m = unit_disks(0.6);
    Box rect = Box::rectangle(2, 6, 6);
    for (int k : {1, 2}) {
        auto mk = unit_disks(0.6, k);
        for (size_t i = 0; i < 200; ++i) {
            RngStream rng(33, i);
            auto full = sample_boolean(m, rect, rng);
            auto sub = thin_to(full, 0.3, 0.6);
            BooleanWorld a(full, mk, rect), b(sub, mk, rect);
            if (crossing(b)) {
                EXPECT_TRUE(crossing(a)) << i;
            }
        }
    }
}

TEST(Crossing, ScalingCovariance)
{
    // lengths x2 and γ / 4 give the same law
    auto m1 = unit_disks(0.4);
    BooleanModel m2 = unit_disks(0.1);
    m2.radius = RadiusLaw::fixed(2);
    auto a = threshold_scan(m1, {0.4}, 6, 3000, 34).rows[0].estimate;
    auto b = threshold_scan(m2, {0.1}, 12, 3000, 35).rows[0].estimate;
    EXPECT_LE(std::fabs(a.value - b.value), 3 * std::hypot(a.se, b.se));
}

TEST(Confetti, FirstArrivalColours)
{
    Box rect = Box::cube(2, 0, 1);
    auto cfg = config(rect.padded(1), {grain(0.5, 0.5, 1, 1.0, Color::black), grain(0.5, 0.5, 1, 2.0, Color::white)});
    auto w = build_confetti(cfg, rect, 0.1);
    for (auto v : w.raster.val) EXPECT_EQ(v, 0);
    EXPECT_EQ(w.color_at({0.5, 0.5, 0}), 0);
    cfg.points[0].birth = 3.0;
    auto w2 = build_confetti(cfg, rect, 0.1);
    for (auto v : w2.raster.val) EXPECT_EQ(v, 1);
    auto gap = config(rect.padded(1), {grain(0.1, 0.1, 0.2, 1.0)});
    EXPECT_THROW(build_confetti(gap, rect, 0.1), Error);
}

TEST(Confetti, TooShortHorizonIsReported)
{
    ConfettiModel cm;
    cm.horizon = 1e-3;
    RngStream rng(36, 0);
    EXPECT_THROW(sample_confetti(cm, Box::rectangle(2, 4, 4), rng), Error);
}

TEST(Confetti, DualityAllBlackAllWhite)
{
    Box rect = Box::rectangle(2, 5, 5);
    for (double p : {0.0, 1.0}) {
        ConfettiModel cm;
        cm.p = p;
        RngStream rng(37, 0);
        auto w = sample_confetti(cm, rect, rng);
        EXPECT_TRUE(confetti_duality_check(w));
        EXPECT_EQ(confetti_crossing(w, Color::black, 0), p == 1.0);
        EXPECT_EQ(confetti_crossing(w, Color::white, 1), p == 0.0);
    }
}

TEST(Confetti, DualityOnRandomWorlds)
{
    Box rect = Box::rectangle(2, 5, 5);
    for (auto adj : {Adjacency::black8_white4, Adjacency::center_resolved}) {
        int fails = 0;
        for (double p : {0.3, 0.5, 0.7}) {
            ConfettiModel cm;
            cm.p = p;
            cm.adjacency = adj;
            for (size_t i = 0; i < 700; ++i) {
                RngStream rng(38, i);
                fails += !confetti_duality_check(sample_confetti(cm, rect, rng));
            }
        }
        EXPECT_EQ(fails, 0);
    }
}

// 2x2 checkerboard at h = 1 whose block centre (1,1) no grain covers
TEST(Confetti, CentreResolvedBareCorner)
{
    Box rect = Box::cube(2, 0, 2);
    auto cfg = config(rect.padded(1), {grain(0.5, 0.5, 0.6, 1.0, Color::black), grain(1.5, 1.5, 0.6, 1.1, Color::black),
                                       grain(1.5, 0.5, 0.6, 1.2, Color::white), grain(0.5, 1.5, 0.6, 1.3, Color::white)});
    auto w = build_confetti(cfg, rect, 1.0, Adjacency::center_resolved);
    ASSERT_EQ(w.color_at({1, 1, 0}), 2);
    EXPECT_TRUE(confetti_duality_check(w));
    EXPECT_TRUE(confetti_crossing(w, Color::black, 0));
    EXPECT_FALSE(confetti_crossing(w, Color::white, 1));
}

TEST(Confetti, BlackIncreasing)
{
    Box rect = Box::rectangle(2, 4, 4);
    ConfettiModel cm;
    cm.h = 0.1;
    int changed = 0;
    for (size_t i = 0; i < 1000; ++i) {
        RngStream rng(39, i);
        auto w = sample_confetti(cm, rect, rng);
        bool base = confetti_crossing(w, Color::black, 0);
        Box win = rect.padded(cm.r_max());
        auto extra = grain(rng.uniform(win.lo[0], win.hi[0]), rng.uniform(win.lo[1], win.hi[1]), 1, rng.uniform(0, w.stop_time));
        auto cfg = config(win, w.grains);
        cfg.points.push_back(extra);
        bool with_black = confetti_crossing(build_confetti(cfg, rect, cm.h), Color::black, 0);
        cfg.points.back().color = Color::white;
        bool with_white = confetti_crossing(build_confetti(cfg, rect, cm.h), Color::black, 0);
        EXPECT_LE(with_white, base) << i;
        EXPECT_LE(base, with_black) << i;
        changed += with_black != with_white;
    }
    EXPECT_GT(changed, 0);
}

TEST(Confetti, HalfIsCritical)
{
    ConfettiModel cm;
    cm.h = 0.1;
    auto scan = confetti_scan(cm, {0.5}, 5, 2000, 40);
    auto e = scan.rows[0].estimate;
    EXPECT_NEAR(e.value, 0.5, 3 * e.se);
    auto ce = estimate_critical_confetti(cm, 5, 0.3, 0.7, 0.02, 200, 41);
    EXPECT_LE(std::fabs(ce.value - 0.5), 3 * ce.se + 0.01);
    EXPECT_GT(ce.se, 0);
}

TEST(Arm, Preconditions)
{
    auto m = unit_disks(0.3);
    EXPECT_THROW(arm_probability(m, 3, 2, 10, 1), Error);
    EXPECT_THROW(arm_probability(m, 1, 2000, 10, 1), Error);
    EXPECT_THROW(one_arm(m, 5000, 10, 1), Error);
    EXPECT_THROW(one_arm(m, 0, 10, 1), Error);
}

TEST(Arm, VanishingIntensity)
{
    auto th = one_arm(unit_disks(1e-4), 3, 2000, 42);
    EXPECT_LT(th.value, 0.01);
    // θ_s <= P(0 covered) = 1 - exp(-γπ)
    auto m = unit_disks(0.05);
    auto t2 = one_arm(m, 3, 4000, 43);
    EXPECT_LE(t2.value, 1 - std::exp(-0.05 * M_PI) + 3 * t2.se);
}

TEST(Arm, HarrisSpotCheck)
{
    // b'_r: B^∞_r lies in the origin's component (raster with h = 0.05);
    // Arm_{r,s} ∩ {b'_r} ⊂ {0 ↔ ∂B_{s-r}}, so Arm <= θ_{s-r} / b'_r.
    auto m = unit_disks(0.36);
    double r = 0.5, s = 5;
    auto arm = arm_probability(m, r, s, 4000, 44);
    auto theta = one_arm(m, s - r, 4000, 45);
    std::vector<char> b(4000);
    for (size_t i = 0; i < b.size(); ++i) {
        RngStream rng(46, i);
        Box win = Box::cube(2, -2 * r, 2 * r);
        auto cfg = sample_boolean(m, win, rng);
        BooleanWorld w(cfg, m, win);
        Raster ras(Box::cube(2, -r, r), 0.05);
        bool ok = is_k_covered(w, {0, 0, 0});
        std::optional<size_t> comp;
        w.for_each_covering({0, 0, 0}, [&](int j) { comp = w.component(j); });
        for (int jj = 0; ok && jj < ras.n[1]; ++jj)
            for (int ii = 0; ok && ii < ras.n[0]; ++ii) {
                bool hit = false;
                w.for_each_covering(ras.center(ii, jj), [&](int g) { hit = hit || w.component(g) == *comp; });
                ok = hit;
            }
        b[i] = ok;
    }
    auto bp = bernoulli_estimate(b);
    ASSERT_GT(bp.value, 0.05);
    EXPECT_LE(arm.value * bp.value, theta.value + 3 * std::hypot(arm.se, theta.se));
}

TEST(Scan, MonotoneAndBracketsHalf)
{
    auto m = unit_disks(1);
    std::vector<double> grid = {0.2, 0.28, 0.36, 0.44, 0.52};
    auto sc = threshold_scan(m, grid, 8, 1000, 47);
    ASSERT_EQ(sc.rows.size(), grid.size());
    for (size_t g = 0; g < grid.size(); ++g) {
        EXPECT_GE(sc.rows[g].estimate.value, 0);
        EXPECT_LE(sc.rows[g].estimate.value, 1);
        if (g > 0) {
            EXPECT_GE(sc.rows[g].estimate.value, sc.rows[g - 1].estimate.value);
        }
    }
    EXPECT_LT(sc.rows.front().estimate.value, 0.5);
    EXPECT_GT(sc.rows.back().estimate.value, 0.5);
    std::ostringstream os;
    write_scan_csv(sc, os);
    EXPECT_EQ(os.str().rfind("param,n,estimate,se,samples,seed\n", 0), 0u);
    EXPECT_THROW(threshold_scan(m, {0.4, 0.2}, 8, 10, 1), Error);
    EXPECT_THROW(threshold_scan(m, {}, 8, 10, 1), Error);
}

TEST(Scan, SubcriticalOneArmDecay)
{
    auto d = one_arm_decay(unit_disks(0.18), {4, 6, 8, 10, 12}, 400, 20, 48);
    EXPECT_LT(d.fit.slope, 0);
    EXPECT_GT(d.fit.r2, 0.9);
    for (size_t i = 1; i < d.theta.size(); ++i) EXPECT_LE(d.theta[i].value, d.theta[i - 1].value);
    // splitting agrees with plain Monte Carlo where the latter is feasible
    auto direct = one_arm(unit_disks(0.18), 4, 20000, 49);
    EXPECT_NEAR(d.theta[0].value, direct.value, 3 * std::hypot(d.theta[0].se, direct.se));
    EXPECT_THROW(one_arm_decay(unit_disks(0.18), {4, 3}, 10, 1, 1), Error);
}

TEST(Critical, ConsistentAcrossWindowSizes)
{
    auto m = unit_disks(1);
    auto a = estimate_critical(m, 10, 0.2, 0.6, 0.02, 300, 50);
    auto b = estimate_critical(m, 20, 0.2, 0.6, 0.02, 300, 51);
    EXPECT_GT(a.se, 0);
    EXPECT_GT(b.se, 0);
    EXPECT_LE(std::fabs(a.value - b.value), 3 * std::hypot(a.se, b.se));
    EXPECT_GT(a.value, 0.25);
    EXPECT_LT(a.value, 0.5);
}

TEST(Critical, Errors)
{
    BooleanModel zero = unit_disks(1);
    zero.radius = RadiusLaw::fixed(0);
    EXPECT_THROW(estimate_critical(zero, 10, 0.2, 0.6, 0.05, 50, 1), Error);
    EXPECT_THROW(estimate_critical(unit_disks(1), 10, 0.6, 0.2, 0.05, 50, 1), Error);
    EXPECT_THROW(estimate_critical(unit_disks(1), 10, 0.05, 0.1, 0.01, 100, 1), Error);
}

TEST(Truncation, BoundedIsNoOp)
{
    auto m = unit_disks(0.5);
    RngStream rng(52, 0);
    auto cfg = sample_boolean(m, Box::rectangle(2, 8, 8), rng);
    auto [cut, rep] = truncate_radii(cfg, m.radius, m.gamma, 8, 0.2);
    EXPECT_TRUE(same_multiset(cfg, cut));
    EXPECT_EQ(rep.bound, 0.0);
    EXPECT_EQ(rep.removed, 0u);
}

TEST(Truncation, BoundShapeAndDecay)
{
    auto q = RadiusLaw::pareto(1, 3.5, 1);
    EXPECT_THROW(truncation_bound(q, 0.15, 32, 0.5), Error);
    EXPECT_THROW(truncation_bound(q, 0.15, 32, 0.0), Error);
    auto r = truncation_bound(q, 0.15, 32, 0.2);
    EXPECT_NEAR(r.r_n, std::pow(32, 0.8), 1e-12);
    // closed form for Pareto(1, 3.5): ∫_t^∞ ρ^3 Q(dρ) = 3.5 * 2 / sqrt(t)
    double rn = r.r_n, lead = 1024 / (rn * rn) + 4 * 32 / rn + M_PI;
    EXPECT_NEAR(r.bound, 0.15 * lead / rn * 7 / std::sqrt(rn), 1e-12);
    EXPECT_LE(r.first_moment_bound, r.bound + 1e-15);
    double prev = r.bound;
    for (double n : {1e3, 1e5, 1e7, 1e9}) {
        double b = truncation_bound(q, 0.15, n, 0.2).bound;
        EXPECT_LT(b, prev);
        prev = b;
    }
    EXPECT_LT(prev, 1e-2);
}

TEST(Truncation, HeavyTailSamplerHitsLargeGrainRate)
{
    BooleanModel m;
    m.gamma = 0.15;
    m.radius = RadiusLaw::pareto(1, 3.5, 1);
    Box rect = Box::rectangle(2, 8, 8);
    double t = 4;
    // grains of radius > t that hit R: mean γ ∫_t (A + Pρ + πρ²) Q(dρ)
    double expect = m.gamma * (64 * m.radius.tail_moment(0, t) + 32 * m.radius.tail_moment(1, t) + M_PI * m.radius.tail_moment(2, t));
    Accumulator acc;
    for (size_t i = 0; i < 4000; ++i) {
        RngStream rng(53, i);
        auto cfg = sample_heavy_tailed(m, rect, t, rng);
        double big = 0;
        for (auto& p : cfg.points) {
            if (p.radius > t) {
                big += 1;
                EXPECT_LT(rect.dist2(p.x), p.radius * p.radius);
            }
        }
        acc.add(big);
    }
    EXPECT_NEAR(acc.mean(), expect, 3 * acc.estimate().se);
}

TEST(Truncation, EmpiricalBelowBound)
{
    BooleanModel m;
    m.gamma = 0.15;
    m.radius = RadiusLaw::pareto(1, 3.5, 1);
    auto ex = truncation_experiment(m, 16, 0.2, 400, 54);
    EXPECT_LE(ex.disagreement.value, ex.bound.bound + 3 * ex.disagreement.se);
}

TEST(ComponentVolume, EmptyAndSingleBall)
{
    Box clip = Box::cube(2, -3, 3);
    BooleanWorld e(config(clip, {}), unit_disks(1), clip);
    EXPECT_EQ(component_volume_proxy(e, {0, 0, 0}, 0.05), 0.0);
    BooleanWorld w(config(clip, {grain(0, 0, 1)}), unit_disks(1), clip);
    double h = 0.05;
    EXPECT_NEAR(component_volume_proxy(w, {0, 0, 0}, h), M_PI, 2 * h * 2 * M_PI);
    BooleanWorld w2(config(clip, {grain(0, 0, 1), grain(0.5, 0, 1)}), unit_disks(1, 2), clip);
    double lens = 2 * std::acos(0.25) - 0.25 * std::sqrt(4 - 0.25);
    EXPECT_NEAR(component_volume_proxy(w2, {0.25, 0, 0}, 0.02), lens, 2 * 0.02 * 4 * std::acos(0.25));
}

TEST(ComponentVolume, SubVersusSupercritical)
{
    Box clip = Box::cube(2, -8, 8);
    auto mean_volume = [&](double g, uint64_t seed) {
        auto m = unit_disks(g);
        Accumulator a;
        for (size_t i = 0; i < 200; ++i) {
            RngStream rng(seed, i);
            BooleanWorld w(sample_boolean(m, clip, rng), m, clip);
            a.add(component_volume_proxy(w, {0, 0, 0}, 0.25));
        }
        return a.mean();
    };
    double sub = mean_volume(0.15, 55), sup = mean_volume(0.8, 56);
    EXPECT_GT(sup, 10 * sub);
}

TEST(Export, GrainsAndRaster)
{
    Box clip = Box::cube(2, 0, 1);
    BooleanWorld w(config(clip, {grain(0.5, 0.5, 0.3)}), unit_disks(1), clip);
    std::ostringstream g, r;
    write_grains_csv(w, g);
    EXPECT_EQ(g.str().rfind("x0,x1,x2,radius,active\n", 0), 0u);
    write_raster_text(w.coverage_raster(0.25), r);
    EXPECT_EQ(r.str(), "0 0 0 0\n0 1 1 0\n0 1 1 0\n0 0 0 0\n");
}
