#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plab/core_pp.hpp"
#include "plab/percolation.hpp"
#include "plab/stopping.hpp"

namespace plab::fixtures {

// f = 1{η(W) = 0} for a disk W centred at 0 inside [-R, R]^2, with the
// ball-growth decision tree started at the centre.
struct EmptySpace {
    double area = M_PI;
    double R = 1;
    Box box;
    Window win;
    Region W;
    Functional f;
    CTDT ctdt;

    double var_exact(double gamma = 1) const { return std::exp(-gamma * area) * (1 - std::exp(-gamma * area)); }
};

inline EmptySpace empty_space(double area)
{
    if (!(area > 0)) throw Error("fixtures", "disk area must be positive");
    EmptySpace e;
    e.area = area;
    e.R = std::sqrt(area / M_PI);
    e.box = Box::cube(2, -e.R, e.R);
    e.win = Window::make_box(e.box);
    e.W = Region::ball(2, {0, 0, 0}, e.R);
    e.f = {"empty-space", [W = e.W](const PointConfig& c) {
               for (auto& p : c.points)
                   if (W.contains(p.x)) return 0.0;
               return 1.0;
           },
           1.0};
    e.ctdt = ball_growth_ctdt(e.W, {0, 0, 0}, e.box);
    return e;
}

inline BooleanModel planar_disks(double gamma, double r = 1)
{
    BooleanModel m;
    m.dim = 2;
    m.gamma = gamma;
    m.radius = RadiusLaw::fixed(r);
    return m;
}

// test functionals for law comparisons on a box
inline std::vector<Functional> five_functionals(const Box& b)
{
    Loc mid{(b.lo[0] + b.hi[0]) / 2, (b.lo[1] + b.hi[1]) / 2, 0};
    double q = (b.hi[0] - b.lo[0]) / 4;
    return {
        count_functional([](const Point&) { return true; }, "total"),
        count_functional([mid](const Point& p) { return p.x[0] < mid[0]; }, "left-half"),
        count_functional([mid, q](const Point& p) { return std::fabs(p.x[0] - mid[0]) < q && std::fabs(p.x[1] - mid[1]) < q; }, "centre-box"),
        {"nearest-to-centre",
         [mid](const PointConfig& c) {
             double d = 1e9;
             for (auto& p : c.points) d = std::min(d, dist2(p.x, mid, 2));
             return std::sqrt(d);
         },
         std::nullopt},
        {"sum-x", [](const PointConfig& c) {
             double s = 0;
             for (auto& p : c.points) s += p.x[0];
             return s;
         },
         std::nullopt},
    };
}

}  // namespace plab::fixtures
