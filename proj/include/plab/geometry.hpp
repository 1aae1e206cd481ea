#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "plab/error.hpp"

namespace plab {

using Loc = std::array<double, 3>;

inline double dist2(const Loc& a, const Loc& b, int dim)
{
    double s = 0;
    for (int i = 0; i < dim; ++i) s += (a[size_t(i)] - b[size_t(i)]) * (a[size_t(i)] - b[size_t(i)]);
    return s;
}

inline double norm2(const Loc& a, int dim) { return dist2(a, Loc{}, dim); }

// Closed axis-aligned box. Degenerate axes (lo == hi) describe faces and
// lower-dimensional slabs.
struct Box {
    int dim = 2;
    Loc lo{}, hi{};

    static Box cube(int dim, double a, double b)
    {
        Box r;
        r.dim = dim;
        for (int i = 0; i < dim; ++i) {
            r.lo[size_t(i)] = a;
            r.hi[size_t(i)] = b;
        }
        return r;
    }
    // [0, kappa n] x [0, n]^{d-1}
    static Box rectangle(int dim, double kappa_n, double n)
    {
        Box r = cube(dim, 0, n);
        r.hi[0] = kappa_n;
        return r;
    }

    bool contains(const Loc& x) const
    {
        for (int i = 0; i < dim; ++i)
            if (x[size_t(i)] < lo[size_t(i)] || x[size_t(i)] > hi[size_t(i)]) return false;
        return true;
    }
    double dist2(const Loc& x) const
    {
        double s = 0;
        for (int i = 0; i < dim; ++i) {
            double d = std::max({lo[size_t(i)] - x[size_t(i)], 0.0, x[size_t(i)] - hi[size_t(i)]});
            s += d * d;
        }
        return s;
    }
    double volume() const
    {
        double v = 1;
        for (int i = 0; i < dim; ++i) v *= hi[size_t(i)] - lo[size_t(i)];
        return v;
    }
    double side(int i) const { return hi[size_t(i)] - lo[size_t(i)]; }
    Box padded(double r) const
    {
        Box b = *this;
        for (int i = 0; i < dim; ++i) {
            b.lo[size_t(i)] -= r;
            b.hi[size_t(i)] += r;
        }
        return b;
    }
    // face {x_axis = lo} (side 0) or {x_axis = hi} (side 1)
    Box face(int axis, int side) const
    {
        Box b = *this;
        double v = side == 0 ? lo[size_t(axis)] : hi[size_t(axis)];
        b.lo[size_t(axis)] = b.hi[size_t(axis)] = v;
        return b;
    }
    bool operator==(const Box& o) const
    {
        if (dim != o.dim) return false;
        for (int i = 0; i < dim; ++i)
            if (lo[size_t(i)] != o.lo[size_t(i)] || hi[size_t(i)] != o.hi[size_t(i)]) return false;
        return true;
    }
};

enum class GrainKind { ball, cube };

namespace detail {

// Point in the intersection of two closed balls (squared radii), or false.
inline bool lens_point(const Loc& c1, double r1sq, const Loc& c2, double r2sq, int dim, Loc& p)
{
    if (r1sq < 0 || r2sq < 0) return false;
    double r1 = std::sqrt(r1sq), r2 = std::sqrt(r2sq);
    double dsq = dist2(c1, c2, dim);
    if (dsq >= (r1 + r2) * (r1 + r2)) return false;
    double d = std::sqrt(dsq);
    if (d + r2 <= r1) {
        p = c2;
        return true;
    }
    if (d + r1 <= r2) {
        p = c1;
        return true;
    }
    double a = (dsq + r1sq - r2sq) / (2 * d);
    for (int i = 0; i < dim; ++i) p[size_t(i)] = c1[size_t(i)] + a * (c2[size_t(i)] - c1[size_t(i)]) / d;
    return true;
}

// Two balls and a box in the affine subspace where the degenerate axes of
// the box are fixed. If the lens meets the box but not its boundary, the lens
// lies inside the box, so one lens point decides; otherwise recurse on faces.
inline bool two_balls_box(Loc c1, double r1sq, Loc c2, double r2sq, const Box& b)
{
    Loc p{};
    if (!lens_point(c1, r1sq, c2, r2sq, b.dim, p)) return false;
    if (b.contains(p)) return true;
    for (int a = 0; a < b.dim; ++a) {
        if (b.lo[size_t(a)] == b.hi[size_t(a)]) continue;
        for (int side = 0; side < 2; ++side) {
            Box f = b.face(a, side);
            double v = f.lo[size_t(a)];
            double d1 = c1[size_t(a)] - v, d2 = c2[size_t(a)] - v;
            Loc e1 = c1, e2 = c2;
            e1[size_t(a)] = v;
            e2[size_t(a)] = v;
            double s1 = r1sq - d1 * d1, s2 = r2sq - d2 * d2;
            if (s1 <= 0 || s2 <= 0) continue;
            if (two_balls_box(e1, s1, e2, s2, f)) return true;
        }
    }
    return false;
}

// open grain as an open box (cube grains only)
inline Box cube_of(const Loc& c, double rho, int dim)
{
    Box b;
    b.dim = dim;
    for (int i = 0; i < dim; ++i) {
        b.lo[size_t(i)] = c[size_t(i)] - rho;
        b.hi[size_t(i)] = c[size_t(i)] + rho;
    }
    return b;
}

// open box (o) meets closed box (b); on success `out` is the closure of the
// intersection
inline bool open_meets_closed(const Box& o, const Box& b, Box& out)
{
    out = b;
    for (int i = 0; i < b.dim; ++i) {
        auto k = size_t(i);
        if (!(o.lo[k] < b.hi[k] && b.lo[k] < o.hi[k])) return false;
        out.lo[k] = std::max(o.lo[k], b.lo[k]);
        out.hi[k] = std::min(o.hi[k], b.hi[k]);
    }
    return true;
}

}  // namespace detail

// Grains are open; windows and faces are closed. Ties have probability zero
// under diffuse intensities and are not treated specially.
inline bool grain_covers(GrainKind kind, const Loc& c, double rho, const Loc& x, int dim)
{
    if (kind == GrainKind::ball) return dist2(c, x, dim) < rho * rho;
    for (int i = 0; i < dim; ++i)
        if (std::fabs(x[size_t(i)] - c[size_t(i)]) >= rho) return false;
    return true;
}

inline bool grain_meets_box(GrainKind kind, const Loc& c, double rho, const Box& b)
{
    if (kind == GrainKind::ball) return b.dist2(c) < rho * rho;
    Box tmp;
    return detail::open_meets_closed(detail::cube_of(c, rho, b.dim), b, tmp);
}

// (grain1 ∩ grain2 ∩ b) != ∅
inline bool grains_meet_in_box(GrainKind kind, const Loc& c1, double r1, const Loc& c2, double r2, const Box& b)
{
    if (kind == GrainKind::ball) {
        if (dist2(c1, c2, b.dim) >= (r1 + r2) * (r1 + r2)) return false;
        return detail::two_balls_box(c1, r1 * r1, c2, r2 * r2, b);
    }
    Box o1 = detail::cube_of(c1, r1, b.dim), o2 = detail::cube_of(c2, r2, b.dim), both = o1;
    for (int i = 0; i < b.dim; ++i) {
        auto k = size_t(i);
        both.lo[k] = std::max(o1.lo[k], o2.lo[k]);
        both.hi[k] = std::min(o1.hi[k], o2.hi[k]);
        if (!(both.lo[k] < both.hi[k])) return false;
    }
    Box tmp;
    return detail::open_meets_closed(both, b, tmp);
}

inline bool grains_meet(GrainKind kind, const Loc& c1, double r1, const Loc& c2, double r2, int dim)
{
    if (kind == GrainKind::ball) return dist2(c1, c2, dim) < (r1 + r2) * (r1 + r2);
    for (int i = 0; i < dim; ++i)
        if (std::fabs(c1[size_t(i)] - c2[size_t(i)]) >= r1 + r2) return false;
    return true;
}

// open ball B(x, r) meets (grain ∩ b)
inline bool ball_meets_grain_in_box(const Loc& x, double r, GrainKind kind, const Loc& c, double rho, const Box& b)
{
    if (kind == GrainKind::ball) return grains_meet_in_box(GrainKind::ball, x, r, c, rho, b);
    Box cut;
    if (!detail::open_meets_closed(detail::cube_of(c, rho, b.dim), b, cut)) return false;
    return cut.dist2(x) < r * r;
}

// Largest Euclidean norm of a point of the grain.
inline double grain_reach(GrainKind kind, const Loc& c, double rho, int dim)
{
    if (kind == GrainKind::ball) return std::sqrt(norm2(c, dim)) + rho;
    double s = 0;
    for (int i = 0; i < dim; ++i) s += (std::fabs(c[size_t(i)]) + rho) * (std::fabs(c[size_t(i)]) + rho);
    return std::sqrt(s);
}

// Largest sup-norm of a point of the grain (same for balls and cubes).
inline double grain_reach_inf(const Loc& c, double rho, int dim)
{
    double m = 0;
    for (int i = 0; i < dim; ++i) m = std::max(m, std::fabs(c[size_t(i)]));
    return m + rho;
}

inline double unit_ball_volume(int dim)
{
    switch (dim) {
    case 1: return 2.0;
    case 2: return M_PI;
    case 3: return 4.0 * M_PI / 3.0;
    default: throw Error("geometry", "dimension must be 1, 2 or 3");
    }
}

}  // namespace plab
