#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <memory>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "plab/core_pp.hpp"
#include "plab/stopping.hpp"

namespace plab {

// ---------------------------------------------------------------- model

struct BooleanModel {
    int dim = 2;
    double gamma = 1;
    GrainKind grain = GrainKind::ball;
    RadiusLaw radius = RadiusLaw::fixed(1.0);
    int k = 1;
    double raster_h = 0;  // resolution for k >= 2; 0 selects r0/8

    double r_max() const { return radius.max_radius(); }
    // radius used to bucket grains; heavier grains are kept aside
    double bulk_radius() const
    {
        if (radius.bounded()) return radius.max_radius();
        return radius.a * std::pow(0.01, -1.0 / radius.shape);
    }
    double resolution() const { return raster_h > 0 ? raster_h : std::max(radius.min_radius(), 1e-9) / 8; }
    IntensityModel intensity() const { return IntensityModel::homogeneous(gamma, MarkLaw::grains(radius, grain)); }
    // R ⊕ B_r (box padding)
    Window window(const Box& rect) const
    {
        if (!radius.bounded()) throw Error("percolation", "unbounded radii need an explicit truncation (see truncate_radii)");
        return Window::make_box(rect.padded(r_max()));
    }
    BooleanModel with_gamma(double g) const
    {
        BooleanModel m = *this;
        m.gamma = g;
        return m;
    }
};

struct Grain {
    Loc c{};
    double rho = 0;
};

class UnionFind {
public:
    explicit UnionFind(size_t n = 0) { reset(n); }
    void reset(size_t n)
    {
        parent_.resize(n);
        std::iota(parent_.begin(), parent_.end(), 0);
        rank_.assign(n, 0);
    }
    size_t add()
    {
        parent_.push_back(parent_.size());
        rank_.push_back(0);
        return parent_.size() - 1;
    }
    size_t find(size_t x)
    {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(size_t a, size_t b)
    {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
    }
    size_t size() const { return parent_.size(); }

private:
    std::vector<size_t> parent_;
    std::vector<unsigned char> rank_;
};

// Uniform bucket grid over grain centres. Grains larger than the bulk radius
// go to a side list that every query visits.
class GrainIndex {
public:
    GrainIndex() = default;
    GrainIndex(int dim, const Box& bounds, double bulk) : dim_(dim), b_(bounds), bulk_(bulk)
    {
        cs_ = std::max(2 * bulk, 1e-9);
        double cells = 1;
        for (int i = 0; i < dim; ++i) cells *= std::max(1.0, std::ceil(bounds.side(i) / cs_));
        while (cells > 4e6) {
            cs_ *= 2;
            cells = 1;
            for (int i = 0; i < dim; ++i) cells *= std::max(1.0, std::ceil(bounds.side(i) / cs_));
        }
        n_ = {1, 1, 1};
        for (int i = 0; i < dim; ++i) n_[size_t(i)] = std::max(1, int(std::ceil(bounds.side(i) / cs_)));
        cells_.assign(size_t(n_[0]) * size_t(n_[1]) * size_t(n_[2]), {});
    }

    void insert(int id, const Loc& c, double rho)
    {
        if (rho > bulk_) {
            oversize_.push_back(id);
            return;
        }
        cells_[flat(cell_of(c))].push_back(id);
    }
    void remove(int id, const Loc& c, double rho)
    {
        auto& v = rho > bulk_ ? oversize_ : cells_[flat(cell_of(c))];
        auto it = std::find(v.begin(), v.end(), id);
        if (it != v.end()) {
            *it = v.back();
            v.pop_back();
        }
    }

    // f(id) for every grain that may lie within `reach` of x (superset).
    template <class F>
    void near(const Loc& x, double reach, F&& f) const
    {
        std::array<int, 3> lo{0, 0, 0}, hi{0, 0, 0};
        double R = reach + bulk_;
        for (int i = 0; i < dim_; ++i) {
            auto k = size_t(i);
            lo[k] = clampi(int(std::floor((x[k] - R - b_.lo[k]) / cs_)), n_[k]);
            hi[k] = clampi(int(std::floor((x[k] + R - b_.lo[k]) / cs_)), n_[k]);
        }
        for (int c = lo[2]; c <= hi[2]; ++c)
            for (int b = lo[1]; b <= hi[1]; ++b)
                for (int a = lo[0]; a <= hi[0]; ++a)
                    for (int id : cells_[flat({a, b, c})]) f(id);
        for (int id : oversize_) f(id);
    }

private:
    static int clampi(int v, int n) { return v < 0 ? 0 : v >= n ? n - 1 : v; }
    std::array<int, 3> cell_of(const Loc& c) const
    {
        std::array<int, 3> r{0, 0, 0};
        for (int i = 0; i < dim_; ++i) r[size_t(i)] = clampi(int(std::floor((c[size_t(i)] - b_.lo[size_t(i)]) / cs_)), n_[size_t(i)]);
        return r;
    }
    size_t flat(const std::array<int, 3>& a) const { return (size_t(a[2]) * size_t(n_[1]) + size_t(a[1])) * size_t(n_[0]) + size_t(a[0]); }

    int dim_ = 2;
    Box b_;
    double cs_ = 1, bulk_ = 0;
    std::array<int, 3> n_{1, 1, 1};
    std::vector<std::vector<int>> cells_;
    std::vector<int> oversize_;
};

// ---------------------------------------------------------------- raster

// Cell-centred raster over a box; side lengths are split into whole cells.
struct Raster {
    Box box;
    double h = 1;
    std::array<int, 3> n{1, 1, 1};
    std::vector<unsigned char> val;

    Raster() = default;
    Raster(const Box& b, double h_target) : box(b)
    {
        double hh = h_target;
        for (int i = 0; i < b.dim; ++i) n[size_t(i)] = std::max(1, int(std::lround(b.side(i) / h_target)));
        // use the first axis spacing; other axes get their own exact split
        h = b.side(0) / n[0];
        (void)hh;
        val.assign(size(), 0);
    }
    size_t size() const { return size_t(n[0]) * size_t(n[1]) * size_t(n[2]); }
    double spacing(int axis) const { return box.side(axis) / n[size_t(axis)]; }
    size_t idx(int i, int j, int k = 0) const { return (size_t(k) * size_t(n[1]) + size_t(j)) * size_t(n[0]) + size_t(i); }
    Loc center(int i, int j, int k = 0) const
    {
        Loc c{};
        c[0] = box.lo[0] + (i + 0.5) * spacing(0);
        if (box.dim > 1) c[1] = box.lo[1] + (j + 0.5) * spacing(1);
        if (box.dim > 2) c[2] = box.lo[2] + (k + 0.5) * spacing(2);
        return c;
    }
    double cell_volume() const
    {
        double v = 1;
        for (int i = 0; i < box.dim; ++i) v *= spacing(i);
        return v;
    }
    // index range of cells whose centres may lie in [lo, hi] along axis
    std::pair<int, int> range(int axis, double lo, double hi) const
    {
        double s = spacing(axis);
        int a = int(std::floor((lo - box.lo[size_t(axis)]) / s - 0.5));
        int b = int(std::ceil((hi - box.lo[size_t(axis)]) / s - 0.5));
        return {std::max(0, a), std::min(n[size_t(axis)] - 1, b)};
    }
};

// Face-adjacent crossing of `open` cells from the slab i_axis = 0 to the
// slab i_axis = n-1.
// Nearest-neighbour raster path from the face {axis = lo} to {axis = hi};
// edge(a, b) may veto a step between adjacent open cells and face(a, side)
// the entry or exit through a boundary cell.
template <class Edge, class Face>
bool raster_crossing(const Raster& r, const std::vector<char>& open, int axis, Edge&& edge, Face&& face)
{
    int dim = r.box.dim;
    std::vector<char> seen(r.size(), 0);
    std::deque<std::array<int, 3>> q;
    auto push = [&](int i, int j, int k) {
        size_t id = r.idx(i, j, k);
        if (!open[id] || seen[id]) return;
        seen[id] = 1;
        q.push_back({i, j, k});
    };
    std::array<int, 3> n = r.n;
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i) {
                std::array<int, 3> a{i, j, k};
                if (a[size_t(axis)] == 0 && face(a, 0)) push(i, j, k);
            }
    while (!q.empty()) {
        auto a = q.front();
        q.pop_front();
        if (a[size_t(axis)] == n[size_t(axis)] - 1 && face(a, 1)) return true;
        for (int ax = 0; ax < dim; ++ax)
            for (int d = -1; d <= 1; d += 2) {
                auto b = a;
                b[size_t(ax)] += d;
                if (b[size_t(ax)] < 0 || b[size_t(ax)] >= n[size_t(ax)]) continue;
                if (!open[r.idx(b[0], b[1], b[2])] || !edge(a, b)) continue;
                push(b[0], b[1], b[2]);
            }
    }
    return false;
}

inline bool raster_crossing(const Raster& r, const std::vector<char>& open, int axis)
{
    return raster_crossing(
        r, open, axis, [](const std::array<int, 3>&, const std::array<int, 3>&) { return true; }, [](const std::array<int, 3>&, int) { return true; });
}

// Open parameter interval {t in R : a + t(b-a) inside the grain}, empty as (1, 0).
inline std::pair<double, double> segment_in_grain(GrainKind kind, const Loc& c, double rho, const Loc& a, const Loc& b, int dim)
{
    if (kind == GrainKind::ball) {
        double A = 0, B = 0, C = -rho * rho;
        for (int i = 0; i < dim; ++i) {
            double d = b[size_t(i)] - a[size_t(i)], e = a[size_t(i)] - c[size_t(i)];
            A += d * d;
            B += 2 * d * e;
            C += e * e;
        }
        if (A == 0) return C < 0 ? std::pair{-kInf, kInf} : std::pair{1.0, 0.0};
        double disc = B * B - 4 * A * C;
        if (disc <= 0) return {1.0, 0.0};
        double sq = std::sqrt(disc);
        return {(-B - sq) / (2 * A), (-B + sq) / (2 * A)};
    }
    double lo = -kInf, hi = kInf;
    for (int i = 0; i < dim; ++i) {
        double d = b[size_t(i)] - a[size_t(i)], e = a[size_t(i)] - c[size_t(i)];
        if (d == 0) {
            if (!(std::fabs(e) < rho)) return {1.0, 0.0};
            continue;
        }
        double t0 = (-rho - e) / d, t1 = (rho - e) / d;
        if (t0 > t1) std::swap(t0, t1);
        lo = std::max(lo, t0);
        hi = std::min(hi, t1);
    }
    return {lo, hi};
}

// ---------------------------------------------------------------- world

class BooleanWorld {
public:
    BooleanModel model;
    std::optional<Box> clip;
    std::vector<Grain> grains;
    std::vector<char> active;  // grain meets the clip box (all true when unclipped)
    GrainIndex index;

    BooleanWorld() = default;
    BooleanWorld(const PointConfig& cfg, const BooleanModel& m, std::optional<Box> clip_box, bool connect = true) : model(m), clip(clip_box)
    {
        if (cfg.window.discrete()) throw Error("percolation", "percolation worlds need a continuous window");
        Box bounds = cfg.window.box;
        index = GrainIndex(m.dim, bounds, m.bulk_radius());
        grains.reserve(cfg.size());
        for (const auto& p : cfg.points) add_grain({p.x, p.radius});
        if (connect) connect_all();
    }

    int add_grain(const Grain& g)
    {
        int id = int(grains.size());
        grains.push_back(g);
        bool act = g.rho > 0 && (!clip || grain_meets_box(model.grain, g.c, g.rho, *clip));
        active.push_back(act ? 1 : 0);
        if (act) index.insert(id, g.c, g.rho);
        uf_.add();
        return id;
    }

    bool meets(int i, int j) const
    {
        const auto &a = grains[size_t(i)], &b = grains[size_t(j)];
        if (clip) return grains_meet_in_box(model.grain, a.c, a.rho, b.c, b.rho, *clip);
        return grains_meet(model.grain, a.c, a.rho, b.c, b.rho, model.dim);
    }

    // union with every overlapping active grain
    void link(int i)
    {
        if (!active[size_t(i)]) return;
        const auto& g = grains[size_t(i)];
        index.near(g.c, g.rho, [&](int j) {
            if (j != i && active[size_t(j)] && uf_.find(size_t(i)) != uf_.find(size_t(j)) && meets(i, j)) uf_.unite(size_t(i), size_t(j));
        });
    }

    void connect_all()
    {
        uf_.reset(grains.size());
        for (int i = 0; i < int(grains.size()); ++i) link(i);
    }

    size_t component(int i) { return uf_.find(size_t(i)); }

    int covering_count(const Loc& x) const
    {
        int c = 0;
        index.near(x, 0.0, [&](int j) {
            const auto& g = grains[size_t(j)];
            if (grain_covers(model.grain, g.c, g.rho, x, model.dim)) ++c;
        });
        return c;
    }

    template <class F>
    void for_each_covering(const Loc& x, F&& f) const
    {
        index.near(x, 0.0, [&](int j) {
            const auto& g = grains[size_t(j)];
            if (grain_covers(model.grain, g.c, g.rho, x, model.dim)) f(j);
        });
    }

    // every point of the closed segment [a, b] lies in at least k grains
    bool segment_covered(const Loc& a, const Loc& b, int k) const
    {
        Loc mid{};
        double half = 0;
        for (int i = 0; i < model.dim; ++i) {
            mid[size_t(i)] = 0.5 * (a[size_t(i)] + b[size_t(i)]);
            half += 0.25 * (b[size_t(i)] - a[size_t(i)]) * (b[size_t(i)] - a[size_t(i)]);
        }
        std::vector<std::pair<double, double>> iv;
        index.near(mid, std::sqrt(half), [&](int j) {
            if (!active[size_t(j)]) return;
            const auto& g = grains[size_t(j)];
            auto t = segment_in_grain(model.grain, g.c, g.rho, a, b, model.dim);
            if (t.first < 1 && t.second > 0 && t.first < t.second) iv.push_back(t);
        });
        if (int(iv.size()) < k) return false;
        // count at every breakpoint and between consecutive breakpoints
        std::vector<double> ts{0.0, 1.0};
        for (auto& [lo, hi] : iv) {
            if (lo > 0) ts.push_back(lo);
            if (hi < 1) ts.push_back(hi);
        }
        std::sort(ts.begin(), ts.end());
        auto count = [&](double t) {
            int c = 0;
            for (auto& [lo, hi] : iv) c += lo < t && t < hi;
            return c;
        };
        for (size_t i = 0; i < ts.size(); ++i) {
            if (count(ts[i]) < k) return false;
            if (i + 1 < ts.size() && count(0.5 * (ts[i] + ts[i + 1])) < k) return false;
        }
        return true;
    }

    // raster of covering counts on the clip box
    Raster coverage_raster(double h) const
    {
        if (!clip) throw Error("percolation", "raster needs a clip box");
        Raster r(*clip, h);
        std::vector<int> cnt(r.size(), 0);
        for (size_t id = 0; id < grains.size(); ++id) {
            if (!active[id]) continue;
            const auto& g = grains[id];
            std::array<std::pair<int, int>, 3> rg{{{0, 0}, {0, 0}, {0, 0}}};
            for (int a = 0; a < model.dim; ++a) rg[size_t(a)] = r.range(a, g.c[size_t(a)] - g.rho, g.c[size_t(a)] + g.rho);
            for (int k = rg[2].first; k <= rg[2].second; ++k)
                for (int j = rg[1].first; j <= rg[1].second; ++j)
                    for (int i = rg[0].first; i <= rg[0].second; ++i)
                        if (grain_covers(model.grain, g.c, g.rho, r.center(i, j, k), model.dim)) ++cnt[r.idx(i, j, k)];
        }
        for (size_t i = 0; i < r.size(); ++i) r.val[i] = (unsigned char)std::min(cnt[i], 255);
        return r;
    }

private:
    UnionFind uf_;
};

inline bool is_k_covered(const BooleanWorld& w, const Loc& x) { return w.covering_count(x) >= w.model.k; }

// Raster crossing for any k: cell centres must be k-covered and a step
// between neighbours needs the whole segment joining their centres k-covered,
// so a raster path is always a path in the k-covered region.
inline bool raster_crossing_of(const BooleanWorld& w, double h, int axis = 0)
{
    Raster r = w.coverage_raster(h);
    std::vector<char> open(r.size());
    for (size_t i = 0; i < r.size(); ++i) open[i] = r.val[i] >= w.model.k ? 1 : 0;
    auto edge = [&](const std::array<int, 3>& p, const std::array<int, 3>& q) {
        return w.segment_covered(r.center(p[0], p[1], p[2]), r.center(q[0], q[1], q[2]), w.model.k);
    };
    // boundary cells connect to the face along the normal through their centre
    auto face = [&](const std::array<int, 3>& p, int side) {
        Loc c = r.center(p[0], p[1], p[2]), f = c;
        f[size_t(axis)] = side == 0 ? r.box.lo[size_t(axis)] : r.box.hi[size_t(axis)];
        return w.segment_covered(f, c, w.model.k);
    };
    return raster_crossing(r, open, axis, edge, face);
}

// Left-right (along `axis`) crossing of the clip box inside the k-covered region.
inline bool crossing(BooleanWorld& w, int axis = 0)
{
    if (!w.clip) throw Error("percolation", "crossing needs the rectangle as clip box");
    const Box& R = *w.clip;
    if (w.model.k == 1) {
        Box f0 = R.face(axis, 0), f1 = R.face(axis, 1);
        std::vector<char> left(w.grains.size(), 0);
        for (int i = 0; i < int(w.grains.size()); ++i) {
            if (!w.active[size_t(i)]) continue;
            const auto& g = w.grains[size_t(i)];
            if (grain_meets_box(w.model.grain, g.c, g.rho, f0)) left[w.component(i)] = 1;
        }
        for (int i = 0; i < int(w.grains.size()); ++i) {
            if (!w.active[size_t(i)]) continue;
            const auto& g = w.grains[size_t(i)];
            if (left[w.component(i)] && grain_meets_box(w.model.grain, g.c, g.rho, f1)) return true;
        }
        return false;
    }
    return raster_crossing_of(w, w.model.resolution(), axis);
}

inline PointConfig sample_boolean(const BooleanModel& m, const Box& rect, RngStream& rng)
{
    return sample_poisson(m.intensity(), m.window(rect), rng);
}

// Points with aux < g/gmax form a Poisson process of intensity g; using the
// same draw for every g couples all intensities monotonically.
inline PointConfig thin_to(const PointConfig& c, double g, double gmax)
{
    return restrict(c, [q = g / gmax](const Point& p) { return p.aux < q; });
}

inline Functional crossing_functional(const BooleanModel& m, const Box& rect, int axis = 0)
{
    return {"crossing", [m, rect, axis](const PointConfig& c) {
                BooleanWorld w(c, m, rect);
                return crossing(w, axis) ? 1.0 : 0.0;
            },
            1.0};
}

// ---------------------------------------------------------------- exploration

// Seed set L = {x_axis = s} ∩ R.
inline Box seed_line(const Box& rect, double s, int axis = 0)
{
    Box L = rect;
    L.lo[size_t(axis)] = L.hi[size_t(axis)] = s;
    return L;
}

struct ExplorationResult {
    std::vector<int> round;  // round in which a grain joined S (0 = never)
    int rounds = 0;          // index of the last round that added grains
    std::vector<int> members;
};

// Discrete rounds: S_1 = grains meeting L inside R; S_{m+1} adds the grains
// meeting S_m inside R. Stops at the first m with S_{m+1} = S_m.
inline ExplorationResult explore_from_line(const BooleanWorld& w, const Box& L)
{
    ExplorationResult res;
    size_t n = w.grains.size();
    res.round.assign(n, 0);
    std::vector<int> frontier;
    for (int i = 0; i < int(n); ++i) {
        if (!w.active[size_t(i)]) continue;
        const auto& g = w.grains[size_t(i)];
        if (grain_meets_box(w.model.grain, g.c, g.rho, L)) {
            res.round[size_t(i)] = 1;
            frontier.push_back(i);
        }
    }
    int m = frontier.empty() ? 0 : 1;
    const size_t cap = n + 2;
    while (!frontier.empty()) {
        if (size_t(m) > cap) throw Error("stopping", "exploration did not reach a fixed point within the iteration cap");
        std::vector<int> next;
        for (int i : frontier) {
            const auto& g = w.grains[size_t(i)];
            w.index.near(g.c, g.rho, [&](int j) {
                if (res.round[size_t(j)] == 0 && w.active[size_t(j)] && w.meets(i, j)) {
                    res.round[size_t(j)] = m + 1;
                    next.push_back(j);
                }
            });
        }
        res.members.insert(res.members.end(), frontier.begin(), frontier.end());
        if (next.empty()) break;
        frontier.swap(next);
        ++m;
    }
    res.rounds = m;
    return res;
}

// Z = (S ∪ L) ⊕ B_r with S the union of the components of O ∩ R meeting L.
inline StoppingSetOracle line_exploration(const BooleanModel& m, const Box& rect, double s, int axis = 0)
{
    if (m.k != 1) throw Error("stopping", "line exploration is implemented for k = 1");
    StoppingSetOracle z;
    z.name = "line-exploration";
    double r = m.r_max();
    z.support_hint = rect.padded(r);
    Box L = seed_line(rect, s, axis);
    auto make = [m, rect, L, r](const PointConfig& mu) {
        auto w = std::make_shared<BooleanWorld>(mu, m, rect, false);
        auto ex = explore_from_line(*w, L);
        auto inS = std::make_shared<std::vector<char>>(w->grains.size(), 0);
        for (int i : ex.members) (*inS)[size_t(i)] = 1;
        return Membership([w, inS, L, r, rect](const Point& x) {
            if (L.dist2(x.x) <= r * r) return true;
            bool hit = false;
            w->index.near(x.x, r, [&](int j) {
                if (hit || !(*inS)[size_t(j)]) return;
                const auto& g = w->grains[size_t(j)];
                if (ball_meets_grain_in_box(x.x, r, w->model.grain, g.c, g.rho, rect)) hit = true;
            });
            return hit;
        });
    };
    z.at = make;
    return z;
}

// Y uniform on (0, κn) along the crossing axis.
inline RandomizedStoppingSet randomized_line_exploration(const BooleanModel& m, const Box& rect, int axis = 0)
{
    double len = rect.side(axis), lo = rect.lo[size_t(axis)];
    return randomize(
        "line-exploration(Y)", [m, rect, axis](double y) { return line_exploration(m, rect, y, axis); },
        [lo, len](RngStream& rng) { return lo + len * rng.uniform_pos(); }, rect.padded(m.r_max()));
}

// Continuous-time wrapper around the rounds. With E_0 = L and
// E_m = (S_{m-1} ∪ L) ⊕ B_r, for t in [m, m+1):
//   Z_t = E_m ∪ ((S_m ∪ L) ⊕ B_{r (t-m)}).
inline CTDT exploration_ctdt(const BooleanModel& m, const Box& rect, double s, int axis = 0, double t_max = 1000)
{
    CTDT c;
    c.name = "line-exploration-ctdt";
    c.t_max = t_max;
    double r = m.r_max();
    c.support_hint = rect.padded(r);
    Box L = seed_line(rect, s, axis);
    c.at = [m, rect, L, r](const PointConfig& mu) {
        auto w = std::make_shared<BooleanWorld>(mu, m, rect, false);
        auto ex = std::make_shared<ExplorationResult>(explore_from_line(*w, L));
        return std::function<bool(double, const Point&)>([w, ex, L, r, rect](double t, const Point& x) {
            int mr = std::isinf(t) ? ex->rounds + 2 : int(std::floor(t));
            double frac = std::isinf(t) ? 1.0 : t - mr;
            auto within = [&](double rad, int max_round) {
                if (rad <= 0) return L.contains(x.x) && rad == 0;
                if (L.dist2(x.x) <= rad * rad) return true;
                bool hit = false;
                w->index.near(x.x, rad, [&](int j) {
                    int jr = ex->round[size_t(j)];
                    if (hit || jr == 0 || jr > max_round) return;
                    const auto& g = w->grains[size_t(j)];
                    if (ball_meets_grain_in_box(x.x, rad, w->model.grain, g.c, g.rho, rect)) hit = true;
                });
                return hit;
            };
            if (mr >= 1 && within(r, mr - 1)) return true;
            return within(r * frac, mr);
        });
    };
    return c;
}

// ---------------------------------------------------------------- arms

// Component of the grains selected by `seed` reaches `reach(g) >= s`.
template <class Seed, class Reach>
bool seeded_reach(const BooleanWorld& w, Seed&& seed, Reach&& reach, double s)
{
    size_t n = w.grains.size();
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (int i = 0; i < int(n); ++i)
        if (w.active[size_t(i)] && seed(w.grains[size_t(i)])) {
            seen[size_t(i)] = 1;
            stack.push_back(i);
        }
    while (!stack.empty()) {
        int i = stack.back();
        stack.pop_back();
        const auto& g = w.grains[size_t(i)];
        if (reach(g) >= s) return true;
        w.index.near(g.c, g.rho, [&](int j) {
            if (!seen[size_t(j)] && w.active[size_t(j)] && w.meets(i, j)) {
                seen[size_t(j)] = 1;
                stack.push_back(j);
            }
        });
    }
    return false;
}

// 0 ↔ ∂B_s(0) (Euclidean)
inline bool origin_reaches(const BooleanWorld& w, double s)
{
    Loc o{};
    int dim = w.model.dim;
    auto kind = w.model.grain;
    return seeded_reach(
        w, [&](const Grain& g) { return grain_covers(kind, g.c, g.rho, o, dim); }, [&](const Grain& g) { return grain_reach(kind, g.c, g.rho, dim); },
        s);
}

// B^∞_r(0) ↔ ∂B^∞_s(0)
inline bool box_arm(const BooleanWorld& w, double r, double s)
{
    int dim = w.model.dim;
    auto kind = w.model.grain;
    Box inner = Box::cube(dim, -r, r);
    return seeded_reach(
        w, [&](const Grain& g) { return grain_meets_box(kind, g.c, g.rho, inner); }, [&](const Grain& g) { return grain_reach_inf(g.c, g.rho, dim); }, s);
}

inline Estimate bernoulli_estimate(const std::vector<char>& v)
{
    double n = double(v.size()), k = 0;
    for (char c : v) k += c;
    double p = n > 0 ? k / n : 0;
    return {p, n > 1 ? std::sqrt(p * (1 - p) / (n - 1)) : 0.0};
}

inline Estimate arm_probability(const BooleanModel& m, double r, double s, size_t samples, uint64_t seed, double max_extent = 1e3)
{
    if (!(r < s)) throw Error("percolation", "arm event needs r < s");
    if (s + m.r_max() > max_extent) throw Error("percolation", "arm event exceeds the simulation window");
    Box win = Box::cube(m.dim, -s, s);
    std::vector<char> hit(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        auto cfg = sample_boolean(m, win, rng);
        BooleanWorld w(cfg, m, std::nullopt, false);
        hit[i] = box_arm(w, r, s) ? 1 : 0;
    });
    return bernoulli_estimate(hit);
}

inline Estimate one_arm(const BooleanModel& m, double s, size_t samples, uint64_t seed, double max_extent = 1e3)
{
    if (!(s > 0)) throw Error("percolation", "one-arm radius must be positive");
    if (s + m.r_max() > max_extent) throw Error("percolation", "one-arm event exceeds the simulation window");
    Box win = Box::cube(m.dim, -s, s);
    std::vector<char> hit(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        auto cfg = sample_boolean(m, win, rng);
        BooleanWorld w(cfg, m, std::nullopt, false);
        hit[i] = origin_reaches(w, s) ? 1 : 0;
    });
    return bernoulli_estimate(hit);
}

namespace detail {

// Poisson grains with centres in the shell r_in <= |c| < r_out.
inline void add_shell(std::vector<Grain>& out, const BooleanModel& m, double r_in, double r_out, RngStream& rng)
{
    int d = m.dim;
    double vol = unit_ball_volume(d) * (std::pow(r_out, d) - std::pow(r_in, d));
    int64_t n = rng.poisson(m.gamma * vol);
    std::normal_distribution<double> nd;
    for (int64_t i = 0; i < n; ++i) {
        double u = rng.uniform();
        double rad = std::pow(std::pow(r_in, d) + u * (std::pow(r_out, d) - std::pow(r_in, d)), 1.0 / d);
        Loc dir{};
        double nn = 0;
        do {
            nn = 0;
            for (int k = 0; k < d; ++k) {
                dir[size_t(k)] = d == 1 ? (rng.uniform() < 0.5 ? -1.0 : 1.0) : nd(rng);
                nn += dir[size_t(k)] * dir[size_t(k)];
            }
        } while (nn == 0);
        nn = std::sqrt(nn);
        Grain g;
        for (int k = 0; k < d; ++k) g.c[size_t(k)] = rad * dir[size_t(k)] / nn;
        g.rho = m.radius.sample(rng);
        out.push_back(g);
    }
}

inline bool particle_reaches(const std::vector<Grain>& gs, const BooleanModel& m, double s)
{
    PointConfig cfg;
    double ext = s + m.r_max();
    cfg.window = Window::make_box(Box::cube(m.dim, -ext, ext));
    BooleanWorld w(cfg, m, std::nullopt, false);
    for (auto& g : gs) w.add_grain(g);
    return origin_reaches(w, s);
}

}  // namespace detail

struct ArmDecay {
    std::vector<double> s;
    std::vector<Estimate> theta;
    LinearFit fit;  // log θ_s against s
    size_t particles = 0, runs = 0;
};

// θ_s along an increasing list of radii by sequential splitting. Given
// {0 ↔ ∂B_s}, which depends only on grains centred in B_{s+r}, the grains
// further out are still Poisson; each level extends the surviving
// configurations by a fresh shell, and the product of survival fractions is
// an unbiased estimate of θ.
inline ArmDecay one_arm_decay(const BooleanModel& m, const std::vector<double>& s_values, size_t particles, size_t runs, uint64_t seed)
{
    if (s_values.empty()) throw Error("percolation", "no radii given");
    for (size_t i = 1; i < s_values.size(); ++i)
        if (!(s_values[i] > s_values[i - 1])) throw Error("percolation", "radii must increase");
    if (!m.radius.bounded()) throw Error("percolation", "one-arm splitting needs bounded radii");
    double r = m.r_max();
    size_t L = s_values.size();
    std::vector<std::vector<double>> est(runs, std::vector<double>(L, 0.0));
    parallel_for(runs, [&](size_t run) {
        RngStream rng(seed, run);
        std::vector<std::vector<Grain>> pop(particles);
        double theta = 1;
        double prev_outer = 0;
        for (size_t lv = 0; lv < L; ++lv) {
            double s = s_values[lv], outer = s + r;
            std::vector<char> ok(particles, 0);
            size_t alive = 0;
            for (size_t p = 0; p < particles; ++p) {
                detail::add_shell(pop[p], m, prev_outer, outer, rng);
                ok[p] = detail::particle_reaches(pop[p], m, s) ? 1 : 0;
                alive += size_t(ok[p]);
            }
            theta *= double(alive) / double(particles);
            est[run][lv] = theta;
            if (alive == 0) break;
            std::vector<size_t> good;
            for (size_t p = 0; p < particles; ++p)
                if (ok[p]) good.push_back(p);
            std::vector<std::vector<Grain>> next(particles);
            for (size_t p = 0; p < particles; ++p) next[p] = pop[good[rng.below(good.size())]];
            pop.swap(next);
            prev_outer = outer;
        }
    });
    ArmDecay out;
    out.s = s_values;
    out.particles = particles;
    out.runs = runs;
    std::vector<double> xs, ys;
    for (size_t lv = 0; lv < L; ++lv) {
        Accumulator a;
        for (size_t run = 0; run < runs; ++run) a.add(est[run][lv]);
        out.theta.push_back(a.estimate());
        if (a.mean() > 0) {
            xs.push_back(s_values[lv]);
            ys.push_back(std::log(a.mean()));
        }
    }
    if (xs.size() >= 3) out.fit = linear_fit(xs, ys);
    return out;
}

// ---------------------------------------------------------------- scans

struct ScanRow {
    double param = 0;
    double n = 0;
    Estimate estimate;
    size_t samples = 0;
    uint64_t seed = 0;
};

struct ThresholdScan {
    std::string event;
    std::vector<ScanRow> rows;
    std::optional<ArmDecay> decay;
};

inline void write_scan_csv(const ThresholdScan& s, std::ostream& os)
{
    os << "param,n,estimate,se,samples,seed\n" << std::setprecision(12);
    for (auto& r : s.rows) os << r.param << ',' << r.n << ',' << r.estimate.value << ',' << r.estimate.se << ',' << r.samples << ',' << r.seed << '\n';
}

// Crossing probability of [0,κn] x [0,n]^{d-1} over a grid of intensities
// with one coupled sample per replica at the largest intensity.
inline ThresholdScan threshold_scan(const BooleanModel& m, std::vector<double> grid, double n, size_t samples, uint64_t seed, double kappa = 1)
{
    if (grid.empty()) throw Error("percolation", "empty parameter grid");
    if (!std::is_sorted(grid.begin(), grid.end())) throw Error("percolation", "parameter grid must be sorted");
    double gmax = grid.back();
    if (!(gmax > 0)) throw Error("percolation", "intensities must be positive");
    Box rect = Box::rectangle(m.dim, kappa * n, n);
    std::vector<std::vector<char>> hit(grid.size(), std::vector<char>(samples));
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        auto full = sample_boolean(m.with_gamma(gmax), rect, rng);
        for (size_t g = 0; g < grid.size(); ++g) {
            BooleanWorld w(thin_to(full, grid[g], gmax), m.with_gamma(grid[g]), rect);
            hit[g][i] = crossing(w) ? 1 : 0;
        }
    });
    ThresholdScan out;
    out.event = "crossing";
    for (size_t g = 0; g < grid.size(); ++g) out.rows.push_back({grid[g], n, bernoulli_estimate(hit[g]), samples, seed});
    return out;
}

struct CriticalEstimate {
    double value = 0, se = 0, ci_lo = 0, ci_hi = 0;
    double n = 0;
    std::vector<std::pair<double, Estimate>> trace;
};

// hits[i][g]: event indicator of replica i at grid[g], all grid values
// evaluated on one monotone-coupled sample per replica
using CoupledIndicator = std::function<std::vector<std::vector<char>>(const std::vector<double>& grid, size_t samples, uint64_t seed)>;

// Stochastic bisection for P = 1/2 with growing sample sizes, then a local
// linear fit on a coupled 7-point grid, with a replica bootstrap for the SE.
inline CriticalEstimate bisect_critical(const CoupledIndicator& ind, double n, double lo, double hi, double tol, size_t samples, uint64_t seed)
{
    if (!(lo < hi)) throw Error("percolation", "bracket must satisfy lo < hi");
    CriticalEstimate ce;
    ce.n = n;
    auto prob = [&](double g, size_t N, uint64_t sd) {
        auto h = ind({g}, N, sd);
        std::vector<char> v(N);
        for (size_t i = 0; i < N; ++i) v[i] = h[i][0];
        return bernoulli_estimate(v);
    };
    auto plo = prob(lo, samples, hash_combine(seed, 1)), phi = prob(hi, samples, hash_combine(seed, 2));
    ce.trace.push_back({lo, plo});
    ce.trace.push_back({hi, phi});
    if (!(plo.value < 0.5 && phi.value > 0.5)) throw Error("percolation", "bracket invalid: crossing probability does not straddle 1/2");
    double N = double(samples);
    uint64_t it = 3;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        auto p = prob(mid, size_t(N), hash_combine(seed, it++));
        ce.trace.push_back({mid, p});
        if (p.value < 0.5)
            lo = mid;
        else
            hi = mid;
        N = std::min(N * 1.5, 8.0 * double(samples));
    }
    double mid = 0.5 * (lo + hi), w = std::max(4 * (hi - lo), 0.04 * mid);
    const int G = 7;
    std::vector<double> grid(G);
    for (int g = 0; g < G; ++g) grid[size_t(g)] = mid - w + 2 * w * g / (G - 1);
    size_t Nf = size_t(4 * samples);
    auto rows = ind(grid, Nf, hash_combine(seed, 999));
    auto root = [&](const std::vector<size_t>& idx) {
        std::vector<double> p(G, 0.0);
        for (size_t i : idx)
            for (int g = 0; g < G; ++g) p[size_t(g)] += rows[i][size_t(g)];
        for (auto& v : p) v /= double(idx.size());
        auto f = linear_fit(grid, p);
        return f.slope > 0 ? (0.5 - f.intercept) / f.slope : mid;
    };
    std::vector<size_t> all(Nf);
    std::iota(all.begin(), all.end(), 0);
    ce.value = root(all);
    Accumulator boot;
    RngStream br(seed, 0, 77);
    for (int b = 0; b < 200; ++b) {
        std::vector<size_t> idx(Nf);
        for (auto& v : idx) v = br.below(Nf);
        boot.add(root(idx));
    }
    ce.se = std::sqrt(boot.variance());
    ce.ci_lo = ce.value - 1.96 * ce.se;
    ce.ci_hi = ce.value + 1.96 * ce.se;
    return ce;
}

inline CoupledIndicator boolean_crossing_indicator(const BooleanModel& m, double n, double kappa = 1)
{
    return [m, n, kappa](const std::vector<double>& grid, size_t samples, uint64_t seed) {
        double gmax = grid.back();
        Box rect = Box::rectangle(m.dim, kappa * n, n);
        std::vector<std::vector<char>> rows(samples, std::vector<char>(grid.size()));
        parallel_for(samples, [&](size_t i) {
            RngStream rng(seed, i);
            auto full = sample_boolean(m.with_gamma(gmax), rect, rng);
            for (size_t g = 0; g < grid.size(); ++g) {
                BooleanWorld wd(thin_to(full, grid[g], gmax), m.with_gamma(grid[g]), rect);
                rows[i][g] = crossing(wd) ? 1 : 0;
            }
        });
        return rows;
    };
}

inline CriticalEstimate estimate_critical(const BooleanModel& m, double n, double lo, double hi, double tol, size_t samples, uint64_t seed,
                                          double kappa = 1)
{
    if (!(m.radius.max_radius() > 0)) throw Error("percolation", "grains of radius zero never percolate");
    return bisect_critical(boolean_crossing_indicator(m, n, kappa), n, lo, hi, tol, samples, seed);
}

// ---------------------------------------------------------------- confetti

enum class Adjacency {
    black8_white4,   // black paths may step diagonally, white paths may not
    center_resolved  // a diagonal step in a checkerboard 2x2 block belongs to the colour at the block centre
};

struct ConfettiModel {
    double p = 0.5;
    RadiusLaw black = RadiusLaw::fixed(1.0), white = RadiusLaw::fixed(1.0);
    double horizon = 0;  // 0: default rule
    double h = 0.1;      // raster resolution
    Adjacency adjacency = Adjacency::black8_white4;

    MarkLaw marks() const { return MarkLaw::confetti(p, black, white, horizon); }
    double r_max() const { return std::max(black.max_radius(), white.max_radius()); }
    double time_horizon() const { return horizon > 0 ? horizon : confetti_default_horizon(marks(), 2); }
};

struct ConfettiWorld {
    Box rect;
    Raster raster;                // val: 0 black, 1 white, 2 uncoloured
    std::vector<Point> grains;    // in order of arrival
    Adjacency adjacency = Adjacency::black8_white4;
    double stop_time = 0;

    // colour at an arbitrary location: first grain covering it
    int color_at(const Loc& x) const
    {
        for (const auto& g : grains)
            if (dist2(g.x, x, 2) < g.radius * g.radius) return int(g.color);
        return 2;
    }
};

namespace detail {

inline size_t paint(Raster& r, const Point& g)
{
    size_t newly = 0;
    auto [i0, i1] = r.range(0, g.x[0] - g.radius, g.x[0] + g.radius);
    auto [j0, j1] = r.range(1, g.x[1] - g.radius, g.x[1] + g.radius);
    double r2 = g.radius * g.radius;
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            size_t id = r.idx(i, j);
            if (r.val[id] != 2) continue;
            if (dist2(r.center(i, j), g.x, 2) < r2) {
                r.val[id] = (unsigned char)g.color;
                ++newly;
            }
        }
    return newly;
}

}  // namespace detail

// Grains arrive in time order (unit space-time intensity on R ⊕ r); each
// cell takes the colour of the first grain covering its centre. Generation
// stops once every cell is coloured, since later grains change nothing.
inline ConfettiWorld sample_confetti(const ConfettiModel& cm, const Box& rect, RngStream& rng)
{
    if (rect.dim != 2) throw Error("percolation", "confetti is planar");
    ConfettiWorld w;
    w.rect = rect;
    w.adjacency = cm.adjacency;
    w.raster = Raster(rect, cm.h);
    std::fill(w.raster.val.begin(), w.raster.val.end(), (unsigned char)2);
    Box win = rect.padded(cm.r_max());
    double rate = win.volume(), H = cm.time_horizon(), t = 0;
    size_t uncoloured = w.raster.size();
    while (uncoloured > 0) {
        t += rng.exponential(rate);
        if (t > H)
            throw Error("percolation", "confetti horizon " + std::to_string(H) + " reached with uncoloured cells; a larger horizon is required");
        Point g;
        g.kind = MarkKind::spacetime;
        g.x = {rng.uniform(win.lo[0], win.hi[0]), rng.uniform(win.lo[1], win.hi[1]), 0};
        g.birth = t;
        // colour from aux so that runs at different p share every grain
        g.aux = rng.uniform();
        bool black = g.aux < cm.p;
        g.color = black ? Color::black : Color::white;
        RngStream rr = rng.child(w.grains.size());
        g.radius = black ? cm.black.sample(rr) : cm.white.sample(rr);
        w.grains.push_back(g);
        uncoloured -= detail::paint(w.raster, g);
    }
    w.stop_time = t;
    return w;
}

// From an explicit space-time configuration.
inline ConfettiWorld build_confetti(const PointConfig& cfg, const Box& rect, double h, Adjacency adj = Adjacency::black8_white4)
{
    ConfettiWorld w;
    w.rect = rect;
    w.adjacency = adj;
    w.raster = Raster(rect, h);
    std::fill(w.raster.val.begin(), w.raster.val.end(), (unsigned char)2);
    w.grains = cfg.points;
    std::stable_sort(w.grains.begin(), w.grains.end(), [](const Point& a, const Point& b) { return a.birth < b.birth; });
    size_t unc = w.raster.size();
    for (const auto& g : w.grains) {
        if (unc == 0) break;
        unc -= detail::paint(w.raster, g);
        w.stop_time = g.birth;
    }
    if (unc > 0) throw Error("percolation", std::to_string(unc) + " uncoloured cells; the configuration needs a larger horizon");
    return w;
}

// Crossing by colour c: along axis 0 (left-right) or 1 (top-down).
inline bool confetti_crossing(const ConfettiWorld& w, Color c, int axis)
{
    const Raster& r = w.raster;
    int nx = r.n[0], ny = r.n[1];
    unsigned char col = (unsigned char)c;
    bool diag_always = w.adjacency == Adjacency::black8_white4 && c == Color::black;
    std::vector<signed char> center_cache;
    if (w.adjacency == Adjacency::center_resolved) center_cache.assign(size_t(nx) * size_t(ny), -1);
    auto diag_ok = [&](int i, int j, int di, int dj) {
        if (diag_always) return true;
        if (w.adjacency == Adjacency::black8_white4) return false;
        // block spanned by (i,j) and (i+di, j+dj)
        int bi = std::min(i, i + di), bj = std::min(j, j + dj);
        size_t key = size_t(bj) * size_t(nx) + size_t(bi);
        if (center_cache[key] < 0) {
            Loc a = r.center(bi, bj), b = r.center(bi + 1, bj + 1);
            int cc = w.color_at({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0});
            // painting stops once cell centres are coloured, so a corner can still be bare
            if (cc == 2) cc = r.val[r.idx(bi, bj)];
            center_cache[key] = (signed char)cc;
        }
        return center_cache[key] == col;
    };
    std::vector<char> seen(r.size(), 0);
    std::vector<std::pair<int, int>> st;
    for (int t = 0; t < (axis == 0 ? ny : nx); ++t) {
        int i = axis == 0 ? 0 : t, j = axis == 0 ? t : 0;
        size_t id = r.idx(i, j);
        if (r.val[id] == col) {
            seen[id] = 1;
            st.push_back({i, j});
        }
    }
    while (!st.empty()) {
        auto [i, j] = st.back();
        st.pop_back();
        if ((axis == 0 && i == nx - 1) || (axis == 1 && j == ny - 1)) return true;
        for (int dj = -1; dj <= 1; ++dj)
            for (int di = -1; di <= 1; ++di) {
                if (di == 0 && dj == 0) continue;
                int a = i + di, b = j + dj;
                if (a < 0 || b < 0 || a >= nx || b >= ny) continue;
                size_t id = r.idx(a, b);
                if (seen[id] || r.val[id] != col) continue;
                if (di != 0 && dj != 0) {
                    // only a diagonal step across a checkerboard block needs the rule
                    bool side1 = r.val[r.idx(i + di, j)] == col, side2 = r.val[r.idx(i, j + dj)] == col;
                    if (!side1 && !side2 && !diag_ok(i, j, di, dj)) continue;
                }
                seen[id] = 1;
                st.push_back({a, b});
            }
    }
    return false;
}

// Exactly one of (black left-right crossing, white top-down crossing).
inline bool confetti_duality_check(const ConfettiWorld& w)
{
    bool b = confetti_crossing(w, Color::black, 0), wt = confetti_crossing(w, Color::white, 1);
    return b != wt;
}

// Black left-right crossing of [0,n]^2, coupled across p through the grain tags.
inline CoupledIndicator confetti_crossing_indicator(const ConfettiModel& cm, double n)
{
    return [cm, n](const std::vector<double>& grid, size_t samples, uint64_t seed) {
        Box rect = Box::rectangle(2, n, n);
        std::vector<std::vector<char>> rows(samples, std::vector<char>(grid.size()));
        parallel_for(samples, [&](size_t i) {
            for (size_t g = 0; g < grid.size(); ++g) {
                ConfettiModel c = cm;
                c.p = grid[g];
                RngStream rng(seed, i);
                rows[i][g] = confetti_crossing(sample_confetti(c, rect, rng), Color::black, 0) ? 1 : 0;
            }
        });
        return rows;
    };
}

inline ThresholdScan confetti_scan(const ConfettiModel& cm, std::vector<double> grid, double n, size_t samples, uint64_t seed)
{
    if (grid.empty()) throw Error("percolation", "empty parameter grid");
    if (!std::is_sorted(grid.begin(), grid.end())) throw Error("percolation", "parameter grid must be sorted");
    auto rows = confetti_crossing_indicator(cm, n)(grid, samples, seed);
    ThresholdScan out;
    out.event = "confetti-crossing";
    for (size_t g = 0; g < grid.size(); ++g) {
        std::vector<char> v(samples);
        for (size_t i = 0; i < samples; ++i) v[i] = rows[i][g];
        out.rows.push_back({grid[g], n, bernoulli_estimate(v), samples, seed});
    }
    return out;
}

inline CriticalEstimate estimate_critical_confetti(const ConfettiModel& cm, double n, double lo, double hi, double tol, size_t samples, uint64_t seed)
{
    if (!(lo >= 0 && hi <= 1)) throw Error("percolation", "confetti bracket must lie in [0,1]");
    return bisect_critical(confetti_crossing_indicator(cm, n), n, lo, hi, tol, samples, seed);
}

// ---------------------------------------------------------------- unbounded radii

struct TruncationReport {
    double r_n = kInf;
    double bound = 0;              // explicit form of the n^{-α+ε(2+α)} bound
    double first_moment_bound = 0; // E #(grains of radius > r_n hitting R)
    size_t removed = 0;
};

// Bound on P(f_n ≠ f'_n) for crossing of R = [0,κn] x [0,n]: the crossings can
// only differ if a grain of radius > r_n hits R, and
//   E#{such grains} = γ ∫_{r_n}^∞ (κn² + 2(κ+1)nρ + πρ²) Q(dρ)
//                   <= γ (κn²/r_n² + 2(κ+1)n/r_n + π) r_n^{-α} ∫_{r_n}^∞ ρ^{2+α} Q(dρ).
// With r_n = n^{1-ε} the leading factor is κ n^{-α+ε(2+α)}.
inline TruncationReport truncation_bound(const RadiusLaw& q, double gamma, double n, double epsilon, double kappa = 1)
{
    TruncationReport rep;
    if (q.bounded()) return rep;
    double a = q.alpha;
    if (!(epsilon > 0 && epsilon < a / (2 + a))) throw Error("percolation", "truncation exponent must satisfy 0 < eps < alpha/(2+alpha)");
    double rn = std::pow(n, 1 - epsilon);
    rep.r_n = rn;
    double lead = kappa * n * n / (rn * rn) + 2 * (kappa + 1) * n / rn + M_PI;
    rep.bound = gamma * lead * std::pow(rn, -a) * q.tail_moment(2 + a, rn);
    rep.first_moment_bound = gamma * (kappa * n * n * q.tail_moment(0, rn) + 2 * (kappa + 1) * n * q.tail_moment(1, rn) + M_PI * q.tail_moment(2, rn));
    return rep;
}

inline std::pair<PointConfig, TruncationReport> truncate_radii(const PointConfig& cfg, const RadiusLaw& q, double gamma, double n, double epsilon,
                                                               double kappa = 1)
{
    auto rep = truncation_bound(q, gamma, n, epsilon, kappa);
    if (q.bounded()) return {cfg, rep};
    PointConfig out = restrict(cfg, [rn = rep.r_n](const Point& p) { return p.radius <= rn; });
    rep.removed = cfg.size() - out.size();
    return {out, rep};
}

// All grains that meet R for a planar model with unbounded radii: grains with
// radius <= t from the padded box, and grains with radius > t sampled exactly
// from the Poisson process of large grains hitting R.
inline PointConfig sample_heavy_tailed(const BooleanModel& m, const Box& rect, double t, RngStream& rng)
{
    if (m.dim != 2) throw Error("percolation", "heavy-tailed sampler is planar");
    Box win = rect.padded(t);
    PointConfig cfg;
    cfg.window = Window::make_box(win);
    int64_t n0 = rng.poisson(m.gamma * win.volume());
    for (int64_t i = 0; i < n0; ++i) {
        Point p;
        p.kind = MarkKind::radius;
        p.x = {rng.uniform(win.lo[0], win.hi[0]), rng.uniform(win.lo[1], win.hi[1]), 0};
        p.radius = m.radius.sample(rng);
        p.aux = rng.uniform();
        if (p.radius <= t) cfg.points.push_back(p);
    }
    double A = rect.volume(), P = 2 * (rect.side(0) + rect.side(1));
    double w0 = A * m.radius.tail_moment(0, t), w1 = P * m.radius.tail_moment(1, t), w2 = M_PI * m.radius.tail_moment(2, t);
    int64_t nl = rng.poisson(m.gamma * (w0 + w1 + w2));
    for (int64_t i = 0; i < nl; ++i) {
        double u = rng.uniform() * (w0 + w1 + w2);
        double j = u < w0 ? 0 : u < w0 + w1 ? 1 : 2;
        double rho = m.radius.sample_tilted_tail(j, t, rng);
        Point p;
        p.kind = MarkKind::radius;
        p.radius = rho;
        p.aux = rng.uniform();
        do {
            p.x = {rng.uniform(rect.lo[0] - rho, rect.hi[0] + rho), rng.uniform(rect.lo[1] - rho, rect.hi[1] + rho), 0};
        } while (!(rect.dist2(p.x) < rho * rho));
        cfg.points.push_back(p);
    }
    // window grows to hold the large grains' centres
    for (auto& p : cfg.points)
        for (int k = 0; k < 2; ++k) {
            cfg.window.box.lo[size_t(k)] = std::min(cfg.window.box.lo[size_t(k)], p.x[size_t(k)]);
            cfg.window.box.hi[size_t(k)] = std::max(cfg.window.box.hi[size_t(k)], p.x[size_t(k)]);
        }
    return cfg;
}

struct TruncationExperiment {
    TruncationReport bound;
    Estimate disagreement;
    size_t samples = 0;
};

inline TruncationExperiment truncation_experiment(const BooleanModel& m, double n, double epsilon, size_t samples, uint64_t seed, double kappa = 1)
{
    TruncationExperiment ex;
    ex.bound = truncation_bound(m.radius, m.gamma, n, epsilon, kappa);
    ex.samples = samples;
    Box rect = Box::rectangle(m.dim, kappa * n, n);
    std::vector<char> diff(samples);
    parallel_for(samples, [&](size_t i) {
        RngStream rng(seed, i);
        auto full = sample_heavy_tailed(m, rect, ex.bound.r_n, rng);
        auto [cut, rep] = truncate_radii(full, m.radius, m.gamma, n, epsilon, kappa);
        BooleanWorld a(full, m, rect), b(cut, m, rect);
        diff[i] = crossing(a) != crossing(b) ? 1 : 0;
    });
    ex.disagreement = bernoulli_estimate(diff);
    return ex;
}

// ---------------------------------------------------------------- misc

// Raster volume of the component of the origin inside the clip box.
inline double component_volume_proxy(BooleanWorld& w, const Loc& origin, double h)
{
    if (!w.clip) throw Error("percolation", "component volume needs a clip box");
    Raster r(*w.clip, h);
    if (w.model.k == 1) {
        std::vector<char> comp(w.grains.size(), 0);
        bool any = false;
        w.for_each_covering(origin, [&](int j) {
            if (w.active[size_t(j)]) {
                comp[w.component(j)] = 1;
                any = true;
            }
        });
        if (!any) return 0;
        std::vector<char> cell(r.size(), 0);
        for (int id = 0; id < int(w.grains.size()); ++id) {
            if (!w.active[size_t(id)] || !comp[w.component(id)]) continue;
            const auto& g = w.grains[size_t(id)];
            std::array<std::pair<int, int>, 3> rg{{{0, 0}, {0, 0}, {0, 0}}};
            for (int a = 0; a < w.model.dim; ++a) rg[size_t(a)] = r.range(a, g.c[size_t(a)] - g.rho, g.c[size_t(a)] + g.rho);
            for (int k = rg[2].first; k <= rg[2].second; ++k)
                for (int j = rg[1].first; j <= rg[1].second; ++j)
                    for (int i = rg[0].first; i <= rg[0].second; ++i)
                        if (grain_covers(w.model.grain, g.c, g.rho, r.center(i, j, k), w.model.dim)) cell[r.idx(i, j, k)] = 1;
        }
        double n = 0;
        for (char c : cell) n += c;
        return n * r.cell_volume();
    }
    if (!is_k_covered(w, origin)) return 0;
    Raster cov = w.coverage_raster(h);
    std::vector<char> open(cov.size());
    for (size_t i = 0; i < cov.size(); ++i) open[i] = cov.val[i] >= w.model.k;
    // flood fill from the cell containing the origin
    std::array<int, 3> s{0, 0, 0};
    for (int a = 0; a < w.model.dim; ++a)
        s[size_t(a)] = std::clamp(int((origin[size_t(a)] - cov.box.lo[size_t(a)]) / cov.spacing(a)), 0, cov.n[size_t(a)] - 1);
    if (!open[cov.idx(s[0], s[1], s[2])]) return 0;
    std::vector<char> seen(cov.size(), 0);
    std::vector<std::array<int, 3>> st{s};
    seen[cov.idx(s[0], s[1], s[2])] = 1;
    double count = 0;
    while (!st.empty()) {
        auto a = st.back();
        st.pop_back();
        ++count;
        for (int ax = 0; ax < w.model.dim; ++ax)
            for (int d = -1; d <= 1; d += 2) {
                auto b = a;
                b[size_t(ax)] += d;
                if (b[size_t(ax)] < 0 || b[size_t(ax)] >= cov.n[size_t(ax)]) continue;
                size_t id = cov.idx(b[0], b[1], b[2]);
                if (open[id] && !seen[id]) {
                    seen[id] = 1;
                    st.push_back(b);
                }
            }
    }
    return count * cov.cell_volume();
}

inline void write_grains_csv(const BooleanWorld& w, std::ostream& os)
{
    os << "x0,x1,x2,radius,active\n" << std::setprecision(12);
    for (size_t i = 0; i < w.grains.size(); ++i) {
        const auto& g = w.grains[i];
        os << g.c[0] << ',' << g.c[1] << ',' << g.c[2] << ',' << g.rho << ',' << int(w.active[i]) << '\n';
    }
}

// Plain-text matrix, one raster row per line (top row first).
inline void write_raster_text(const Raster& r, std::ostream& os)
{
    for (int j = r.n[1] - 1; j >= 0; --j) {
        for (int i = 0; i < r.n[0]; ++i) {
            if (i) os << ' ';
            os << int(r.val[r.idx(i, j)]);
        }
        os << '\n';
    }
}

}  // namespace plab
