#pragma once

// Windows in the internal space: the dual IFS, dyadic box covers of its attractor, the
// projected control points, overlap and boundary statistics, model-set inclusions.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tilecps/cps.hpp"
#include "tilecps/pointset.hpp"

namespace tilecps {

struct DualIFS {
    Eigen::MatrixXd A;                                      ///< linear part, D^power
    std::vector<std::vector<std::vector<InternalVector>>> maps; ///< [i][j]: translations of u -> A u + t
    std::vector<std::vector<std::int64_t>> S_star;           ///< map counts
    double contraction = 0;
    int power = 1;

    std::size_t kappa() const { return maps.size(); }
    std::size_t dim() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t map_count() const
    {
        std::size_t n = 0;
        for (const auto& row : maps)
            for (const auto& cell : row)
                n += cell.size();
        return n;
    }
};

inline DualIFS build_dual_ifs(const DigitSets& digits, const CPSContext& cps)
{
    DualIFS ifs;
    ifs.A = cps.D;
    ifs.contraction = cps.contraction();
    if (!(ifs.contraction < 1))
        throw Error(ErrorCode::NotContractive, "conjugate modulus " + std::to_string(ifs.contraction) + " >= 1");
    const std::size_t kappa = digits.kappa();
    ifs.maps.assign(kappa, std::vector<std::vector<InternalVector>>(kappa));
    ifs.S_star.assign(kappa, std::vector<std::int64_t>(kappa, 0));
    for (std::size_t i = 0; i < kappa; ++i)
        for (std::size_t j = 0; j < kappa; ++j) {
            for (const auto& a : digits(i, j))
                ifs.maps[i][j].push_back(star_map(a, cps));
            ifs.S_star[i][j] = static_cast<std::int64_t>(digits(i, j).size());
        }
    return ifs;
}

/// The r-th power of the IFS: (i, j) collects f_ik o g_kj over k.
inline DualIFS compose(const DualIFS& f, const DualIFS& g)
{
    DualIFS h;
    const std::size_t kappa = f.kappa();
    h.A = f.A * g.A;
    h.contraction = f.contraction * g.contraction;
    h.power = f.power + g.power;
    h.maps.assign(kappa, std::vector<std::vector<InternalVector>>(kappa));
    h.S_star.assign(kappa, std::vector<std::int64_t>(kappa, 0));
    for (std::size_t i = 0; i < kappa; ++i)
        for (std::size_t j = 0; j < kappa; ++j)
            for (std::size_t k = 0; k < kappa; ++k)
                for (const auto& t2 : g.maps[k][j]) {
                    const InternalVector moved = f.A * t2;
                    for (const auto& t1 : f.maps[i][k])
                        h.maps[i][j].push_back(t1 + moved);
                }
    for (std::size_t i = 0; i < kappa; ++i)
        for (std::size_t j = 0; j < kappa; ++j)
            h.S_star[i][j] = static_cast<std::int64_t>(h.maps[i][j].size());
    return h;
}

// ---------------------------------------------------------------------------
// Dyadic grids
// ---------------------------------------------------------------------------

constexpr std::size_t kMaxDim = 3;
using CellCoord = std::array<std::int64_t, kMaxDim>;

/// Cells [c h, (c+1) h) per axis, h = 2^-depth, restricted to the box lo <= c < lo + ext.
struct CellGrid {
    int depth = 0;
    std::size_t dim = 1;
    CellCoord lo{0, 0, 0};
    CellCoord ext{1, 1, 1};

    double cell() const { return std::ldexp(1.0, -depth); }
    double cell_volume() const { return std::pow(cell(), static_cast<double>(dim)); }
    std::size_t size() const { return static_cast<std::size_t>(ext[0] * ext[1] * ext[2]); }

    bool inside(const CellCoord& c) const
    {
        for (std::size_t d = 0; d < kMaxDim; ++d)
            if (c[d] < lo[d] || c[d] >= lo[d] + ext[d])
                return false;
        return true;
    }
    std::size_t index(const CellCoord& c) const
    {
        return static_cast<std::size_t>(((c[2] - lo[2]) * ext[1] + (c[1] - lo[1])) * ext[0] + (c[0] - lo[0]));
    }
    CellCoord coords(std::size_t idx) const
    {
        CellCoord c{0, 0, 0};
        auto k = static_cast<std::int64_t>(idx);
        c[0] = lo[0] + k % ext[0];
        k /= ext[0];
        c[1] = lo[1] + k % ext[1];
        c[2] = lo[2] + k / ext[1];
        return c;
    }
    CellCoord locate(const InternalVector& u) const
    {
        CellCoord c{0, 0, 0};
        for (std::size_t d = 0; d < dim; ++d)
            c[d] = static_cast<std::int64_t>(std::floor(u[static_cast<Eigen::Index>(d)] / cell()));
        return c;
    }
    InternalVector center(const CellCoord& c) const
    {
        InternalVector u(static_cast<Eigen::Index>(dim));
        for (std::size_t d = 0; d < dim; ++d)
            u[static_cast<Eigen::Index>(d)] = (static_cast<double>(c[d]) + 0.5) * cell();
        return u;
    }
};

/// Smallest grid at the given depth containing the box [lo, hi] plus `pad` cells.
inline CellGrid grid_for_box(std::size_t dim, int depth, const InternalVector& lo, const InternalVector& hi, int pad)
{
    if (dim == 0 || dim > kMaxDim)
        throw Error(ErrorCode::Unsupported, "internal dimension " + std::to_string(dim) + " (supported: 1..3)");
    CellGrid g;
    g.depth = depth;
    g.dim = dim;
    const double h = g.cell();
    for (std::size_t d = 0; d < dim; ++d) {
        const auto a = static_cast<std::int64_t>(std::floor(lo[static_cast<Eigen::Index>(d)] / h)) - pad;
        const auto b = static_cast<std::int64_t>(std::floor(hi[static_cast<Eigen::Index>(d)] / h)) + pad;
        g.lo[d] = a;
        g.ext[d] = b - a + 1;
    }
    return g;
}

using CellSet = std::vector<std::uint8_t>;

/// Per-letter box covers on a shared grid.
struct WindowApprox {
    CellGrid grid;
    std::vector<CellSet> covers;
    std::vector<std::size_t> points; ///< projected points per letter (projection route)
    std::string route;

    std::size_t kappa() const { return covers.size(); }
    std::size_t occupied(std::size_t letter) const
    {
        return static_cast<std::size_t>(std::count(covers[letter].begin(), covers[letter].end(), 1));
    }
    double measure(std::size_t letter) const { return static_cast<double>(occupied(letter)) * grid.cell_volume(); }
    bool contains(std::size_t letter, const InternalVector& u) const
    {
        const auto c = grid.locate(u);
        return grid.inside(c) && covers[letter][grid.index(c)];
    }
};

namespace detail {

/// Calls f(coord) for every neighbour (Chebyshev distance 1) of c inside the grid's dimension.
template <class F> void for_neighbours(const CellGrid& g, const CellCoord& c, F&& f)
{
    const std::int64_t r1 = g.dim > 1 ? 1 : 0, r2 = g.dim > 2 ? 1 : 0;
    for (std::int64_t dz = -r2; dz <= r2; ++dz)
        for (std::int64_t dy = -r1; dy <= r1; ++dy)
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0)
                    continue;
                f(CellCoord{c[0] + dx, c[1] + dy, c[2] + dz});
            }
}

inline void bounding_box(const WindowApprox& wa, InternalVector& lo, InternalVector& hi)
{
    const auto dim = static_cast<Eigen::Index>(wa.grid.dim);
    lo = InternalVector::Constant(dim, std::numeric_limits<double>::infinity());
    hi = InternalVector::Constant(dim, -std::numeric_limits<double>::infinity());
    const double h = wa.grid.cell();
    for (const auto& cover : wa.covers)
        for (std::size_t k = 0; k < cover.size(); ++k)
            if (cover[k]) {
                const auto c = wa.grid.coords(k);
                for (Eigen::Index d = 0; d < dim; ++d) {
                    lo[d] = std::min(lo[d], static_cast<double>(c[static_cast<std::size_t>(d)]) * h);
                    hi[d] = std::max(hi[d], static_cast<double>(c[static_cast<std::size_t>(d)] + 1) * h);
                }
            }
}

/// Cells meeting the bounding box of A(cell) + t, for a cell whose center maps to v (in units of h).
struct ImageStencil {
    const CellGrid* g = nullptr;
    std::array<double, kMaxDim> lo_off{0, 0, 0}, hi_off{0, 0, 0};
    std::array<std::int64_t, kMaxDim> lim{0, 0, 0};

    ImageStencil(const CellGrid& grid, const Eigen::MatrixXd& A, const InternalVector& t) : g(&grid)
    {
        const double eps = 1e-12;
        for (std::size_t d = 0; d < grid.dim; ++d) {
            const auto di = static_cast<Eigen::Index>(d);
            const double half = A.row(di).cwiseAbs().sum() / 2;
            const double td = t[di] / grid.cell();
            lo_off[d] = td - half + eps;
            hi_off[d] = td + half - eps;
            lim[d] = grid.lo[d] + grid.ext[d] - 1;
        }
    }

    template <class F> void visit(const double* v, F&& f) const
    {
        CellCoord a{0, 0, 0}, b{0, 0, 0};
        for (std::size_t d = 0; d < g->dim; ++d) {
            a[d] = std::max(g->lo[d], static_cast<std::int64_t>(std::floor(v[d] + lo_off[d])));
            b[d] = std::min(lim[d], static_cast<std::int64_t>(std::floor(v[d] + hi_off[d])));
            if (a[d] > b[d])
                return;
        }
        for (auto z = a[2]; z <= b[2]; ++z)
            for (auto y = a[1]; y <= b[1]; ++y) {
                const std::size_t row = g->index({a[0], y, z});
                for (auto x = a[0]; x <= b[0]; ++x)
                    f(row + static_cast<std::size_t>(x - a[0]));
            }
    }
};

/// A applied to the center of cell k, in units of h.
inline void image_center(const CellGrid& g, const Eigen::MatrixXd& A, std::size_t k, double* out)
{
    const auto c = g.coords(k);
    for (std::size_t d = 0; d < g.dim; ++d) {
        double s = 0;
        for (std::size_t e = 0; e < g.dim; ++e)
            s += A(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(e)) * (static_cast<double>(c[e]) + 0.5);
        out[d] = s;
    }
}

/// One application of the set equations to the covers (outer approximation).
inline std::vector<CellSet> apply_ifs(const DualIFS& ifs, const CellGrid& g, const std::vector<CellSet>& covers)
{
    const std::size_t kappa = ifs.kappa(), dim = g.dim;
    std::vector<CellSet> next(kappa, CellSet(g.size(), 0));
    std::vector<double> centers;
    for (std::size_t j = 0; j < kappa; ++j) {
        centers.clear();
        for (std::size_t k = 0; k < covers[j].size(); ++k)
            if (covers[j][k]) {
                centers.resize(centers.size() + dim);
                image_center(g, ifs.A, k, &centers[centers.size() - dim]);
            }
        for (std::size_t i = 0; i < kappa; ++i)
            for (const auto& t : ifs.maps[i][j]) {
                const ImageStencil st(g, ifs.A, t);
                auto& out = next[i];
                for (std::size_t p = 0; p < centers.size(); p += dim)
                    st.visit(&centers[p], [&](std::size_t c) { out[c] = 1; });
            }
    }
    return next;
}

/// Largest sub-cover X with X inside IFS(X): counts the images hitting each cell, then removes
/// unhit cells and propagates the lost images.
inline void shrink_to_fixed_point(const DualIFS& ifs, const CellGrid& g, std::vector<CellSet>& covers)
{
    const std::size_t kappa = ifs.kappa();
    std::vector<std::vector<std::vector<ImageStencil>>> stencils(kappa, std::vector<std::vector<ImageStencil>>(kappa));
    for (std::size_t i = 0; i < kappa; ++i)
        for (std::size_t j = 0; j < kappa; ++j)
            for (const auto& t : ifs.maps[i][j])
                stencils[i][j].emplace_back(g, ifs.A, t);
    std::vector<std::vector<std::uint32_t>> hits(kappa, std::vector<std::uint32_t>(g.size(), 0));
    std::array<double, kMaxDim> v{0, 0, 0};
    for (std::size_t j = 0; j < kappa; ++j)
        for (std::size_t k = 0; k < covers[j].size(); ++k) {
            if (!covers[j][k])
                continue;
            image_center(g, ifs.A, k, v.data());
            for (std::size_t i = 0; i < kappa; ++i) {
                auto& h = hits[i];
                const auto& cover = covers[i];
                for (const auto& st : stencils[i][j])
                    st.visit(v.data(), [&](std::size_t c) { h[c] += cover[c]; });
            }
        }
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    for (std::size_t i = 0; i < kappa; ++i)
        for (std::size_t k = 0; k < covers[i].size(); ++k)
            if (covers[i][k] && hits[i][k] == 0) {
                covers[i][k] = 0;
                stack.emplace_back(i, k);
            }
    while (!stack.empty()) {
        const auto [j, k] = stack.back();
        stack.pop_back();
        image_center(g, ifs.A, k, v.data());
        for (std::size_t i = 0; i < kappa; ++i) {
            auto& h = hits[i];
            auto& cover = covers[i];
            for (const auto& st : stencils[i][j])
                st.visit(v.data(), [&](std::size_t c) {
                    if (cover[c] && --h[c] == 0) {
                        cover[c] = 0;
                        stack.emplace_back(i, c);
                    }
                });
        }
    }
}

/// Re-expresses covers at depth+1, restricted to the bounding box of the occupied cells.
inline WindowApprox subdivide(const WindowApprox& wa)
{
    InternalVector lo, hi;
    bounding_box(wa, lo, hi);
    WindowApprox out;
    out.route = wa.route;
    out.points = wa.points;
    out.grid = grid_for_box(wa.grid.dim, wa.grid.depth + 1, lo, hi, 2);
    out.covers.assign(wa.kappa(), CellSet(out.grid.size(), 0));
    const std::int64_t r1 = wa.grid.dim > 1 ? 1 : 0, r2 = wa.grid.dim > 2 ? 1 : 0;
    for (std::size_t l = 0; l < wa.kappa(); ++l)
        for (std::size_t k = 0; k < wa.covers[l].size(); ++k) {
            if (!wa.covers[l][k])
                continue;
            const auto c = wa.grid.coords(k);
            for (std::int64_t dz = 0; dz <= r2; ++dz)
                for (std::int64_t dy = 0; dy <= r1; ++dy)
                    for (std::int64_t dx = 0; dx <= 1; ++dx) {
                        CellCoord f{2 * c[0] + dx, 2 * c[1] + dy, 2 * c[2] + dz};
                        if (out.grid.inside(f))
                            out.covers[l][out.grid.index(f)] = 1;
                    }
        }
    return out;
}

inline std::int64_t floor_shift(std::int64_t v, int s) { return v >= 0 ? v >> s : -((-v + (std::int64_t{1} << s) - 1) >> s); }

} // namespace detail

/// Outer cover at a coarser depth: a coarse cell is occupied if it contains an occupied cell.
inline WindowApprox coarsen(const WindowApprox& wa, int depth)
{
    if (depth > wa.grid.depth)
        throw std::invalid_argument("coarsen: target depth exceeds source depth");
    const int s = wa.grid.depth - depth;
    WindowApprox out;
    out.route = wa.route;
    out.points = wa.points;
    out.grid.depth = depth;
    out.grid.dim = wa.grid.dim;
    for (std::size_t d = 0; d < kMaxDim; ++d) {
        if (d >= wa.grid.dim) {
            out.grid.lo[d] = 0;
            out.grid.ext[d] = 1;
            continue;
        }
        const auto a = detail::floor_shift(wa.grid.lo[d], s);
        const auto b = detail::floor_shift(wa.grid.lo[d] + wa.grid.ext[d] - 1, s);
        out.grid.lo[d] = a;
        out.grid.ext[d] = b - a + 1;
    }
    out.covers.assign(wa.kappa(), CellSet(out.grid.size(), 0));
    for (std::size_t l = 0; l < wa.kappa(); ++l)
        for (std::size_t k = 0; k < wa.covers[l].size(); ++k)
            if (wa.covers[l][k]) {
                auto c = wa.grid.coords(k);
                for (std::size_t d = 0; d < wa.grid.dim; ++d)
                    c[d] = detail::floor_shift(c[d], s);
                out.covers[l][out.grid.index(c)] = 1;
            }
    return out;
}

/// The same covers on a larger grid at equal depth.
inline WindowApprox reembed(const WindowApprox& wa, const CellGrid& to)
{
    if (to.depth != wa.grid.depth || to.dim != wa.grid.dim)
        throw std::invalid_argument("reembed: grids differ in depth or dimension");
    WindowApprox out;
    out.route = wa.route;
    out.points = wa.points;
    out.grid = to;
    out.covers.assign(wa.kappa(), CellSet(to.size(), 0));
    for (std::size_t l = 0; l < wa.kappa(); ++l)
        for (std::size_t k = 0; k < wa.covers[l].size(); ++k)
            if (wa.covers[l][k]) {
                const auto c = wa.grid.coords(k);
                if (!to.inside(c))
                    throw std::invalid_argument("reembed: target grid too small");
                out.covers[l][to.index(c)] = 1;
            }
    return out;
}

inline CellGrid common_grid(const CellGrid& a, const CellGrid& b)
{
    if (a.depth != b.depth || a.dim != b.dim)
        throw std::invalid_argument("common_grid: grids differ in depth or dimension");
    CellGrid g = a;
    for (std::size_t d = 0; d < kMaxDim; ++d) {
        const auto lo = std::min(a.lo[d], b.lo[d]);
        const auto hi = std::max(a.lo[d] + a.ext[d], b.lo[d] + b.ext[d]);
        g.lo[d] = lo;
        g.ext[d] = hi - lo;
    }
    return g;
}

struct IterationOptions {
    int extra_depth = -1;    ///< refinement below the reported depth; -1 picks 3 (1-D) or 2 otherwise
    int start_depth = 3;
    std::size_t max_cells = 60'000'000;
};

/// Greatest fixed point of the outer set equations below an invariant ball, computed coarse to
/// fine on the power of the IFS whose contraction is at most 1/2.
inline WindowApprox attractor_fine(const DualIFS& base, int depth, const IterationOptions& opt = {})
{
    if (!(base.contraction < 1))
        throw Error(ErrorCode::NotContractive, "contraction " + std::to_string(base.contraction));
    DualIFS ifs = base;
    while (ifs.contraction > 0.5)
        ifs = compose(ifs, base);
    const std::size_t dim = base.dim();
    double tmax = 0;
    for (const auto& row : ifs.maps)
        for (const auto& cell : row)
            for (const auto& t : cell)
                tmax = std::max(tmax, t.norm());
    const int start = std::min(opt.start_depth, depth);
    const double h0 = std::ldexp(1.0, -start);
    const double slack = 2 * h0 * std::sqrt(static_cast<double>(dim));
    const double rho = (tmax + slack) / (1 - ifs.contraction) + slack;

    WindowApprox wa;
    wa.route = "ifs";
    wa.grid = grid_for_box(dim, start, InternalVector::Constant(static_cast<Eigen::Index>(dim), -rho),
                           InternalVector::Constant(static_cast<Eigen::Index>(dim), rho), 1);
    wa.covers.assign(base.kappa(), CellSet(wa.grid.size(), 0));
    for (std::size_t k = 0; k < wa.grid.size(); ++k) {
        const InternalVector u = wa.grid.center(wa.grid.coords(k));
        if (u.norm() <= rho + wa.grid.cell() * std::sqrt(static_cast<double>(dim)))
            for (auto& c : wa.covers)
                c[k] = 1;
    }
    for (int level = start;; ++level) {
        if (wa.grid.size() * wa.kappa() > opt.max_cells)
            throw Error(ErrorCode::BudgetExceeded, "grid at depth " + std::to_string(level) + " needs " +
                                                       std::to_string(wa.grid.size() * wa.kappa()) + " cells");
        detail::shrink_to_fixed_point(ifs, wa.grid, wa.covers);
        if (level >= depth)
            break;
        wa = detail::subdivide(wa);
    }
    return wa;
}

inline int default_extra_depth(std::size_t dim) { return dim == 1 ? 3 : 2; }

inline WindowApprox attractor_by_iteration(const DualIFS& ifs, int depth, const IterationOptions& opt = {})
{
    const int extra = opt.extra_depth >= 0 ? opt.extra_depth : default_extra_depth(ifs.dim());
    return coarsen(attractor_fine(ifs, depth + extra, opt), depth);
}

/// Cells of the star images of the control points.
inline WindowApprox attractor_by_projection(const PatchPointSet& patch, const CPSContext& cps, int depth,
                                            std::size_t min_points = 1000)
{
    const std::size_t kappa = patch.kappa();
    std::vector<std::vector<InternalVector>> stars(kappa);
    for (const auto& t : patch.tiles())
        stars[t.letter].push_back(star_map(t.pos, cps));
    for (std::size_t l = 0; l < kappa; ++l)
        if (stars[l].size() < min_points)
            throw Error(ErrorCode::InsufficientPoints, "letter " + std::to_string(l) + " has " +
                                                           std::to_string(stars[l].size()) + " points, need " +
                                                           std::to_string(min_points));
    const auto dim = static_cast<Eigen::Index>(cps.internal_dim);
    InternalVector lo = InternalVector::Constant(dim, std::numeric_limits<double>::infinity());
    InternalVector hi = -lo;
    for (const auto& s : stars)
        for (const auto& u : s) {
            lo = lo.cwiseMin(u);
            hi = hi.cwiseMax(u);
        }
    WindowApprox wa;
    wa.route = "projection";
    wa.grid = grid_for_box(cps.internal_dim, depth, lo, hi, 1);
    wa.covers.assign(kappa, CellSet(wa.grid.size(), 0));
    for (std::size_t l = 0; l < kappa; ++l) {
        for (const auto& u : stars[l])
            wa.covers[l][wa.grid.index(wa.grid.locate(u))] = 1;
        wa.points.push_back(stars[l].size());
    }
    return wa;
}

// ---------------------------------------------------------------------------
// Cell-set statistics
// ---------------------------------------------------------------------------

/// Removes `layers` layers of cells having an unoccupied neighbour (outside the grid counts as unoccupied).
inline CellSet erode(const CellSet& s, const CellGrid& g, int layers = 1)
{
    CellSet cur = s;
    for (int l = 0; l < layers; ++l) {
        CellSet next = cur;
        for (std::size_t k = 0; k < cur.size(); ++k) {
            if (!cur[k])
                continue;
            bool keep = true;
            detail::for_neighbours(g, g.coords(k), [&](const CellCoord& n) {
                keep = keep && g.inside(n) && cur[g.index(n)];
            });
            next[k] = keep ? 1 : 0;
        }
        cur = std::move(next);
    }
    return cur;
}

inline std::size_t boundary_cells(const CellSet& s, const CellGrid& g)
{
    std::size_t n = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!s[k])
            continue;
        bool edge = false;
        detail::for_neighbours(g, g.coords(k), [&](const CellCoord& c) {
            edge = edge || !g.inside(c) || !s[g.index(c)];
        });
        n += edge ? 1 : 0;
    }
    return n;
}

/// Chebyshev distance in cells from every cell to the nearest occupied cell of s (BFS).
inline std::vector<std::int64_t> distance_to(const CellSet& s, const CellGrid& g)
{
    std::vector<std::int64_t> dist(s.size(), -1);
    std::deque<std::size_t> queue;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s[k]) {
            dist[k] = 0;
            queue.push_back(k);
        }
    while (!queue.empty()) {
        const auto k = queue.front();
        queue.pop_front();
        detail::for_neighbours(g, g.coords(k), [&](const CellCoord& c) {
            if (!g.inside(c))
                return;
            const auto n = g.index(c);
            if (dist[n] < 0) {
                dist[n] = dist[k] + 1;
                queue.push_back(n);
            }
        });
    }
    return dist;
}

/// Hausdorff distance in cells between the covers of one letter in two approximations at equal depth.
inline std::int64_t hausdorff_cells(const WindowApprox& a, const WindowApprox& b, std::size_t letter)
{
    const auto g = common_grid(a.grid, b.grid);
    const auto ea = reembed(a, g), eb = reembed(b, g);
    const auto da = distance_to(ea.covers[letter], g), db = distance_to(eb.covers[letter], g);
    std::int64_t h = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (ea.covers[letter][k])
            h = db[k] < 0 ? std::numeric_limits<std::int64_t>::max() : std::max(h, db[k]);
        if (eb.covers[letter][k])
            h = da[k] < 0 ? std::numeric_limits<std::int64_t>::max() : std::max(h, da[k]);
    }
    return h;
}

struct OverlapReport {
    int depth = 0;
    std::vector<std::vector<double>> raw;    ///< measure of cells in both covers
    std::vector<std::vector<double>> eroded; ///< the same after one layer of erosion
    std::vector<double> measures;
    double total_measure = 0;
    double max_eroded = 0;

    bool disjoint_interiors() const { return max_eroded == 0; }
};

inline OverlapReport overlap_report(const WindowApprox& wa)
{
    OverlapReport rep;
    const std::size_t kappa = wa.kappa();
    rep.depth = wa.grid.depth;
    rep.raw.assign(kappa, std::vector<double>(kappa, 0));
    rep.eroded = rep.raw;
    std::vector<CellSet> er;
    for (std::size_t l = 0; l < kappa; ++l) {
        er.push_back(erode(wa.covers[l], wa.grid));
        rep.measures.push_back(wa.measure(l));
        rep.total_measure += rep.measures.back();
    }
    const double vol = wa.grid.cell_volume();
    for (std::size_t a = 0; a < kappa; ++a)
        for (std::size_t b = 0; b < kappa; ++b) {
            std::size_t raw = 0, eroded = 0;
            for (std::size_t k = 0; k < wa.grid.size(); ++k) {
                raw += wa.covers[a][k] && wa.covers[b][k];
                eroded += er[a][k] && er[b][k];
            }
            rep.raw[a][b] = static_cast<double>(raw) * vol;
            rep.eroded[a][b] = static_cast<double>(eroded) * vol;
            if (a != b)
                rep.max_eroded = std::max(rep.max_eroded, rep.eroded[a][b]);
        }
    return rep;
}

struct RegularityReport {
    std::vector<int> depths;
    std::vector<std::size_t> boundary_counts;  ///< summed over letters
    std::vector<double> boundary_volume;       ///< b(g)
    double decay_exponent = 0;                 ///< fitted slope of log2 b(g) against g
    bool strictly_decreasing = false;
    std::vector<double> w;                     ///< measures at the deepest level
    double eigen_residual = 0;                 ///< |w - |det D| S w| / |w|
    double det_D = 0;

    bool regular_evidence() const { return strictly_decreasing; }
};

/// Boundary statistics over a sequence of covers at increasing depths.
inline RegularityReport regularity_report(const std::vector<WindowApprox>& levels, const DualIFS& ifs)
{
    RegularityReport rep;
    for (const auto& wa : levels) {
        std::size_t n = 0;
        for (const auto& c : wa.covers)
            n += boundary_cells(c, wa.grid);
        rep.depths.push_back(wa.grid.depth);
        rep.boundary_counts.push_back(n);
        rep.boundary_volume.push_back(static_cast<double>(n) * wa.grid.cell_volume());
    }
    rep.strictly_decreasing = rep.boundary_volume.size() >= 2;
    for (std::size_t k = 1; k < rep.boundary_volume.size(); ++k)
        rep.strictly_decreasing = rep.strictly_decreasing && rep.boundary_volume[k] < rep.boundary_volume[k - 1];
    if (rep.depths.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const auto m = static_cast<double>(rep.depths.size());
        for (std::size_t k = 0; k < rep.depths.size(); ++k) {
            const double x = rep.depths[k], y = std::log2(std::max(rep.boundary_volume[k], 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        rep.decay_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    if (!levels.empty()) {
        const auto& deep = levels.back();
        rep.det_D = std::fabs(ifs.A.determinant());
        const std::size_t kappa = deep.kappa();
        for (std::size_t l = 0; l < kappa; ++l)
            rep.w.push_back(deep.measure(l));
        double num = 0, den = 0;
        for (std::size_t i = 0; i < kappa; ++i) {
            double sw = 0;
            for (std::size_t j = 0; j < kappa; ++j)
                sw += static_cast<double>(ifs.S_star[i][j]) * rep.w[j];
            num += std::pow(rep.w[i] - rep.det_D * sw, 2);
            den += rep.w[i] * rep.w[i];
        }
        rep.eigen_residual = den > 0 ? std::sqrt(num / den) : 0;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Model-set inclusions
// ---------------------------------------------------------------------------

struct InclusionReport {
    double radius = 0;
    int depth = 0;
    int margin = 0;
    std::size_t control_points = 0;
    std::size_t outside_cover = 0;  ///< control points whose star image misses their letter's cover
    std::size_t lattice_points = 0; ///< points of Z[beta] in B_R with star image in some eroded cover
    std::size_t not_control = 0;    ///< of those, letter assignments that are not control points
};

inline InclusionReport verify_model_set(const PatchPointSet& patch, const WindowApprox& wa, const CPSContext& cps,
                                        int margin, double radius)
{
    if (patch.radius() + 1e-9 < radius)
        throw Error(ErrorCode::PatchTooSmall, "patch radius " + std::to_string(patch.radius()) + " < " +
                                                  std::to_string(radius));
    InclusionReport rep;
    rep.radius = radius;
    rep.depth = wa.grid.depth;
    rep.margin = margin;
    for (const auto& t : patch.tiles()) {
        if (std::fabs(t.value) > radius)
            continue;
        ++rep.control_points;
        if (!wa.contains(t.letter, star_map(t.pos, cps)))
            ++rep.outside_cover;
    }

    std::vector<CellSet> inner;
    for (const auto& c : wa.covers)
        inner.push_back(erode(c, wa.grid, margin));
    const auto dim = static_cast<Eigen::Index>(wa.grid.dim);
    InternalVector lo = InternalVector::Constant(dim, std::numeric_limits<double>::infinity()), hi = -lo;
    const double h = wa.grid.cell();
    bool any = false;
    for (const auto& c : inner)
        for (std::size_t k = 0; k < c.size(); ++k)
            if (c[k]) {
                any = true;
                const auto cc = wa.grid.coords(k);
                for (Eigen::Index d = 0; d < dim; ++d) {
                    lo[d] = std::min(lo[d], static_cast<double>(cc[static_cast<std::size_t>(d)]) * h);
                    hi[d] = std::max(hi[d], static_cast<double>(cc[static_cast<std::size_t>(d)] + 1) * h);
                }
            }
    if (!any)
        return rep;
    for (const auto& p : enumerate_lattice(cps, radius, lo, hi)) {
        const auto c = wa.grid.locate(p.star);
        if (!wa.grid.inside(c))
            continue;
        const auto k = wa.grid.index(c);
        bool counted = false;
        for (std::size_t l = 0; l < inner.size(); ++l) {
            if (!inner[l][k])
                continue;
            if (!counted) {
                ++rep.lattice_points;
                counted = true;
            }
            if (!patch.contains(l, to_element(p, cps.field)))
                ++rep.not_control;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline const char* letter_color(std::size_t letter)
{
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    return palette[letter % 6];
}

/// 1-D covers as interval bars (one row per letter), 2-D covers as merged cell runs.
inline void render_svg(std::ostream& out, const WindowApprox& wa, const std::vector<char>& letters)
{
    const auto& g = wa.grid;
    const double h = g.cell();
    const double x0 = static_cast<double>(g.lo[0]) * h, x1 = static_cast<double>(g.lo[0] + g.ext[0]) * h;
    const double scale = 800.0 / (x1 - x0);
    std::ostringstream body;
    body.setf(std::ios::fixed);
    body.precision(3);
    double height = 0;
    if (g.dim == 1) {
        const double row = 30;
        for (std::size_t l = 0; l < wa.kappa(); ++l) {
            const double y = 20 + row * static_cast<double>(l);
            body << "<text x=\"2\" y=\"" << y + 14 << "\" font-size=\"14\">" << letters[l] << "</text>\n";
            std::int64_t k = 0;
            while (k < g.ext[0]) {
                if (!wa.covers[l][static_cast<std::size_t>(k)]) {
                    ++k;
                    continue;
                }
                std::int64_t e = k;
                while (e < g.ext[0] && wa.covers[l][static_cast<std::size_t>(e)])
                    ++e;
                body << "<rect x=\"" << 20 + static_cast<double>(k) * h * scale << "\" y=\"" << y << "\" width=\""
                     << static_cast<double>(e - k) * h * scale << "\" height=\"18\" fill=\"" << letter_color(l)
                     << "\"/>\n";
                k = e;
            }
        }
        height = 30 + row * static_cast<double>(wa.kappa());
    } else {
        const double y1 = static_cast<double>(g.lo[1] + g.ext[1]) * h;
        for (std::size_t l = 0; l < wa.kappa(); ++l) {
            body << "<g fill=\"" << letter_color(l) << "\" fill-opacity=\"0.6\">\n";
            for (std::int64_t y = 0; y < g.ext[1]; ++y) {
                std::int64_t x = 0;
                while (x < g.ext[0]) {
                    auto at = [&](std::int64_t xx) {
                        return wa.covers[l][g.index({g.lo[0] + xx, g.lo[1] + y, g.lo[2]})];
                    };
                    if (!at(x)) {
                        ++x;
                        continue;
                    }
                    std::int64_t e = x;
                    while (e < g.ext[0] && at(e))
                        ++e;
                    const double py = (y1 - static_cast<double>(g.lo[1] + y + 1) * h) * scale;
                    body << "<rect x=\"" << 20 + static_cast<double>(x) * h * scale << "\" y=\"" << 20 + py
                         << "\" width=\"" << static_cast<double>(e - x) * h * scale << "\" height=\"" << h * scale
                         << "\"/>\n";
                    x = e;
                }
            }
            body << "</g>\n";
        }
        height = 40 + static_cast<double>(g.ext[1]) * h * scale;
    }
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"840\" height=\"" << static_cast<int>(height)
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
}

/// letter, cell coordinates, depth
inline void render_csv(std::ostream& out, const WindowApprox& wa, const std::vector<char>& letters)
{
    const auto& g = wa.grid;
    out << "letter";
    for (std::size_t d = 0; d < g.dim; ++d)
        out << ",c" << d;
    out << ",depth\n";
    for (std::size_t l = 0; l < wa.kappa(); ++l)
        for (std::size_t k = 0; k < wa.covers[l].size(); ++k)
            if (wa.covers[l][k]) {
                const auto c = g.coords(k);
                out << letters[l];
                for (std::size_t d = 0; d < g.dim; ++d)
                    out << ',' << c[d];
                out << ',' << g.depth << '\n';
            }
}

} // namespace tilecps
