#pragma once

// Control points of the two-sided fixed point, the return set Xi and the
// Z-module it generates inside Z[beta].

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tilecps/algebra.hpp"
#include "tilecps/substitution.hpp"

namespace tilecps {

/// Two-sided seed (left | right) fixed by the N-th power of the substitution.
struct Seed {
    std::size_t left = 0;
    std::size_t right = 0;
    int power = 1;
};

namespace detail {

/// Two-letter words that occur in some iterate of the substitution.
inline std::set<std::pair<std::size_t, std::size_t>> legal_pairs(const SubstitutionSpec& spec)
{
    std::set<std::pair<std::size_t, std::size_t>> legal;
    for (const auto& w : spec.rules)
        for (std::size_t k = 0; k + 1 < w.size(); ++k)
            legal.insert({w[k], w[k + 1]});
    for (bool grew = true; grew;) {
        grew = false;
        auto snapshot = legal;
        for (auto [x, y] : snapshot) {
            auto pr = std::make_pair(spec.rules[x].back(), spec.rules[y].front());
            grew = legal.insert(pr).second || grew;
        }
    }
    return legal;
}

} // namespace detail

/// Smallest N (and canonical letter pair) such that the N-th power fixes a legal seed j'|j.
inline Seed find_seed(const SubstitutionSpec& spec)
{
    const std::size_t kappa = spec.kappa();
    std::size_t max_len = 0;
    for (const auto& w : spec.rules)
        max_len = std::max(max_len, w.size());
    const int bound = static_cast<int>(kappa * max_len);
    const auto legal = detail::legal_pairs(spec);
    std::vector<std::size_t> first(kappa), last(kappa);
    for (std::size_t j = 0; j < kappa; ++j)
        first[j] = last[j] = j;
    for (int n = 1; n <= bound; ++n) {
        for (std::size_t j = 0; j < kappa; ++j) {
            first[j] = spec.rules[first[j]].front();
            last[j] = spec.rules[last[j]].back();
        }
        for (std::size_t j = 0; j < kappa; ++j) {
            if (first[j] != j)
                continue;
            for (std::size_t jl = 0; jl < kappa; ++jl)
                if (last[jl] == jl && legal.count({jl, j}))
                    return {jl, j, n};
        }
    }
    throw Error(ErrorCode::NoSeed, "no legal two-sided seed fixed by a power <= " + std::to_string(bound));
}

struct Tile {
    std::size_t letter = 0;
    AlgebraicElement pos; ///< left endpoint, the control point
    double value = 0;
};

/// Tiles of the fixed point inside [-radius, radius], sorted by position.
class PatchPointSet {
public:
    PatchPointSet() = default;

    PatchPointSet(std::size_t kappa, std::vector<Tile> tiles, double radius, Seed seed)
        : tiles_(std::move(tiles)), radius_(radius), seed_(seed), by_letter_(kappa), members_(kappa)
    {
        std::sort(tiles_.begin(), tiles_.end(), [](const Tile& a, const Tile& b) { return a.value < b.value; });
        for (std::size_t k = 0; k < tiles_.size(); ++k) {
            by_letter_[tiles_[k].letter].push_back(k);
            members_[tiles_[k].letter].insert(tiles_[k].pos);
            integral_ = integral_ && tiles_[k].pos.is_integral();
        }
    }

    std::size_t kappa() const { return by_letter_.size(); }
    double radius() const { return radius_; }
    const Seed& seed() const { return seed_; }
    const std::vector<Tile>& tiles() const { return tiles_; }
    const std::vector<std::size_t>& indices(std::size_t letter) const { return by_letter_.at(letter); }
    const Tile& tile(std::size_t k) const { return tiles_[k]; }
    std::size_t count(std::size_t letter) const { return by_letter_.at(letter).size(); }

    /// All control points have den = 1 (required for the identity rigidity map).
    bool integral() const { return integral_; }

    bool contains(std::size_t letter, const AlgebraicElement& x) const { return members_.at(letter).count(x) > 0; }

    std::vector<AlgebraicElement> points(std::size_t letter) const
    {
        std::vector<AlgebraicElement> out;
        for (auto k : by_letter_.at(letter))
            out.push_back(tiles_[k].pos);
        return out;
    }

private:
    std::vector<Tile> tiles_;
    double radius_ = 0;
    Seed seed_;
    std::vector<std::vector<std::size_t>> by_letter_;
    std::vector<std::unordered_set<AlgebraicElement, AlgebraicElementHash>> members_;
    bool integral_ = true;
};

/// Iterates the N-th power of the substitution on the seed until [-R, R] is covered.
inline PatchPointSet generate_patch(const SubstitutionSystem& sys, const Seed& seed, double radius,
                                    std::size_t max_tiles = 4'000'000)
{
    if (!(radius > 0))
        throw std::invalid_argument("radius must be positive");
    const double beta = sys.beta();
    const auto& field = sys.field;
    std::vector<std::pair<std::size_t, AlgebraicElement>> word;
    word.emplace_back(seed.left, -sys.lengths[seed.left]);
    word.emplace_back(seed.right, AlgebraicElement::zero(field));

    auto covered = [&]() {
        double left = word.front().second.evaluate_real(beta);
        double right = word.back().second.evaluate_real(beta) + sys.length_value(word.back().first);
        return std::min(-left, right);
    };
    while (covered() < radius) {
        for (int step = 0; step < seed.power; ++step) {
            std::vector<std::pair<std::size_t, AlgebraicElement>> next;
            next.reserve(word.size() * 3);
            for (const auto& [letter, x] : word) {
                AlgebraicElement base = x.times_beta();
                AlgebraicElement offset = AlgebraicElement::zero(field);
                for (std::size_t child : sys.spec.rules[letter]) {
                    next.emplace_back(child, base + offset);
                    offset += sys.lengths[child];
                }
            }
            if (next.size() > max_tiles)
                throw Error(ErrorCode::SizeLimit, "patch exceeds " + std::to_string(max_tiles) + " tiles");
            word = std::move(next);
        }
    }
    std::vector<Tile> tiles;
    for (auto& [letter, x] : word) {
        double v = x.evaluate_real(beta);
        if (std::fabs(v) <= radius)
            tiles.push_back({letter, std::move(x), v});
    }
    return PatchPointSet(sys.kappa(), std::move(tiles), radius, seed);
}

// ---------------------------------------------------------------------------
// Return set and module
// ---------------------------------------------------------------------------

struct ReturnModule {
    std::vector<AlgebraicElement> elements; ///< sorted by value, 0 included
    std::vector<double> values;
    std::vector<std::size_t> first_letter; ///< a letter class in which the difference occurs
    double radius = 0;
    std::unordered_set<AlgebraicElement, AlgebraicElementHash> members;

    bool contains(const AlgebraicElement& x) const { return members.count(x) > 0; }
    std::size_t size() const { return elements.size(); }
};

/// Xi = U_i (C_i - C_i), restricted to |xi| <= xi_radius, from points with |x| <= source_radius.
inline ReturnModule compute_xi(const PatchPointSet& patch, double xi_radius, double source_radius = -1)
{
    if (source_radius <= 0)
        source_radius = patch.radius();
    std::unordered_map<AlgebraicElement, std::pair<double, std::size_t>, AlgebraicElementHash> found;
    if (!patch.tiles().empty()) {
        const auto& any = patch.tiles().front();
        found.emplace(any.pos - any.pos, std::make_pair(0.0, any.letter));
    }
    for (std::size_t letter = 0; letter < patch.kappa(); ++letter) {
        const auto& idx = patch.indices(letter);
        for (std::size_t a = 0; a < idx.size(); ++a) {
            const Tile& p = patch.tile(idx[a]);
            if (std::fabs(p.value) > source_radius)
                continue;
            for (std::size_t b = a + 1; b < idx.size(); ++b) {
                const Tile& q = patch.tile(idx[b]);
                if (std::fabs(q.value) > source_radius)
                    continue;
                double d = q.value - p.value;
                if (d > xi_radius)
                    break;
                AlgebraicElement diff = q.pos - p.pos;
                if (found.count(diff))
                    continue;
                found.emplace(-diff, std::make_pair(-d, letter));
                found.emplace(std::move(diff), std::make_pair(d, letter));
            }
        }
    }
    std::vector<std::pair<double, const AlgebraicElement*>> order;
    for (auto& [el, info] : found)
        order.emplace_back(info.first, &el);
    std::sort(order.begin(), order.end(), [](auto& x, auto& y) { return x.first < y.first; });
    ReturnModule xi;
    xi.radius = xi_radius;
    for (auto& [v, el] : order) {
        xi.elements.push_back(*el);
        xi.values.push_back(v);
        xi.first_letter.push_back(found.at(*el).second);
        xi.members.insert(*el);
    }
    return xi;
}

struct ModuleAnalysis {
    std::vector<std::vector<BigInt>> hnf; ///< n x n, columns are basis vectors (lower triangular)
    BigInt index;                         ///< [Z[beta] : <Xi>]
    std::size_t rank = 0;
};

/// Hermite normal form of the Z-span of integral coefficient vectors.
inline ModuleAnalysis hermite_basis(const std::vector<std::vector<BigInt>>& vectors, std::size_t n)
{
    // rows[k] has zeros in positions < k and a positive pivot at k
    std::vector<std::vector<BigInt>> rows(n);
    for (auto v : vectors) {
        for (std::size_t k = 0; k < n; ++k) {
            if (v[k] == 0)
                continue;
            if (rows[k].empty()) {
                if (v[k] < 0)
                    for (auto& c : v)
                        c = -c;
                rows[k] = v;
                break;
            }
            // extended gcd on the pivots
            BigInt a = rows[k][k], b = v[k];
            BigInt s0 = 1, s1 = 0, t0 = 0, t1 = 1, r0 = a, r1 = b;
            while (r1 != 0) {
                BigInt q = r0 / r1;
                BigInt tmp = r0 - q * r1;
                r0 = r1;
                r1 = tmp;
                tmp = s0 - q * s1;
                s0 = s1;
                s1 = tmp;
                tmp = t0 - q * t1;
                t0 = t1;
                t1 = tmp;
            }
            if (r0 < 0) {
                r0 = -r0;
                s0 = -s0;
                t0 = -t0;
            }
            const BigInt ag = a / r0, bg = b / r0;
            std::vector<BigInt> pivot(n), rest(n);
            for (std::size_t c = 0; c < n; ++c) {
                pivot[c] = s0 * rows[k][c] + t0 * v[c];
                rest[c] = bg * rows[k][c] - ag * v[c];
            }
            rows[k] = std::move(pivot);
            v = std::move(rest);
        }
    }
    ModuleAnalysis out;
    for (std::size_t k = 0; k < n; ++k)
        out.rank += rows[k].empty() ? 0 : 1;
    if (out.rank < n) {
        out.index = 0;
        return out;
    }
    // reduce entries above each pivot into [0, pivot)
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t r = 0; r < k; ++r) {
            BigInt q = rows[r][k] / rows[k][k];
            if (rows[r][k] - q * rows[k][k] < 0)
                q -= 1;
            if (q != 0)
                for (std::size_t c = 0; c < n; ++c)
                    rows[r][c] -= q * rows[k][c];
        }
    out.index = 1;
    out.hnf.assign(n, std::vector<BigInt>(n));
    for (std::size_t k = 0; k < n; ++k) {
        out.index *= rows[k][k];
        for (std::size_t c = 0; c < n; ++c)
            out.hnf[c][k] = rows[k][c];
    }
    return out;
}

struct ModuleReport {
    ModuleAnalysis analysis;
    BigInt index_half_radius; ///< index from Xi restricted to half the radius
    bool stable = false;
    bool generates_L() const { return analysis.index == 1; }
};

/// HNF and index of <Xi> in Z[beta], with a stabilization check against radius/2.
inline ModuleReport module_analysis(const ReturnModule& xi, std::size_t n)
{
    std::vector<std::vector<BigInt>> all, half;
    for (std::size_t k = 0; k < xi.size(); ++k) {
        const auto& e = xi.elements[k];
        if (!e.is_integral())
            throw Error(ErrorCode::RankDeficient, "return vector " + e.to_string() + " is not in Z[beta]");
        all.push_back(e.num());
        if (std::fabs(xi.values[k]) <= xi.radius / 2)
            half.push_back(e.num());
    }
    ModuleReport rep;
    rep.analysis = hermite_basis(all, n);
    if (rep.analysis.rank < n)
        throw Error(ErrorCode::RankDeficient, "<Xi> has rank " + std::to_string(rep.analysis.rank) + " < " +
                                                  std::to_string(n) + "; enlarge the radius");
    auto h = hermite_basis(half, n);
    rep.index_half_radius = h.index;
    rep.stable = h.rank == n && h.index == rep.analysis.index;
    return rep;
}

// ---------------------------------------------------------------------------
// Finite-radius Delone / Meyer / FLC evidence
// ---------------------------------------------------------------------------

struct MeyerProbe {
    double support_radius = 0;
    double min_gap_support = 0;   ///< min distance between distinct control points
    double diff_radius = 0;
    double min_gap_xi_diff = 0;   ///< min distance between distinct points of (Xi - Xi) in B_r
    std::size_t xi_diff_count = 0;
    double local_radius = 0;
    std::size_t local_configurations = 0;
};

inline MeyerProbe meyer_flc_probe(const PatchPointSet& patch, const ReturnModule& xi, double diff_radius,
                                  double local_radius)
{
    MeyerProbe rep;
    rep.support_radius = patch.radius();
    rep.min_gap_support = std::numeric_limits<double>::infinity();
    const auto& tiles = patch.tiles();
    for (std::size_t k = 1; k < tiles.size(); ++k)
        rep.min_gap_support = std::min(rep.min_gap_support, tiles[k].value - tiles[k - 1].value);

    rep.diff_radius = diff_radius;
    std::unordered_map<AlgebraicElement, double, AlgebraicElementHash> diffs;
    for (std::size_t a = 0; a < xi.size(); ++a)
        for (std::size_t b = 0; b < xi.size(); ++b) {
            double d = xi.values[a] - xi.values[b];
            if (std::fabs(d) <= diff_radius)
                diffs.emplace(xi.elements[a] - xi.elements[b], d);
        }
    std::vector<double> vals;
    for (auto& [_, v] : diffs)
        vals.push_back(v);
    std::sort(vals.begin(), vals.end());
    rep.xi_diff_count = vals.size();
    rep.min_gap_xi_diff = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < vals.size(); ++k)
        rep.min_gap_xi_diff = std::min(rep.min_gap_xi_diff, vals[k] - vals[k - 1]);

    // a configuration is the word of tiles whose control points lie in x + [-r, r], plus x's slot
    rep.local_radius = local_radius;
    std::set<std::pair<std::vector<std::size_t>, std::size_t>> configs;
    std::size_t lo = 0, hi = 0;
    for (std::size_t k = 0; k < tiles.size(); ++k) {
        const double x = tiles[k].value;
        if (std::fabs(x) > patch.radius() - local_radius)
            continue;
        while (tiles[lo].value < x - local_radius)
            ++lo;
        if (hi < k)
            hi = k;
        while (hi + 1 < tiles.size() && tiles[hi + 1].value <= x + local_radius)
            ++hi;
        std::vector<std::size_t> w;
        for (std::size_t t = lo; t <= hi; ++t)
            w.push_back(tiles[t].letter);
        configs.insert({std::move(w), k - lo});
    }
    rep.local_configurations = configs.size();
    return rep;
}

} // namespace tilecps
