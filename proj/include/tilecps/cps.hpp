#pragma once

// Cut-and-project scheme R x G with G = R^(n-1): star map, contraction D,
// the lattice {(x, Psi(x)) : x in Z[beta]} and the E_delta predicates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tilecps/algebra.hpp"
#include "tilecps/pointset.hpp"

namespace tilecps {

using InternalVector = Eigen::VectorXd;

struct CPSContext {
    FieldPtr field;
    EmbeddingData embedding;
    std::vector<Root> conjugates; ///< non-expanding roots, one per coordinate block
    std::size_t internal_dim = 0;
    Eigen::MatrixXd D;            ///< block-diagonal contraction on G
    Eigen::MatrixXd lattice_basis; ///< row k = (beta^k, Psi(beta^k))
    double lattice_det = 0;

    double beta() const { return embedding.beta(); }
    /// Spectral radius of D, which equals its operator norm for the block structure used here.
    double contraction() const
    {
        double c = 0;
        for (const auto& r : conjugates)
            c = std::max(c, r.modulus());
        return c;
    }
};

/// Psi: evaluation at the non-expanding conjugates, complex pairs packed as (Re, Im).
inline InternalVector star_map(const AlgebraicElement& x, const CPSContext& cps)
{
    InternalVector v(static_cast<Eigen::Index>(cps.internal_dim));
    Eigen::Index k = 0;
    for (const auto& r : cps.conjugates) {
        auto z = x.evaluate(r.value);
        v[k++] = z.real();
        if (!r.real)
            v[k++] = z.imag();
    }
    return v;
}

inline CPSContext build_cps(const FieldPtr& field, const EmbeddingData& emb)
{
    if (emb.n <= emb.m)
        throw Error(ErrorCode::EmptyInternalSpace,
                    "the minimal polynomial has degree " + std::to_string(emb.n) + ": no conjugates, no internal space");
    CPSContext cps;
    cps.field = field;
    cps.embedding = emb;
    for (std::size_t k = 0; k < emb.roots.size(); ++k)
        if (k != emb.expanding_index)
            cps.conjugates.push_back(emb.roots[k]);
    for (const auto& r : cps.conjugates)
        cps.internal_dim += r.real ? 1 : 2;
    const auto dim = static_cast<Eigen::Index>(cps.internal_dim);
    cps.D = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::Index k = 0;
    for (const auto& r : cps.conjugates) {
        if (r.real) {
            cps.D(k, k) = r.value.real();
            ++k;
        } else {
            const double a = r.value.real(), b = r.value.imag();
            cps.D(k, k) = a;
            cps.D(k, k + 1) = -b;
            cps.D(k + 1, k) = b;
            cps.D(k + 1, k + 1) = a;
            k += 2;
        }
    }
    const auto n = static_cast<Eigen::Index>(emb.n);
    cps.lattice_basis = Eigen::MatrixXd(n, n);
    AlgebraicElement p = AlgebraicElement::one(field);
    for (Eigen::Index row = 0; row < n; ++row) {
        cps.lattice_basis(row, 0) = p.evaluate_real(emb.beta());
        cps.lattice_basis.block(row, 1, 1, dim) = star_map(p, cps).transpose();
        p = p.times_beta();
    }
    cps.lattice_det = std::fabs(cps.lattice_basis.determinant());
    return cps;
}

/// |det| of the lattice basis; zero would contradict the Vandermonde non-degeneracy.
inline double lattice_check(const CPSContext& cps, double min_det = 1e-9)
{
    if (!(cps.lattice_det > min_det))
        throw Error(ErrorCode::DegenerateLattice, "lattice determinant " + std::to_string(cps.lattice_det));
    return cps.lattice_det;
}

inline bool e_delta_membership(const AlgebraicElement& x, double delta, const CPSContext& cps)
{
    return star_map(x, cps).norm() < delta;
}

/// The ellipsoid D^k B_delta(0) as {u : u^T Q u < 1}.
struct EllipsoidWindow {
    Eigen::MatrixXd Q;
    Eigen::VectorXd half_axes; ///< descending
    int power = 0;
    double delta = 0;

    bool contains(const InternalVector& u) const { return u.dot(Q * u) < 1.0; }
};

inline EllipsoidWindow scaled_e_delta_window(double delta, int k, const CPSContext& cps)
{
    if (!cps.field->unimodular())
        throw Error(ErrorCode::NotUnimodular, "beta^k E_delta needs beta^(+-1) Z[beta] = Z[beta]");
    Eigen::MatrixXd dk = Eigen::MatrixXd::Identity(cps.D.rows(), cps.D.cols());
    for (int i = 0; i < k; ++i)
        dk = cps.D * dk;
    const Eigen::MatrixXd a = delta * dk;
    EllipsoidWindow w;
    w.power = k;
    w.delta = delta;
    w.Q = (a * a.transpose()).inverse();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    w.half_axes = svd.singularValues();
    return w;
}

/// Default delta: 5% headroom over the largest star image in Xi.
inline double default_delta(const ReturnModule& xi, const CPSContext& cps)
{
    double m = 0;
    for (const auto& e : xi.elements)
        m = std::max(m, star_map(e, cps).norm());
    return 1.05 * m;
}

struct LatticePoint {
    std::vector<std::int64_t> coeffs;
    double value = 0;
    InternalVector star;
};

/// Points x of Z[beta] with |x| <= radius and Psi(x) in the box [lo, hi].
/// The coefficients of beta^1..beta^(n-1) range over a box derived from the inverse lattice
/// basis; the constant coefficient is then confined by the first internal coordinate.
inline std::vector<LatticePoint> enumerate_lattice(const CPSContext& cps, double radius, const InternalVector& lo,
                                                   const InternalVector& hi, std::size_t max_points = 20'000'000)
{
    const auto n = static_cast<Eigen::Index>(cps.embedding.n);
    Eigen::VectorXd center(n), half(n);
    center[0] = 0;
    half[0] = radius;
    center.tail(n - 1) = (lo + hi) / 2;
    half.tail(n - 1) = (hi - lo) / 2;
    const Eigen::MatrixXd inv_t = cps.lattice_basis.transpose().inverse();
    const Eigen::VectorXd c_center = inv_t * center;
    const Eigen::VectorXd c_half = inv_t.cwiseAbs() * half;

    std::vector<std::int64_t> c_lo(static_cast<std::size_t>(n)), c_hi(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        c_lo[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor(c_center[k] - c_half[k] - 1e-9));
        c_hi[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::ceil(c_center[k] + c_half[k] + 1e-9));
    }
    std::vector<double> phys(static_cast<std::size_t>(n));
    std::vector<InternalVector> star(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        phys[static_cast<std::size_t>(k)] = cps.lattice_basis(k, 0);
        star[static_cast<std::size_t>(k)] = cps.lattice_basis.block(k, 1, 1, n - 1).transpose();
    }

    std::vector<LatticePoint> out;
    std::vector<std::int64_t> c(static_cast<std::size_t>(n));
    for (Eigen::Index k = 1; k < n; ++k)
        c[static_cast<std::size_t>(k)] = c_lo[static_cast<std::size_t>(k)];
    const double tol = 1e-12;
    for (;;) {
        double s = 0;
        InternalVector u = InternalVector::Zero(n - 1);
        for (Eigen::Index k = 1; k < n; ++k) {
            const auto ck = static_cast<double>(c[static_cast<std::size_t>(k)]);
            s += ck * phys[static_cast<std::size_t>(k)];
            u += ck * star[static_cast<std::size_t>(k)];
        }
        double a = std::max(lo[0] - u[0], -radius - s);
        double b = std::min(hi[0] - u[0], radius - s);
        for (auto c0 = static_cast<std::int64_t>(std::ceil(a - tol)); static_cast<double>(c0) <= b + tol; ++c0) {
            InternalVector v = u + static_cast<double>(c0) * star[0];
            bool inside = true;
            for (Eigen::Index d = 0; d < n - 1 && inside; ++d)
                inside = v[d] >= lo[d] - tol && v[d] <= hi[d] + tol;
            const double x = s + static_cast<double>(c0);
            if (!inside || std::fabs(x) > radius)
                continue;
            c[0] = c0;
            out.push_back({c, x, v});
            if (out.size() > max_points)
                throw Error(ErrorCode::SizeLimit, "lattice enumeration exceeds " + std::to_string(max_points));
        }
        Eigen::Index k = 1;
        while (k < n) {
            auto& ck = c[static_cast<std::size_t>(k)];
            if (ck < c_hi[static_cast<std::size_t>(k)]) {
                ++ck;
                break;
            }
            ck = c_lo[static_cast<std::size_t>(k)];
            ++k;
        }
        if (k >= n)
            break;
    }
    std::sort(out.begin(), out.end(), [](const LatticePoint& p, const LatticePoint& q) { return p.value < q.value; });
    return out;
}

inline AlgebraicElement to_element(const LatticePoint& p, const FieldPtr& field)
{
    std::vector<BigInt> num;
    for (auto v : p.coeffs)
        num.emplace_back(v);
    return AlgebraicElement(field, std::move(num));
}

/// E_delta intersected with the physical ball of the given radius.
inline std::vector<AlgebraicElement> enumerate_e_delta(const CPSContext& cps, double delta, double radius)
{
    const auto dim = static_cast<Eigen::Index>(cps.internal_dim);
    InternalVector lo = InternalVector::Constant(dim, -delta), hi = InternalVector::Constant(dim, delta);
    std::vector<AlgebraicElement> out;
    for (const auto& p : enumerate_lattice(cps, radius, lo, hi))
        if (p.star.norm() < delta)
            out.push_back(to_element(p, cps.field));
    return out;
}

struct DensityProbe {
    std::size_t samples = 0;
    std::size_t hits = 0;
    double eps = 0;
    int c_max = 0;
    double hit_rate() const { return samples ? static_cast<double>(hits) / static_cast<double>(samples) : 0.0; }
};

/// Fraction of random targets in the unit ball of G approximated within eps by Psi of an
/// integral element whose coefficients satisfy |c_k| <= c_max. The top coefficient is scanned;
/// the others are rounded in the basis Psi(1), ..., Psi(beta^(n-2)).
inline DensityProbe density_probe(const CPSContext& cps, std::size_t samples, double eps, std::uint64_t seed = 1,
                                  int c_max = -1)
{
    const auto n = static_cast<Eigen::Index>(cps.embedding.n);
    const auto dim = n - 1;
    if (c_max < 0)
        c_max = dim == 1 ? 200 : 4000;
    const Eigen::MatrixXd U = cps.lattice_basis.block(0, 1, dim, dim).transpose();
    const Eigen::MatrixXd U_inv = U.inverse();
    const InternalVector top = cps.lattice_basis.block(n - 1, 1, 1, dim).transpose();
    const auto corners = std::size_t{1} << dim;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    DensityProbe rep;
    rep.samples = samples;
    rep.eps = eps;
    rep.c_max = c_max;
    for (std::size_t s = 0; s < samples; ++s) {
        InternalVector t(dim);
        for (Eigen::Index d = 0; d < dim; ++d)
            t[d] = gauss(rng);
        t *= std::pow(unif(rng), 1.0 / static_cast<double>(dim)) / t.norm();
        bool hit = false;
        for (int top_c = -c_max; top_c <= c_max && !hit; ++top_c) {
            const InternalVector r = t - top_c * top;
            const Eigen::VectorXd y = U_inv * r;
            for (std::size_t mask = 0; mask < corners && !hit; ++mask) {
                Eigen::VectorXd c(dim);
                bool in_box = true;
                for (Eigen::Index d = 0; d < dim; ++d) {
                    c[d] = (mask >> d) & 1 ? std::ceil(y[d]) : std::floor(y[d]);
                    in_box = in_box && std::fabs(c[d]) <= c_max;
                }
                hit = in_box && (r - U * c).norm() < eps;
            }
        }
        rep.hits += hit ? 1 : 0;
    }
    return rep;
}

} // namespace tilecps
