#pragma once

// Finite-radius search for algebraic coincidence: xi + beta^M Xi inside C_i.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tilecps/cps.hpp"
#include "tilecps/pointset.hpp"

namespace tilecps {

struct CoincidenceOptions {
    int m_max = 8;
    double radius = 0;         ///< check radius for Xi; 0 means 200 * max length
    double candidate_radius = 0; ///< 0 means 4 * max length
    std::size_t max_candidates = 256;
    std::size_t max_tiles = 1'500'000;
};

struct CoincidenceCertificate {
    bool found = false;
    int M = 0;
    std::size_t letter = 0;
    std::optional<AlgebraicElement> xi;
    double xi_value = 0;
    double radius_checked = 0;
    double candidate_radius = 0;
    int m_max = 0;
    int m_reached = 0; ///< largest M fully tested
    std::size_t candidates_tested = 0;
    std::size_t xi_checked = 0; ///< |Xi cap B_R| used by the check
    std::optional<AlgebraicElement> counterexample; ///< for xi = 0 at the last M tested
    std::string note;
};

namespace detail {

struct Candidate {
    std::size_t letter;
    AlgebraicElement xi;
    double value;
};

inline std::vector<Candidate> coincidence_candidates(const PatchPointSet& patch, double r_cand, std::size_t limit)
{
    std::vector<Candidate> out;
    const std::size_t zero_letter = patch.seed().right;
    for (std::size_t letter = 0; letter < patch.kappa(); ++letter)
        for (auto k : patch.indices(letter)) {
            const Tile& t = patch.tile(k);
            if (std::fabs(t.value) <= r_cand)
                out.push_back({letter, t.pos, t.value});
        }
    std::stable_sort(out.begin(), out.end(), [&](const Candidate& a, const Candidate& b) {
        const bool za = a.xi.is_zero() && a.letter == zero_letter, zb = b.xi.is_zero() && b.letter == zero_letter;
        if (za != zb)
            return za;
        if (std::fabs(a.value) != std::fabs(b.value))
            return std::fabs(a.value) < std::fabs(b.value);
        if (a.value != b.value)
            return a.value < b.value;
        return a.letter < b.letter;
    });
    if (out.size() > limit)
        out.resize(limit);
    return out;
}

} // namespace detail

/// First x in Xi cap B_R with xi + beta^M x outside C_letter, if any.
inline std::optional<AlgebraicElement> coincidence_witness(const PatchPointSet& patch, const ReturnModule& xi,
                                                           int M, std::size_t letter, const AlgebraicElement& shift,
                                                           double radius)
{
    for (std::size_t k = 0; k < xi.size(); ++k) {
        if (std::fabs(xi.values[k]) > radius)
            continue;
        if (!patch.contains(letter, shift + xi.elements[k].times_beta_pow(static_cast<unsigned>(M))))
            return xi.elements[k];
    }
    return std::nullopt;
}

/// Smallest M in [m_first, m_max], then the first candidate in canonical order (xi = 0 first,
/// then increasing |xi|), such that xi + beta^M (Xi cap B_R) lies in C_letter.
inline CoincidenceCertificate search_coincidence(const PatchPointSet& patch, const ReturnModule& xi, double beta,
                                                 int m_max, double radius, double r_cand,
                                                 std::size_t max_candidates = 256, int m_first = 1)
{
    if (xi.radius + 1e-9 < radius)
        throw Error(ErrorCode::PatchTooSmall, "Xi is known only up to " + std::to_string(xi.radius));
    CoincidenceCertificate cert;
    cert.m_max = m_max;
    cert.radius_checked = radius;
    cert.candidate_radius = r_cand;
    cert.m_reached = m_first - 1;
    for (std::size_t k = 0; k < xi.size(); ++k)
        cert.xi_checked += std::fabs(xi.values[k]) <= radius ? 1 : 0;
    const auto candidates = detail::coincidence_candidates(patch, r_cand, max_candidates);
    for (int M = m_first; M <= m_max; ++M) {
        const double need = std::pow(beta, M) * radius + r_cand;
        if (need > patch.radius())
            throw Error(ErrorCode::PatchTooSmall, "M = " + std::to_string(M) + " needs patch radius " +
                                                      std::to_string(need) + ", have " +
                                                      std::to_string(patch.radius()));
        for (const auto& c : candidates) {
            ++cert.candidates_tested;
            auto witness = coincidence_witness(patch, xi, M, c.letter, c.xi, radius);
            if (!witness) {
                cert.found = true;
                cert.M = M;
                cert.letter = c.letter;
                cert.xi = c.xi;
                cert.xi_value = c.value;
                cert.m_reached = M;
                cert.counterexample.reset();
                return cert;
            }
            if (c.xi.is_zero())
                cert.counterexample = *witness;
        }
        cert.m_reached = M;
    }
    return cert;
}

/// Generates patches on demand so that every M up to m_max can be checked, stopping early if
/// the tile budget is exhausted (the certificate then records m_reached < m_max).
inline CoincidenceCertificate find_coincidence(const SubstitutionSystem& sys, const CoincidenceOptions& opt)
{
    double max_len = 0;
    for (std::size_t i = 0; i < sys.kappa(); ++i)
        max_len = std::max(max_len, sys.length_value(i));
    const double radius = opt.radius > 0 ? opt.radius : 200 * max_len;
    const double r_cand = opt.candidate_radius > 0 ? opt.candidate_radius : 4 * max_len;
    const double beta = sys.beta();
    const Seed seed = find_seed(sys.spec);

    const auto base = generate_patch(sys, seed, 3 * radius, opt.max_tiles);
    const auto xi = compute_xi(base, radius);

    CoincidenceCertificate cert;
    cert.m_max = opt.m_max;
    cert.radius_checked = radius;
    cert.candidate_radius = r_cand;
    int m = 1;
    std::size_t tested = 0;
    while (m <= opt.m_max) {
        // largest M this patch can serve, capped by the budget
        int m_top = m;
        while (m_top < opt.m_max && std::pow(beta, m_top + 1) * radius + r_cand <= 12 * std::pow(beta, m) * radius)
            ++m_top;
        const double patch_radius = std::max(3 * radius, std::pow(beta, m_top) * radius + r_cand);
        PatchPointSet patch;
        try {
            patch = patch_radius <= base.radius() ? base : generate_patch(sys, seed, patch_radius, opt.max_tiles);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SizeLimit)
                throw;
            cert.note = "tile budget exhausted at M = " + std::to_string(m);
            break;
        }
        auto part = search_coincidence(patch, xi, beta, m_top, radius, r_cand, opt.max_candidates, m);
        tested += part.candidates_tested;
        if (part.counterexample)
            cert.counterexample = part.counterexample;
        cert.xi_checked = part.xi_checked;
        cert.m_reached = part.m_reached;
        if (part.found) {
            part.m_max = opt.m_max;
            part.candidates_tested = tested;
            return part;
        }
        m = m_top + 1;
    }
    cert.candidates_tested = tested;
    return cert;
}

/// beta^M Xi - beta^M Xi inside Xi, over pairs in Xi cap B_r whose scaled difference stays
/// within the known part of Xi.
inline bool check_xi_difference_inclusion(const ReturnModule& xi, double beta, int M, double r,
                                          std::optional<std::pair<AlgebraicElement, AlgebraicElement>>* witness = nullptr)
{
    if (r > xi.radius + 1e-9)
        throw Error(ErrorCode::PatchTooSmall, "Xi is known only up to " + std::to_string(xi.radius));
    const double scale = std::pow(beta, M);
    std::vector<std::size_t> ball;
    for (std::size_t k = 0; k < xi.size(); ++k)
        if (std::fabs(xi.values[k]) <= r)
            ball.push_back(k);
    for (auto a : ball)
        for (auto b : ball) {
            if (scale * std::fabs(xi.values[a] - xi.values[b]) > xi.radius)
                continue;
            auto d = (xi.elements[a] - xi.elements[b]).times_beta_pow(static_cast<unsigned>(M));
            if (!xi.contains(d)) {
                if (witness)
                    *witness = std::make_pair(xi.elements[a], xi.elements[b]);
                return false;
            }
        }
    return true;
}

struct EDeltaReport {
    int K = 0;
    double delta = 0;
    double radius = 0;
    std::size_t points = 0; ///< |E_delta cap B_R|
};

/// y in Xi, decided from the known part of Xi or else by a same-letter pair at distance y in the
/// patch, with the left point inside the ball of radius patch radius - |y|.
inline bool in_return_set(const PatchPointSet& patch, const ReturnModule& xi, const AlgebraicElement& y,
                          double y_value)
{
    if (std::fabs(y_value) <= xi.radius)
        return xi.contains(y);
    if (2 * std::fabs(y_value) > patch.radius())
        throw Error(ErrorCode::PatchTooSmall, "return vector of length " + std::to_string(std::fabs(y_value)) +
                                                  " exceeds half the patch radius " + std::to_string(patch.radius()));
    const double reach = patch.radius() - std::fabs(y_value);
    for (const auto& t : patch.tiles())
        if (std::fabs(t.value) <= reach && patch.contains(t.letter, t.pos + y))
            return true;
    return false;
}

/// Smallest K <= K_max with beta^K (E_delta cap B_R) inside Xi.
inline EDeltaReport find_K_for_E_delta(const PatchPointSet& patch, const ReturnModule& xi, const CPSContext& cps,
                                       double delta, int K_max, double R)
{
    const auto e = enumerate_e_delta(cps, delta, R);
    EDeltaReport rep;
    rep.delta = delta;
    rep.radius = R;
    rep.points = e.size();
    const double beta = cps.beta();
    for (int K = 0; K <= K_max; ++K) {
        bool ok = true;
        for (const auto& x : e) {
            const auto y = x.times_beta_pow(static_cast<unsigned>(K));
            if (!in_return_set(patch, xi, y, y.evaluate_real(beta))) {
                ok = false;
                break;
            }
        }
        if (ok) {
            rep.K = K;
            return rep;
        }
    }
    throw Error(ErrorCode::NotFound, "no K <= " + std::to_string(K_max) + " puts beta^K E_delta inside Xi");
}

/// K_max = M (1 + ceil(log(delta / gap) / log(1 / rho))), gap the smallest nonzero |Psi(xi)|.
inline int e_delta_search_bound(int M, double delta, const ReturnModule& xi, const CPSContext& cps)
{
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& e : xi.elements)
        if (!e.is_zero())
            gap = std::min(gap, star_map(e, cps).norm());
    if (!(gap < delta))
        return M;
    return M * (1 + static_cast<int>(std::ceil(std::log(delta / gap) / std::log(1 / cps.contraction()))));
}

/// Smallest l <= ell_max with beta^l y in Xi.
inline int lattice_to_xi_exponent(const AlgebraicElement& y, const ReturnModule& xi, double beta, int ell_max)
{
    const double v = std::fabs(y.evaluate_real(beta));
    AlgebraicElement p = y;
    for (int l = 0; l <= ell_max; ++l) {
        if (v * std::pow(beta, l) > xi.radius + 1e-9)
            break;
        if (xi.contains(p))
            return l;
        p = p.times_beta();
    }
    throw Error(ErrorCode::NotFound, "no l <= " + std::to_string(ell_max) + " with beta^l y in the known Xi");
}

} // namespace tilecps
