#pragma once

// Symbolic substitution front end: spec parsing, substitution matrix,
// primitivity, exact tile lengths and digit sets.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tilecps/algebra.hpp"
#include "tilecps/error.hpp"

namespace tilecps {

struct PipelineParams {
    std::optional<double> radius;
    std::optional<double> delta;
    int m_max = 8;
    int grid_depth = 0; ///< 0 selects the per-dimension default
    double tol = 1e-9;
};

struct SubstitutionSpec {
    std::string name;
    std::vector<char> letters;                  ///< kappa symbols, in declaration order
    std::vector<std::vector<std::size_t>> rules; ///< rules[j] = word of letter indices
    std::vector<std::string> rule_text;
    std::optional<std::vector<detail::RatPoly>> lengths; ///< override, polynomials in beta
    std::vector<std::string> length_text;
    std::optional<IntPolynomial> min_poly;
    PipelineParams params;

    std::size_t kappa() const { return letters.size(); }
    std::string letter_name(std::size_t i) const { return std::string(1, letters.at(i)); }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline Error schema_error(const std::string& where, const std::string& msg)
{
    return Error(ErrorCode::SchemaError, where + ": " + msg);
}

/// Recursive-descent parser for polynomial expressions in `beta` with rational coefficients.
class BetaExpressionParser {
public:
    BetaExpressionParser(std::string text, std::string where) : s_(std::move(text)), where_(std::move(where)) {}

    RatPoly parse()
    {
        RatPoly r = expr();
        skip();
        if (pos_ != s_.size())
            fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return r;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const
    {
        throw schema_error(where_, msg + " at offset " + std::to_string(pos_) + " in \"" + s_ + "\"");
    }

    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
    }

    bool eat(char c)
    {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    RatPoly expr()
    {
        bool neg = false;
        if (eat('-'))
            neg = true;
        else
            eat('+');
        RatPoly acc = term();
        if (neg)
            acc = sub({}, acc);
        for (;;) {
            if (eat('+'))
                acc = add(acc, term());
            else if (eat('-'))
                acc = sub(acc, term());
            else
                return acc;
        }
    }

    RatPoly term()
    {
        RatPoly acc = power();
        for (;;) {
            if (eat('*')) {
                acc = mul(acc, power());
            } else if (eat('/')) {
                RatPoly d = power();
                if (d.size() != 1)
                    fail("division only by nonzero constants");
                for (auto& c : acc)
                    c /= d[0];
            } else {
                return acc;
            }
        }
    }

    RatPoly power()
    {
        RatPoly base = atom();
        if (eat('^')) {
            skip();
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
                ++pos_;
            if (start == pos_)
                fail("expected exponent");
            int e = std::stoi(s_.substr(start, pos_ - start));
            RatPoly r = {Rational(1)};
            for (int k = 0; k < e; ++k)
                r = mul(r, base);
            return r;
        }
        return base;
    }

    RatPoly atom()
    {
        skip();
        if (eat('(')) {
            RatPoly r = expr();
            if (!eat(')'))
                fail("expected ')'");
            return r;
        }
        if (s_.compare(pos_, 4, "beta") == 0) {
            pos_ += 4;
            return {Rational(0), Rational(1)};
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
            ++pos_;
        if (start == pos_)
            fail("expected number, 'beta' or '('");
        RatPoly r = {Rational(BigInt(s_.substr(start, pos_ - start)))};
        trim(r);
        return r;
    }

    static RatPoly add(RatPoly a, const RatPoly& b)
    {
        if (a.size() < b.size())
            a.resize(b.size(), Rational(0));
        for (std::size_t k = 0; k < b.size(); ++k)
            a[k] += b[k];
        trim(a);
        return a;
    }

    std::string s_;
    std::string where_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline detail::RatPoly parse_beta_expression(const std::string& text, const std::string& where = "expression")
{
    return detail::BetaExpressionParser(text, where).parse();
}

/// Parses the versioned JSON substitution document. Unknown keys are rejected.
inline SubstitutionSpec parse_spec(const std::string& text)
{
    using nlohmann::json;
    using detail::schema_error;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw schema_error("/", std::string("malformed JSON: ") + e.what());
    }
    if (!doc.is_object())
        throw schema_error("/", "document must be an object");
    static const std::vector<std::string> known = {"format", "name", "description", "letters",
                                                   "rules", "lengths", "min_poly", "params"};
    for (auto& [key, _] : doc.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw schema_error("/" + key, "unknown key");
    if (!doc.contains("format") || !doc["format"].is_number_integer() || doc["format"].get<int>() != 1)
        throw schema_error("/format", "expected \"format\": 1");

    SubstitutionSpec spec;
    if (doc.contains("name")) {
        if (!doc["name"].is_string())
            throw schema_error("/name", "expected string");
        spec.name = doc["name"].get<std::string>();
    }
    if (doc.contains("description") && !doc["description"].is_string())
        throw schema_error("/description", "expected string");

    if (!doc.contains("letters") || !doc["letters"].is_array() || doc["letters"].empty())
        throw schema_error("/letters", "expected a nonempty array of single-character strings");
    for (std::size_t i = 0; i < doc["letters"].size(); ++i) {
        const auto& l = doc["letters"][i];
        const std::string where = "/letters/" + std::to_string(i);
        if (!l.is_string() || l.get<std::string>().size() != 1)
            throw schema_error(where, "letter must be a single-character string");
        char c = l.get<std::string>()[0];
        if (std::isspace(static_cast<unsigned char>(c)))
            throw schema_error(where, "letter must not be whitespace");
        if (std::find(spec.letters.begin(), spec.letters.end(), c) != spec.letters.end())
            throw schema_error(where, "duplicate letter");
        spec.letters.push_back(c);
    }
    auto index_of = [&](char c) -> std::optional<std::size_t> {
        auto it = std::find(spec.letters.begin(), spec.letters.end(), c);
        if (it == spec.letters.end())
            return std::nullopt;
        return static_cast<std::size_t>(it - spec.letters.begin());
    };

    if (!doc.contains("rules") || !doc["rules"].is_object())
        throw schema_error("/rules", "expected an object mapping letters to words");
    const std::size_t kappa = spec.letters.size();
    spec.rules.assign(kappa, {});
    spec.rule_text.assign(kappa, {});
    std::vector<bool> has_rule(kappa, false), used(kappa, false);
    for (auto& [key, val] : doc["rules"].items()) {
        const std::string where = "/rules/" + key;
        if (key.size() != 1 || !index_of(key[0]))
            throw schema_error(where, "rule for undeclared letter");
        if (!val.is_string() || val.get<std::string>().empty())
            throw schema_error(where, "rule must be a nonempty string");
        std::size_t j = *index_of(key[0]);
        has_rule[j] = true;
        spec.rule_text[j] = val.get<std::string>();
        for (char c : spec.rule_text[j]) {
            auto i = index_of(c);
            if (!i)
                throw schema_error(where, std::string("undeclared letter '") + c + "' in rule");
            spec.rules[j].push_back(*i);
            used[*i] = true;
        }
    }
    for (std::size_t j = 0; j < kappa; ++j) {
        if (!has_rule[j])
            throw schema_error("/rules", "missing rule for letter '" + spec.letter_name(j) + "'");
        if (!used[j])
            throw schema_error("/rules", "letter '" + spec.letter_name(j) + "' never occurs in any rule");
    }

    if (doc.contains("lengths")) {
        const auto& lj = doc["lengths"];
        if (!lj.is_object())
            throw schema_error("/lengths", "expected an object");
        std::vector<detail::RatPoly> ls(kappa);
        spec.length_text.assign(kappa, {});
        std::vector<bool> seen(kappa, false);
        for (auto& [key, val] : lj.items()) {
            const std::string where = "/lengths/" + key;
            if (key.size() != 1 || !index_of(key[0]))
                throw schema_error(where, "length for undeclared letter");
            std::size_t i = *index_of(key[0]);
            std::string expr;
            if (val.is_string())
                expr = val.get<std::string>();
            else if (val.is_number_integer())
                expr = std::to_string(val.get<long long>());
            else
                throw schema_error(where, "expected a polynomial in beta, e.g. \"beta - 2\"");
            spec.length_text[i] = expr;
            ls[i] = parse_beta_expression(expr, where);
            seen[i] = true;
        }
        for (std::size_t i = 0; i < kappa; ++i)
            if (!seen[i])
                throw schema_error("/lengths", "missing length for letter '" + spec.letter_name(i) + "'");
        spec.lengths = std::move(ls);
    }

    if (doc.contains("min_poly")) {
        const auto& mp = doc["min_poly"];
        if (!mp.is_array() || mp.size() < 2)
            throw schema_error("/min_poly", "expected integer coefficients, constant term first");
        std::vector<BigInt> c;
        for (std::size_t k = 0; k < mp.size(); ++k) {
            if (!mp[k].is_number_integer())
                throw schema_error("/min_poly/" + std::to_string(k), "expected integer");
            c.emplace_back(mp[k].get<long long>());
        }
        spec.min_poly = IntPolynomial(std::move(c));
    }

    if (doc.contains("params")) {
        const auto& pj = doc["params"];
        if (!pj.is_object())
            throw schema_error("/params", "expected an object");
        for (auto& [key, val] : pj.items()) {
            const std::string where = "/params/" + key;
            if (key == "radius" || key == "delta" || key == "tol") {
                if (!val.is_number() || val.get<double>() <= 0)
                    throw schema_error(where, "expected a positive number");
                double v = val.get<double>();
                if (key == "radius")
                    spec.params.radius = v;
                else if (key == "delta")
                    spec.params.delta = v;
                else
                    spec.params.tol = v;
            } else if (key == "m_max" || key == "grid_depth") {
                if (!val.is_number_integer() || val.get<int>() < 1)
                    throw schema_error(where, "expected a positive integer");
                (key == "m_max" ? spec.params.m_max : spec.params.grid_depth) = val.get<int>();
            } else {
                throw schema_error(where, "unknown key");
            }
        }
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Substitution matrix
// ---------------------------------------------------------------------------

using IntMatrix = std::vector<std::vector<std::int64_t>>;

struct SubMatrix {
    IntMatrix S; ///< S[i][j] = occurrences of letter i in rule(j)
    double perron_value = 0;
    std::vector<double> perron_right;
    std::vector<double> perron_left;

    std::size_t size() const { return S.size(); }
};

inline IntMatrix multiply(const IntMatrix& a, const IntMatrix& b)
{
    const std::size_t n = a.size();
    IntMatrix r(n, std::vector<std::int64_t>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            if (a[i][k] != 0)
                for (std::size_t j = 0; j < n; ++j)
                    r[i][j] += a[i][k] * b[k][j];
    return r;
}

inline IntMatrix matrix_power(const IntMatrix& a, int m)
{
    const std::size_t n = a.size();
    IntMatrix r(n, std::vector<std::int64_t>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        r[i][i] = 1;
    for (int k = 0; k < m; ++k)
        r = multiply(r, a);
    return r;
}

namespace detail {

inline std::vector<double> power_iteration(const IntMatrix& a, bool transpose, double& value)
{
    const std::size_t n = a.size();
    std::vector<double> v(n, 1.0 / static_cast<double>(n)), w(n);
    value = 0;
    for (int it = 0; it < 200000; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j)
                s += static_cast<double>(transpose ? a[j][i] : a[i][j]) * v[j];
            w[i] = s;
        }
        double norm = 0;
        for (double x : w)
            norm += x;
        if (norm == 0)
            break;
        double change = 0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] /= norm;
            change = std::max(change, std::fabs(w[i] - v[i]) / std::max(std::fabs(w[i]), 1e-300));
        }
        v.swap(w);
        bool done = change < 1e-13 && std::fabs(norm - value) <= 1e-13 * norm;
        value = norm;
        if (done)
            break;
    }
    return v;
}

} // namespace detail

inline SubMatrix build_matrix(const SubstitutionSpec& spec)
{
    const std::size_t kappa = spec.kappa();
    SubMatrix m;
    m.S.assign(kappa, std::vector<std::int64_t>(kappa, 0));
    for (std::size_t j = 0; j < kappa; ++j)
        for (std::size_t i : spec.rules[j])
            ++m.S[i][j];
    m.perron_right = detail::power_iteration(m.S, false, m.perron_value);
    double left_value = 0;
    m.perron_left = detail::power_iteration(m.S, true, left_value);
    return m;
}

/// Smallest l <= kappa^2 - 2 kappa + 2 with S^l strictly positive.
inline int check_primitive(const SubMatrix& m)
{
    const std::size_t n = m.size();
    const int bound = static_cast<int>(n * n - 2 * n + 2);
    std::vector<std::vector<bool>> pattern(n, std::vector<bool>(n)), cur;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            pattern[i][j] = m.S[i][j] > 0;
    cur = pattern;
    for (int l = 1; l <= bound; ++l) {
        bool all = true;
        for (auto& row : cur)
            for (bool b : row)
                all = all && b;
        if (all)
            return l;
        std::vector<std::vector<bool>> next(n, std::vector<bool>(n, false));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                if (cur[i][k])
                    for (std::size_t j = 0; j < n; ++j)
                        if (pattern[k][j])
                            next[i][j] = true;
        cur = std::move(next);
    }
    throw Error(ErrorCode::NotPrimitive, "no power S^l with l <= " + std::to_string(bound) + " is strictly positive");
}

inline IntPolynomial substitution_char_poly(const SubMatrix& m)
{
    std::vector<std::vector<BigInt>> a(m.size(), std::vector<BigInt>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            a[i][j] = m.S[i][j];
    return characteristic_polynomial(a);
}

/// Irreducible factor of char(S) vanishing at the Perron value, or the validated override.
inline IntPolynomial acquire_min_poly(const SubstitutionSpec& spec, const SubMatrix& m, double tol = 1e-9)
{
    const IntPolynomial chi = substitution_char_poly(m);
    if (!spec.min_poly)
        return minimal_factor_at(chi, m.perron_value, tol);
    const IntPolynomial& p = *spec.min_poly;
    if (!p.is_monic())
        throw detail::schema_error("/min_poly", "override must be monic");
    if (!divides(p, chi))
        throw detail::schema_error("/min_poly", "override " + p.to_string() + " does not divide char(S) = " + chi.to_string());
    const long double r = p.eval(m.perron_value);
    if (std::fabs(r) > tol * std::max<long double>(1, p.magnitude_at(m.perron_value)))
        throw Error(ErrorCode::NoExactEigenvector, "override does not vanish at the Perron value");
    if (!(minimal_factor_at(p, m.perron_value, tol) == p))
        throw detail::schema_error("/min_poly", "override is reducible over Q");
    return p;
}

// ---------------------------------------------------------------------------
// Lengths and digit sets
// ---------------------------------------------------------------------------

namespace detail {

/// Nonzero kernel vector of a square matrix over Q(beta), or nullopt when it is invertible.
inline std::optional<std::vector<AlgebraicElement>> kernel_vector(std::vector<std::vector<AlgebraicElement>> a)
{
    const std::size_t n = a.size();
    std::vector<std::size_t> pivot_col;
    std::size_t row = 0;
    std::vector<bool> is_pivot(n, false);
    for (std::size_t col = 0; col < n && row < n; ++col) {
        std::size_t sel = row;
        while (sel < n && a[sel][col].is_zero())
            ++sel;
        if (sel == n)
            continue;
        std::swap(a[row], a[sel]);
        AlgebraicElement inv = a[row][col].inverse();
        for (std::size_t j = 0; j < n; ++j)
            a[row][j] = a[row][j] * inv;
        for (std::size_t r = 0; r < n; ++r) {
            if (r == row || a[r][col].is_zero())
                continue;
            AlgebraicElement f = a[r][col];
            for (std::size_t j = 0; j < n; ++j)
                a[r][j] -= f * a[row][j];
        }
        pivot_col.push_back(col);
        is_pivot[col] = true;
        ++row;
    }
    auto free_it = std::find(is_pivot.begin(), is_pivot.end(), false);
    if (free_it == is_pivot.end())
        return std::nullopt;
    const std::size_t free_col = static_cast<std::size_t>(free_it - is_pivot.begin());
    const auto& ctx = a[0][0].context();
    std::vector<AlgebraicElement> x(n, AlgebraicElement::zero(ctx));
    x[free_col] = AlgebraicElement::one(ctx);
    for (std::size_t r = 0; r < pivot_col.size(); ++r)
        x[pivot_col[r]] = -a[r][free_col];
    return x;
}

} // namespace detail

/// Checks beta * l_j == sum_i S(i,j) l_i exactly for every j.
inline bool satisfies_length_equation(const std::vector<AlgebraicElement>& lengths, const SubMatrix& m)
{
    for (std::size_t j = 0; j < m.size(); ++j) {
        AlgebraicElement rhs = AlgebraicElement::zero(lengths[j].context());
        for (std::size_t i = 0; i < m.size(); ++i)
            rhs += BigInt(m.S[i][j]) * lengths[i];
        if (!(lengths[j].times_beta() == rhs))
            return false;
    }
    return true;
}

/// Exact interval lengths: the left Perron eigenvector of S over Q(beta), scaled into Z[beta].
inline std::vector<AlgebraicElement> derive_lengths(const SubstitutionSpec& spec, const SubMatrix& m,
                                                    const FieldPtr& field, double beta_value)
{
    const std::size_t kappa = spec.kappa();
    if (spec.lengths) {
        std::vector<AlgebraicElement> ls;
        for (const auto& poly : *spec.lengths)
            ls.push_back(AlgebraicElement::from_poly(field, poly));
        if (!satisfies_length_equation(ls, m))
            throw Error(ErrorCode::NoExactEigenvector,
                        "length override does not satisfy beta*l_j = sum_i S(i,j) l_i");
        for (std::size_t i = 0; i < kappa; ++i)
            if (ls[i].evaluate_real(beta_value) <= 0)
                throw detail::schema_error("/lengths/" + spec.letter_name(i), "length must be positive");
        return ls;
    }
    const AlgebraicElement beta = AlgebraicElement::beta(field);
    std::vector<std::vector<AlgebraicElement>> a(kappa, std::vector<AlgebraicElement>(kappa, AlgebraicElement::zero(field)));
    for (std::size_t j = 0; j < kappa; ++j)
        for (std::size_t i = 0; i < kappa; ++i) {
            a[j][i] = AlgebraicElement::from_int(field, m.S[i][j]);
            if (i == j)
                a[j][i] -= beta;
        }
    auto x = detail::kernel_vector(a);
    if (!x)
        throw Error(ErrorCode::NoExactEigenvector, "beta is not an eigenvalue of S^T over Q(beta)");
    std::size_t last = 0;
    for (std::size_t i = 1; i < kappa; ++i)
        if (spec.letters[i] > spec.letters[last])
            last = i;
    if ((*x)[last].is_zero())
        throw Error(ErrorCode::NoExactEigenvector, "Perron eigenvector has a zero entry");
    AlgebraicElement scale = (*x)[last].inverse();
    std::vector<AlgebraicElement> ls;
    BigInt den_lcm = 1;
    for (auto& v : *x) {
        ls.push_back(v * scale);
        den_lcm = boost::multiprecision::lcm(den_lcm, ls.back().den());
    }
    BigInt content = 0;
    for (auto& v : ls) {
        v = den_lcm * v;
        for (const auto& c : v.num())
            content = boost::multiprecision::gcd(content, c);
    }
    if (content > 1)
        for (auto& v : ls)
            v = AlgebraicElement(field, v.num(), content);
    if (ls[last].evaluate_real(beta_value) < 0)
        for (auto& v : ls)
            v = -v;
    for (std::size_t i = 0; i < kappa; ++i)
        if (ls[i].evaluate_real(beta_value) <= 0)
            throw Error(ErrorCode::NoExactEigenvector, "derived lengths are not all positive");
    return ls;
}

/// D[i][j] = offsets of letter i inside the inflated letter j.
struct DigitSets {
    std::vector<std::vector<std::vector<AlgebraicElement>>> D;

    std::size_t kappa() const { return D.size(); }
    const std::vector<AlgebraicElement>& operator()(std::size_t i, std::size_t j) const { return D[i][j]; }
    std::size_t total() const
    {
        std::size_t t = 0;
        for (auto& row : D)
            for (auto& cell : row)
                t += cell.size();
        return t;
    }
};

inline DigitSets derive_digit_sets(const SubstitutionSpec& spec, const std::vector<AlgebraicElement>& lengths)
{
    const std::size_t kappa = spec.kappa();
    const auto& field = lengths.front().context();
    DigitSets d;
    d.D.assign(kappa, std::vector<std::vector<AlgebraicElement>>(kappa));
    for (std::size_t j = 0; j < kappa; ++j) {
        AlgebraicElement offset = AlgebraicElement::zero(field);
        for (std::size_t i : spec.rules[j]) {
            d.D[i][j].push_back(offset);
            offset += lengths[i];
        }
    }
    return d;
}

/// Verifies that for every j the pieces a + [0, l_i], a in D_ij, chain exactly from 0 to beta*l_j.
inline void validate_tile_equation(const DigitSets& digits, const std::vector<AlgebraicElement>& lengths,
                                   double beta_value)
{
    const std::size_t kappa = digits.kappa();
    for (std::size_t j = 0; j < kappa; ++j) {
        struct Piece {
            double at;
            AlgebraicElement left, right;
        };
        std::vector<Piece> pieces;
        for (std::size_t i = 0; i < kappa; ++i)
            for (const auto& a : digits(i, j))
                pieces.push_back({a.evaluate_real(beta_value), a, a + lengths[i]});
        std::stable_sort(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) { return x.at < y.at; });
        const auto& field = lengths[j].context();
        AlgebraicElement cursor = AlgebraicElement::zero(field);
        for (std::size_t k = 0; k < pieces.size(); ++k) {
            if (!(pieces[k].left == cursor))
                throw Error(ErrorCode::GapOrOverlap, "tile " + std::to_string(j) + " piece " + std::to_string(k) +
                                                         " starts at " + pieces[k].left.to_string() + ", expected " +
                                                         cursor.to_string());
            cursor = pieces[k].right;
        }
        if (!(cursor == lengths[j].times_beta()))
            throw Error(ErrorCode::GapOrOverlap, "tile " + std::to_string(j) + " pieces end at " + cursor.to_string() +
                                                     ", expected beta*l = " + lengths[j].times_beta().to_string());
    }
}

/// M-fold composed digit sets: (D^M)_ij = U_k D_ik + beta (D^{M-1})_kj.
inline DigitSets iterate_digit_sets(const DigitSets& digits, int M, std::size_t cap = 2'000'000)
{
    if (M < 1)
        throw std::invalid_argument("M must be positive");
    DigitSets cur = digits;
    const std::size_t kappa = digits.kappa();
    for (int step = 1; step < M; ++step) {
        DigitSets next;
        next.D.assign(kappa, std::vector<std::vector<AlgebraicElement>>(kappa));
        std::size_t total = 0;
        for (std::size_t i = 0; i < kappa; ++i)
            for (std::size_t j = 0; j < kappa; ++j)
                for (std::size_t k = 0; k < kappa; ++k) {
                    if (digits(i, k).empty())
                        continue;
                    for (const auto& inner : cur(k, j)) {
                        AlgebraicElement scaled = inner.times_beta();
                        for (const auto& a : digits(i, k))
                            next.D[i][j].push_back(a + scaled);
                    }
                    total += digits(i, k).size() * cur(k, j).size();
                    if (total > cap)
                        throw Error(ErrorCode::SizeLimit, "composed digit sets exceed " + std::to_string(cap));
                }
        cur = std::move(next);
    }
    return cur;
}

inline SubstitutionSpec load_spec_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_spec(ss.str());
}

/// Everything derived from a spec before any geometry: matrix, field, lengths, digits.
struct SubstitutionSystem {
    SubstitutionSpec spec;
    SubMatrix matrix;
    int primitivity_power = 0;
    IntPolynomial min_poly;
    FieldPtr field;
    EmbeddingData embedding;
    std::vector<AlgebraicElement> lengths;
    DigitSets digits;

    std::size_t kappa() const { return spec.kappa(); }
    double beta() const { return embedding.beta(); }
    double length_value(std::size_t i) const { return lengths[i].evaluate_real(beta()); }
};

inline SubstitutionSystem build_system(SubstitutionSpec spec)
{
    SubstitutionSystem sys;
    sys.matrix = build_matrix(spec);
    sys.primitivity_power = check_primitive(sys.matrix);
    sys.min_poly = acquire_min_poly(spec, sys.matrix, spec.params.tol);
    sys.field = field_from_min_poly(sys.min_poly);
    sys.embedding = embedding_for(sys.min_poly, sys.matrix.perron_value, spec.params.tol);
    sys.lengths = derive_lengths(spec, sys.matrix, sys.field, sys.embedding.beta());
    sys.digits = derive_digit_sets(spec, sys.lengths);
    validate_tile_equation(sys.digits, sys.lengths, sys.embedding.beta());
    sys.spec = std::move(spec);
    return sys;
}

} // namespace tilecps
