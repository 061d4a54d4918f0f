#pragma once

// Exact arithmetic in Q(beta) = Q[x]/(p), numeric Galois embeddings and
// minimal-polynomial acquisition.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "tilecps/error.hpp"

namespace tilecps {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const BigInt& v) { return v.convert_to<double>(); }
inline long double to_long_double(const BigInt& v) { return v.convert_to<long double>(); }
inline double to_double(const Rational& v) { return v.convert_to<double>(); }

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

/// Integer polynomial, constant term first.
struct IntPolynomial {
    std::vector<BigInt> coeffs;

    IntPolynomial() = default;
    explicit IntPolynomial(std::vector<BigInt> c) : coeffs(std::move(c)) { trim(); }
    IntPolynomial(std::initializer_list<long long> c)
    {
        for (auto v : c)
            coeffs.emplace_back(v);
        trim();
    }

    void trim()
    {
        while (!coeffs.empty() && coeffs.back() == 0)
            coeffs.pop_back();
    }

    bool is_zero() const { return coeffs.empty(); }
    int degree() const { return static_cast<int>(coeffs.size()) - 1; }
    const BigInt& leading() const { return coeffs.back(); }
    bool is_monic() const { return !coeffs.empty() && coeffs.back() == 1; }
    BigInt constant_term() const { return coeffs.empty() ? BigInt(0) : coeffs.front(); }

    long double eval(long double x) const
    {
        long double acc = 0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
            acc = acc * x + to_long_double(*it);
        return acc;
    }

    /// Sum of |c_k| |x|^k, the natural scale for residuals.
    long double magnitude_at(long double absx) const
    {
        long double acc = 0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
            acc = acc * absx + std::fabs(to_long_double(*it));
        return acc;
    }

    IntPolynomial derivative() const
    {
        std::vector<BigInt> d;
        for (std::size_t k = 1; k < coeffs.size(); ++k)
            d.push_back(coeffs[k] * static_cast<long long>(k));
        return IntPolynomial(std::move(d));
    }

    friend bool operator==(const IntPolynomial&, const IntPolynomial&) = default;

    std::string to_string() const
    {
        if (is_zero())
            return "0";
        std::ostringstream os;
        bool first = true;
        for (int k = degree(); k >= 0; --k) {
            const BigInt& c = coeffs[static_cast<std::size_t>(k)];
            if (c == 0)
                continue;
            BigInt a = abs(c);
            if (first)
                os << (c < 0 ? "-" : "");
            else
                os << (c < 0 ? " - " : " + ");
            first = false;
            if (a != 1 || k == 0)
                os << a;
            if (k >= 1)
                os << (a != 1 ? "*" : "") << "x";
            if (k >= 2)
                os << "^" << k;
        }
        return os.str();
    }
};

namespace detail {

using RatPoly = std::vector<Rational>;

inline void trim(RatPoly& p)
{
    while (!p.empty() && p.back() == 0)
        p.pop_back();
}

inline RatPoly to_rat(const IntPolynomial& p)
{
    return RatPoly(p.coeffs.begin(), p.coeffs.end());
}

inline std::pair<RatPoly, RatPoly> divmod(RatPoly a, const RatPoly& b)
{
    trim(a);
    if (b.empty())
        throw std::invalid_argument("polynomial division by zero");
    RatPoly q;
    if (a.size() >= b.size())
        q.assign(a.size() - b.size() + 1, Rational(0));
    while (!a.empty() && a.size() >= b.size()) {
        std::size_t shift = a.size() - b.size();
        Rational f = a.back() / b.back();
        q[shift] = f;
        for (std::size_t k = 0; k < b.size(); ++k)
            a[shift + k] -= f * b[k];
        a.pop_back();
        trim(a);
    }
    trim(q);
    return {q, a};
}

inline RatPoly mul(const RatPoly& a, const RatPoly& b)
{
    if (a.empty() || b.empty())
        return {};
    RatPoly r(a.size() + b.size() - 1, Rational(0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            r[i + j] += a[i] * b[j];
    trim(r);
    return r;
}

inline RatPoly sub(RatPoly a, const RatPoly& b)
{
    if (a.size() < b.size())
        a.resize(b.size(), Rational(0));
    for (std::size_t k = 0; k < b.size(); ++k)
        a[k] -= b[k];
    trim(a);
    return a;
}

inline RatPoly make_monic(RatPoly a)
{
    trim(a);
    if (!a.empty()) {
        Rational lc = a.back();
        for (auto& c : a)
            c /= lc;
    }
    return a;
}

inline RatPoly gcd(RatPoly a, RatPoly b)
{
    trim(a);
    trim(b);
    while (!b.empty()) {
        auto r = divmod(a, b).second;
        a = std::move(b);
        b = std::move(r);
    }
    return make_monic(a);
}

/// Scales a rational polynomial to a primitive integer polynomial with positive leading coefficient.
inline IntPolynomial to_primitive_int(RatPoly a)
{
    trim(a);
    if (a.empty())
        return {};
    BigInt l = 1;
    for (auto& c : a)
        l = boost::multiprecision::lcm(l, boost::multiprecision::denominator(c));
    std::vector<BigInt> out;
    BigInt g = 0;
    for (auto& c : a) {
        BigInt v = boost::multiprecision::numerator(c) * (l / boost::multiprecision::denominator(c));
        out.push_back(v);
        g = boost::multiprecision::gcd(g, v);
    }
    if (out.back() < 0)
        g = -g;
    for (auto& v : out)
        v /= g;
    return IntPolynomial(std::move(out));
}

} // namespace detail

inline bool is_squarefree(const IntPolynomial& p)
{
    if (p.degree() < 1)
        return true;
    auto g = detail::gcd(detail::to_rat(p), detail::to_rat(p.derivative()));
    return g.size() <= 1;
}

inline IntPolynomial squarefree_part(const IntPolynomial& p)
{
    if (p.degree() < 1)
        return p;
    auto g = detail::gcd(detail::to_rat(p), detail::to_rat(p.derivative()));
    auto q = detail::divmod(detail::to_rat(p), g).first;
    return detail::to_primitive_int(q);
}

/// True iff `d` divides `p` exactly over Q.
inline bool divides(const IntPolynomial& d, const IntPolynomial& p)
{
    return detail::divmod(detail::to_rat(p), detail::to_rat(d)).second.empty();
}

/// Characteristic polynomial det(xI - A) by Faddeev-LeVerrier over Q.
inline IntPolynomial characteristic_polynomial(const std::vector<std::vector<BigInt>>& a)
{
    const std::size_t n = a.size();
    std::vector<Rational> c(n + 1, Rational(0));
    c[n] = 1;
    std::vector<std::vector<Rational>> m(n, std::vector<Rational>(n, Rational(0)));
    for (std::size_t k = 1; k <= n; ++k) {
        // M_k = A M_{k-1} + c_{n-k+1} I
        std::vector<std::vector<Rational>> next(n, std::vector<Rational>(n, Rational(0)));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                Rational s = 0;
                for (std::size_t l = 0; l < n; ++l)
                    s += Rational(a[i][l]) * m[l][j];
                next[i][j] = s;
            }
        for (std::size_t i = 0; i < n; ++i)
            next[i][i] += c[n - k + 1];
        m = std::move(next);
        Rational tr = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < n; ++l)
                tr += Rational(a[i][l]) * m[l][i];
        c[n - k] = -tr / static_cast<long long>(k);
    }
    std::vector<BigInt> out;
    for (auto& v : c)
        out.push_back(boost::multiprecision::numerator(v));
    return IntPolynomial(std::move(out));
}

// ---------------------------------------------------------------------------
// Field context and elements
// ---------------------------------------------------------------------------

/// Q(beta) presented as Q[x]/(p) with p monic and squarefree.
class FieldContext {
public:
    explicit FieldContext(IntPolynomial p) : p_(std::move(p))
    {
        if (p_.degree() < 1 || !p_.is_monic())
            throw Error(ErrorCode::NonMonic, "minimal polynomial must be monic of degree >= 1: " + p_.to_string());
        if (!is_squarefree(p_))
            throw Error(ErrorCode::NotSquarefree, "polynomial has a repeated factor: " + p_.to_string());
        n_ = static_cast<std::size_t>(p_.degree());
        unimodular_ = abs(p_.constant_term()) == 1;
        // reduction_[k] = beta^(n+k) in the power basis, k = 0..n-2
        std::vector<BigInt> cur(n_);
        for (std::size_t k = 0; k < n_; ++k)
            cur[k] = -p_.coeffs[k];
        for (std::size_t k = 0; k + 1 < n_; ++k) {
            reduction_.push_back(cur);
            std::vector<BigInt> next(n_);
            for (std::size_t i = 0; i + 1 < n_; ++i)
                next[i + 1] = cur[i];
            const BigInt top = cur[n_ - 1];
            for (std::size_t i = 0; i < n_; ++i)
                next[i] += top * reduction_[0][i];
            cur = std::move(next);
        }
        if (n_ == 1)
            reduction_.clear();
        top_ = std::vector<BigInt>(n_);
        for (std::size_t k = 0; k < n_; ++k)
            top_[k] = -p_.coeffs[k];
    }

    const IntPolynomial& min_poly() const noexcept { return p_; }
    std::size_t degree() const noexcept { return n_; }
    bool unimodular() const noexcept { return unimodular_; }

    /// beta^n as a coefficient vector.
    const std::vector<BigInt>& beta_power_n() const noexcept { return top_; }
    /// beta^(n+k) as a coefficient vector, 0 <= k <= n-2.
    const std::vector<BigInt>& reduction(std::size_t k) const { return reduction_.at(k); }

private:
    IntPolynomial p_;
    std::size_t n_ = 0;
    bool unimodular_ = false;
    std::vector<std::vector<BigInt>> reduction_;
    std::vector<BigInt> top_;
};

using FieldPtr = std::shared_ptr<const FieldContext>;

inline FieldPtr field_from_min_poly(const IntPolynomial& p)
{
    return std::make_shared<const FieldContext>(p);
}

/// Exact element of Q(beta): (num[0] + num[1] beta + ... ) / den.
class AlgebraicElement {
public:
    AlgebraicElement() = default;

    explicit AlgebraicElement(FieldPtr ctx)
        : ctx_(std::move(ctx)), num_(ctx_->degree()), den_(1)
    {}

    AlgebraicElement(FieldPtr ctx, std::vector<BigInt> num, BigInt den = 1)
        : ctx_(std::move(ctx)), num_(std::move(num)), den_(std::move(den))
    {
        if (num_.size() != ctx_->degree())
            throw std::invalid_argument("coefficient vector length does not match field degree");
        if (den_ == 0)
            throw std::invalid_argument("zero denominator");
        normalize();
    }

    static AlgebraicElement from_int(FieldPtr ctx, const BigInt& v)
    {
        AlgebraicElement r(std::move(ctx));
        r.num_[0] = v;
        return r;
    }

    static AlgebraicElement from_rational(FieldPtr ctx, const Rational& v)
    {
        AlgebraicElement r(std::move(ctx));
        r.num_[0] = boost::multiprecision::numerator(v);
        r.den_ = boost::multiprecision::denominator(v);
        r.normalize();
        return r;
    }

    /// Reduces a polynomial in beta with rational coefficients modulo p.
    static AlgebraicElement from_poly(FieldPtr ctx, const std::vector<Rational>& coeffs)
    {
        auto rem = detail::divmod(coeffs, detail::to_rat(ctx->min_poly())).second;
        BigInt l = 1;
        for (auto& c : rem)
            l = boost::multiprecision::lcm(l, boost::multiprecision::denominator(c));
        std::vector<BigInt> num(ctx->degree());
        for (std::size_t k = 0; k < rem.size(); ++k)
            num[k] = boost::multiprecision::numerator(rem[k]) * (l / boost::multiprecision::denominator(rem[k]));
        return AlgebraicElement(std::move(ctx), std::move(num), l);
    }

    static AlgebraicElement zero(FieldPtr ctx) { return AlgebraicElement(std::move(ctx)); }
    static AlgebraicElement one(FieldPtr ctx) { return from_int(std::move(ctx), 1); }
    static AlgebraicElement beta(FieldPtr ctx)
    {
        if (ctx->degree() == 1)
            return from_int(ctx, -ctx->min_poly().coeffs[0]);
        AlgebraicElement r(std::move(ctx));
        r.num_[1] = 1;
        return r;
    }

    const FieldPtr& context() const noexcept { return ctx_; }
    const std::vector<BigInt>& num() const noexcept { return num_; }
    const BigInt& den() const noexcept { return den_; }
    std::size_t degree() const noexcept { return num_.size(); }
    bool is_integral() const noexcept { return den_ == 1; }
    bool is_zero() const noexcept
    {
        return std::all_of(num_.begin(), num_.end(), [](const BigInt& v) { return v == 0; });
    }

    AlgebraicElement& operator+=(const AlgebraicElement& o)
    {
        check(o);
        if (den_ == o.den_) {
            for (std::size_t k = 0; k < num_.size(); ++k)
                num_[k] += o.num_[k];
        } else {
            for (std::size_t k = 0; k < num_.size(); ++k)
                num_[k] = num_[k] * o.den_ + o.num_[k] * den_;
            den_ *= o.den_;
        }
        normalize();
        return *this;
    }

    AlgebraicElement& operator-=(const AlgebraicElement& o)
    {
        check(o);
        if (den_ == o.den_) {
            for (std::size_t k = 0; k < num_.size(); ++k)
                num_[k] -= o.num_[k];
        } else {
            for (std::size_t k = 0; k < num_.size(); ++k)
                num_[k] = num_[k] * o.den_ - o.num_[k] * den_;
            den_ *= o.den_;
        }
        normalize();
        return *this;
    }

    AlgebraicElement operator-() const
    {
        AlgebraicElement r = *this;
        for (auto& v : r.num_)
            v = -v;
        return r;
    }

    friend AlgebraicElement operator+(AlgebraicElement a, const AlgebraicElement& b) { return a += b; }
    friend AlgebraicElement operator-(AlgebraicElement a, const AlgebraicElement& b) { return a -= b; }

    friend AlgebraicElement operator*(const AlgebraicElement& a, const AlgebraicElement& b)
    {
        a.check(b);
        const std::size_t n = a.num_.size();
        std::vector<BigInt> full(2 * n - 1);
        for (std::size_t i = 0; i < n; ++i) {
            if (a.num_[i] == 0)
                continue;
            for (std::size_t j = 0; j < n; ++j)
                full[i + j] += a.num_[i] * b.num_[j];
        }
        std::vector<BigInt> out(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n));
        for (std::size_t k = n; k < full.size(); ++k) {
            if (full[k] == 0)
                continue;
            const auto& red = a.ctx_->reduction(k - n);
            for (std::size_t i = 0; i < n; ++i)
                out[i] += full[k] * red[i];
        }
        return AlgebraicElement(a.ctx_, std::move(out), a.den_ * b.den_);
    }

    friend AlgebraicElement operator*(const BigInt& s, AlgebraicElement a)
    {
        for (auto& v : a.num_)
            v *= s;
        a.normalize();
        return a;
    }

    /// Multiplication by beta: a shift plus one reduction step.
    AlgebraicElement times_beta() const
    {
        const std::size_t n = num_.size();
        AlgebraicElement r(ctx_);
        r.den_ = den_;
        const BigInt top = num_[n - 1];
        for (std::size_t i = n - 1; i >= 1; --i)
            r.num_[i] = num_[i - 1];
        r.num_[0] = 0;
        if (top != 0) {
            const auto& bn = ctx_->beta_power_n();
            for (std::size_t i = 0; i < n; ++i)
                r.num_[i] += top * bn[i];
        }
        r.normalize();
        return r;
    }

    AlgebraicElement times_beta_pow(unsigned k) const
    {
        AlgebraicElement r = *this;
        for (unsigned i = 0; i < k; ++i)
            r = r.times_beta();
        return r;
    }

    AlgebraicElement pow(unsigned k) const
    {
        AlgebraicElement r = one(ctx_);
        AlgebraicElement base = *this;
        while (k) {
            if (k & 1u)
                r = r * base;
            base = base * base;
            k >>= 1u;
        }
        return r;
    }

    /// Multiplicative inverse via the extended Euclidean algorithm over Q.
    AlgebraicElement inverse() const
    {
        if (is_zero())
            throw std::domain_error("inverse of zero");
        using detail::RatPoly;
        RatPoly a(num_.begin(), num_.end());
        detail::trim(a);
        RatPoly p = detail::to_rat(ctx_->min_poly());
        // invariant: s*a == r0 (mod p), t*a == r1 (mod p)
        RatPoly r0 = p, r1 = a, s0 = {}, s1 = {Rational(1)};
        while (!r1.empty()) {
            auto [q, r] = detail::divmod(r0, r1);
            RatPoly s = detail::sub(s0, detail::mul(q, s1));
            r0 = std::move(r1);
            r1 = std::move(r);
            s0 = std::move(s1);
            s1 = std::move(s);
        }
        if (r0.size() != 1)
            throw std::domain_error("element is a zero divisor modulo the defining polynomial");
        for (auto& c : s0)
            c /= r0[0];
        AlgebraicElement r = from_poly(ctx_, s0);
        // fold our denominator back in
        return den_ * r;
    }

    friend bool operator==(const AlgebraicElement& a, const AlgebraicElement& b)
    {
        return a.den_ == b.den_ && a.num_ == b.num_;
    }

    /// Evaluates the element at a numeric root of p.
    std::complex<double> evaluate(std::complex<double> root) const
    {
        std::complex<long double> z(root.real(), root.imag());
        std::complex<long double> acc(0);
        for (auto it = num_.rbegin(); it != num_.rend(); ++it)
            acc = acc * z + std::complex<long double>(to_long_double(*it));
        acc /= to_long_double(den_);
        return {static_cast<double>(acc.real()), static_cast<double>(acc.imag())};
    }

    double evaluate_real(double root) const
    {
        long double acc = 0;
        for (auto it = num_.rbegin(); it != num_.rend(); ++it)
            acc = acc * root + to_long_double(*it);
        return static_cast<double>(acc / to_long_double(den_));
    }

    /// Space-separated coefficient list with an optional "/den" suffix.
    std::string coeff_string() const
    {
        std::ostringstream os;
        for (std::size_t k = 0; k < num_.size(); ++k)
            os << (k ? " " : "") << num_[k];
        if (den_ != 1)
            os << " /" << den_;
        return os.str();
    }

    std::string to_string() const
    {
        std::ostringstream os;
        bool first = true;
        for (std::size_t k = num_.size(); k-- > 0;) {
            const BigInt& c = num_[k];
            if (c == 0)
                continue;
            BigInt a = abs(c);
            if (first)
                os << (c < 0 ? "-" : "");
            else
                os << (c < 0 ? " - " : " + ");
            first = false;
            if (a != 1 || k == 0)
                os << a;
            if (k >= 1)
                os << (a != 1 ? "*" : "") << "beta";
            if (k >= 2)
                os << "^" << k;
        }
        if (first)
            os << "0";
        std::string s = os.str();
        if (den_ != 1)
            s = "(" + s + ")/" + den_.str();
        return s;
    }

private:
    void check(const AlgebraicElement& o) const
    {
        if (ctx_ != o.ctx_ && !(ctx_ && o.ctx_ && ctx_->min_poly() == o.ctx_->min_poly()))
            throw Error(ErrorCode::ContextMismatch, "elements belong to different fields");
    }

    void normalize()
    {
        if (den_ < 0) {
            den_ = -den_;
            for (auto& v : num_)
                v = -v;
        }
        if (den_ == 1)
            return;
        BigInt g = den_;
        for (const auto& v : num_) {
            if (g == 1)
                break;
            if (v != 0)
                g = boost::multiprecision::gcd(g, v);
        }
        if (g != 1) {
            den_ /= g;
            for (auto& v : num_)
                v /= g;
        }
    }

    FieldPtr ctx_;
    std::vector<BigInt> num_;
    BigInt den_ = 1;
};

struct AlgebraicElementHash {
    std::size_t operator()(const AlgebraicElement& a) const noexcept
    {
        std::size_t h = std::hash<BigInt>{}(a.den());
        for (const auto& v : a.num())
            h ^= std::hash<BigInt>{}(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return h;
    }
};

/// beta^-1, which lies in Z[beta] exactly when |p(0)| = 1.
inline AlgebraicElement inverse_of_beta(const FieldPtr& ctx)
{
    if (!ctx->unimodular())
        throw Error(ErrorCode::NotUnimodular,
                    "beta^-1 is not in Z[beta]: |p(0)| = " + BigInt(abs(ctx->min_poly().constant_term())).str());
    const auto& c = ctx->min_poly().coeffs;
    const std::size_t n = ctx->degree();
    // beta * (beta^(n-1) + c_{n-1} beta^(n-2) + ... + c_1) = -c_0
    std::vector<BigInt> num(n);
    for (std::size_t k = 0; k < n; ++k)
        num[k] = -c[k + 1] * c[0]; // c_0 = +-1 so dividing by -c_0 is multiplying by -c_0
    return AlgebraicElement(ctx, std::move(num));
}

// ---------------------------------------------------------------------------
// Roots and embeddings
// ---------------------------------------------------------------------------

struct Root {
    std::complex<double> value;
    bool real = true;

    double modulus() const { return std::abs(value); }
};

/// Roots of p: real roots ascending, then one positive-imaginary representative per pair.
struct EmbeddingData {
    std::vector<Root> roots;
    std::size_t expanding_index = 0;
    std::size_t n = 0;      ///< degree of p
    std::size_t m = 1;      ///< physical dimension (beta real)
    std::size_t e = 0;      ///< real roots
    std::size_t f = 0;      ///< complex-conjugate pairs
    double max_residual = 0;
    int iterations = 0;

    double beta() const { return roots.at(expanding_index).value.real(); }
    std::size_t internal_dim() const { return n - m; }
};

struct RootFinderOptions {
    double tol = 1e-13;
    int max_iterations = 500;
    double residual_tol = 1e-12;
};

/// Simultaneous (Durand-Kerner) iteration, then Newton polishing in long double.
inline EmbeddingData find_roots(const IntPolynomial& p, const RootFinderOptions& opt = {})
{
    if (!is_squarefree(p))
        throw Error(ErrorCode::NotSquarefree, "root finder needs distinct roots: " + p.to_string());
    const int n = p.degree();
    if (n < 1)
        throw std::invalid_argument("constant polynomial has no roots");
    using cld = std::complex<long double>;
    const long double lc = to_long_double(p.leading());
    std::vector<long double> a(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k)
        a[static_cast<std::size_t>(k)] = to_long_double(p.coeffs[static_cast<std::size_t>(k)]) / lc;
    auto eval = [&](cld z) {
        cld acc = 0;
        for (int k = n; k >= 0; --k)
            acc = acc * z + a[static_cast<std::size_t>(k)];
        return acc;
    };
    auto deriv = [&](cld z) {
        cld acc = 0;
        for (int k = n; k >= 1; --k)
            acc = acc * z + a[static_cast<std::size_t>(k)] * static_cast<long double>(k);
        return acc;
    };

    long double radius = 0;
    for (int k = 0; k < n; ++k)
        radius = std::max(radius, std::fabs(a[static_cast<std::size_t>(k)]));
    radius += 1;
    std::vector<cld> z(static_cast<std::size_t>(n));
    const long double two_pi = 6.283185307179586476925286766559L;
    for (int k = 0; k < n; ++k)
        z[static_cast<std::size_t>(k)] = std::polar(radius, two_pi * k / n + 0.4L);

    EmbeddingData out;
    out.n = static_cast<std::size_t>(n);
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        long double worst = 0;
        for (int i = 0; i < n; ++i) {
            auto& zi = z[static_cast<std::size_t>(i)];
            cld denom = 1;
            for (int j = 0; j < n; ++j)
                if (j != i)
                    denom *= zi - z[static_cast<std::size_t>(j)];
            if (std::abs(denom) == 0)
                denom = cld(1e-30L);
            cld step = eval(zi) / denom;
            zi -= step;
            worst = std::max(worst, std::abs(step) / std::max<long double>(1, std::abs(zi)));
        }
        converged = worst < opt.tol;
    }
    out.iterations = it;
    for (auto& zi : z)
        for (int k = 0; k < 3; ++k) {
            cld d = deriv(zi);
            if (std::abs(d) == 0)
                break;
            zi -= eval(zi) / d;
        }
    for (auto& zi : z) {
        long double scale = p.magnitude_at(std::abs(zi)) / std::fabs(lc);
        if (std::abs(eval(zi)) > opt.residual_tol * std::max<long double>(1, scale) && !converged)
            throw Error(ErrorCode::NoConvergence, "root finder did not converge for " + p.to_string());
    }

    std::vector<cld> reals, uppers;
    std::size_t lowers = 0;
    for (auto& zi : z) {
        if (std::fabs(zi.imag()) <= 1e-9L * std::max<long double>(1, std::abs(zi))) {
            long double x = zi.real();
            for (int k = 0; k < 3; ++k) {
                cld d = deriv(cld(x));
                if (d.real() == 0)
                    break;
                x -= eval(cld(x)).real() / d.real();
            }
            reals.emplace_back(x);
        } else if (zi.imag() > 0) {
            uppers.push_back(zi);
        } else {
            ++lowers;
        }
    }
    if (lowers != uppers.size())
        throw Error(ErrorCode::NoConvergence, "complex roots did not pair up for " + p.to_string());
    std::sort(reals.begin(), reals.end(), [](cld x, cld y) { return x.real() < y.real(); });
    std::sort(uppers.begin(), uppers.end(), [](cld x, cld y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    for (auto& r : reals) {
        out.roots.push_back({std::complex<double>(static_cast<double>(r.real()), 0.0), true});
        out.max_residual = std::max(out.max_residual, static_cast<double>(std::abs(eval(r)) * std::fabs(lc)));
    }
    for (auto& u : uppers) {
        out.roots.push_back({std::complex<double>(static_cast<double>(u.real()), static_cast<double>(u.imag())), false});
        out.max_residual = std::max(out.max_residual, static_cast<double>(std::abs(eval(u)) * std::fabs(lc)));
    }
    out.e = reals.size();
    out.f = uppers.size();
    // default expanding root: the largest real root
    out.expanding_index = 0;
    for (std::size_t k = 0; k < out.e; ++k)
        if (out.roots[k].value.real() > out.roots[out.expanding_index].value.real())
            out.expanding_index = k;
    if (out.e == 0)
        out.m = 0;
    return out;
}

/// Roots of p with the expanding root pinned to the real root matching `perron`.
inline EmbeddingData embedding_for(const IntPolynomial& p, double perron, double match_tol = 1e-9,
                                   const RootFinderOptions& opt = {})
{
    EmbeddingData emb = find_roots(p, opt);
    std::optional<std::size_t> hit;
    for (std::size_t k = 0; k < emb.e; ++k) {
        if (std::fabs(emb.roots[k].value.real() - perron) <= match_tol * std::max(1.0, perron)) {
            if (hit)
                throw Error(ErrorCode::NoExactEigenvector, "two roots match the Perron value");
            hit = k;
        }
    }
    if (!hit)
        throw Error(ErrorCode::NoExactEigenvector,
                    "Perron value " + std::to_string(perron) + " is not a root of " + p.to_string());
    emb.expanding_index = *hit;
    emb.m = 1;
    return emb;
}

inline std::complex<double> galois_embed(const AlgebraicElement& a, const EmbeddingData& emb, std::size_t which)
{
    if (which >= emb.roots.size())
        throw std::out_of_range("root index out of range");
    return a.evaluate(emb.roots[which].value);
}

struct PisotVerdict {
    bool pisot = false;
    double margin = 0; ///< 1 - max modulus over the non-expanding roots
    double max_conjugate_modulus = 0;
};

/// beta is Pisot iff every other root has modulus < 1. Moduli within `tol` of 1 are Inconclusive.
inline PisotVerdict pisot_family_check(const EmbeddingData& emb, double tol = 1e-9)
{
    PisotVerdict v;
    for (std::size_t k = 0; k < emb.roots.size(); ++k) {
        if (k == emb.expanding_index)
            continue;
        double mod = emb.roots[k].modulus();
        if (std::fabs(mod - 1.0) <= tol)
            throw Error(ErrorCode::Inconclusive, "a conjugate has modulus within tolerance of 1");
        v.max_conjugate_modulus = std::max(v.max_conjugate_modulus, mod);
    }
    v.margin = 1.0 - v.max_conjugate_modulus;
    v.pisot = emb.roots[emb.expanding_index].real && v.max_conjugate_modulus < 1.0;
    return v;
}

/// Smallest-degree monic integer factor of `q` vanishing at `perron`, found by trial
/// products over subsets of its numeric roots. Degree of q is capped at 10.
inline IntPolynomial minimal_factor_at(const IntPolynomial& q_in, double perron, double tol = 1e-9)
{
    IntPolynomial q = squarefree_part(q_in);
    const int deg = q.degree();
    if (deg < 1)
        throw Error(ErrorCode::NoExactEigenvector, "constant polynomial");
    if (deg > 10)
        throw Error(ErrorCode::Unsupported, "factor search limited to degree <= 10");
    EmbeddingData emb = embedding_for(q, perron, tol);
    // expand pairs into the full root list
    std::vector<std::complex<long double>> all;
    std::size_t anchor = 0;
    for (std::size_t k = 0; k < emb.roots.size(); ++k) {
        const auto& r = emb.roots[k].value;
        if (k == emb.expanding_index)
            anchor = all.size();
        all.emplace_back(r.real(), r.imag());
        if (!emb.roots[k].real)
            all.emplace_back(r.real(), -r.imag());
    }
    const std::size_t total = all.size();
    std::vector<std::size_t> others;
    for (std::size_t k = 0; k < total; ++k)
        if (k != anchor)
            others.push_back(k);

    for (std::size_t size = 1; size <= total; ++size) {
        // choose size-1 of the other roots
        std::vector<bool> pick(others.size(), false);
        std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size - 1), true);
        do {
            std::vector<std::complex<long double>> poly = {1};
            auto mul_root = [&](std::complex<long double> r) {
                std::vector<std::complex<long double>> next(poly.size() + 1, 0);
                for (std::size_t i = 0; i < poly.size(); ++i) {
                    next[i + 1] += poly[i];
                    next[i] -= r * poly[i];
                }
                poly = std::move(next);
            };
            mul_root(all[anchor]);
            for (std::size_t i = 0; i < others.size(); ++i)
                if (pick[i])
                    mul_root(all[others[i]]);
            bool ok = true;
            std::vector<BigInt> ints;
            for (auto& c : poly) {
                long double r = std::round(c.real());
                if (std::fabs(c.imag()) > 1e-6L || std::fabs(c.real() - r) > 1e-6L) {
                    ok = false;
                    break;
                }
                ints.emplace_back(static_cast<long long>(r));
            }
            if (ok) {
                IntPolynomial cand(std::move(ints));
                if (divides(cand, q))
                    return cand;
            }
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return q;
}

} // namespace tilecps
