#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>
#include <string>

#include "tilecps/cps.hpp"

using namespace tilecps;
using Catch::Approx;

namespace {

SubstitutionSystem load(const std::string& name)
{
    return build_system(load_spec_file(std::string(TILECPS_SPEC_DIR) + "/" + name + ".json"));
}

CPSContext cps_for(const SubstitutionSystem& sys) { return build_cps(sys.field, sys.embedding); }

AlgebraicElement random_element(const FieldPtr& f, std::mt19937_64& rng, int bound)
{
    std::uniform_int_distribution<int> d(-bound, bound);
    std::vector<BigInt> num;
    for (std::size_t k = 0; k < f->degree(); ++k)
        num.emplace_back(d(rng));
    return AlgebraicElement(f, std::move(num));
}

} // namespace

TEST_CASE("Fibonacci scheme", "[cps]")
{
    auto sys = load("fibonacci");
    auto cps = cps_for(sys);
    REQUIRE(cps.internal_dim == 1);
    CHECK(cps.D(0, 0) == Approx(-0.6180339887).margin(1e-10));
    CHECK(lattice_check(cps) == Approx(std::sqrt(5.0)).margin(1e-10));
    auto b2 = AlgebraicElement::beta(sys.field).pow(2);
    CHECK(star_map(b2, cps)[0] == Approx(0.3819660113).margin(1e-10));
}

TEST_CASE("tribonacci scheme", "[cps]")
{
    auto sys = load("tribonacci");
    auto cps = cps_for(sys);
    REQUIRE(cps.internal_dim == 2);
    const double a = cps.D(0, 0), b = cps.D(1, 0);
    CHECK(a == Approx(-0.4196433776).margin(1e-9));
    CHECK(std::fabs(b) == Approx(0.6062907292).margin(1e-9));
    CHECK(cps.D(1, 1) == Approx(a).margin(1e-15));
    CHECK(cps.D(0, 1) == Approx(-b).margin(1e-15));
    CHECK(a * a + b * b == Approx(0.5436890127).margin(1e-9));
    CHECK(cps.contraction() == Approx(std::sqrt(0.5436890127)).margin(1e-9));
}

TEST_CASE("non-unimodular schemes", "[cps]")
{
    auto f = field_from_min_poly(IntPolynomial{2, -4, 1});
    auto emb = find_roots(f->min_poly());
    auto cps = build_cps(f, emb);
    CHECK(lattice_check(cps) == Approx(std::sqrt(8.0)).margin(1e-9));

    auto ex = load("example59");
    auto ecps = cps_for(ex);
    auto x = AlgebraicElement::one(ex.field) + AlgebraicElement::beta(ex.field);
    // beta = 2 + sqrt 2, so 1 + beta maps to 3 - sqrt 2
    CHECK(star_map(x, ecps)[0] == Approx(3 - std::sqrt(2.0)).margin(1e-10));
    auto y = AlgebraicElement::beta(ex.field) - AlgebraicElement::one(ex.field);
    CHECK(star_map(y, ecps)[0] == Approx(-0.4142135624).margin(1e-10));
    try {
        scaled_e_delta_window(0.5, 1, ecps);
        FAIL("expected NotUnimodular");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotUnimodular);
    }
}

TEST_CASE("empty internal space", "[cps]")
{
    auto lat = load("lattice");
    try {
        build_cps(lat.field, lat.embedding);
        FAIL("expected EmptyInternalSpace");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyInternalSpace);
    }
}

TEST_CASE("star map intertwines beta and D", "[cps][property]")
{
    std::mt19937_64 rng(7);
    for (auto name : {"fibonacci", "tribonacci", "example59"}) {
        auto sys = load(name);
        auto cps = cps_for(sys);
        for (int k = 0; k < 1000; ++k) {
            auto x = random_element(sys.field, rng, 50);
            auto y = random_element(sys.field, rng, 50);
            InternalVector lhs = star_map(x.times_beta(), cps);
            InternalVector rhs = cps.D * star_map(x, cps);
            CHECK((lhs - rhs).norm() < 1e-9);
            CHECK((star_map(x + y, cps) - star_map(x, cps) - star_map(y, cps)).norm() < 1e-9);
        }
        CHECK(std::fabs(cps.D.determinant()) * sys.beta() ==
              Approx(std::fabs(to_double(sys.field->min_poly().constant_term()))).margin(1e-9));
    }
}

TEST_CASE("Pisot contraction of star images", "[cps][property]")
{
    for (auto name : {"fibonacci", "tribonacci"}) {
        auto sys = load(name);
        auto cps = cps_for(sys);
        // least squares slope of log |Psi(beta^k)| against k
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int count = 30;
        auto p = AlgebraicElement::one(sys.field);
        for (int k = 0; k < count; ++k) {
            const double y = std::log(star_map(p, cps).norm());
            sx += k;
            sy += y;
            sxx += k * k;
            sxy += k * y;
            p = p.times_beta();
        }
        const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
        CHECK(slope == Approx(std::log(cps.contraction())).margin(0.05));
    }
}

TEST_CASE("density of the star image", "[cps]")
{
    auto fib = cps_for(load("fibonacci"));
    CHECK(density_probe(fib, 500, 1e-2, 3).hit_rate() == 1.0);
    auto tri = cps_for(load("tribonacci"));
    CHECK(density_probe(tri, 300, 5e-2, 3).hit_rate() == 1.0);
}

TEST_CASE("E_delta predicates", "[cps]")
{
    auto sys = load("fibonacci");
    auto cps = cps_for(sys);
    auto b10 = AlgebraicElement::beta(sys.field).pow(10);
    CHECK(e_delta_membership(b10, 0.1, cps));
    CHECK_FALSE(e_delta_membership(AlgebraicElement::one(sys.field), 0.5, cps));

    auto w = scaled_e_delta_window(1.0, 3, cps);
    CHECK(w.half_axes[0] == Approx(0.2360679775).margin(1e-9));
    InternalVector u(1);
    u[0] = 0.23;
    CHECK(w.contains(u));
    u[0] = 0.24;
    CHECK_FALSE(w.contains(u));

    auto tri = load("tribonacci");
    auto tcps = cps_for(tri);
    auto tw = scaled_e_delta_window(1.0, 2, tcps);
    CHECK(tw.half_axes[0] == Approx(0.5436890127).margin(1e-9));
    CHECK(tw.half_axes[1] == Approx(0.5436890127).margin(1e-9));
}

TEST_CASE("lattice enumeration against brute force", "[cps]")
{
    for (auto name : {"fibonacci", "tribonacci", "example59"}) {
        auto sys = load(name);
        auto cps = cps_for(sys);
        const auto dim = static_cast<Eigen::Index>(cps.internal_dim);
        const double radius = 15.0;
        InternalVector lo = InternalVector::Constant(dim, -1.5), hi = InternalVector::Constant(dim, 1.0);
        std::set<std::vector<std::int64_t>> got;
        for (const auto& p : enumerate_lattice(cps, radius, lo, hi))
            got.insert(p.coeffs);

        std::set<std::vector<std::int64_t>> expected;
        const int b = 40;
        const auto n = sys.field->degree();
        std::vector<std::int64_t> c(n, -b);
        for (;;) {
            std::vector<BigInt> num(c.begin(), c.end());
            AlgebraicElement x(sys.field, num);
            const double v = x.evaluate_real(sys.beta());
            InternalVector s = star_map(x, cps);
            bool inside = std::fabs(v) <= radius;
            for (Eigen::Index d = 0; d < dim; ++d)
                inside = inside && s[d] >= lo[d] && s[d] <= hi[d];
            if (inside)
                expected.insert(c);
            std::size_t k = 0;
            while (k < n && c[k] == b)
                c[k++] = -b;
            if (k >= n)
                break;
            ++c[k];
        }
        CHECK(!expected.empty());
        CHECK(got == expected);
    }
}
