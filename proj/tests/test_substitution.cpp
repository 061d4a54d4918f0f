#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "tilecps/substitution.hpp"

using namespace tilecps;
using Catch::Approx;

namespace {

SubstitutionSpec spec_from(const std::string& rules_json, const std::string& extra = "")
{
    return parse_spec(R"({"format": 1, )" + rules_json + extra + "}");
}

SubstitutionSystem load(const std::string& name)
{
    return build_system(load_spec_file(std::string(TILECPS_SPEC_DIR) + "/" + name + ".json"));
}

AlgebraicElement el(const FieldPtr& f, std::vector<BigInt> c) { return AlgebraicElement(f, std::move(c)); }

std::multiset<std::string> as_strings(const std::vector<AlgebraicElement>& v)
{
    std::multiset<std::string> out;
    for (const auto& a : v)
        out.insert(a.to_string());
    return out;
}

// Brute-force oracle for composed digit sets: expand the word of length M from each letter
// and accumulate the position of each descendant (left endpoints, exact).
std::vector<std::vector<std::size_t>> count_by_word(const SubstitutionSystem& sys, int M)
{
    const std::size_t k = sys.kappa();
    std::vector<std::vector<std::size_t>> out(k, std::vector<std::size_t>(k, 0));
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<std::size_t> word = {j};
        for (int step = 0; step < M; ++step) {
            std::vector<std::size_t> next;
            for (auto c : word)
                next.insert(next.end(), sys.spec.rules[c].begin(), sys.spec.rules[c].end());
            word = std::move(next);
        }
        for (auto c : word)
            ++out[c][j];
    }
    return out;
}

} // namespace

TEST_CASE("parse the shipped specs", "[substitution][parse]")
{
    auto ex = load_spec_file(std::string(TILECPS_SPEC_DIR) + "/example59.json");
    CHECK(ex.kappa() == 2);
    CHECK(ex.rule_text[0] == "aab");
    CHECK(ex.rule_text[1] == "abab");
    REQUIRE(ex.lengths.has_value());

    auto fib = load_spec_file(std::string(TILECPS_SPEC_DIR) + "/fibonacci.json");
    CHECK(fib.kappa() == 2);
    CHECK(fib.rules[1] == std::vector<std::size_t>{0});

    auto trib = load_spec_file(std::string(TILECPS_SPEC_DIR) + "/tribonacci.json");
    CHECK(trib.kappa() == 3);
}

TEST_CASE("strict schema errors carry a location", "[substitution][parse]")
{
    auto expect_schema = [](const std::string& text, const std::string& where) {
        try {
            parse_spec(text);
            FAIL("expected SchemaError for " << text);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::SchemaError);
            CHECK(std::string(e.what()).find(where) != std::string::npos);
        }
    };
    expect_schema(R"({"format": 1, "letters": ["a"], "rules": {"a": "aa"}, "colour": 3})", "/colour");
    expect_schema(R"({"format": 2, "letters": ["a"], "rules": {"a": "aa"}})", "/format");
    expect_schema(R"({"format": 1, "letters": ["a", "b"], "rules": {"a": "aa"}})", "/rules");
    expect_schema(R"({"format": 1, "letters": ["a", "b"], "rules": {"a": "aa", "b": "a"}})", "never occurs");
    expect_schema(R"({"format": 1, "letters": ["a"], "rules": {"a": "ax"}})", "/rules/a");
    expect_schema(R"({"format": 1, "letters": ["a"], "rules": {"a": ""}})", "/rules/a");
    expect_schema(R"({"format": 1, "letters": ["ab"], "rules": {"a": "a"}})", "/letters/0");
    expect_schema(R"({"format": 1, "letters": ["a"], "rules": {"a": "aa"}, "lengths": {"a": "beta +"}})",
                  "/lengths/a");
    expect_schema(R"({"format": 1, "letters": ["a"], "rules": {"a": "aa"}, "params": {"depth": 3}})",
                  "/params/depth");
    expect_schema("[1, 2]", "/");
    expect_schema("{not json", "malformed");
}

TEST_CASE("beta expressions", "[substitution][parse]")
{
    auto p = parse_beta_expression("beta^2 - 3*beta/2 + (1 - beta)*2");
    REQUIRE(p.size() == 3);
    CHECK(p[0] == 2);
    CHECK(p[1] == Rational(-7, 2));
    CHECK(p[2] == 1);
    CHECK(parse_beta_expression("-beta").at(1) == -1);
}

TEST_CASE("substitution matrices and Perron data", "[substitution]")
{
    auto ex = build_matrix(spec_from(R"("letters": ["a","b"], "rules": {"a": "aab", "b": "abab"})"));
    CHECK(ex.S == IntMatrix{{2, 2}, {1, 2}});
    CHECK(ex.perron_value == Approx(2 + std::sqrt(2.0)).margin(1e-12));
    CHECK(ex.perron_value == Approx(3.4142135624).margin(1e-10));
    CHECK(substitution_char_poly(ex) == IntPolynomial{2, -4, 1});

    auto fib = build_matrix(spec_from(R"("letters": ["a","b"], "rules": {"a": "ab", "b": "a"})"));
    CHECK(fib.S == IntMatrix{{1, 1}, {1, 0}});
    CHECK(fib.perron_value == Approx(1.6180339887).margin(1e-10));
    for (double v : fib.perron_right)
        CHECK(v > 0);

    auto doubling = build_matrix(spec_from(R"("letters": ["a"], "rules": {"a": "aa"})"));
    CHECK(doubling.S == IntMatrix{{2}});
    CHECK(doubling.perron_value == 2.0);
}

TEST_CASE("primitivity", "[substitution]")
{
    auto fib = build_matrix(spec_from(R"("letters": ["a","b"], "rules": {"a": "ab", "b": "a"})"));
    CHECK(check_primitive(fib) == 2);
    auto ex = build_matrix(spec_from(R"("letters": ["a","b"], "rules": {"a": "aab", "b": "abab"})"));
    CHECK(check_primitive(ex) == 1);

    SubMatrix id;
    id.S = {{1, 0}, {0, 1}};
    try {
        check_primitive(id);
        FAIL("expected NotPrimitive");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NotPrimitive);
    }
}

TEST_CASE("lengths solve the left eigen-equation exactly", "[substitution]")
{
    auto ex = load("example59");
    auto& f = ex.field;
    CHECK(ex.min_poly == IntPolynomial{2, -4, 1});
    CHECK(ex.lengths[0] == AlgebraicElement::one(f));
    CHECK(ex.lengths[1] == el(f, {-2, 1}));
    CHECK(ex.length_value(1) == Approx(std::sqrt(2.0)).margin(1e-12));

    auto fib = load("fibonacci");
    CHECK(fib.lengths[0] == AlgebraicElement::beta(fib.field));
    CHECK(fib.lengths[1] == AlgebraicElement::one(fib.field));

    auto trib = load("tribonacci");
    CHECK(trib.lengths[0] == el(trib.field, {0, 1, 0}));
    CHECK(trib.lengths[1] == el(trib.field, {0, -1, 1}));
    CHECK(trib.lengths[2] == el(trib.field, {1, 0, 0}));

    for (const auto* sys : {&ex, &fib, &trib})
        CHECK(satisfies_length_equation(sys->lengths, sys->matrix));

    // without the override, the canonical normalization of the non-unimodular system
    auto canon = build_system(spec_from(R"("letters": ["a","b"], "rules": {"a": "aab", "b": "abab"})"));
    CHECK(satisfies_length_equation(canon.lengths, canon.matrix));
    CHECK(canon.lengths[1] == el(canon.field, {2, 0}));
    CHECK(canon.lengths[0] == el(canon.field, {-2, 1}));
}

TEST_CASE("bad length override is rejected", "[substitution]")
{
    try {
        build_system(spec_from(R"("letters": ["a","b"], "rules": {"a": "aab", "b": "abab"}, )",
                               R"("lengths": {"a": "1", "b": "1"})"));
        FAIL("expected NoExactEigenvector");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoExactEigenvector);
    }
}

TEST_CASE("min_poly override is verified", "[substitution]")
{
    auto ok = build_system(spec_from(R"("letters": ["a","b"], "rules": {"a": "ab", "b": "a"}, )",
                                     R"("min_poly": [-1, -1, 1])"));
    CHECK(ok.min_poly == IntPolynomial{-1, -1, 1});
    try {
        build_system(spec_from(R"("letters": ["a","b"], "rules": {"a": "ab", "b": "a"}, )",
                               R"("min_poly": [-2, 0, 1])"));
        FAIL("expected rejection");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SchemaError);
    }
}

TEST_CASE("digit sets are prefix sums", "[substitution]")
{
    auto ex = load("example59");
    auto& f = ex.field;
    const auto one = AlgebraicElement::one(f);
    const auto sqrt2 = el(f, {-2, 1});
    const auto two = AlgebraicElement::from_int(f, 2);
    const auto zero = AlgebraicElement::zero(f);
    CHECK(as_strings(ex.digits(0, 0)) == as_strings({zero, one}));
    CHECK(as_strings(ex.digits(0, 1)) == as_strings({zero, one + sqrt2}));
    CHECK(as_strings(ex.digits(1, 0)) == as_strings({two}));
    CHECK(as_strings(ex.digits(1, 1)) == as_strings({one, two + sqrt2}));

    auto fib = load("fibonacci");
    CHECK(as_strings(fib.digits(0, 0)) == as_strings({AlgebraicElement::zero(fib.field)}));
    CHECK(as_strings(fib.digits(1, 0)) == as_strings({AlgebraicElement::beta(fib.field)}));
    CHECK(as_strings(fib.digits(0, 1)) == as_strings({AlgebraicElement::zero(fib.field)}));
    CHECK(fib.digits(1, 1).empty());

    auto lat = load("lattice");
    CHECK(lat.digits(0, 0).size() == 2);
    CHECK(lat.digits(0, 0)[1] == lat.lengths[0]);
}

TEST_CASE("tile equation", "[substitution]")
{
    for (auto name : {"example59", "fibonacci", "tribonacci", "thue_morse", "lattice", "non_pisot"}) {
        auto sys = load(name);
        CHECK_NOTHROW(validate_tile_equation(sys.digits, sys.lengths, sys.beta()));
    }
    auto fib = load("fibonacci");
    auto bad = fib.digits;
    bad.D[0][0] = {AlgebraicElement::zero(fib.field), AlgebraicElement::from_int(fib.field, 2)};
    try {
        validate_tile_equation(bad, fib.lengths, fib.beta());
        FAIL("expected GapOrOverlap");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::GapOrOverlap);
    }
}

TEST_CASE("composed digit sets", "[substitution]")
{
    auto fib = load("fibonacci");
    auto one = iterate_digit_sets(fib.digits, 1);
    CHECK(one.D == fib.digits.D);
    auto two = iterate_digit_sets(fib.digits, 2);
    auto b = AlgebraicElement::beta(fib.field);
    CHECK(as_strings(two(0, 0)) == as_strings({AlgebraicElement::zero(fib.field), b * b}));

    auto ex = load("example59");
    CHECK(iterate_digit_sets(ex.digits, 2)(0, 0).size() == 6);
    CHECK(matrix_power(ex.matrix.S, 2) == IntMatrix{{6, 8}, {4, 6}});
}

TEST_CASE("cardinality identity #(D^M)_ij = (S^M)(i,j)", "[substitution][property]")
{
    for (auto name : {"example59", "fibonacci", "tribonacci", "thue_morse", "non_pisot"}) {
        auto sys = load(name);
        for (int M = 1; M <= 4; ++M) {
            auto dm = iterate_digit_sets(sys.digits, M);
            auto sm = matrix_power(sys.matrix.S, M);
            auto words = count_by_word(sys, M);
            for (std::size_t i = 0; i < sys.kappa(); ++i)
                for (std::size_t j = 0; j < sys.kappa(); ++j) {
                    CHECK(dm(i, j).size() == static_cast<std::size_t>(sm[i][j]));
                    CHECK(words[i][j] == static_cast<std::size_t>(sm[i][j]));
                    std::set<std::string> distinct;
                    for (auto& a : dm(i, j))
                        distinct.insert(a.to_string());
                    CHECK(distinct.size() == dm(i, j).size());
                }
        }
    }
}

TEST_CASE("Perron value is a root of the minimal polynomial", "[substitution][property]")
{
    for (auto name : {"example59", "fibonacci", "tribonacci", "thue_morse", "non_pisot", "period_doubling"}) {
        auto sys = load(name);
        double best = 1e300;
        for (auto& r : sys.embedding.roots)
            best = std::min(best, std::abs(r.value - std::complex<double>(sys.matrix.perron_value, 0)));
        CHECK(best < 1e-9);
        CHECK(divides(sys.min_poly, substitution_char_poly(sys.matrix)));
    }
}
