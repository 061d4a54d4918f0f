// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "tilecps/pipeline.hpp"

using namespace tilecps;

namespace {

SubstitutionSpec spec(const std::string& name)
{
    return load_spec_file(std::string(TILECPS_SPEC_DIR) + "/" + name + ".json");
}

struct Criterion {
    int id;
    std::string title;
    double budget; ///< seconds
    std::vector<std::pair<std::string, bool>> checks;
    double seconds = 0;

    void check(const std::string& what, bool ok) { checks.emplace_back(what, ok); }
    bool passed() const
    {
        return seconds < budget && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
    }
};

int run(Criterion& c, const std::function<void(Criterion&)>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.check(std::string("no error (") + e.what() + ")", false);
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = c.passed();
    std::printf("%s criterion %d: %s (%.2f s, budget %.0f s)\n", ok ? "PASS" : "FAIL", c.id, c.title.c_str(),
                c.seconds, c.budget);
    for (const auto& [what, good] : c.checks)
        if (!good)
            std::printf("    failed: %s\n", what.c_str());
    if (c.seconds >= c.budget)
        std::printf("    failed: runtime over budget\n");
    std::fflush(stdout);
    return ok ? 0 : 1;
}

std::string num(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<std::string> sorted_strings(const std::vector<AlgebraicElement>& v)
{
    std::vector<std::string> s;
    for (const auto& e : v)
        s.push_back(e.to_string());
    std::sort(s.begin(), s.end());
    return s;
}

// Hausdorff distance between a 1-D cover and the interval [a, b].
double interval_hausdorff(const WindowApprox& wa, std::size_t letter, double a, double b)
{
    const double h = wa.grid.cell();
    std::vector<std::pair<double, double>> runs;
    for (std::size_t k = 0; k < wa.grid.size(); ++k) {
        if (!wa.covers[letter][k])
            continue;
        const double lo = static_cast<double>(wa.grid.lo[0] + static_cast<std::int64_t>(k)) * h;
        if (!runs.empty() && std::fabs(runs.back().second - lo) < h / 2)
            runs.back().second = lo + h;
        else
            runs.emplace_back(lo, lo + h);
    }
    if (runs.empty())
        return INFINITY;
    double d = std::max({0.0, a - runs.front().first, runs.back().second - b, runs.front().first - a,
                         b - runs.back().second});
    for (std::size_t k = 1; k < runs.size(); ++k)
        d = std::max(d, (runs[k].first - runs[k - 1].second) / 2);
    return d;
}

bool labelled(const Json& j)
{
    const auto& p = j["parameters"];
    bool ok = p.contains("radius") && p.contains("depth") && p.contains("m_max") && p["radius"].get<double>() > 0 &&
              p["m_max"].get<int>() > 0;
    if (j.contains("coincidence") && !j["coincidence"].is_null())
        ok = ok && j["coincidence"]["label"] == "finite-radius certificate, not a proof" &&
             j["coincidence"].contains("radius_checked") && j["coincidence"].contains("m_max");
    if (j.contains("windows"))
        ok = ok && p["depth"].get<int>() > 0 && j["windows"].contains("depth");
    if (j.contains("model_set_inclusions"))
        ok = ok && j["model_set_inclusions"].contains("radius") && j["model_set_inclusions"].contains("depth") &&
             j["model_set_inclusions"].contains("margin");
    return ok;
}

std::vector<Json> reports; // collected for criterion 6

} // namespace

int main()
{
    int failures = 0;

    Criterion c1{1, "non-unimodular example: digit sets, interval windows, overlap, verdict", 10, {}};
    failures += run(c1, [](Criterion& c) {
        const auto sp = spec("example59");
        const auto sys = build_system(sp);
        const auto F = sys.field;
        const auto one = AlgebraicElement::one(F), zero = AlgebraicElement::zero(F);
        const auto sqrt2 = AlgebraicElement::beta(F) - AlgebraicElement::from_int(F, 2);
        const auto two = AlgebraicElement::from_int(F, 2);
        c.check("D_aa = {0, 1}", sorted_strings(sys.digits(0, 0)) == sorted_strings({zero, one}));
        c.check("D_ab = {0, 1 + sqrt2}", sorted_strings(sys.digits(0, 1)) == sorted_strings({zero, one + sqrt2}));
        c.check("D_ba = {2}", sorted_strings(sys.digits(1, 0)) == sorted_strings({two}));
        c.check("D_bb = {1, 2 + sqrt2}", sorted_strings(sys.digits(1, 1)) == sorted_strings({one, two + sqrt2}));

        PipelineOptions o;
        o.route = Route::Ifs;
        const auto rep = run_pipeline(sp, o);
        reports.push_back(to_json(rep));
        const double s2 = std::sqrt(2.0);
        if (!rep.windows) {
            c.check("windows computed", false);
            return;
        }
        const double ha = interval_hausdorff(*rep.windows, 0, 0, 1 + s2);
        const double hb = interval_hausdorff(*rep.windows, 1, s2, 2 + s2);
        c.check("X_a within 0.02 of [0, 1+sqrt2] (got " + num(ha) + ")", ha < 0.02);
        c.check("X_b within 0.02 of [sqrt2, 2+sqrt2] (got " + num(hb) + ")", hb < 0.02);
        const double ov = rep.overlap->eroded[0][1];
        c.check("eroded overlap 1.0 +- 0.05 (got " + num(ov) + ")", std::fabs(ov - 1.0) <= 0.05);
        c.check("verdict WindowOverlap", rep.verdict == Verdict::WindowOverlap);
        c.check("non-unimodular flagged", rep.unimodular && !*rep.unimodular && !rep.notes.empty() &&
                                              rep.notes[0].find("|p(0)| = 2") != std::string::npos);
    });

    Criterion c2{2, "Fibonacci end to end", 30, {}};
    failures += run(c2, [](Criterion& c) {
        PipelineOptions o;
        o.radius = 200;
        o.depth = 9;
        o.margin = 2;
        const auto rep = run_pipeline(spec("fibonacci"), o);
        reports.push_back(to_json(rep));
        c.check("unimodular", rep.unimodular && *rep.unimodular);
        c.check("Pisot margin 0.381966 +- 1e-6",
                rep.pisot && std::fabs(rep.pisot->margin - (3 - std::sqrt(5.0)) / 2) < 1e-6);
        c.check("index_in_L = 1", rep.module && rep.module->analysis.index == 1);
        c.check("certificate with xi = 0, M <= 4 at R = 200",
                rep.coincidence && rep.coincidence->found && rep.coincidence->xi->is_zero() &&
                    rep.coincidence->M <= 4 && rep.coincidence->radius_checked == 200);
        bool intervals = rep.regularity.has_value();
        if (intervals) {
            const auto& r = *rep.regularity;
            for (int d = 6; d <= 10; ++d) {
                const auto it = std::find(r.depths.begin(), r.depths.end(), d);
                intervals = intervals && it != r.depths.end() && r.boundary_counts[it - r.depths.begin()] <= 4;
            }
        }
        c.check("boundary cells <= 4 at depths 6..10", intervals);
        c.check("inclusions at depth 9, margin 2 with 0 exceptions",
                rep.inclusions && rep.inclusions->depth == 9 && rep.inclusions->margin == 2 &&
                    rep.inclusions->outside_cover == 0 && rep.inclusions->not_control == 0 &&
                    rep.inclusions->control_points > 0 && rep.inclusions->lattice_points > 0);
        c.check("verdict RegularEuclideanModelSetEvidence", rep.verdict == Verdict::RegularEuclideanModelSetEvidence);
    });

    Criterion c3{3, "Tribonacci Rauzy windows", 60, {}};
    failures += run(c3, [](Criterion& c) {
        PipelineOptions o;
        o.depth = 8;
        o.route = Route::Both;
        const auto rep = run_pipeline(spec("tribonacci"), o);
        reports.push_back(to_json(rep));
        if (!rep.cps || !rep.window_stats) {
            c.check("CPS and windows computed (" + rep.reason + ")", false);
            return;
        }
        const auto& D = rep.cps->D;
        const double beta = rep.system->beta();
        c.check("internal space R^2", rep.cps->internal_dim == 2);
        c.check("D is a rotation-scaling", D.rows() == 2 && std::fabs(D(0, 0) - D(1, 1)) < 1e-12 &&
                                               std::fabs(D(0, 1) + D(1, 0)) < 1e-12);
        c.check("modulus^2 = 1/beta within 1e-9", std::fabs(D.determinant() - 1 / beta) < 1e-9);
        const auto& h = rep.window_stats->hausdorff_ifs_projection;
        std::string hs;
        for (auto v : h)
            hs += " " + std::to_string(v);
        c.check("IFS and projection within 3 cells at depth 8 (got" + hs + ")",
                h.size() == 3 && *std::max_element(h.begin(), h.end()) <= 3);
        double eroded = 0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i + 1; j < 3; ++j)
                eroded += rep.overlap->eroded[i][j];
        c.check("pairwise eroded overlap < 1% (got " + num(eroded / rep.overlap->total_measure) + ")",
                eroded < 0.01 * rep.overlap->total_measure);
        c.check("eigen residual < 2% (got " + num(rep.regularity->eigen_residual) + ")",
                rep.regularity->eigen_residual < 0.02);
        const auto& r = *rep.regularity;
        bool dec = true;
        for (int d = 6; d <= 9; ++d)
            dec = dec && std::find(r.depths.begin(), r.depths.end(), d) != r.depths.end();
        c.check("boundary volume strictly decreasing over depths 6..9", dec && r.strictly_decreasing);
    });

    Criterion c4{4, "negative controls stop at their gates", 5, {}};
    failures += run(c4, [](Criterion& c) {
        const auto tm = run_pipeline(spec("thue_morse"));
        reports.push_back(to_json(tm));
        c.check("Thue-Morse Inapplicable(empty internal space)",
                tm.verdict == Verdict::Inapplicable && tm.reason == "empty internal space");
        const auto np = run_pipeline(spec("non_pisot"));
        reports.push_back(to_json(np));
        c.check("non-Pisot stops at the Pisot gate", np.verdict == Verdict::Inapplicable && np.pisot &&
                                                         !np.pisot->pisot && !np.module && !np.cps);
    });

    Criterion c5{5, "invariant suites", 120, {}};
    failures += run(c5, [](Criterion& c) {
        std::mt19937_64 rng(1);
        for (auto name : {"fibonacci", "tribonacci", "example59"}) {
            const std::string n = name;
            const auto sys = build_system(spec(name));
            const auto cps = build_cps(sys.field, sys.embedding);
            const std::size_t deg = sys.field->degree();
            std::uniform_int_distribution<int> coef(-50, 50);
            double worst = 0;
            for (int k = 0; k < 1000; ++k) {
                std::vector<BigInt> v(deg);
                for (auto& x : v)
                    x = coef(rng);
                const AlgebraicElement x(sys.field, v);
                worst = std::max(worst, (star_map(x.times_beta(), cps) - cps.D * star_map(x, cps)).norm());
            }
            c.check(n + ": Psi(beta x) = D Psi(x) within 1e-9 (worst " + num(worst) + ")", worst < 1e-9);

            bool chains = true;
            try {
                validate_tile_equation(sys.digits, sys.lengths, sys.beta());
            } catch (const Error&) {
                chains = false;
            }
            c.check(n + ": tile-equation endpoint chains exact", chains);

            bool counts = true;
            for (int M = 1; M <= 4; ++M) {
                const auto dm = iterate_digit_sets(sys.digits, M);
                const auto sm = matrix_power(sys.matrix.S, M);
                for (std::size_t i = 0; i < sys.kappa(); ++i)
                    for (std::size_t j = 0; j < sys.kappa(); ++j)
                        counts = counts && static_cast<std::int64_t>(dm(i, j).size()) == sm[i][j];
            }
            c.check(n + ": #(D^M)_ij = (S^M)_ij for M <= 4", counts);
            c.check(n + ": Perron value matches a root of p within 1e-9",
                    std::fabs(sys.matrix.perron_value - sys.beta()) < 1e-9);
            const double p0 = std::fabs(sys.min_poly.constant_term().convert_to<double>());
            c.check(n + ": |det D| beta = |p(0)| within 1e-9",
                    std::fabs(std::fabs(cps.D.determinant()) * sys.beta() - p0) < 1e-9);
            c.check(n + ": lattice determinant > 1e-9", cps.lattice_det > 1e-9);
        }
        for (const auto& j : reports)
            if (j["coincidence"].is_object() && j["coincidence"]["found"] == true)
                c.check(j["spec"]["name"].get<std::string>() + ": difference inclusion at r = 10",
                        j.contains("difference_inclusion") && j["difference_inclusion"]["holds"] == true);
        PipelineOptions o;
        o.route = Route::Both;
        o.depth = 7;
        const auto a = to_json(run_pipeline(spec("fibonacci"), o)).dump(2);
        const auto b = to_json(run_pipeline(spec("fibonacci"), o)).dump(2);
        c.check("byte-identical reports across two runs", a == b);
    });

    Criterion c6{6, "finite-radius evidence labelled with (R, depth, M_max)", 5, {}};
    failures += run(c6, [](Criterion& c) {
        c.check("reports collected", reports.size() == 5);
        for (const auto& j : reports)
            c.check(j["spec"]["name"].get<std::string>() + ": bounds labelled", labelled(j));
        c.check("evidence verdicts rest on a certificate plus inclusions", [] {
            for (const auto& j : reports)
                if (j["verdict"] == "RegularEuclideanModelSetEvidence" &&
                    !(j["coincidence"]["found"] == true && j["model_set_inclusions"]["outside_cover"] == 0 &&
                      j["model_set_inclusions"]["not_control_points"] == 0))
                    return false;
            return true;
        }());
    });

    return failures;
}
