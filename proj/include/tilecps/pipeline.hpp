#pragma once

// End-to-end run: substitution -> field -> patch and return module -> CPS -> coincidence ->
// windows -> model-set evidence, with a verdict and a deterministic JSON report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tilecps/coincidence.hpp"
#include "tilecps/cps.hpp"
#include "tilecps/pointset.hpp"
#include "tilecps/substitution.hpp"
#include "tilecps/window.hpp"

namespace tilecps {

enum class Verdict { RegularEuclideanModelSetEvidence, WindowOverlap, NoCoincidenceCertificate, Inapplicable };

inline std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::RegularEuclideanModelSetEvidence:
        return "RegularEuclideanModelSetEvidence";
    case Verdict::WindowOverlap:
        return "WindowOverlap";
    case Verdict::NoCoincidenceCertificate:
        return "NoCoincidenceCertificate";
    case Verdict::Inapplicable:
        return "Inapplicable";
    }
    return "Inapplicable";
}

inline int exit_code(Verdict v)
{
    switch (v) {
    case Verdict::RegularEuclideanModelSetEvidence:
        return 0;
    case Verdict::WindowOverlap:
        return 2;
    case Verdict::NoCoincidenceCertificate:
        return 3;
    case Verdict::Inapplicable:
        return 4;
    }
    return 1;
}

enum class Route { Ifs, Projection, Both };

inline std::string to_string(Route r)
{
    return r == Route::Ifs ? "ifs" : r == Route::Projection ? "projection" : "both";
}

struct PipelineOptions {
    std::optional<double> radius; ///< coincidence and inclusion radius
    std::optional<int> depth;
    std::optional<int> m_max;
    std::uint64_t seed = 1;
    Route route = Route::Both;
    int margin = 2;
    std::size_t candidates = 256;
    double e_delta_radius = 10;
    std::size_t density_samples = 100;
    std::size_t projection_min_points = 1000;
    bool windows = true; ///< false stops after the coincidence search
};

/// A module error tagged with the pipeline stage it came from.
class StageError : public Error {
public:
    StageError(std::string stage, const Error& e)
        : Error(e.code(), stage + ": " + strip(e.what()))
        , stage_(std::move(stage))
    {}
    const std::string& stage() const noexcept { return stage_; }

private:
    static std::string strip(const std::string& what)
    {
        const auto p = what.find(": ");
        return p == std::string::npos ? what : what.substr(p + 2);
    }
    std::string stage_;
};

struct WindowStats {
    Route route = Route::Ifs;
    int depth = 0;
    std::vector<double> measures;
    std::vector<std::size_t> cells;
    std::vector<std::size_t> boundary;
    std::vector<std::int64_t> hausdorff_ifs_projection; ///< per letter, in cells (route both)
    std::vector<std::size_t> projection_points;
    double projection_radius = 0;
    double contraction = 0;
};

struct VerdictReport {
    SubstitutionSpec spec;
    Verdict verdict = Verdict::Inapplicable;
    std::string reason;
    std::vector<std::string> notes;

    // parameters actually used
    double radius = 0;
    int depth = 0;
    int m_max = 0;
    int margin = 0;
    std::uint64_t seed = 0;
    Route route = Route::Both;

    std::optional<SubstitutionSystem> system;
    int primitivity_power = 0;
    std::optional<bool> unimodular;
    std::optional<PisotVerdict> pisot;
    std::optional<ModuleReport> module;
    std::size_t xi_size = 0;
    std::optional<MeyerProbe> meyer;
    std::optional<CPSContext> cps;
    std::optional<DensityProbe> density;
    double delta = 0;
    std::optional<CoincidenceCertificate> coincidence;
    std::optional<bool> difference_inclusion;
    std::optional<EDeltaReport> e_delta;
    std::string e_delta_error;
    std::optional<WindowApprox> windows;
    std::optional<WindowStats> window_stats;
    std::optional<OverlapReport> overlap;
    std::optional<RegularityReport> regularity;
    std::optional<InclusionReport> inclusions;

    int exit_code() const { return tilecps::exit_code(verdict); }
};

namespace detail {

inline double max_length(const SubstitutionSystem& sys)
{
    double m = 0;
    for (std::size_t i = 0; i < sys.kappa(); ++i)
        m = std::max(m, sys.length_value(i));
    return m;
}

template <class F> auto staged(const std::string& stage, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    }
}

inline VerdictReport& inapplicable(VerdictReport& rep, std::string reason)
{
    rep.verdict = Verdict::Inapplicable;
    rep.reason = std::move(reason);
    return rep;
}

/// Smallest patch (doubling the radius) with at least `target` control points per letter.
inline PatchPointSet projection_patch(const SubstitutionSystem& sys, double start, std::size_t target)
{
    const Seed seed = find_seed(sys.spec);
    for (double r = start;; r *= 2) {
        auto patch = generate_patch(sys, seed, r);
        std::size_t low = patch.tiles().size();
        for (std::size_t l = 0; l < sys.kappa(); ++l)
            low = std::min(low, patch.count(l));
        if (low >= target)
            return patch;
    }
}

} // namespace detail

inline int default_window_depth(std::size_t dim) { return dim == 1 ? 9 : 8; }

/// Covers at depths bottom..depth+1 from the chosen route, plus the per-letter stats at `depth`.
struct WindowRun {
    DualIFS ifs;
    std::vector<WindowApprox> levels;
    int bottom = 0;
    int depth = 0;
    std::optional<WindowApprox> projection;
    WindowStats stats;

    const WindowApprox& at_depth() const { return levels[static_cast<std::size_t>(depth - bottom)]; }
};

inline WindowRun compute_windows(const SubstitutionSystem& sys, const CPSContext& cps, int depth, Route route,
                                 double radius, std::size_t min_points = 1000)
{
    const std::size_t dim = cps.internal_dim;
    WindowRun run;
    run.depth = depth;
    run.bottom = std::min(6, std::max(depth - 2, 1));
    const int top = depth + 1;
    run.ifs = build_dual_ifs(sys.digits, cps);
    auto& stats = run.stats;
    stats.route = route;
    stats.depth = depth;
    stats.contraction = run.ifs.contraction;
    if (route != Route::Ifs) {
        const auto target =
            std::max<std::size_t>(min_points, (std::size_t{1} << (depth * static_cast<int>(dim))) / 8);
        const auto ppatch = detail::projection_patch(sys, std::max(radius, 500.0), target);
        stats.projection_radius = ppatch.radius();
        run.projection = attractor_by_projection(ppatch, cps, route == Route::Projection ? top : depth, min_points);
        stats.projection_points = run.projection->points;
    }
    if (route == Route::Projection) {
        for (int g = run.bottom; g <= top; ++g)
            run.levels.push_back(coarsen(*run.projection, g));
    } else {
        const auto fine = attractor_fine(run.ifs, top + default_extra_depth(dim));
        for (int g = run.bottom; g <= top; ++g)
            run.levels.push_back(coarsen(fine, g));
    }
    const WindowApprox& wa = run.at_depth();
    if (route == Route::Both)
        for (std::size_t l = 0; l < sys.kappa(); ++l)
            stats.hausdorff_ifs_projection.push_back(hausdorff_cells(wa, *run.projection, l));
    for (std::size_t l = 0; l < sys.kappa(); ++l) {
        stats.measures.push_back(wa.measure(l));
        stats.cells.push_back(wa.occupied(l));
        stats.boundary.push_back(boundary_cells(wa.covers[l], wa.grid));
    }
    return run;
}

inline VerdictReport run_pipeline(const SubstitutionSpec& spec, const PipelineOptions& opt = {})
{
    VerdictReport rep;
    rep.spec = spec;
    rep.seed = opt.seed;
    rep.route = opt.route;
    rep.margin = opt.margin;
    rep.m_max = opt.m_max.value_or(spec.params.m_max);

    // substitution, field, lengths
    SubstitutionSystem sys;
    sys.matrix = detail::staged("matrix", [&] { return build_matrix(spec); });
    try {
        sys.primitivity_power = check_primitive(sys.matrix);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NotPrimitive)
            return detail::inapplicable(rep, "substitution matrix is not primitive");
        throw StageError("matrix", e);
    }
    rep.primitivity_power = sys.primitivity_power;
    sys.min_poly = detail::staged("field", [&] { return acquire_min_poly(spec, sys.matrix, spec.params.tol); });
    sys.field = detail::staged("field", [&] { return field_from_min_poly(sys.min_poly); });
    sys.embedding = detail::staged(
        "roots", [&] { return embedding_for(sys.min_poly, sys.matrix.perron_value, spec.params.tol); });
    sys.lengths = detail::staged(
        "lengths", [&] { return derive_lengths(spec, sys.matrix, sys.field, sys.embedding.beta()); });
    sys.digits = derive_digit_sets(spec, sys.lengths);
    detail::staged("lengths", [&] {
        validate_tile_equation(sys.digits, sys.lengths, sys.embedding.beta());
        return 0;
    });
    sys.spec = spec;
    rep.system = sys;
    const double max_len = detail::max_length(sys);
    rep.radius = opt.radius.value_or(spec.params.radius.value_or(200 * max_len));

    // gates
    rep.unimodular = sys.field->unimodular();
    if (!*rep.unimodular)
        rep.notes.push_back("non-unimodular expansion: |p(0)| = " +
                            BigInt(abs(sys.min_poly.constant_term())).str());
    try {
        rep.pisot = pisot_family_check(sys.embedding, spec.params.tol);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Inconclusive)
            return detail::inapplicable(rep, "Pisot family check inconclusive: a conjugate has modulus 1");
        throw StageError("gates", e);
    }
    if (!rep.pisot->pisot)
        return detail::inapplicable(rep, "not a Pisot family: conjugate modulus " +
                                             std::to_string(rep.pisot->max_conjugate_modulus) + " >= 1");

    // control points and return module
    const Seed seed = detail::staged("patch", [&] { return find_seed(spec); });
    const auto patch = detail::staged("patch", [&] { return generate_patch(sys, seed, 3 * rep.radius); });
    if (!patch.integral())
        return detail::inapplicable(rep, "control points are not in Z[beta]");
    const auto xi = compute_xi(patch, rep.radius);
    rep.xi_size = xi.size();
    try {
        rep.module = module_analysis(xi, sys.field->degree());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::RankDeficient)
            return detail::inapplicable(rep, "Xi does not span a full-rank module: " + std::string(e.what()));
        throw StageError("patch", e);
    }
    if (!rep.module->generates_L())
        return detail::inapplicable(rep, "<Xi> has index " + rep.module->analysis.index.str() + " in Z[beta]");
    rep.meyer = meyer_flc_probe(patch, xi, std::min(rep.radius, 20 * max_len), 3 * max_len);

    // cut-and-project scheme
    try {
        rep.cps = build_cps(sys.field, sys.embedding);
        lattice_check(*rep.cps);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyInternalSpace)
            return detail::inapplicable(rep, "empty internal space");
        if (e.code() == ErrorCode::DegenerateLattice)
            return detail::inapplicable(rep, "degenerate lattice");
        throw StageError("cps", e);
    }
    const auto& cps = *rep.cps;
    rep.density = density_probe(cps, opt.density_samples, cps.internal_dim == 1 ? 1e-2 : 5e-2, opt.seed);
    rep.delta = spec.params.delta.value_or(default_delta(xi, cps));

    // coincidence
    CoincidenceOptions copt;
    copt.m_max = rep.m_max;
    copt.radius = rep.radius;
    copt.max_candidates = opt.candidates;
    rep.coincidence = detail::staged("coincidence", [&] { return find_coincidence(sys, copt); });
    const auto& cert = *rep.coincidence;
    if (cert.found) {
        const double r = std::min(10.0, xi.radius);
        rep.difference_inclusion = check_xi_difference_inclusion(xi, sys.beta(), cert.M, r);
        try {
            const int k_max = e_delta_search_bound(cert.M, rep.delta, xi, cps);
            rep.e_delta = find_K_for_E_delta(patch, xi, cps, rep.delta, k_max, opt.e_delta_radius);
        } catch (const Error& e) {
            rep.e_delta_error = e.what();
            rep.notes.push_back("E_delta bridge not established: " + rep.e_delta_error);
        }
    }
    if (!opt.windows) {
        if (cert.found)
            return detail::inapplicable(rep, "windows not computed");
        rep.verdict = Verdict::NoCoincidenceCertificate;
        rep.reason = "no algebraic coincidence found for M <= " + std::to_string(cert.m_reached);
        return rep;
    }

    // windows
    rep.depth = opt.depth.value_or(spec.params.grid_depth > 0 ? spec.params.grid_depth
                                                             : default_window_depth(cps.internal_dim));
    auto run = detail::staged("windows", [&] {
        return compute_windows(sys, cps, rep.depth, opt.route, rep.radius, opt.projection_min_points);
    });
    const WindowApprox& wa = run.at_depth();
    rep.windows = wa;
    rep.window_stats = run.stats;
    rep.overlap = overlap_report(wa);
    rep.regularity = regularity_report(run.levels, run.ifs);

    if (cert.found)
        rep.inclusions = detail::staged("verification",
                                        [&] { return verify_model_set(patch, wa, cps, opt.margin, rep.radius); });

    // verdict
    if (!rep.overlap->disjoint_interiors()) {
        rep.verdict = Verdict::WindowOverlap;
        rep.reason = "windows overlap in their interiors (eroded overlap > 0)";
        return rep;
    }
    if (!cert.found) {
        rep.verdict = Verdict::NoCoincidenceCertificate;
        rep.reason = "no algebraic coincidence found for M <= " + std::to_string(cert.m_reached) + " at R = " +
                     std::to_string(cert.radius_checked);
        return rep;
    }
    const auto& inc = *rep.inclusions;
    if (inc.outside_cover == 0 && inc.not_control == 0 && rep.regularity->regular_evidence()) {
        rep.verdict = Verdict::RegularEuclideanModelSetEvidence;
        rep.reason = "coincidence certificate, disjoint windows, boundary decay and model-set inclusions hold at the "
                     "stated bounds";
        return rep;
    }
    return detail::inapplicable(rep, "window evidence inconsistent: " + std::to_string(inc.outside_cover) +
                                         " control points outside their cover, " + std::to_string(inc.not_control) +
                                         " lattice points misassigned, boundary decay " +
                                         (rep.regularity->regular_evidence() ? "ok" : "absent"));
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

using Json = nlohmann::ordered_json;

inline Json spec_json(const SubstitutionSpec& spec, const std::optional<SubstitutionSystem>& sys)
{
    Json j;
    j["name"] = spec.name;
    Json letters = Json::array(), rules = Json::object(), lengths = Json::object();
    for (std::size_t i = 0; i < spec.kappa(); ++i) {
        letters.push_back(spec.letter_name(i));
        rules[spec.letter_name(i)] = spec.rule_text[i];
        if (sys)
            lengths[spec.letter_name(i)] = sys->lengths[i].to_string();
    }
    j["letters"] = letters;
    j["rules"] = rules;
    if (sys) {
        j["lengths"] = lengths;
        j["min_poly"] = sys->min_poly.to_string();
        j["beta"] = sys->beta();
    }
    return j;
}

inline Json to_json(const CoincidenceCertificate& c, const SubstitutionSpec& spec)
{
    Json j;
    j["found"] = c.found;
    j["label"] = "finite-radius certificate, not a proof";
    if (c.found) {
        j["M"] = c.M;
        j["xi"] = c.xi->to_string();
        j["letter"] = spec.letter_name(c.letter);
    }
    j["radius_checked"] = c.radius_checked;
    j["candidate_radius"] = c.candidate_radius;
    j["m_max"] = c.m_max;
    j["m_reached"] = c.m_reached;
    j["candidates_tested"] = c.candidates_tested;
    j["xi_checked"] = c.xi_checked;
    j["counterexample"] = c.counterexample ? Json(c.counterexample->to_string()) : Json(nullptr);
    if (!c.note.empty())
        j["note"] = c.note;
    return j;
}

inline Json matrix_json(const Eigen::MatrixXd& m)
{
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline Json cps_json(const CPSContext& cps, double delta, const std::optional<DensityProbe>& density)
{
    Json c;
    c["internal_dim"] = cps.internal_dim;
    Json roots = Json::array();
    for (const auto& r : cps.conjugates)
        roots.push_back({{"re", r.value.real()}, {"im", r.value.imag()}, {"modulus", r.modulus()}});
    c["conjugates"] = roots;
    c["D"] = matrix_json(cps.D);
    c["det_D"] = std::fabs(cps.D.determinant());
    c["contraction"] = cps.contraction();
    c["lattice_det"] = cps.lattice_det;
    if (density)
        c["density_probe"] = {{"samples", density->samples},
                              {"eps", density->eps},
                              {"c_max", density->c_max},
                              {"hit_rate", density->hit_rate()}};
    c["delta"] = delta;
    return c;
}

inline Json to_json(const WindowStats& w)
{
    Json ws;
    ws["route"] = to_string(w.route);
    ws["depth"] = w.depth;
    ws["contraction"] = w.contraction;
    ws["measures"] = w.measures;
    ws["cells"] = w.cells;
    ws["boundary_cells"] = w.boundary;
    if (!w.hausdorff_ifs_projection.empty())
        ws["hausdorff_ifs_projection_cells"] = w.hausdorff_ifs_projection;
    if (!w.projection_points.empty()) {
        ws["projection_points"] = w.projection_points;
        ws["projection_radius"] = w.projection_radius;
    }
    return ws;
}

inline Json to_json(const OverlapReport& o)
{
    return {{"depth", o.depth},
            {"raw", o.raw},
            {"eroded", o.eroded},
            {"total_measure", o.total_measure},
            {"disjoint_interiors", o.disjoint_interiors()}};
}

inline Json to_json(const RegularityReport& r)
{
    return {{"depths", r.depths},
            {"boundary_cells", r.boundary_counts},
            {"boundary_volume", r.boundary_volume},
            {"decay_exponent", r.decay_exponent},
            {"strictly_decreasing", r.strictly_decreasing},
            {"measures", r.w},
            {"eigen_residual", r.eigen_residual},
            {"regular_evidence", r.regular_evidence()}};
}

inline Json to_json(const VerdictReport& rep)
{
    Json j;
    j["tool"] = "tilecps";
    j["spec"] = spec_json(rep.spec, rep.system);
    j["parameters"] = {{"radius", rep.radius}, {"depth", rep.depth},   {"m_max", rep.m_max},
                       {"margin", rep.margin}, {"seed", rep.seed},     {"route", to_string(rep.route)}};
    if (rep.system) {
        j["matrix"] = rep.system->matrix.S;
        j["primitivity_power"] = rep.primitivity_power;
    }
    j["unimodular"] = rep.unimodular ? Json(*rep.unimodular) : Json(nullptr);
    if (rep.pisot)
        j["pisot_family"] = {{"pisot", rep.pisot->pisot},
                             {"margin", rep.pisot->margin},
                             {"max_conjugate_modulus", rep.pisot->max_conjugate_modulus}};
    else
        j["pisot_family"] = nullptr;
    if (rep.module) {
        j["index_in_L"] = rep.module->analysis.index.str();
        j["xi_module"] = {{"rank", rep.module->analysis.rank},
                          {"stable", rep.module->stable},
                          {"xi_size", rep.xi_size}};
    } else {
        j["index_in_L"] = nullptr;
    }
    if (rep.meyer)
        j["meyer"] = {{"min_gap_control_points", rep.meyer->min_gap_support},
                      {"diff_radius", rep.meyer->diff_radius},
                      {"min_gap_xi_differences", rep.meyer->min_gap_xi_diff},
                      {"local_radius", rep.meyer->local_radius},
                      {"local_configurations", rep.meyer->local_configurations}};
    if (rep.cps)
        j["cps"] = cps_json(*rep.cps, rep.delta, rep.density);
    j["coincidence"] = rep.coincidence ? to_json(*rep.coincidence, rep.spec) : Json(nullptr);
    if (rep.difference_inclusion)
        j["difference_inclusion"] = {{"holds", *rep.difference_inclusion}, {"radius", 10.0}};
    if (rep.e_delta)
        j["e_delta"] = {{"K", rep.e_delta->K},
                        {"delta", rep.e_delta->delta},
                        {"radius", rep.e_delta->radius},
                        {"points", rep.e_delta->points}};
    else if (!rep.e_delta_error.empty())
        j["e_delta"] = {{"error", rep.e_delta_error}};
    if (rep.window_stats)
        j["windows"] = to_json(*rep.window_stats);
    if (rep.overlap)
        j["overlap"] = to_json(*rep.overlap);
    if (rep.regularity)
        j["regularity"] = to_json(*rep.regularity);
    if (rep.inclusions)
        j["model_set_inclusions"] = {{"radius", rep.inclusions->radius},
                                     {"depth", rep.inclusions->depth},
                                     {"margin", rep.inclusions->margin},
                                     {"control_points", rep.inclusions->control_points},
                                     {"outside_cover", rep.inclusions->outside_cover},
                                     {"lattice_points", rep.inclusions->lattice_points},
                                     {"not_control_points", rep.inclusions->not_control}};
    j["notes"] = rep.notes;
    j["verdict"] = to_string(rep.verdict);
    j["reason"] = rep.reason;
    j["exit_code"] = rep.exit_code();
    return j;
}

} // namespace tilecps
