#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "tilecps/pipeline.hpp"

using namespace tilecps;

namespace {

struct Flags {
    std::string spec;
    std::optional<double> radius;
    std::optional<int> depth;
    std::optional<int> m_max;
    std::uint64_t seed = 1;
    std::string json;
    std::string svg;
    std::string csv;
    std::string route = "both";
    std::size_t candidates = 256;
};

Route parse_route(const std::string& r)
{
    return r == "ifs" ? Route::Ifs : r == "projection" ? Route::Projection : Route::Both;
}

// "-" is stdout; files are written whole or not at all.
void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path);
    out << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

double max_length(const SubstitutionSystem& sys) { return detail::max_length(sys); }

std::string coeffs(const AlgebraicElement& e)
{
    std::string s = "[";
    for (std::size_t k = 0; k < e.num().size(); ++k) {
        s += (k ? " " : "") + e.num()[k].str();
        if (e.den() != 1)
            s += "/" + e.den().str();
    }
    return s + "]";
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

CPSContext checked_cps(const SubstitutionSystem& sys)
{
    auto cps = build_cps(sys.field, sys.embedding);
    lattice_check(cps);
    return cps;
}

void write_windows(const Flags& f, const WindowApprox& wa, const SubstitutionSpec& spec)
{
    if (!f.svg.empty()) {
        std::ostringstream s;
        render_svg(s, wa, spec.letters);
        emit(f.svg, s.str());
    }
    if (!f.csv.empty()) {
        std::ostringstream s;
        render_csv(s, wa, spec.letters);
        emit(f.csv, s.str());
    }
}

int cmd_validate(const Flags& f)
{
    const auto spec = load_spec_file(f.spec);
    const auto sys = build_system(spec);
    Json j = spec_json(spec, sys);
    j["matrix"] = sys.matrix.S;
    j["primitivity_power"] = sys.primitivity_power;
    j["unimodular"] = sys.field->unimodular();
    j["digit_count"] = sys.digits.total();
    if (!f.json.empty())
        emit(f.json, dump(j));
    else
        std::cout << spec.name << ": valid, beta = " << fmt(sys.beta()) << ", p = " << sys.min_poly.to_string()
                  << "\n";
    return 0;
}

int cmd_points(const Flags& f, bool xi_mode)
{
    const auto sys = build_system(load_spec_file(f.spec));
    const double r = f.radius.value_or(20 * max_length(sys));
    const auto patch = generate_patch(sys, find_seed(sys.spec), xi_mode ? 3 * r : r);
    std::ostringstream csv;
    csv << "letter,position_float,coeff_vector\n";
    if (!xi_mode) {
        for (const auto& t : patch.tiles())
            if (std::fabs(t.value) <= r)
                csv << sys.spec.letter_name(t.letter) << "," << fmt(t.value) << "," << coeffs(t.pos) << "\n";
    } else {
        const auto xi = compute_xi(patch, r);
        for (std::size_t k = 0; k < xi.size(); ++k)
            csv << sys.spec.letter_name(xi.first_letter[k]) << "," << fmt(xi.values[k]) << ","
                << coeffs(xi.elements[k]) << "\n";
        if (!f.json.empty()) {
            const auto m = module_analysis(xi, sys.field->degree());
            emit(f.json, dump({{"radius", r},
                               {"size", xi.size()},
                               {"rank", m.analysis.rank},
                               {"index_in_L", m.analysis.index.str()},
                               {"stable", m.stable}}));
        }
    }
    emit(f.csv, csv.str());
    return 0;
}

int cmd_cps(const Flags& f)
{
    const auto sys = build_system(load_spec_file(f.spec));
    const auto cps = checked_cps(sys);
    const double r = f.radius.value_or(200 * max_length(sys));
    const auto xi = compute_xi(generate_patch(sys, find_seed(sys.spec), 3 * r), r);
    const auto density = density_probe(cps, 100, cps.internal_dim == 1 ? 1e-2 : 5e-2, f.seed);
    Json j;
    j["beta"] = sys.beta();
    j["min_poly"] = sys.min_poly.to_string();
    j["radius"] = r;
    j["cps"] = cps_json(cps, sys.spec.params.delta.value_or(default_delta(xi, cps)), density);
    emit(f.json, dump(j));
    return 0;
}

int cmd_coincidence(const Flags& f)
{
    const auto sys = build_system(load_spec_file(f.spec));
    CoincidenceOptions opt;
    opt.m_max = f.m_max.value_or(sys.spec.params.m_max);
    opt.radius = f.radius.value_or(sys.spec.params.radius.value_or(0));
    opt.max_candidates = f.candidates;
    const auto cert = find_coincidence(sys, opt);
    emit(f.json, dump(to_json(cert, sys.spec)));
    return cert.found ? 0 : exit_code(Verdict::NoCoincidenceCertificate);
}

int cmd_window(const Flags& f)
{
    const auto sys = build_system(load_spec_file(f.spec));
    const auto cps = checked_cps(sys);
    const int depth = f.depth.value_or(sys.spec.params.grid_depth > 0 ? sys.spec.params.grid_depth
                                                                      : default_window_depth(cps.internal_dim));
    const double r = f.radius.value_or(200 * max_length(sys));
    const auto run = compute_windows(sys, cps, depth, parse_route(f.route), r);
    const auto ov = overlap_report(run.at_depth());
    Json j;
    j["windows"] = to_json(run.stats);
    j["overlap"] = to_json(ov);
    j["regularity"] = to_json(regularity_report(run.levels, run.ifs));
    emit(f.json, dump(j));
    write_windows(f, run.at_depth(), sys.spec);
    return ov.disjoint_interiors() ? 0 : exit_code(Verdict::WindowOverlap);
}

PipelineOptions pipeline_options(const Flags& f)
{
    PipelineOptions o;
    o.radius = f.radius;
    o.depth = f.depth;
    o.m_max = f.m_max;
    o.seed = f.seed;
    o.route = parse_route(f.route);
    o.candidates = f.candidates;
    return o;
}

int cmd_verify(const Flags& f)
{
    const auto rep = run_pipeline(load_spec_file(f.spec), pipeline_options(f));
    emit(f.json, dump(to_json(rep)));
    if (rep.windows)
        write_windows(f, *rep.windows, rep.spec);
    return rep.exit_code();
}

void summary(std::ostream& out, const VerdictReport& rep)
{
    out << "spec        " << rep.spec.name << "\n";
    if (rep.system)
        out << "field       p = " << rep.system->min_poly.to_string() << ", beta = " << fmt(rep.system->beta())
            << "\n";
    if (rep.unimodular)
        out << "unimodular  " << (*rep.unimodular ? "yes" : "no") << "\n";
    if (rep.pisot)
        out << "pisot       " << (rep.pisot->pisot ? "yes" : "no") << ", margin " << fmt(rep.pisot->margin) << "\n";
    if (rep.module)
        out << "index_in_L  " << rep.module->analysis.index.str() << " (|Xi| = " << rep.xi_size << ")\n";
    if (rep.cps)
        out << "cps         internal dim " << rep.cps->internal_dim << ", lattice det " << fmt(rep.cps->lattice_det)
            << ", delta " << fmt(rep.delta) << "\n";
    if (rep.coincidence) {
        const auto& c = *rep.coincidence;
        out << "coincidence ";
        if (c.found)
            out << "M = " << c.M << ", xi = " << c.xi->to_string() << " in C_" << rep.spec.letter_name(c.letter);
        else
            out << "none for M <= " << c.m_reached;
        out << " (R = " << fmt(c.radius_checked) << ", M_max = " << c.m_max << ")\n";
    }
    if (rep.e_delta)
        out << "E_delta     K = " << rep.e_delta->K << "\n";
    if (rep.window_stats) {
        out << "windows     depth " << rep.depth << ", measures";
        for (double m : rep.window_stats->measures)
            out << " " << fmt(m);
        out << "\n";
    }
    if (rep.overlap)
        out << "overlap     " << (rep.overlap->disjoint_interiors() ? "disjoint interiors" : "interiors overlap")
            << "\n";
    if (rep.regularity)
        out << "boundary    decay exponent " << fmt(rep.regularity->decay_exponent) << ", eigen residual "
            << fmt(rep.regularity->eigen_residual) << "\n";
    if (rep.inclusions)
        out << "inclusions  " << rep.inclusions->outside_cover << " outside cover, " << rep.inclusions->not_control
            << " lattice points misassigned (R = " << fmt(rep.inclusions->radius) << ", margin "
            << rep.inclusions->margin << ")\n";
    for (const auto& n : rep.notes)
        out << "note        " << n << "\n";
    out << "verdict     " << to_string(rep.verdict) << (rep.reason.empty() ? "" : ": " + rep.reason) << "\n";
}

int cmd_report(const Flags& f)
{
    const auto rep = run_pipeline(load_spec_file(f.spec), pipeline_options(f));
    summary(std::cout, rep);
    if (!f.json.empty())
        emit(f.json, dump(to_json(rep)));
    if (rep.windows)
        write_windows(f, *rep.windows, rep.spec);
    return rep.exit_code();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cut-and-project schemes and model-set windows for one-dimensional substitution tilings"};
    app.require_subcommand(1);
    Flags f;

    auto sub = [&](const std::string& name, const std::string& help) {
        auto* s = app.add_subcommand(name, help);
        s->add_option("spec", f.spec, "substitution spec (JSON)")->required()->check(CLI::ExistingFile);
        s->add_option("--radius", f.radius, "patch / check radius");
        s->add_option("--depth", f.depth, "window grid depth");
        s->add_option("--m-max", f.m_max, "largest coincidence exponent M");
        s->add_option("--seed", f.seed, "seed for the density probe");
        s->add_option("--json", f.json, "write JSON to this file ('-' for stdout)");
        s->add_option("--svg", f.svg, "write the window SVG to this file");
        return s;
    };
    auto* validate = sub("validate", "parse a spec and check the tile equations");
    auto* points = sub("points", "control points as CSV");
    auto* xi = sub("xi", "return set Xi as CSV");
    for (auto* s : {points, xi})
        s->add_option("--csv", f.csv, "CSV output file ('-' for stdout)");
    auto* cps = sub("cps", "cut-and-project scheme as JSON");
    auto* coincidence = sub("coincidence", "finite-radius algebraic coincidence search");
    coincidence->add_option("--candidates", f.candidates, "candidate translations per M");
    auto* window = sub("window", "window covers from the dual IFS and/or projection");
    auto* verify = sub("verify", "full pipeline, JSON verdict report");
    auto* report = sub("report", "full pipeline, text summary plus optional artifacts");
    for (auto* s : {window, verify, report}) {
        s->add_option("--route", f.route, "window route")->check(CLI::IsMember({"ifs", "projection", "both"}));
        s->add_option("--csv", f.csv, "cell list CSV output file");
    }
    for (auto* s : {verify, report})
        s->add_option("--candidates", f.candidates, "candidate translations per M");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed())
            return cmd_validate(f);
        if (points->parsed())
            return cmd_points(f, false);
        if (xi->parsed())
            return cmd_points(f, true);
        if (cps->parsed())
            return cmd_cps(f);
        if (coincidence->parsed())
            return cmd_coincidence(f);
        if (window->parsed())
            return cmd_window(f);
        if (verify->parsed())
            return cmd_verify(f);
        return cmd_report(f);
    } catch (const std::exception& e) {
        std::cerr << "tilecps: " << e.what() << "\n";
        return 1;
    }
}
