#include <catch_amalgamated.hpp>

#include <string>

#include "tilecps/pipeline.hpp"

using namespace tilecps;

namespace {

SubstitutionSpec spec(const std::string& name)
{
    return load_spec_file(std::string(TILECPS_SPEC_DIR) + "/" + name + ".json");
}

PipelineOptions quick()
{
    PipelineOptions o;
    o.depth = 8;
    o.route = Route::Ifs;
    return o;
}

} // namespace

TEST_CASE("Fibonacci is a regular model set", "[pipeline]")
{
    auto rep = run_pipeline(spec("fibonacci"), quick());
    INFO(rep.reason);
    CHECK(rep.verdict == Verdict::RegularEuclideanModelSetEvidence);
    CHECK(rep.exit_code() == 0);
    REQUIRE(rep.coincidence);
    CHECK(rep.coincidence->M == 2);
    CHECK(rep.module->generates_L());
    CHECK(rep.inclusions->outside_cover == 0);
    CHECK(rep.inclusions->not_control == 0);
    CHECK(rep.e_delta);
    CHECK(rep.notes.empty());
}

TEST_CASE("non-unimodular example overlaps", "[pipeline]")
{
    auto rep = run_pipeline(spec("example59"), quick());
    CHECK(rep.verdict == Verdict::WindowOverlap);
    CHECK(rep.exit_code() == 2);
    REQUIRE(rep.unimodular);
    CHECK_FALSE(*rep.unimodular);
    REQUIRE(rep.notes.size() >= 1);
    CHECK(rep.notes[0].find("|p(0)| = 2") != std::string::npos);
    CHECK(rep.overlap->eroded[0][1] > 0.9);
}

TEST_CASE("gates", "[pipeline]")
{
    for (auto name : {"thue_morse", "period_doubling", "lattice"}) {
        auto rep = run_pipeline(spec(name), quick());
        INFO(name << ": " << rep.reason);
        CHECK(rep.verdict == Verdict::Inapplicable);
        CHECK(rep.reason == "empty internal space");
        CHECK(rep.exit_code() == 4);
    }
    auto np = run_pipeline(spec("non_pisot"), quick());
    CHECK(np.verdict == Verdict::Inapplicable);
    CHECK(np.reason.find("not a Pisot family") == 0);
    CHECK_FALSE(np.cps);

    auto bad = parse_spec(R"({"format": 1, "name": "reducible", "letters": ["a", "b"],
                              "rules": {"a": "aa", "b": "bb"}})");
    auto r = run_pipeline(bad, quick());
    CHECK(r.verdict == Verdict::Inapplicable);
    CHECK(r.reason.find("not primitive") != std::string::npos);
}

TEST_CASE("coincidence-only run", "[pipeline]")
{
    auto o = quick();
    o.windows = false;
    auto rep = run_pipeline(spec("fibonacci"), o);
    CHECK(rep.verdict == Verdict::Inapplicable);
    CHECK_FALSE(rep.windows);
}

TEST_CASE("reports are deterministic", "[pipeline]")
{
    auto o = quick();
    o.route = Route::Both;
    o.depth = 7;
    const auto a = to_json(run_pipeline(spec("fibonacci"), o)).dump(2);
    const auto b = to_json(run_pipeline(spec("fibonacci"), o)).dump(2);
    CHECK(a == b);
    auto j = Json::parse(a);
    CHECK(j["verdict"] == "RegularEuclideanModelSetEvidence");
    CHECK(j["coincidence"]["label"] == "finite-radius certificate, not a proof");
    CHECK(j["windows"]["hausdorff_ifs_projection_cells"].size() == 2);
}
