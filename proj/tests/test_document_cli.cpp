#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "trilab/cli.hpp"
#include "trilab/document.hpp"
#include "trilab/fixtures.hpp"
#include "trilab/parallel.hpp"

using namespace trilab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    fs::path dir = fs::temp_directory_path() / "trilab-tests";
    fs::create_directories(dir);
    return dir;
}

std::string write_doc(const Json& j, const std::string& name) {
    fs::path p = temp_dir() / name;
    std::ofstream f(p);
    f << j.dump(2) << "\n";
    return p.string();
}

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

Json e1_document(int horizon = 10) {
    FixtureTriple fx = canonical_diagonal_fixture(horizon);
    return trichotomy_document(fx.sys, fx.fam, fx.params);
}

}  // namespace

TEST_CASE("rate spec grammar round trips") {
    for (const char* text : {R"({"kind":"exp","lambda":2.0})", R"({"kind":"poly","p":1.5})",
                             R"({"kind":"table","values":[1.0,2.0,4.0]})"}) {
        Json j = Json::parse(text);
        RateSequence r = parse_rate_spec(j);
        RateSequence back = parse_rate_spec(rate_spec_json(r));
        for (int n = 0; n <= 2; ++n) {
            CHECK(back.at(n) == doctest::Approx(r.at(n)).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS(parse_rate_spec(Json::parse(R"({"kind":"weird"})")), DocumentError);
    CHECK_THROWS_AS(parse_rate_spec(Json::parse(R"({"kind":"exp","lambda":-1})")),
                    DocumentError);
}

TEST_CASE("system documents round trip through JSON") {
    FixtureTriple fx = canonical_diagonal_fixture(6);
    Json doc = trichotomy_document(fx.sys, fx.fam, fx.params);
    ParsedDocument parsed = parse_system_document(doc);

    CHECK(parsed.mode == "trichotomy");
    CHECK(parsed.dim == 3);
    CHECK(parsed.horizon == 6);
    REQUIRE(parsed.sys.has_value());
    REQUIRE(parsed.tri.has_value());
    REQUIRE(parsed.tri_params.has_value());
    for (int n = 0; n < 6; ++n) {
        CHECK((parsed.sys->coeff(n) - fx.sys.coeff(n)).cwiseAbs().maxCoeff() == 0.0);
    }
    for (int n = 0; n <= 6; ++n) {
        CHECK((parsed.tri->stable[n] - fx.fam.stable[n]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(parsed.tri_params->K == fx.params.K);
}

TEST_CASE("document schema violations are rejected") {
    Json doc = e1_document(4);

    Json no_version = doc;
    no_version.erase("version");
    CHECK_THROWS_AS(parse_system_document(no_version), DocumentError);

    Json bad_version = doc;
    bad_version["version"] = "trilab/99";
    CHECK_THROWS_AS(parse_system_document(bad_version), DocumentError);

    Json both = doc;
    both["generate"] = Json::object();
    CHECK_THROWS_AS(parse_system_document(both), DocumentError);

    Json neither = doc;
    neither.erase("coeffs");
    CHECK_THROWS_AS(parse_system_document(neither), DocumentError);

    Json ragged = doc;
    ragged["coeffs"][0][1].erase(2);
    CHECK_THROWS_AS(parse_system_document(ragged), DocumentError);

    Json bad_mode = doc;
    bad_mode["mode"] = "pentachotomy";
    CHECK_THROWS_AS(parse_system_document(bad_mode), DocumentError);
}

TEST_CASE("generator documents realize to full fixtures") {
    Json doc;
    doc["version"] = kSchemaVersion;
    doc["rates"] = {{"h", {{"kind", "exp"}, {"lambda", 2.0}}},
                    {"k", {{"kind", "exp"}, {"lambda", 2.0}}},
                    {"mu", {{"kind", "poly"}, {"p", 1.0}}},
                    {"nu", {{"kind", "poly"}, {"p", 1.0}}}};
    doc["generate"] = {{"blocks", Json::array({{{"role", "stable"}, {"dim", 1}},
                                               {{"role", "unstable"}, {"dim", 1}},
                                               {{"role", "central"}, {"dim", 1}}})},
                       {"horizon", 10}};
    ParsedDocument parsed = parse_system_document(doc);
    CHECK(parsed.generated);
    CHECK(parsed.dim == 3);
    FixtureTriple fx = canonical_diagonal_fixture(10);
    for (int n = 0; n < 10; ++n) {
        CHECK((parsed.sys->coeff(n) - fx.sys.coeff(n)).cwiseAbs().maxCoeff() == 0.0);
    }

    // declared params override the generated certificate
    Json declared = doc;
    declared["params"] = {{"K", 0.5}, {"a", 1.0}, {"b", 1.0}, {"eps", 0.0}};
    ParsedDocument p2 = parse_system_document(declared);
    CHECK(p2.tri_params->K == 0.5);
}

TEST_CASE("cli validate") {
    std::string path = write_doc(e1_document(), "e1.json");
    CliRun ok = cli({"validate", path});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("\"pass\": true") != std::string::npos);

    // corrupted annihilation: exit 1 and the clause is named
    Json bad_doc;
    bad_doc["version"] = kSchemaVersion;
    bad_doc["rates"] = e1_document()["rates"];
    bad_doc["generate"] = {{"blocks", Json::array({{{"role", "stable"}, {"dim", 1}},
                                                   {{"role", "unstable"}, {"dim", 1}},
                                                   {{"role", "central"}, {"dim", 1}}})},
                           {"horizon", 10},
                           {"corruption", "break-annihilation"}};
    std::string bad_path = write_doc(bad_doc, "e1-bad.json");
    CliRun bad = cli({"validate", bad_path});
    CHECK(bad.code == 1);
    CHECK(bad.out.find("annihilation") != std::string::npos);

    // missing projections: input error
    Json noproj = e1_document();
    noproj.erase("projections");
    CliRun miss = cli({"validate", write_doc(noproj, "e1-noproj.json")});
    CHECK(miss.code == 2);
    CHECK(miss.err.find("projections required") != std::string::npos);

    // malformed file
    fs::path garbled = temp_dir() / "garbled.json";
    std::ofstream(garbled) << "{ not json";
    CHECK(cli({"validate", garbled.string()}).code == 2);
    CHECK(cli({"validate", (temp_dir() / "missing.json").string()}).code == 2);
}

TEST_CASE("cli verify") {
    std::string path = write_doc(e1_document(), "e1v.json");
    CliRun ok = cli({"verify", path, "--window", "10"});
    CHECK(ok.code == 0);

    Json tight = e1_document();
    tight["params"]["K"] = 0.5;
    CliRun fail = cli({"verify", write_doc(tight, "e1-tight.json")});
    CHECK(fail.code == 1);

    // declared uniform reading of the oscillating fixture is rejected with
    // the blow-up constant reported
    FixtureTriple e2 = embedded_oscillating_fixture(40);
    BoundParams uniform(1.0, 0.75, 1.0, 0.0, e2.params.h, e2.params.k, e2.params.mu,
                        e2.params.nu);
    Json doc = trichotomy_document(e2.sys, e2.fam, uniform);
    CliRun ufail = cli({"verify", write_doc(doc, "e2-uniform.json"), "--window", "40"});
    CHECK(ufail.code == 1);
    CHECK(ufail.out.find("294267566.0") != std::string::npos);

    Json noparams = e1_document();
    noparams.erase("params");
    CHECK(cli({"verify", write_doc(noparams, "e1-noparams.json")}).code == 2);
}

TEST_CASE("cli couple and standalone re-verification") {
    std::string path = write_doc(e1_document(), "e1c.json");
    std::string out_b = (temp_dir() / "side-b.json").string();
    std::string out_c = (temp_dir() / "side-c.json").string();
    CliRun ok = cli({"couple", path, "--out-b", out_b, "--out-c", out_c});
    CHECK(ok.code == 0);

    CliRun vb = cli({"verify", out_b});
    CHECK(vb.code == 0);
    CliRun vc = cli({"verify", out_c});
    CHECK(vc.code == 0);

    ParsedDocument db = load_system_document(out_b);
    CHECK(db.mode == "dichotomy");
    CHECK(db.di_params->c == 0.5);
    // quotient rate of the diagonal fixture is identically one
    for (int n = 0; n <= 10; ++n) CHECK(db.rate_h->at(n) == 1.0);
    // stable side of the diagonal fixture: diag(1, 4, 2)
    CHECK(db.sys->coeff(0)(1, 1) == doctest::Approx(4.0).epsilon(1e-14));

    // structural validation works in dichotomy mode too (and skips the
    // growth-rate axioms: the constant quotient rate is a valid FP rate)
    CHECK(cli({"validate", out_b}).code == 0);
}

TEST_CASE("cli roundtrip with and without resumed sides") {
    std::string path = write_doc(e1_document(), "e1r.json");
    CliRun ok = cli({"roundtrip", path, "--window", "10"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("\"failed_stage\": \"\"") != std::string::npos);

    std::string out_b = (temp_dir() / "rt-b.json").string();
    std::string out_c = (temp_dir() / "rt-c.json").string();
    REQUIRE(cli({"couple", path, "--out-b", out_b, "--out-c", out_c}).code == 0);
    CliRun resumed = cli({"roundtrip", path, "--in-b", out_b, "--in-c", out_c});
    CHECK(resumed.code == 0);

    // tampering with one coefficient of the unstable side breaks the
    // coupling relation
    Json tampered = Json::parse(std::ifstream(out_c));
    tampered["coeffs"][4][0][0] = tampered["coeffs"][4][0][0].get<double>() * 1.01;
    std::string bad_c = write_doc(tampered, "rt-c-tampered.json");
    CliRun bad = cli({"roundtrip", path, "--in-b", out_b, "--in-c", bad_c});
    CHECK(bad.code == 1);
    CHECK(bad.out.find("coupling relation") != std::string::npos);

    // a dichotomy fixture round trips with a zero central component
    GeneratorSpec spec;
    spec.blocks = {{BlockRole::Stable, 1}, {BlockRole::Unstable, 1}};
    spec.horizon = 8;
    FixtureTriple dich = gen_block_diagonal(spec);
    Json ddoc = trichotomy_document(dich.sys, dich.fam, dich.params);
    CliRun dok = cli({"roundtrip", write_doc(ddoc, "dich.json")});
    CHECK(dok.code == 0);
}

TEST_CASE("cli estimate") {
    std::string path = write_doc(e1_document(), "e1e.json");
    CliRun ok = cli({"estimate", path, "--grid", R"({"a":[0.5,1.0,2.0]})"});
    CHECK(ok.code == 0);
    Json rep = Json::parse(ok.out);
    CHECK(rep["best"]["a"].get<double>() == 1.0);
    CHECK(rep["best"]["kmin"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

    FixtureTriple e2 = embedded_oscillating_fixture(40);
    Json e2doc = trichotomy_document(e2.sys, e2.fam, e2.params);
    CliRun est = cli({"estimate", write_doc(e2doc, "e2e.json"), "--grid",
                      R"({"a":[0.75,1.0],"eps":[0.0,0.5]})", "--window", "40"});
    CHECK(est.code == 0);
    Json erep = Json::parse(est.out);
    CHECK(erep["best"]["a"].get<double>() == 0.75);
    CHECK(erep["best"]["eps"].get<double>() == 0.5);

    // a single grid point is returned as the best point
    CliRun single = cli({"estimate", path, "--grid", R"({"a":[1.0]})"});
    CHECK(single.code == 0);
    CHECK(Json::parse(single.out)["best"]["a"].get<double>() == 1.0);

    CliRun bad = cli({"estimate", path, "--grid", R"({"a":[-1.0]})"});
    CHECK(bad.code == 2);
}

TEST_CASE("cli generate") {
    Json doc;
    doc["version"] = kSchemaVersion;
    doc["rates"] = e1_document()["rates"];
    doc["generate"] = {{"blocks", Json::array({{{"role", "stable"}, {"dim", 1}},
                                               {{"role", "unstable"}, {"dim", 1}},
                                               {{"role", "central"}, {"dim", 1}}})},
                       {"horizon", 10}};
    std::string spec_path = write_doc(doc, "genspec.json");
    std::string out_path = (temp_dir() / "realized.json").string();
    CliRun gen = cli({"generate", spec_path, "--out", out_path});
    CHECK(gen.code == 0);
    CHECK(cli({"verify", out_path}).code == 0);

    CHECK(cli({"generate", write_doc(e1_document(), "notgen.json")}).code == 2);
}

TEST_CASE("reports are byte-identical across runs and thread counts") {
    std::string path = write_doc(e1_document(), "e1d.json");

    int hw = current_max_threads();
    set_thread_count(1);
    CliRun serial = cli({"roundtrip", path, "--window", "10"});
    set_thread_count(hw);
    CliRun parallel = cli({"roundtrip", path, "--window", "10"});
    CliRun again = cli({"roundtrip", path, "--window", "10"});

    CHECK(serial.code == 0);
    CHECK(serial.out == parallel.out);
    CHECK(parallel.out == again.out);

    CliRun v1 = cli({"verify", path});
    CliRun v2 = cli({"verify", path});
    CHECK(v1.out == v2.out);
}

TEST_CASE("exit code contract") {
    std::string path = write_doc(e1_document(), "e1x.json");
    std::vector<CliRun> runs;
    runs.push_back(cli({"validate", path}));
    runs.push_back(cli({"verify", path}));
    runs.push_back(cli({"nonsense"}));
    runs.push_back(cli({}));
    runs.push_back(cli({"verify", "/no/such/file.json"}));
    Json tight = e1_document();
    tight["params"]["K"] = 0.5;
    runs.push_back(cli({"verify", write_doc(tight, "e1x-tight.json")}));
    for (const CliRun& r : runs) {
        CHECK((r.code == 0 || r.code == 1 || r.code == 2));
    }
}
