#include "trilab/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <optional>

#include "trilab/coupling.hpp"
#include "trilab/document.hpp"
#include "trilab/parallel.hpp"

namespace trilab {

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitInput = 2;

struct CommonOpts {
    std::string input;
    std::optional<int> window;
    double tol = 1e-9;
    std::optional<std::uint64_t> seed;
    std::string format = "json";
    std::string out_path;  // empty: stdout
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_out = true) {
    cmd->add_option("input", o.input, "system document (JSON)")->required();
    cmd->add_option("--window", o.window, "verification window (default: horizon)");
    cmd->add_option("--tol", o.tol, "verdict tolerance")->capture_default_str();
    cmd->add_option("--seed", o.seed, "seed for sampling and rotation");
    cmd->add_option("--format", o.format, "report format")->check(CLI::IsMember({"json"}));
    if (with_out) cmd->add_option("--out", o.out_path, "write the report to this file");
}

void write_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DocumentError("cannot write output file: " + path);
        f << content;
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw DocumentError("cannot move output into place: " + path);
    }
}

void emit(const Json& report, const CommonOpts& o, std::ostream& out) {
    std::string text = report.dump(2);
    text.push_back('\n');
    if (o.out_path.empty()) {
        out << text;
    } else {
        write_atomic(o.out_path, text);
    }
}

int resolve_window(const ParsedDocument& doc, const CommonOpts& o) {
    int w = o.window.value_or(doc.horizon);
    if (w < 0 || w > doc.horizon) {
        throw DocumentError("window " + std::to_string(w) + " outside [0, horizon=" +
                            std::to_string(doc.horizon) + "]");
    }
    return w;
}

std::uint64_t sampling_seed(const CommonOpts& o) { return o.seed.value_or(7); }

int cmd_validate(const CommonOpts& o, std::ostream& out) {
    ParsedDocument doc = load_system_document(o.input, o.seed);
    const int window = resolve_window(doc, o);

    if (doc.mode == "trichotomy" && !doc.tri.has_value()) {
        throw DocumentError("projections required for trichotomy validation");
    }
    if (doc.mode == "dichotomy" && !doc.di.has_value()) {
        throw DocumentError("projections required for dichotomy validation");
    }

    Json report = report_envelope("validate", doc.raw, window, o.tol);
    Json verdicts;
    bool pass = true;
    std::vector<std::string> flags;

    // growth-rate axioms apply to the four-rate (trichotomy) documents only;
    // single-rate documents use plain positive sequences
    if (doc.mode == "trichotomy") {
        Json rate_verdicts;
        const std::pair<const char*, const std::optional<RateSequence>*> roles[] = {
            {"h", &doc.rate_h}, {"k", &doc.rate_k}, {"mu", &doc.rate_mu}, {"nu", &doc.rate_nu}};
        for (const auto& [role, rate] : roles) {
            if (!rate->has_value()) {
                throw DocumentError(std::string("rate '") + role + "' required");
            }
            GrowthRateVerdict v = validate_growth_rate(**rate, std::max(window, 2));
            rate_verdicts[role] = to_json(v);
            pass = pass && v.pass;
        }
        flags.push_back("heuristic-divergence-floor");
        verdicts["growth_rates"] = std::move(rate_verdicts);
    }

    if (doc.mode == "trichotomy") {
        FamilyVerdict fv = validate_tri(*doc.tri);
        verdicts["family"] = to_json(fv);
        pass = pass && fv.pass;

        InvarianceVerdict iv = check_invariance(*doc.sys, *doc.tri);
        verdicts["invariance"] = to_json(iv);
        pass = pass && iv.pass;

        RangeOrthVerdict rv = check_range_orthogonality(*doc.tri, 1e-9, sampling_seed(o));
        verdicts["range_orthogonality"] = to_json(rv);
        pass = pass && rv.pass;
    } else {
        FamilyVerdict fv = validate_di(*doc.di);
        verdicts["family"] = to_json(fv);
        pass = pass && fv.pass;

        InvarianceVerdict iv = check_invariance(*doc.sys, *doc.di);
        verdicts["invariance"] = to_json(iv);
        pass = pass && iv.pass;

        RangeOrthVerdict rv = check_range_orthogonality(*doc.di, 1e-9, sampling_seed(o));
        verdicts["range_orthogonality"] = to_json(rv);
        pass = pass && rv.pass;
    }

    report["verdicts"] = std::move(verdicts);
    report["flags"] = flags;
    report["pass"] = pass;
    emit(report, o, out);
    return pass ? kExitPass : kExitFail;
}

int cmd_verify(const CommonOpts& o, std::ostream& out) {
    ParsedDocument doc = load_system_document(o.input, o.seed);
    const int window = resolve_window(doc, o);

    Json report = report_envelope("verify", doc.raw, window, o.tol);
    bool pass = false;
    if (doc.mode == "trichotomy") {
        if (!doc.tri.has_value()) throw DocumentError("projections required");
        if (!doc.tri_params.has_value()) throw DocumentError("params required");
        TrichotomyReport rep = verify_trichotomy(*doc.sys, *doc.tri, *doc.tri_params, window,
                                                 ExecPolicy::Parallel, o.tol);
        report["trichotomy"] = to_json(rep);
        pass = rep.pass;
    } else {
        if (!doc.di.has_value()) throw DocumentError("projections required");
        if (!doc.di_params.has_value()) throw DocumentError("params required");
        DichotomyReport rep = verify_dichotomy(*doc.sys, *doc.di, *doc.di_params, window,
                                               ExecPolicy::Parallel, o.tol);
        report["dichotomy"] = to_json(rep);
        pass = rep.pass;
    }
    report["pass"] = pass;
    emit(report, o, out);
    return pass ? kExitPass : kExitFail;
}

int cmd_couple(const CommonOpts& o, const std::string& out_b, const std::string& out_c,
               std::ostream& out) {
    ParsedDocument doc = load_system_document(o.input, o.seed);
    const int window = resolve_window(doc, o);
    if (doc.mode != "trichotomy") throw DocumentError("couple needs a trichotomy document");
    if (!doc.tri.has_value()) throw DocumentError("projections required");
    if (!doc.tri_params.has_value()) throw DocumentError("params required");

    Json report = report_envelope("couple", doc.raw, window, o.tol);

    TrichotomyReport pre = verify_trichotomy(*doc.sys, *doc.tri, *doc.tri_params, window,
                                             ExecPolicy::Parallel, o.tol);
    report["trichotomy"] = to_json(pre);
    if (!pre.pass) {
        report["pass"] = false;
        emit(report, o, out);
        return kExitFail;
    }

    ForwardCouplingResult fs = derive_stable_dichotomy(*doc.sys, *doc.tri, *doc.tri_params,
                                                       window, ExecPolicy::Parallel, &pre);
    ForwardCouplingResult fu = derive_unstable_dichotomy(*doc.sys, *doc.tri, *doc.tri_params,
                                                         window, ExecPolicy::Parallel, &pre);
    report["stable_side"] = to_json(fs);
    report["unstable_side"] = to_json(fu);
    bool pass = fs.pass && fu.pass;
    report["pass"] = pass;

    const BoundParams& p = *doc.tri_params;
    write_atomic(out_b,
                 dichotomy_document(fs.coupled, fs.split,
                                    DichotomyParams(fs.gate_K, 0.5, p.eps, fs.rate, p.mu, p.nu))
                         .dump(2) +
                     "\n");
    write_atomic(out_c,
                 dichotomy_document(fu.coupled, fu.split,
                                    DichotomyParams(fu.gate_K, 0.5, p.eps, fu.rate, p.mu, p.nu))
                         .dump(2) +
                     "\n");
    emit(report, o, out);
    return pass ? kExitPass : kExitFail;
}

int cmd_roundtrip(const CommonOpts& o, const std::string& in_b, const std::string& in_c,
                  std::ostream& out) {
    ParsedDocument doc = load_system_document(o.input, o.seed);
    const int window = resolve_window(doc, o);
    if (doc.mode != "trichotomy") throw DocumentError("roundtrip needs a trichotomy document");
    if (!doc.tri.has_value()) throw DocumentError("projections required");
    if (!doc.tri_params.has_value()) throw DocumentError("params required");

    Json report = report_envelope("roundtrip", doc.raw, window, o.tol);
    const BoundParams& p = *doc.tri_params;

    if (in_b.empty() != in_c.empty()) {
        throw DocumentError("--in-b and --in-c must be given together");
    }

    if (in_b.empty()) {
        RoundTripReport rep = roundtrip_equivalence(*doc.sys, *doc.tri, p, window);
        report["roundtrip"] = to_json(rep);
        report["pass"] = rep.pass;
        emit(report, o, out);
        return rep.pass ? kExitPass : kExitFail;
    }

    // resume from previously coupled documents
    ParsedDocument db = load_system_document(in_b);
    ParsedDocument dc = load_system_document(in_c);
    if (db.mode != "dichotomy" || dc.mode != "dichotomy") {
        throw DocumentError("--in-b/--in-c must be dichotomy documents");
    }
    if (!db.di.has_value() || !dc.di.has_value() || !db.di_params.has_value() ||
        !dc.di_params.has_value()) {
        throw DocumentError("--in-b/--in-c documents need projections and params");
    }

    RoundTripReport rep;
    rep.recon_tol = 1e-12;
    double gate = std::max(db.di_params->K, dc.di_params->K);
    rep.reverse = reconstruct_trichotomy(*db.sys, *db.di, *dc.sys, *dc.di, p.h, p.k, p.a, p.b,
                                         gate, p.eps, p.mu, p.nu, window);
    if (!rep.reverse->pass) {
        rep.failed_stage = rep.reverse->failed_stage;
    } else {
        double fam_err = 0.0, sys_err = 0.0;
        for (std::size_t n = 0; n < doc.tri->stable.size(); ++n) {
            fam_err = std::max(fam_err, (rep.reverse->fam.stable[n] - doc.tri->stable[n])
                                            .cwiseAbs()
                                            .maxCoeff());
            fam_err = std::max(fam_err, (rep.reverse->fam.unstable[n] - doc.tri->unstable[n])
                                            .cwiseAbs()
                                            .maxCoeff());
            fam_err = std::max(fam_err, (rep.reverse->fam.central[n] - doc.tri->central[n])
                                            .cwiseAbs()
                                            .maxCoeff());
        }
        for (int n = 0; n < doc.sys->horizon(); ++n) {
            double scale = std::max(1.0, doc.sys->coeff(n).norm());
            sys_err = std::max(sys_err,
                               (rep.reverse->base.coeff(n) - doc.sys->coeff(n)).norm() / scale);
        }
        rep.family_recon_error = fam_err;
        rep.system_recon_error = sys_err;
        rep.final_constant = rep.reverse->trichotomy.max_kmin;
        if (fam_err > rep.recon_tol || sys_err > rep.recon_tol) {
            rep.failed_stage = "reconstruction-mismatch";
        } else if (rep.final_constant > gate * (1.0 + 1e-9)) {
            rep.failed_stage = "constant";
        } else {
            rep.pass = true;
        }
    }
    report["roundtrip"] = to_json(rep);
    report["pass"] = rep.pass;
    emit(report, o, out);
    return rep.pass ? kExitPass : kExitFail;
}

int cmd_estimate(const CommonOpts& o, const std::string& grid_text, std::ostream& out) {
    ParsedDocument doc = load_system_document(o.input, o.seed);
    const int window = resolve_window(doc, o);
    if (doc.mode != "trichotomy") throw DocumentError("estimate needs a trichotomy document");
    if (!doc.tri.has_value()) throw DocumentError("projections required");
    if (!doc.tri_params.has_value()) throw DocumentError("params required");
    const BoundParams& p = *doc.tri_params;

    Json grid_json;
    try {
        grid_json = Json::parse(grid_text.empty() ? "{}" : grid_text);
    } catch (const nlohmann::json::exception& e) {
        throw DocumentError(std::string("--grid: ") + e.what());
    }
    auto grid_dim = [&](const char* key, double fallback) {
        std::vector<double> v;
        if (grid_json.contains(key)) {
            for (const Json& x : grid_json[key]) v.push_back(x.get<double>());
        } else {
            v.push_back(fallback);
        }
        return v;
    };
    ExponentGrid grid{grid_dim("a", p.a), grid_dim("b", p.b), grid_dim("eps", p.eps)};

    EstimateResult res;
    try {
        res = estimate_exponents(*doc.sys, *doc.tri, p.h, p.k, p.mu, p.nu, grid, window);
    } catch (const std::invalid_argument& e) {
        throw DocumentError(std::string("estimate: ") + e.what());
    }

    Json report = report_envelope("estimate", doc.raw, window, o.tol);
    Json table = Json::array();
    for (const GridPointResult& g : res.table) {
        table.push_back({{"a", g.a}, {"b", g.b}, {"eps", g.eps}, {"kmin", g.kmin}});
    }
    report["grid"] = std::move(table);
    report["best"] = {{"a", res.best.a},
                      {"b", res.best.b},
                      {"eps", res.best.eps},
                      {"kmin", res.best.kmin}};
    report["pass"] = true;
    emit(report, o, out);
    return kExitPass;
}

int cmd_generate(const CommonOpts& o, std::ostream& out) {
    ParsedDocument doc = load_system_document(o.input, o.seed);
    if (!doc.generated) throw DocumentError("generate: document has no 'generate' block");
    Json realized = trichotomy_document(*doc.sys, *doc.tri, *doc.tri_params);
    if (o.out_path.empty()) {
        out << realized.dump(2) << "\n";
    } else {
        write_atomic(o.out_path, realized.dump(2) + "\n");
    }
    return kExitPass;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    apply_thread_cap_from_env();

    CLI::App app{"trichotomy / dichotomy verification toolkit for discrete LTV systems"};
    app.require_subcommand(1);

    CommonOpts validate_o, verify_o, couple_o, roundtrip_o, estimate_o, generate_o;
    std::string out_b, out_c, in_b, in_c, grid_text;

    add_common(app.add_subcommand("validate", "structural checks"), validate_o);
    add_common(app.add_subcommand("verify", "full bound verification"), verify_o);

    CLI::App* couple = app.add_subcommand("couple", "emit the two coupled dichotomy documents");
    add_common(couple, couple_o);
    couple->add_option("--out-b", out_b, "stable-side output document")->required();
    couple->add_option("--out-c", out_c, "unstable-side output document")->required();

    CLI::App* roundtrip = app.add_subcommand("roundtrip", "forward couplings plus reconstruction");
    add_common(roundtrip, roundtrip_o);
    roundtrip->add_option("--in-b", in_b, "resume from this stable-side document");
    roundtrip->add_option("--in-c", in_c, "resume from this unstable-side document");

    CLI::App* estimate = app.add_subcommand("estimate", "grid search over the bound exponents");
    add_common(estimate, estimate_o);
    estimate->add_option("--grid", grid_text, "JSON lists, e.g. {\"a\":[0.5,1],\"eps\":[0]}");

    CLI::App* generate = app.add_subcommand("generate", "realize a generator document");
    add_common(generate, generate_o);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitPass;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitInput;
    }

    try {
        if (app.got_subcommand("validate")) return cmd_validate(validate_o, out);
        if (app.got_subcommand("verify")) return cmd_verify(verify_o, out);
        if (app.got_subcommand("couple")) return cmd_couple(couple_o, out_b, out_c, out);
        if (app.got_subcommand("roundtrip")) return cmd_roundtrip(roundtrip_o, in_b, in_c, out);
        if (app.got_subcommand("estimate")) return cmd_estimate(estimate_o, grid_text, out);
        if (app.got_subcommand("generate")) return cmd_generate(generate_o, out);
    } catch (const DocumentError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInput;
    }
    err << "no subcommand\n";
    return kExitInput;
}

}  // namespace trilab
