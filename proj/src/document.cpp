#include "trilab/document.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace trilab {

namespace {

// JSON has no infinity; keep the table readable and reversible
Json finite_or_tag(double x) {
    if (std::isinf(x)) return x > 0 ? Json("infinity") : Json("-infinity");
    if (std::isnan(x)) return Json("nan");
    return Json(x);
}

const Json& require_field(const Json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw DocumentError(where + ": missing field '" + key + "'");
    return *it;
}

double require_number(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require_field(j, key, where);
    if (!v.is_number()) throw DocumentError(where + ": field '" + key + "' must be a number");
    return v.get<double>();
}

int require_int(const Json& j, const std::string& key, const std::string& where) {
    const Json& v = require_field(j, key, where);
    if (!v.is_number_integer()) {
        throw DocumentError(where + ": field '" + key + "' must be an integer");
    }
    return v.get<int>();
}

}  // namespace

RateSequence parse_rate_spec(const Json& j) {
    if (!j.is_object()) throw DocumentError("rate spec must be an object");
    std::string kind = require_field(j, "kind", "rate spec").get<std::string>();
    try {
        if (kind == "exp") return RateSequence::exponential(require_number(j, "lambda", "rate spec"));
        if (kind == "poly") return RateSequence::polynomial(require_number(j, "p", "rate spec"));
        if (kind == "table") {
            const Json& vals = require_field(j, "values", "rate spec");
            if (!vals.is_array() || vals.empty()) {
                throw DocumentError("rate spec: 'values' must be a nonempty array");
            }
            std::vector<double> values;
            values.reserve(vals.size());
            for (const Json& v : vals) {
                if (!v.is_number()) throw DocumentError("rate spec: table entries must be numbers");
                values.push_back(v.get<double>());
            }
            return RateSequence::tabulated(values);
        }
    } catch (const std::invalid_argument& e) {
        throw DocumentError(std::string("rate spec: ") + e.what());
    }
    throw DocumentError("rate spec: unknown kind '" + kind + "'");
}

Json rate_spec_json(const RateSequence& r) {
    Json j;
    switch (r.kind()) {
        case RateSequence::Kind::Exponential:
            j["kind"] = "exp";
            j["lambda"] = r.exponential_base();
            break;
        case RateSequence::Kind::Polynomial:
            j["kind"] = "poly";
            j["p"] = r.polynomial_degree();
            break;
        case RateSequence::Kind::Tabulated: {
            j["kind"] = "table";
            Json values = Json::array();
            for (double lv : r.log_values()) values.push_back(std::exp(lv));
            j["values"] = std::move(values);
            break;
        }
    }
    return j;
}

Json matrix_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd parse_matrix(const Json& j, int dim, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != dim) {
        throw DocumentError(where + ": expected " + std::to_string(dim) + " rows");
    }
    Eigen::MatrixXd m(dim, dim);
    for (int r = 0; r < dim; ++r) {
        const Json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != dim) {
            throw DocumentError(where + ": row " + std::to_string(r) + " is not length " +
                                std::to_string(dim));
        }
        for (int c = 0; c < dim; ++c) {
            const Json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw DocumentError(where + ": non-numeric entry");
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

namespace {

MatSeq parse_matrix_sequence(const Json& j, int dim, int count, const std::string& where) {
    if (!j.is_array() || static_cast<int>(j.size()) != count) {
        throw DocumentError(where + ": expected " + std::to_string(count) + " matrices");
    }
    MatSeq seq;
    seq.reserve(static_cast<std::size_t>(count));
    for (int n = 0; n < count; ++n) {
        seq.push_back(parse_matrix(j[static_cast<std::size_t>(n)], dim,
                                   where + "[" + std::to_string(n) + "]"));
    }
    return seq;
}

GeneratorSpec parse_generator_spec(const Json& j, const Json& doc,
                                   std::optional<std::uint64_t> seed_override) {
    GeneratorSpec spec;
    const Json& blocks = require_field(j, "blocks", "generate");
    if (!blocks.is_array() || blocks.empty()) {
        throw DocumentError("generate: 'blocks' must be a nonempty array");
    }
    spec.blocks.clear();
    for (const Json& b : blocks) {
        std::string role = require_field(b, "role", "generate.blocks").get<std::string>();
        BlockSpec bs;
        if (role == "stable") bs.role = BlockRole::Stable;
        else if (role == "unstable") bs.role = BlockRole::Unstable;
        else if (role == "central") bs.role = BlockRole::Central;
        else throw DocumentError("generate: unknown block role '" + role + "'");
        bs.dim = require_int(b, "dim", "generate.blocks");
        spec.blocks.push_back(bs);
    }
    spec.horizon = require_int(j, "horizon", "generate");

    if (doc.contains("rates")) {
        const Json& rates = doc["rates"];
        if (rates.contains("h")) spec.h = parse_rate_spec(rates["h"]);
        if (rates.contains("k")) spec.k = parse_rate_spec(rates["k"]);
        if (rates.contains("mu")) spec.mu = parse_rate_spec(rates["mu"]);
        if (rates.contains("nu")) spec.nu = parse_rate_spec(rates["nu"]);
    }
    if (doc.contains("params")) {
        const Json& params = doc["params"];
        if (params.contains("a")) spec.a = params["a"].get<double>();
        if (params.contains("b")) spec.b = params["b"].get<double>();
    }

    if (j.contains("central")) {
        std::string c = j["central"].get<std::string>();
        if (c == "identity") spec.central = CentralKind::Identity;
        else if (c == "alternating") spec.central = CentralKind::Alternating;
        else throw DocumentError("generate: unknown central kind '" + c + "'");
    }
    if (j.contains("nonuniform")) {
        const Json& nu = j["nonuniform"];
        spec.nonuniform = NonuniformSpec{require_number(nu, "a", "generate.nonuniform"),
                                         require_number(nu, "eps", "generate.nonuniform")};
    }
    if (j.contains("rotation_seed")) {
        spec.rotation_seed = j["rotation_seed"].get<std::uint64_t>();
    }
    if (seed_override.has_value()) spec.rotation_seed = *seed_override;
    if (j.contains("corruption")) {
        spec.corruption = j["corruption"].get<std::string>();
        defect_from_name(*spec.corruption);  // validate the name now
    }
    return spec;
}

}  // namespace

ParsedDocument parse_system_document(const Json& j, std::optional<std::uint64_t> seed_override) {
    if (!j.is_object()) throw DocumentError("document: not a JSON object");
    std::string version = require_field(j, "version", "document").get<std::string>();
    if (version != kSchemaVersion) {
        throw DocumentError("document: unrecognized schema version '" + version + "'");
    }

    ParsedDocument doc;
    doc.raw = j;
    doc.mode = j.value("mode", std::string("trichotomy"));
    if (doc.mode != "trichotomy" && doc.mode != "dichotomy") {
        throw DocumentError("document: unknown mode '" + doc.mode + "'");
    }

    const bool has_coeffs = j.contains("coeffs");
    const bool has_generate = j.contains("generate");
    if (has_coeffs == has_generate) {
        throw DocumentError("document: exactly one of 'coeffs' or 'generate' required");
    }

    if (has_generate) {
        if (doc.mode != "trichotomy") {
            throw DocumentError("document: generator output is a trichotomy document");
        }
        GeneratorSpec spec = parse_generator_spec(j["generate"], j, seed_override);
        try {
            FixtureTriple triple = gen_block_diagonal(spec);
            doc.generated = true;
            doc.dim = triple.sys.dim();
            doc.horizon = triple.sys.horizon();
            doc.sys = std::move(triple.sys);
            doc.tri = std::move(triple.fam);
            doc.notes = std::move(triple.notes);
            doc.rate_h = triple.params.h;
            doc.rate_k = triple.params.k;
            doc.rate_mu = triple.params.mu;
            doc.rate_nu = triple.params.nu;
            // declared params override the generated certificate
            if (j.contains("params")) {
                const Json& p = j["params"];
                doc.tri_params = BoundParams(
                    p.value("K", triple.params.K), p.value("a", triple.params.a),
                    p.value("b", triple.params.b), p.value("eps", triple.params.eps),
                    triple.params.h, triple.params.k, triple.params.mu, triple.params.nu);
            } else {
                doc.tri_params = std::move(triple.params);
            }
        } catch (const std::invalid_argument& e) {
            throw DocumentError(std::string("generate: ") + e.what());
        }
        if (j.contains("dim") && j["dim"].get<int>() != doc.dim) {
            throw DocumentError("document: 'dim' disagrees with the generated system");
        }
        if (j.contains("horizon") && j["horizon"].get<int>() != doc.horizon) {
            throw DocumentError("document: 'horizon' disagrees with the generated system");
        }
        return doc;
    }

    doc.dim = require_int(j, "dim", "document");
    doc.horizon = require_int(j, "horizon", "document");
    if (doc.dim < 1 || doc.horizon < 1) {
        throw DocumentError("document: dim and horizon must be positive");
    }

    try {
        std::vector<Eigen::MatrixXd> coeffs =
            parse_matrix_sequence(j["coeffs"], doc.dim, doc.horizon, "coeffs");
        doc.sys = LtvSystem(doc.dim, std::move(coeffs));
    } catch (const std::invalid_argument& e) {
        throw DocumentError(std::string("coeffs: ") + e.what());
    }

    if (j.contains("rates")) {
        const Json& rates = j["rates"];
        if (rates.contains("h")) doc.rate_h = parse_rate_spec(rates["h"]);
        if (rates.contains("k")) doc.rate_k = parse_rate_spec(rates["k"]);
        if (rates.contains("mu")) doc.rate_mu = parse_rate_spec(rates["mu"]);
        if (rates.contains("nu")) doc.rate_nu = parse_rate_spec(rates["nu"]);
    }

    if (j.contains("projections")) {
        const Json& proj = j["projections"];
        const int count = doc.horizon + 1;
        if (doc.mode == "trichotomy") {
            TriProjectionFamily fam;
            fam.stable = parse_matrix_sequence(require_field(proj, "P1", "projections"),
                                               doc.dim, count, "projections.P1");
            fam.unstable = parse_matrix_sequence(require_field(proj, "P2", "projections"),
                                                 doc.dim, count, "projections.P2");
            if (proj.contains("P3")) {
                fam.central = parse_matrix_sequence(proj["P3"], doc.dim, count, "projections.P3");
            } else {
                fam.central.assign(static_cast<std::size_t>(count),
                                   Eigen::MatrixXd::Zero(doc.dim, doc.dim));
            }
            doc.tri = std::move(fam);
        } else {
            DiProjectionFamily fam;
            fam.p1 = parse_matrix_sequence(require_field(proj, "P1", "projections"), doc.dim,
                                           count, "projections.P1");
            fam.p2 = parse_matrix_sequence(require_field(proj, "P2", "projections"), doc.dim,
                                           count, "projections.P2");
            doc.di = std::move(fam);
        }
    }

    if (j.contains("params")) {
        const Json& p = j["params"];
        try {
            if (doc.mode == "trichotomy") {
                if (!doc.rate_h || !doc.rate_k || !doc.rate_mu || !doc.rate_nu) {
                    throw DocumentError("document: trichotomy params need rates h, k, mu, nu");
                }
                doc.tri_params = BoundParams(
                    require_number(p, "K", "params"), require_number(p, "a", "params"),
                    require_number(p, "b", "params"), require_number(p, "eps", "params"),
                    *doc.rate_h, *doc.rate_k, *doc.rate_mu, *doc.rate_nu);
            } else {
                if (!doc.rate_h || !doc.rate_mu || !doc.rate_nu) {
                    throw DocumentError("document: dichotomy params need rates h, mu, nu");
                }
                doc.di_params = DichotomyParams(
                    require_number(p, "K", "params"), p.value("c", 0.5),
                    require_number(p, "eps", "params"), *doc.rate_h, *doc.rate_mu, *doc.rate_nu);
            }
        } catch (const std::invalid_argument& e) {
            throw DocumentError(std::string("params: ") + e.what());
        }
    }
    return doc;
}

ParsedDocument load_system_document(const std::string& path,
                                    std::optional<std::uint64_t> seed_override) {
    std::ifstream in(path);
    if (!in) throw DocumentError("cannot open input file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DocumentError("parse error in " + path + ": " + e.what());
    }
    return parse_system_document(j, seed_override);
}

namespace {

Json matrix_sequence_json(const MatSeq& seq) {
    Json arr = Json::array();
    for (const Eigen::MatrixXd& m : seq) arr.push_back(matrix_json(m));
    return arr;
}

Json coeffs_json(const LtvSystem& sys) {
    Json arr = Json::array();
    for (int n = 0; n < sys.horizon(); ++n) arr.push_back(matrix_json(sys.coeff(n)));
    return arr;
}

}  // namespace

Json trichotomy_document(const LtvSystem& sys, const TriProjectionFamily& fam,
                         const BoundParams& params) {
    Json j;
    j["version"] = kSchemaVersion;
    j["mode"] = "trichotomy";
    j["dim"] = sys.dim();
    j["horizon"] = sys.horizon();
    j["rates"] = {{"h", rate_spec_json(params.h)},
                  {"k", rate_spec_json(params.k)},
                  {"mu", rate_spec_json(params.mu)},
                  {"nu", rate_spec_json(params.nu)}};
    j["params"] = {{"K", params.K}, {"a", params.a}, {"b", params.b}, {"eps", params.eps}};
    j["coeffs"] = coeffs_json(sys);
    j["projections"] = {{"P1", matrix_sequence_json(fam.stable)},
                        {"P2", matrix_sequence_json(fam.unstable)},
                        {"P3", matrix_sequence_json(fam.central)}};
    return j;
}

Json dichotomy_document(const LtvSystem& sys, const DiProjectionFamily& fam,
                        const DichotomyParams& params) {
    Json j;
    j["version"] = kSchemaVersion;
    j["mode"] = "dichotomy";
    j["dim"] = sys.dim();
    j["horizon"] = sys.horizon();
    j["rates"] = {{"h", rate_spec_json(params.h)},
                  {"mu", rate_spec_json(params.mu)},
                  {"nu", rate_spec_json(params.nu)}};
    j["params"] = {{"K", params.K}, {"c", params.c}, {"eps", params.eps}};
    j["coeffs"] = coeffs_json(sys);
    j["projections"] = {{"P1", matrix_sequence_json(fam.p1)},
                        {"P2", matrix_sequence_json(fam.p2)}};
    return j;
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string input_digest(const Json& document) {
    std::string canonical = document.dump();
    std::ostringstream oss;
    oss << "fnv1a64:" << std::hex << fnv1a64(canonical);
    return oss.str();
}

Json to_json(const KminEntry& e) {
    Json j;
    j["pattern"] = e.pattern;
    j["kmin"] = finite_or_tag(e.kmin);
    j["log_kmin"] = finite_or_tag(e.log_kmin);
    Json witness;
    witness["m"] = e.witness_m;
    witness["n"] = e.witness_n;
    witness["ratio"] = finite_or_tag(e.witness_ratio);
    Json dir = Json::array();
    for (Eigen::Index i = 0; i < e.witness_direction.size(); ++i) {
        dir.push_back(e.witness_direction(i));
    }
    witness["direction"] = std::move(dir);
    j["witness"] = std::move(witness);
    j["vacuous"] = e.vacuous;
    j["unbounded"] = e.unbounded;
    return j;
}

Json to_json(const FamilyVerdict& v) {
    Json j;
    j["pass"] = v.pass;
    j["worst"] = v.worst;
    j["tol"] = v.tol;
    Json fails = Json::array();
    for (const ClauseViolation& c : v.failures) {
        fails.push_back({{"clause", c.clause}, {"worst", c.worst}, {"step", c.step}});
    }
    j["failures"] = std::move(fails);
    return j;
}

Json to_json(const InvarianceVerdict& v) {
    return Json{{"pass", v.pass},
                {"worst", v.worst},
                {"step", v.step},
                {"component", v.component},
                {"multi_step_worst", v.multi_step_worst},
                {"tol", v.tol}};
}

Json to_json(const RangeOrthVerdict& v) {
    return Json{{"pass", v.pass},
                {"products_orthogonal", v.products_orthogonal},
                {"pythagoras_holds", v.pythagoras_holds},
                {"worst_product", v.worst_product},
                {"worst_pythagoras", v.worst_pythagoras},
                {"step", v.step},
                {"tol", v.tol}};
}

Json to_json(const KernelIsoReport& r) {
    Json j;
    j["pass"] = r.pass;
    j["component"] = r.component;
    j["fail_step"] = r.fail_step;
    j["reason"] = r.reason;
    j["kernel_dims"] = r.kernel_dims;
    j["whole_space"] = r.whole_space;
    j["tol"] = r.tol;
    j["worst_containment"] = r.worst_containment;
    j["min_restricted_sigma"] = finite_or_tag(r.min_restricted_sigma);
    return j;
}

Json to_json(const GrowthRateVerdict& v) {
    return Json{{"pass", v.pass},
                {"reason", v.reason},
                {"violation_step", v.violation_step},
                {"end_value", v.end_value},
                {"floor", v.floor},
                {"window", v.window},
                {"heuristic", v.heuristic}};
}

Json to_json(const PropagatorReport& r) {
    return Json{{"pass", r.pass},
                {"worst_relative_error", r.worst_relative_error},
                {"worst_triple", {r.worst_m, r.worst_n, r.worst_p}},
                {"window", r.window},
                {"tol", r.tol}};
}

Json to_json(const TrichotomyReport& r) {
    Json j;
    j["pass"] = r.pass;
    j["max_kmin"] = finite_or_tag(r.max_kmin);
    j["declared_K"] = r.declared_K;
    j["window"] = r.window;
    j["verdict_tol"] = r.verdict_tol;
    Json bounds = Json::array();
    for (const KminEntry& e : r.bounds) bounds.push_back(to_json(e));
    j["bounds"] = std::move(bounds);
    j["kernel_iso_unstable"] = to_json(r.kernel_iso_unstable);
    j["kernel_iso_central"] = to_json(r.kernel_iso_central);
    j["family"] = to_json(r.family);
    j["invariance"] = to_json(r.invariance);
    j["flags"] = r.flags;
    return j;
}

Json to_json(const DichotomyReport& r) {
    Json j;
    j["pass"] = r.pass;
    j["max_kmin"] = finite_or_tag(r.max_kmin);
    j["declared_K"] = r.declared_K;
    j["window"] = r.window;
    j["verdict_tol"] = r.verdict_tol;
    j["forward"] = to_json(r.forward);
    j["backward"] = to_json(r.backward);
    j["kernel_iso"] = to_json(r.kernel_iso);
    j["family"] = to_json(r.family);
    j["invariance"] = to_json(r.invariance);
    j["flags"] = r.flags;
    return j;
}

Json to_json(const ForwardCouplingResult& r) {
    Json j;
    j["pass"] = r.pass;
    j["downgraded"] = r.downgraded;
    j["gate_K"] = r.gate_K;
    j["dichotomy"] = to_json(r.dichotomy);
    j["split_invariance"] = to_json(r.split_invariance);
    j["flags"] = r.flags;
    return j;
}

Json to_json(const ReverseCouplingResult& r) {
    Json j;
    j["pass"] = r.pass;
    j["failed_stage"] = r.failed_stage;
    j["coupling_relation_worst"] = r.coupling_relation_worst;
    j["cross_check_worst"] = r.cross_check_worst;
    j["trichotomy"] = to_json(r.trichotomy);
    j["flags"] = r.flags;
    return j;
}

Json to_json(const RoundTripReport& r) {
    Json j;
    j["pass"] = r.pass;
    j["failed_stage"] = r.failed_stage;
    j["family_recon_error"] = r.family_recon_error;
    j["system_recon_error"] = r.system_recon_error;
    j["final_constant"] = finite_or_tag(r.final_constant);
    j["recon_tol"] = r.recon_tol;
    if (r.precondition.has_value()) j["precondition"] = to_json(*r.precondition);
    if (r.forward_stable.has_value()) j["forward_stable"] = to_json(*r.forward_stable);
    if (r.forward_unstable.has_value()) j["forward_unstable"] = to_json(*r.forward_unstable);
    if (r.reverse.has_value()) j["reverse"] = to_json(*r.reverse);
    return j;
}

Json report_envelope(const std::string& command, const Json& input, int window,
                     double verdict_tol) {
    Json j;
    j["tool"] = kToolName;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["input_digest"] = input_digest(input);
    j["window"] = window;
    j["tolerances"] = {{"verdict", verdict_tol},
                       {"validate", 1e-9},
                       {"rank", 1e-10},
                       {"propagator", 1e-10},
                       {"reconstruction", 1e-12}};
    return j;
}

}  // namespace trilab
