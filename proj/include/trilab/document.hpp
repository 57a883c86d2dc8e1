#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "trilab/coupling.hpp"
#include "trilab/fixtures.hpp"
#include "trilab/ltv_system.hpp"
#include "trilab/projections.hpp"
#include "trilab/rates.hpp"
#include "trilab/spectral.hpp"

namespace trilab {

// insertion-ordered so report bytes are reproducible
using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "trilab/1";
inline constexpr const char* kToolName = "trichotomy-lab";
inline constexpr const char* kToolVersion = "1.0.0";

// Malformed input: maps to exit code 2 at the CLI boundary.
struct DocumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A system document realized into in-memory objects. Either loaded verbatim
// (coeffs) or produced by the generator block.
struct ParsedDocument {
    std::string mode;  // "trichotomy" | "dichotomy"
    int dim = 0;
    int horizon = 0;
    std::optional<LtvSystem> sys;
    std::optional<TriProjectionFamily> tri;
    std::optional<DiProjectionFamily> di;
    std::optional<BoundParams> tri_params;
    std::optional<DichotomyParams> di_params;
    std::optional<RateSequence> rate_h, rate_k, rate_mu, rate_nu;
    bool generated = false;
    std::vector<std::string> notes;
    Json raw;  // canonical source of the input digest
};

RateSequence parse_rate_spec(const Json& j);
Json rate_spec_json(const RateSequence& r);

Json matrix_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd parse_matrix(const Json& j, int dim, const std::string& where);

// Throws DocumentError on any schema violation. seed_override replaces the
// generator rotation seed when given.
ParsedDocument parse_system_document(const Json& j,
                                     std::optional<std::uint64_t> seed_override = std::nullopt);

ParsedDocument load_system_document(const std::string& path,
                                    std::optional<std::uint64_t> seed_override = std::nullopt);

// Full trichotomy document from parts (used by generate).
Json trichotomy_document(const LtvSystem& sys, const TriProjectionFamily& fam,
                         const BoundParams& params);
// Dichotomy-mode document (used by couple).
Json dichotomy_document(const LtvSystem& sys, const DiProjectionFamily& fam,
                        const DichotomyParams& params);

std::uint64_t fnv1a64(std::string_view bytes);
std::string input_digest(const Json& document);

// report fragments
Json to_json(const KminEntry& e);
Json to_json(const FamilyVerdict& v);
Json to_json(const InvarianceVerdict& v);
Json to_json(const RangeOrthVerdict& v);
Json to_json(const KernelIsoReport& r);
Json to_json(const GrowthRateVerdict& v);
Json to_json(const PropagatorReport& r);
Json to_json(const TrichotomyReport& r);
Json to_json(const DichotomyReport& r);
Json to_json(const ForwardCouplingResult& r);
Json to_json(const ReverseCouplingResult& r);
Json to_json(const RoundTripReport& r);

// Common report envelope: tool identity, command, digest, tolerances.
Json report_envelope(const std::string& command, const Json& input, int window,
                     double verdict_tol);

}  // namespace trilab
