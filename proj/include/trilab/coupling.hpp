#pragma once

#include <optional>
#include <string>
#include <vector>

#include "trilab/ltv_system.hpp"
#include "trilab/projections.hpp"
#include "trilab/rates.hpp"
#include "trilab/spectral.hpp"

namespace trilab {

// Per-step rescaling by (h_{n+1}/h_n)^{a/2} (k_{n+1}/k_n)^{b/2}; the coupled
// transition matrices then carry the rate quotient out of the base system.
LtvSystem build_stable_coupled(const LtvSystem& sys, const RateSequence& h,
                               const RateSequence& k, double a, double b);
// Reciprocal rescaling.
LtvSystem build_unstable_coupled(const LtvSystem& sys, const RateSequence& h,
                                 const RateSequence& k, double a, double b);

struct CoupledPair {
    LtvSystem base;
    LtvSystem stable_side;    // rescaled up
    LtvSystem unstable_side;  // rescaled down
    RateSequence h, k;
    double a = 0.0, b = 0.0;
    RateSequence quotient_rate;    // h^a / k^b, drives the stable-side envelopes
    RateSequence reciprocal_rate;  // its reciprocal, drives the unstable side
    DiProjectionFamily S;          // stable split
    DiProjectionFamily T;          // unstable split
};

// Builds both coupled systems, derived rates, and splits. No verification.
CoupledPair make_coupled_pair(const LtvSystem& sys, const TriProjectionFamily& fam,
                              const BoundParams& params);

struct ForwardCouplingResult {
    LtvSystem coupled;
    DiProjectionFamily split;
    RateSequence rate;
    DichotomyReport dichotomy;
    InvarianceVerdict split_invariance;
    bool pass = false;
    bool downgraded = false;  // non-orthogonal ranges: gate is sqrt(2) K
    double gate_K = 0.0;
    std::vector<std::string> flags;
};

// Couples the system upward and verifies that the stable split is
// dichotomic for it with the quotient rate, exponent 1/2, and constant K
// (sqrt(2) K when range orthogonality fails and the check downgrades to the
// triangle inequality). Throws std::invalid_argument when the input system
// is not trichotomic at the declared constants. A precomputed trichotomy
// report can be supplied to skip the re-verification.
ForwardCouplingResult derive_stable_dichotomy(const LtvSystem& sys,
                                              const TriProjectionFamily& fam,
                                              const BoundParams& params, int window,
                                              ExecPolicy policy = ExecPolicy::Parallel,
                                              const TrichotomyReport* precomputed = nullptr);

// Mirror construction: couples downward and verifies the unstable split
// against the reciprocal rate.
ForwardCouplingResult derive_unstable_dichotomy(const LtvSystem& sys,
                                                const TriProjectionFamily& fam,
                                                const BoundParams& params, int window,
                                                ExecPolicy policy = ExecPolicy::Parallel,
                                                const TrichotomyReport* precomputed = nullptr);

struct ReverseCouplingResult {
    LtvSystem base;  // recovered from the stable-side system
    TriProjectionFamily fam;
    TrichotomyReport trichotomy;
    double coupling_relation_worst = 0.0;
    double cross_check_worst = 0.0;  // recovered base vs the unstable side
    bool pass = false;
    std::string failed_stage;  // empty, "coupling relation", "split compatibility",
                               // "stable-side dichotomy", "unstable-side dichotomy",
                               // "trichotomy"
    std::vector<std::string> flags;
};

// From two coupled dichotomic systems back to the trichotomy: checks the
// coupling relation between the two transition families, verifies both
// dichotomies at constant K, merges the splits into the three-way family,
// recovers the base system, and re-verifies the trichotomy at constant K.
ReverseCouplingResult reconstruct_trichotomy(const LtvSystem& stable_side,
                                             const DiProjectionFamily& S,
                                             const LtvSystem& unstable_side,
                                             const DiProjectionFamily& T,
                                             const RateSequence& h, const RateSequence& k,
                                             double a, double b, double K, double eps,
                                             const RateSequence& mu, const RateSequence& nu,
                                             int window,
                                             ExecPolicy policy = ExecPolicy::Parallel);

struct RoundTripReport {
    bool pass = false;
    std::string failed_stage;  // "precondition", "forward-stable", "forward-unstable",
                               // reverse stages, "reconstruction-mismatch", "constant"
    std::optional<TrichotomyReport> precondition;
    std::optional<ForwardCouplingResult> forward_stable;
    std::optional<ForwardCouplingResult> forward_unstable;
    std::optional<ReverseCouplingResult> reverse;
    double family_recon_error = 0.0;
    double system_recon_error = 0.0;
    double final_constant = 0.0;
    double recon_tol = 0.0;
};

// Executes both forward couplings and the reconstruction, then asserts the
// recovered family and base system match the originals and the re-verified
// constant does not exceed the declared one.
RoundTripReport roundtrip_equivalence(const LtvSystem& sys, const TriProjectionFamily& fam,
                                      const BoundParams& params, int window,
                                      ExecPolicy policy = ExecPolicy::Parallel,
                                      double recon_tol = 1e-12);

}  // namespace trilab
