#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trilab/ltv_system.hpp"
#include "trilab/projections.hpp"
#include "trilab/rates.hpp"
#include "trilab/spectral.hpp"

namespace trilab {

enum class BlockRole { Stable, Unstable, Central };

struct BlockSpec {
    BlockRole role = BlockRole::Stable;
    int dim = 1;
};

enum class CentralKind { Identity, Alternating };

// Oscillating stable-block construction: entries
// exp(-a + eps * (-1)^{n+1} (2n+1)), whose products telescope to
// exp(-a (m-n) + eps ((-1)^m m - (-1)^n n)). Certificate: exponent a - eps,
// nonuniformity 2 eps, rates h = mu = nu = e^n, K = 1, tight at
// (m even, n odd). Requires 0 < eps < a.
struct NonuniformSpec {
    double a = 1.0;
    double eps = 0.25;
};

struct GeneratorSpec {
    std::vector<BlockSpec> blocks;
    int horizon = 10;
    RateSequence h = RateSequence::exponential(2.0);
    RateSequence k = RateSequence::exponential(2.0);
    RateSequence mu = RateSequence::polynomial(1.0);
    RateSequence nu = RateSequence::polynomial(1.0);
    double a = 1.0;  // stable envelope exponent (ignored in nonuniform mode)
    double b = 1.0;  // unstable envelope exponent
    CentralKind central = CentralKind::Identity;
    std::optional<NonuniformSpec> nonuniform;  // replaces the stable block;
                                               // forces h = mu = nu = e^n
    std::optional<std::uint64_t> rotation_seed;
    std::optional<std::string> corruption;  // named defect, applied last
};

struct FixtureTriple {
    LtvSystem sys;
    TriProjectionFamily fam;
    BoundParams params;
    std::vector<std::string> notes;
};

// Block-diagonal system whose certificate holds by construction: stable
// entries (h_n/h_{n+1})^a, unstable (k_{n+1}/k_n)^b, central identity or
// alternating {2, 1/2}. The emitted K is the exact window maximum of the
// four bound ratios, computed by an independent scalar log-space sweep.
FixtureTriple gen_block_diagonal(const GeneratorSpec& spec);

// Scalar oscillating fixture (see NonuniformSpec).
FixtureTriple gen_nonuniform_scalar(double a, double eps, int horizon);

// Canonical fixtures used across the test and acceptance suites.
FixtureTriple canonical_diagonal_fixture(int horizon = 10);  // diag(1/2, 2, 1), 2^n rates
FixtureTriple oscillating_scalar_fixture(int horizon = 40);  // a = 1, eps = 0.25
// 3x3 embedding: oscillating stable block, rate-driven unstable, identity central.
FixtureTriple embedded_oscillating_fixture(int horizon = 40);

// Per-step orthogonal change of coordinates: A'_n = U_{n+1} A_n U_n^T,
// P'_n = U_n P_n U_n^T. Preserves every bound and the certificate.
FixtureTriple rotate_fixture(const FixtureTriple& base, std::uint64_t seed);

enum class Defect {
    BreakAnnihilation,    // skews the stable projection; validate_tri fails
    BreakInvariance,      // rotates the family at one interior step
    KillKernelDirection,  // zeroes the system on a central direction
    SkewProjections,      // oblique stable/unstable pair; range orthogonality fails
};

Defect defect_from_name(const std::string& name);
std::string defect_name(Defect d);

// Minimally perturbed copy violating exactly the targeted check. Requires a
// self-adjoint range-orthogonal base triple with invertible steps.
FixtureTriple corrupt_fixture(const FixtureTriple& base, Defect defect);

// Brute-force lower bound on K_min: maximizes the per-vector ratio over
// uniformly drawn unit vectors in the restricted subspace for every window
// pair. Deterministic: the substream for pair (m, n) depends only on
// (seed, m, n), so serial and parallel runs agree bit-for-bit.
double sampled_kmin_lower_bound(const TransitionCache& tc, const MatSeq& proj,
                                const Envelope& env, BoundDirection dir, int window,
                                int samples, std::uint64_t seed,
                                ExecPolicy policy = ExecPolicy::Parallel,
                                double rank_tol = 1e-10);

}  // namespace trilab
