#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "trilab/ltv_system.hpp"
#include "trilab/parallel.hpp"
#include "trilab/projections.hpp"
#include "trilab/rates.hpp"

namespace trilab {

struct RestrictedExtremes {
    double sigma_max = 0.0;
    double sigma_min = std::numeric_limits<double>::infinity();
    bool vacuous = false;  // empty basis: bounds hold for no vector
};

// Extremes of ||M v|| / ||v|| over nonzero v in the span of the given
// orthonormal columns. Throws when the basis is not orthonormal to 1e-10.
RestrictedExtremes restricted_extremes(const Eigen::MatrixXd& M, const Eigen::MatrixXd& basis);

// Orthonormal basis of the column space (rank-revealing QR, threshold
// relative to the largest pivot).
Eigen::MatrixXd range_basis(const Eigen::MatrixXd& P, double rank_tol = 1e-10);
// Kernel of an idempotent P equals the range of I - P.
Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& P, double rank_tol = 1e-10);

enum class BoundDirection { ForwardUpper, BackwardLower };

// Envelope (m, n) -> positive real, evaluated in log space (always positive
// by construction; the sweep rejects non-finite values).
struct Envelope {
    std::function<double(int m, int n)> log_value;
};

// One bound of the definition: direction, envelope, and which splitting
// component it restricts to (1 stable, 2 unstable, 3 central).
struct InequalityPattern {
    std::string name;
    BoundDirection direction = BoundDirection::ForwardUpper;
    Envelope envelope;
    int component = 1;
};

// The four bounds of the trichotomy definition at the given constants.
std::vector<InequalityPattern> trichotomy_patterns(const RateSequence& h,
                                                   const RateSequence& k,
                                                   const RateSequence& mu,
                                                   const RateSequence& nu, double a, double b,
                                                   double eps);

// Definition envelopes. Forward bounds carry the start-point nonuniformity
// factor mu_n^eps, backward bounds the end-point factor nu_m^eps.
Envelope make_decay_envelope(const RateSequence& h, double a, const RateSequence& mu, double eps);   // (h_n/h_m)^a mu_n^eps
Envelope make_growth_envelope(const RateSequence& k, double b, const RateSequence& nu, double eps);  // (k_m/k_n)^b nu_m^eps
Envelope make_central_forward_envelope(const RateSequence& h, double a, const RateSequence& mu, double eps);  // (h_m/h_n)^a mu_n^eps
Envelope make_unstable_backward_envelope(const RateSequence& k, double b, const RateSequence& nu, double eps);  // (k_n/k_m)^b nu_m^eps
Envelope make_di_backward_envelope(const RateSequence& h, double c, const RateSequence& nu, double eps);  // (h_n/h_m)^c nu_m^eps

struct KminEntry {
    std::string pattern;
    double log_kmin = -std::numeric_limits<double>::infinity();
    double kmin = 0.0;
    int witness_m = 0;
    int witness_n = 0;
    Eigen::VectorXd witness_direction;  // unit vector in the restricted subspace
    double witness_ratio = 0.0;         // independent re-evaluation at the witness
    bool vacuous = false;               // projection has rank 0 at every step
    bool unbounded = false;             // backward bound hit a singular restriction
};

// Smallest constant K making the per-vector bound hold over all window pairs,
// computed from restricted extreme singular values. Deterministic: serial and
// parallel sweeps reduce by (ratio, span, start) and agree bit-for-bit.
KminEntry kmin_forward(const TransitionCache& tc, const MatSeq& proj, const Envelope& env,
                       int window, ExecPolicy policy = ExecPolicy::Parallel,
                       double rank_tol = 1e-10);
KminEntry kmin_backward(const TransitionCache& tc, const MatSeq& proj, const Envelope& env,
                        int window, ExecPolicy policy = ExecPolicy::Parallel,
                        double rank_tol = 1e-10);

struct KernelIsoReport {
    bool pass = false;
    int component = 0;           // label used in messages (2 or 3)
    int fail_step = -1;
    std::string reason;
    std::vector<int> kernel_dims;  // per step 0..window
    bool whole_space = false;      // kernel is the full space somewhere:
                                   // the check then demands invertibility
    double tol = 0.0;
    double worst_containment = 0.0;
    double min_restricted_sigma = std::numeric_limits<double>::infinity();
};

// Step restrictions of the system to Ker P_n: mapped into the next kernel,
// injective, and dimension-preserving (hence onto). Multi-step restrictions
// follow by composition and are spot-checked against the product of
// per-step lower bounds.
KernelIsoReport check_kernel_isomorphism(const TransitionCache& tc, const MatSeq& proj,
                                         int window, double tol = 1e-10,
                                         int component_label = 0, double rank_tol = 1e-10);

// Constants of the trichotomy definition; construction enforces K > 0,
// a > 0, b >= 0, eps >= 0.
struct BoundParams {
    double K;
    double a;
    double b;
    double eps;
    RateSequence h, k, mu, nu;

    BoundParams(double K_, double a_, double b_, double eps_, RateSequence h_,
                RateSequence k_, RateSequence mu_, RateSequence nu_);
};

// Constants of the single-rate dichotomy (positive rates only, exponent c
// on the rate quotient).
struct DichotomyParams {
    double K;
    double c;
    double eps;
    RateSequence h, mu, nu;

    DichotomyParams(double K_, double c_, double eps_, RateSequence h_, RateSequence mu_,
                    RateSequence nu_);
};

struct TrichotomyReport {
    bool pass = false;
    double max_kmin = 0.0;
    std::vector<KminEntry> bounds;  // stable-forward, unstable-backward,
                                    // central-forward, central-backward
    KernelIsoReport kernel_iso_unstable;  // component 2
    KernelIsoReport kernel_iso_central;   // component 3
    FamilyVerdict family;
    InvarianceVerdict invariance;
    std::vector<std::string> flags;
    int window = 0;
    double verdict_tol = 0.0;
    double declared_K = 0.0;
};

// Full verdict: the four inequalities at their definition envelopes plus the
// kernel-isomorphism condition on components 2 and 3.
TrichotomyReport verify_trichotomy(const LtvSystem& sys, const TriProjectionFamily& fam,
                                   const BoundParams& params, int window,
                                   ExecPolicy policy = ExecPolicy::Parallel,
                                   double verdict_tol = 1e-9);

struct DichotomyReport {
    bool pass = false;
    double max_kmin = 0.0;
    KminEntry forward;
    KminEntry backward;
    KernelIsoReport kernel_iso;  // component 2
    FamilyVerdict family;
    InvarianceVerdict invariance;
    std::vector<std::string> flags;
    int window = 0;
    double verdict_tol = 0.0;
    double declared_K = 0.0;
};

// Single-rate dichotomy verdict: forward bound on component 1, backward
// bound on component 2, kernel isomorphism on component 2.
DichotomyReport verify_dichotomy(const LtvSystem& sys, const DiProjectionFamily& fam,
                                 const DichotomyParams& params, int window,
                                 ExecPolicy policy = ExecPolicy::Parallel,
                                 double verdict_tol = 1e-9);

struct ExponentGrid {
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> eps;
};

struct GridPointResult {
    double a = 0.0, b = 0.0, eps = 0.0;
    double kmin = 0.0;
    double log_kmin = 0.0;
};

struct EstimateResult {
    GridPointResult best;
    std::vector<GridPointResult> table;  // grid order: eps outer, a, b inner
};

// Grid search over (a, b, eps) minimizing the overall K_min. Ties break
// toward smallest eps, then largest a, then largest b.
EstimateResult estimate_exponents(const LtvSystem& sys, const TriProjectionFamily& fam,
                                  const RateSequence& h, const RateSequence& k,
                                  const RateSequence& mu, const RateSequence& nu,
                                  const ExponentGrid& grid, int window,
                                  ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace trilab
