#include "trilab/coupling.hpp"

#include <cmath>
#include <stdexcept>

namespace trilab {

namespace {

double step_log_factor(const RateSequence& h, const RateSequence& k, double a, double b,
                       int n) {
    return 0.5 * a * (h.log_at(n + 1) - h.log_at(n)) +
           0.5 * b * (k.log_at(n + 1) - k.log_at(n));
}

LtvSystem rescale(const LtvSystem& sys, const RateSequence& h, const RateSequence& k,
                  double a, double b, double sign) {
    if (!(a > 0.0)) throw std::invalid_argument("coupling: a must be positive");
    if (!(b >= 0.0)) throw std::invalid_argument("coupling: b must be nonnegative");
    std::vector<Eigen::MatrixXd> coeffs;
    coeffs.reserve(static_cast<std::size_t>(sys.horizon()));
    for (int n = 0; n < sys.horizon(); ++n) {
        double factor = std::exp(sign * step_log_factor(h, k, a, b, n));
        coeffs.push_back(factor * sys.coeff(n));
    }
    return LtvSystem(sys.dim(), std::move(coeffs));
}

}  // namespace

LtvSystem build_stable_coupled(const LtvSystem& sys, const RateSequence& h,
                               const RateSequence& k, double a, double b) {
    return rescale(sys, h, k, a, b, +1.0);
}

LtvSystem build_unstable_coupled(const LtvSystem& sys, const RateSequence& h,
                                 const RateSequence& k, double a, double b) {
    return rescale(sys, h, k, a, b, -1.0);
}

CoupledPair make_coupled_pair(const LtvSystem& sys, const TriProjectionFamily& fam,
                              const BoundParams& params) {
    RateSequence quotient = make_tilde_h(params.h, params.k, params.a, params.b, sys.horizon());
    return CoupledPair{
        .base = sys,
        .stable_side = build_stable_coupled(sys, params.h, params.k, params.a, params.b),
        .unstable_side = build_unstable_coupled(sys, params.h, params.k, params.a, params.b),
        .h = params.h,
        .k = params.k,
        .a = params.a,
        .b = params.b,
        .quotient_rate = quotient,
        .reciprocal_rate = make_bar_h(quotient),
        .S = make_stable_split(fam),
        .T = make_unstable_split(fam),
    };
}

namespace {

ForwardCouplingResult derive_coupled_dichotomy(const LtvSystem& sys,
                                               const TriProjectionFamily& fam,
                                               const BoundParams& params, int window,
                                               ExecPolicy policy, bool stable_side,
                                               const TrichotomyReport* precomputed) {
    TrichotomyReport pre =
        precomputed != nullptr ? *precomputed : verify_trichotomy(sys, fam, params, window, policy);
    if (!pre.pass) {
        throw std::invalid_argument(
            "derive coupled dichotomy: input system is not trichotomic at the declared "
            "constants");
    }

    ForwardCouplingResult res{
        .coupled = stable_side
                       ? build_stable_coupled(sys, params.h, params.k, params.a, params.b)
                       : build_unstable_coupled(sys, params.h, params.k, params.a, params.b),
        .split = stable_side ? make_stable_split(fam) : make_unstable_split(fam),
        .rate = RateSequence::tabulated({1.0}),
        .dichotomy = {},
        .split_invariance = {},
    };

    RangeOrthVerdict orth = check_range_orthogonality(fam);
    res.downgraded = !orth.pass;
    res.gate_K = res.downgraded ? std::sqrt(2.0) * params.K : params.K;
    if (res.downgraded) res.flags.push_back("pythagoras-downgrade");

    RateSequence quotient = make_tilde_h(params.h, params.k, params.a, params.b, sys.horizon());
    res.rate = stable_side ? quotient : make_bar_h(quotient);

    DichotomyParams dp(res.gate_K, 0.5, params.eps, res.rate, params.mu, params.nu);
    res.dichotomy = verify_dichotomy(res.coupled, res.split, dp, window, policy);

    // scalar rescaling preserves invariance; asserted, not assumed
    res.split_invariance = check_invariance(res.coupled, res.split);

    res.pass = res.dichotomy.pass && res.split_invariance.pass;
    for (const std::string& f : res.dichotomy.flags) res.flags.push_back(f);
    return res;
}

}  // namespace

ForwardCouplingResult derive_stable_dichotomy(const LtvSystem& sys,
                                              const TriProjectionFamily& fam,
                                              const BoundParams& params, int window,
                                              ExecPolicy policy,
                                              const TrichotomyReport* precomputed) {
    return derive_coupled_dichotomy(sys, fam, params, window, policy, true, precomputed);
}

ForwardCouplingResult derive_unstable_dichotomy(const LtvSystem& sys,
                                                const TriProjectionFamily& fam,
                                                const BoundParams& params, int window,
                                                ExecPolicy policy,
                                                const TrichotomyReport* precomputed) {
    return derive_coupled_dichotomy(sys, fam, params, window, policy, false, precomputed);
}

ReverseCouplingResult reconstruct_trichotomy(const LtvSystem& stable_side,
                                             const DiProjectionFamily& S,
                                             const LtvSystem& unstable_side,
                                             const DiProjectionFamily& T,
                                             const RateSequence& h, const RateSequence& k,
                                             double a, double b, double K, double eps,
                                             const RateSequence& mu, const RateSequence& nu,
                                             int window, ExecPolicy policy) {
    if (stable_side.dim() != unstable_side.dim() ||
        stable_side.horizon() != unstable_side.horizon()) {
        throw std::invalid_argument("reconstruct_trichotomy: coupled systems disagree in shape");
    }

    ReverseCouplingResult res{.base = stable_side, .fam = {}, .trichotomy = {}};

    // coupling relation between the two transition families on sampled pairs
    TransitionCache tc_stable(stable_side);
    TransitionCache tc_unstable(unstable_side);
    const int N = std::min(window, stable_side.horizon());
    std::vector<std::pair<int, int>> samples = {{N, 0}};
    for (int n = 0; n + 1 <= N; n += std::max(1, N / 6)) samples.emplace_back(n + 1, n);
    if (N >= 3) samples.emplace_back(2 * N / 3, N / 3);
    for (auto [m, n] : samples) {
        double log_factor = a * (h.log_at(n) - h.log_at(m)) + b * (k.log_at(n) - k.log_at(m));
        Eigen::MatrixXd predicted = std::exp(log_factor) * tc_stable.mat(m, n);
        double scale = std::max(1.0, tc_unstable.mat(m, n).norm());
        double err = (predicted - tc_unstable.mat(m, n)).norm() / scale;
        res.coupling_relation_worst = std::max(res.coupling_relation_worst, err);
    }
    if (res.coupling_relation_worst > 1e-10) {
        res.failed_stage = "coupling relation";
        return res;
    }

    FamilyVerdict compat = check_split_compatibility(S, T);
    if (!compat.pass) {
        res.failed_stage = "split compatibility";
        return res;
    }

    RateSequence quotient = make_tilde_h(h, k, a, b, stable_side.horizon());
    RateSequence reciprocal = make_bar_h(quotient);
    DichotomyReport rep_s =
        verify_dichotomy(stable_side, S, DichotomyParams(K, 0.5, eps, quotient, mu, nu),
                         window, policy);
    if (!rep_s.pass) {
        res.failed_stage = "stable-side dichotomy";
        return res;
    }
    DichotomyReport rep_u =
        verify_dichotomy(unstable_side, T, DichotomyParams(K, 0.5, eps, reciprocal, mu, nu),
                         window, policy);
    if (!rep_u.pass) {
        res.failed_stage = "unstable-side dichotomy";
        return res;
    }

    res.fam = merge_splits(S, T);

    // base system recovered from the stable side; the unstable side is the
    // cross check
    std::vector<Eigen::MatrixXd> base_coeffs;
    base_coeffs.reserve(static_cast<std::size_t>(stable_side.horizon()));
    for (int n = 0; n < stable_side.horizon(); ++n) {
        double lf = step_log_factor(h, k, a, b, n);
        base_coeffs.push_back(std::exp(-lf) * stable_side.coeff(n));
        Eigen::MatrixXd from_unstable = std::exp(+lf) * unstable_side.coeff(n);
        double scale = std::max(1.0, base_coeffs.back().norm());
        double err = (base_coeffs.back() - from_unstable).norm() / scale;
        res.cross_check_worst = std::max(res.cross_check_worst, err);
    }
    if (res.cross_check_worst > 1e-10) {
        res.failed_stage = "coupling relation";
        return res;
    }
    res.base = LtvSystem(stable_side.dim(), std::move(base_coeffs));

    res.trichotomy =
        verify_trichotomy(res.base, res.fam, BoundParams(K, a, b, eps, h, k, mu, nu), window,
                          policy);
    if (!res.trichotomy.pass) {
        res.failed_stage = "trichotomy";
        return res;
    }
    res.pass = true;
    return res;
}

namespace {

double family_distance(const TriProjectionFamily& x, const TriProjectionFamily& y) {
    double worst = 0.0;
    for (std::size_t n = 0; n < x.stable.size(); ++n) {
        worst = std::max(worst, (x.stable[n] - y.stable[n]).cwiseAbs().maxCoeff());
        worst = std::max(worst, (x.unstable[n] - y.unstable[n]).cwiseAbs().maxCoeff());
        worst = std::max(worst, (x.central[n] - y.central[n]).cwiseAbs().maxCoeff());
    }
    return worst;
}

double system_distance(const LtvSystem& x, const LtvSystem& y) {
    double worst = 0.0;
    for (int n = 0; n < x.horizon(); ++n) {
        double scale = std::max(1.0, y.coeff(n).norm());
        worst = std::max(worst, (x.coeff(n) - y.coeff(n)).norm() / scale);
    }
    return worst;
}

}  // namespace

RoundTripReport roundtrip_equivalence(const LtvSystem& sys, const TriProjectionFamily& fam,
                                      const BoundParams& params, int window, ExecPolicy policy,
                                      double recon_tol) {
    RoundTripReport rep;
    rep.recon_tol = recon_tol;

    rep.precondition = verify_trichotomy(sys, fam, params, window, policy);
    if (!rep.precondition->pass) {
        rep.failed_stage = "precondition";
        return rep;
    }

    rep.forward_stable =
        derive_coupled_dichotomy(sys, fam, params, window, policy, true, &*rep.precondition);
    if (!rep.forward_stable->pass) {
        rep.failed_stage = "forward-stable";
        return rep;
    }
    rep.forward_unstable =
        derive_coupled_dichotomy(sys, fam, params, window, policy, false, &*rep.precondition);
    if (!rep.forward_unstable->pass) {
        rep.failed_stage = "forward-unstable";
        return rep;
    }

    double gate = std::max(rep.forward_stable->gate_K, rep.forward_unstable->gate_K);
    rep.reverse = reconstruct_trichotomy(
        rep.forward_stable->coupled, rep.forward_stable->split, rep.forward_unstable->coupled,
        rep.forward_unstable->split, params.h, params.k, params.a, params.b, gate, params.eps,
        params.mu, params.nu, window, policy);
    if (!rep.reverse->pass) {
        rep.failed_stage = rep.reverse->failed_stage.empty() ? "reverse"
                                                             : rep.reverse->failed_stage;
        return rep;
    }

    rep.family_recon_error = family_distance(rep.reverse->fam, fam);
    rep.system_recon_error = system_distance(rep.reverse->base, sys);
    if (rep.family_recon_error > recon_tol || rep.system_recon_error > recon_tol) {
        rep.failed_stage = "reconstruction-mismatch";
        return rep;
    }

    rep.final_constant = rep.reverse->trichotomy.max_kmin;
    if (rep.final_constant > gate * (1.0 + 1e-9)) {
        rep.failed_stage = "constant";
        return rep;
    }
    rep.pass = true;
    return rep;
}

}  // namespace trilab
