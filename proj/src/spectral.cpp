#include "trilab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

RestrictedExtremes restricted_extremes(const Eigen::MatrixXd& M, const Eigen::MatrixXd& basis) {
    if (basis.cols() == 0) return {0.0, kInf, true};
    if (M.cols() != basis.rows()) {
        throw std::invalid_argument("restricted_extremes: dimension mismatch");
    }
    Eigen::MatrixXd gram = basis.transpose() * basis;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > 1e-10) {
        throw std::invalid_argument("restricted_extremes: basis is not orthonormal");
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M * basis);
    const auto& sv = svd.singularValues();
    return {sv(0), sv(sv.size() - 1), false};
}

Eigen::MatrixXd range_basis(const Eigen::MatrixXd& P, double rank_tol) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(P);
    // rank decision on an absolute scale: a nonzero idempotent has norm >= 1,
    // so a pivot below rank_tol relative to max(1, largest pivot) is noise
    Eigen::VectorXd pivots = qr.matrixQR().diagonal().cwiseAbs();
    double scale = pivots.size() > 0 ? std::max(1.0, pivots(0)) : 1.0;
    Eigen::Index r = 0;
    while (r < pivots.size() && pivots(r) > rank_tol * scale) ++r;
    Eigen::MatrixXd q = qr.householderQ();
    return q.leftCols(r);
}

Eigen::MatrixXd kernel_basis(const Eigen::MatrixXd& P, double rank_tol) {
    Eigen::MatrixXd complement = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - P;
    return range_basis(complement, rank_tol);
}

Envelope make_decay_envelope(const RateSequence& h, double a, const RateSequence& mu,
                             double eps) {
    return {[h, a, mu, eps](int m, int n) {
        return a * (h.log_at(n) - h.log_at(m)) + eps * mu.log_at(n);
    }};
}

Envelope make_growth_envelope(const RateSequence& k, double b, const RateSequence& nu,
                              double eps) {
    return {[k, b, nu, eps](int m, int n) {
        return b * (k.log_at(m) - k.log_at(n)) + eps * nu.log_at(m);
    }};
}

Envelope make_central_forward_envelope(const RateSequence& h, double a, const RateSequence& mu,
                                       double eps) {
    return {[h, a, mu, eps](int m, int n) {
        return a * (h.log_at(m) - h.log_at(n)) + eps * mu.log_at(n);
    }};
}

Envelope make_unstable_backward_envelope(const RateSequence& k, double b,
                                         const RateSequence& nu, double eps) {
    return {[k, b, nu, eps](int m, int n) {
        return b * (k.log_at(n) - k.log_at(m)) + eps * nu.log_at(m);
    }};
}

Envelope make_di_backward_envelope(const RateSequence& h, double c, const RateSequence& nu,
                                   double eps) {
    return {[h, c, nu, eps](int m, int n) {
        return c * (h.log_at(n) - h.log_at(m)) + eps * nu.log_at(m);
    }};
}

std::vector<InequalityPattern> trichotomy_patterns(const RateSequence& h,
                                                   const RateSequence& k,
                                                   const RateSequence& mu,
                                                   const RateSequence& nu, double a, double b,
                                                   double eps) {
    return {
        {"stable-forward", BoundDirection::ForwardUpper, make_decay_envelope(h, a, mu, eps), 1},
        {"unstable-backward", BoundDirection::BackwardLower,
         make_unstable_backward_envelope(k, b, nu, eps), 2},
        {"central-forward", BoundDirection::ForwardUpper,
         make_central_forward_envelope(h, a, mu, eps), 3},
        {"central-backward", BoundDirection::BackwardLower,
         make_growth_envelope(k, b, nu, eps), 3},
    };
}

namespace {

struct PairScore {
    double log_ratio = -kInf;
    int m = 0;
    int n = 0;
    bool valid = false;
};

// Total order: larger ratio wins; ties break toward the smaller span, then
// the smaller start. Makes the parallel reduction order-independent.
bool score_better(const PairScore& a, const PairScore& b) {
    if (!a.valid) return false;
    if (!b.valid) return true;
    if (a.log_ratio != b.log_ratio) return a.log_ratio > b.log_ratio;
    if (a.m - a.n != b.m - b.n) return a.m - a.n < b.m - b.n;
    return a.n < b.n;
}

std::vector<std::pair<int, int>> window_pairs(int window) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<std::size_t>(window + 1) * (window + 2) / 2);
    for (int span = 0; span <= window; ++span) {
        for (int n = 0; n + span <= window; ++n) pairs.emplace_back(n + span, n);
    }
    return pairs;
}

KminEntry kmin_sweep(const TransitionCache& tc, const MatSeq& proj, const Envelope& env,
                     int window, BoundDirection dir, ExecPolicy policy, double rank_tol,
                     const std::string& name) {
    if (static_cast<int>(proj.size()) - 1 < window) {
        throw std::invalid_argument("kmin sweep: projection family shorter than window");
    }
    if (window > tc.system().horizon()) {
        throw std::out_of_range("kmin sweep: window beyond system horizon");
    }
    tc.prepopulate(window);

    // restricted bases per start step, shared by all pairs with that start
    std::vector<Eigen::MatrixXd> bases(static_cast<std::size_t>(window) + 1);
    int max_rank = 0;
    for (int n = 0; n <= window; ++n) {
        bases[n] = range_basis(proj[n], rank_tol);
        max_rank = std::max(max_rank, static_cast<int>(bases[n].cols()));
    }

    auto pair_score = [&](int m, int n) -> PairScore {
        const Eigen::MatrixXd& basis = bases[n];
        double log_env = env.log_value(m, n);
        if (!std::isfinite(log_env)) {
            throw std::invalid_argument("kmin sweep: envelope not finite at (" +
                                        std::to_string(m) + "," + std::to_string(n) + ")");
        }
        if (basis.cols() == 0) return {-kInf, m, n, true};
        RestrictedExtremes ext = restricted_extremes(tc.mat(m, n), basis);
        double log_sigma;
        if (dir == BoundDirection::ForwardUpper) {
            log_sigma = std::log(ext.sigma_max);  // -inf when sigma_max == 0
            return {log_sigma - log_env, m, n, true};
        }
        // backward: K_min contribution is 1 / (envelope * sigma_min)
        log_sigma = std::log(ext.sigma_min);  // -inf when singular
        return {-log_sigma - log_env, m, n, true};
    };

    const std::vector<std::pair<int, int>> pairs = window_pairs(window);
    PairScore best;
    if (policy == ExecPolicy::Serial) {
        for (const auto& [m, n] : pairs) {
            PairScore s = pair_score(m, n);
            if (score_better(s, best)) best = s;
        }
    } else {
#pragma omp parallel
        {
            PairScore local;
#pragma omp for schedule(static)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i) {
                PairScore s = pair_score(pairs[static_cast<std::size_t>(i)].first,
                                         pairs[static_cast<std::size_t>(i)].second);
                if (score_better(s, local)) local = s;
            }
#pragma omp critical(trilab_kmin_reduce)
            {
                if (score_better(local, best)) best = local;
            }
        }
    }

    KminEntry entry;
    entry.pattern = name;
    entry.log_kmin = best.log_ratio;
    entry.kmin = std::exp(best.log_ratio);
    entry.witness_m = best.m;
    entry.witness_n = best.n;
    entry.vacuous = max_rank == 0;
    entry.unbounded = best.log_ratio == kInf;

    // witness direction and an independent per-vector re-evaluation
    const Eigen::MatrixXd& basis = bases[best.n];
    if (basis.cols() > 0) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(tc.mat(best.m, best.n) * basis,
                                              Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        Eigen::Index pick = dir == BoundDirection::ForwardUpper ? 0 : sv.size() - 1;
        Eigen::VectorXd v = basis * svd.matrixV().col(pick);
        entry.witness_direction = v;
        double env_value = std::exp(env.log_value(best.m, best.n));
        Eigen::VectorXd image = tc.mat(best.m, best.n) * v;
        if (dir == BoundDirection::ForwardUpper) {
            entry.witness_ratio = image.norm() / (env_value * v.norm());
        } else {
            double denom = env_value * image.norm();
            entry.witness_ratio = denom == 0.0 ? kInf : v.norm() / denom;
        }
    }
    return entry;
}

}  // namespace

KminEntry kmin_forward(const TransitionCache& tc, const MatSeq& proj, const Envelope& env,
                       int window, ExecPolicy policy, double rank_tol) {
    return kmin_sweep(tc, proj, env, window, BoundDirection::ForwardUpper, policy, rank_tol,
                      "forward-upper");
}

KminEntry kmin_backward(const TransitionCache& tc, const MatSeq& proj, const Envelope& env,
                        int window, ExecPolicy policy, double rank_tol) {
    return kmin_sweep(tc, proj, env, window, BoundDirection::BackwardLower, policy, rank_tol,
                      "backward-lower");
}

KernelIsoReport check_kernel_isomorphism(const TransitionCache& tc, const MatSeq& proj,
                                         int window, double tol, int component_label,
                                         double rank_tol) {
    if (static_cast<int>(proj.size()) - 1 < window) {
        throw std::invalid_argument("check_kernel_isomorphism: family shorter than window");
    }
    if (window > tc.system().horizon()) {
        throw std::out_of_range("check_kernel_isomorphism: window beyond system horizon");
    }
    const LtvSystem& sys = tc.system();
    const int d = sys.dim();

    KernelIsoReport rep;
    rep.component = component_label;
    rep.tol = tol;

    std::vector<Eigen::MatrixXd> kernels(static_cast<std::size_t>(window) + 1);
    for (int n = 0; n <= window; ++n) {
        kernels[n] = kernel_basis(proj[n], rank_tol);
        rep.kernel_dims.push_back(static_cast<int>(kernels[n].cols()));
        if (kernels[n].cols() == d) rep.whole_space = true;
    }

    std::vector<double> step_sigma_min(static_cast<std::size_t>(window), kInf);
    for (int n = 0; n < window; ++n) {
        const Eigen::MatrixXd& w = kernels[n];
        const Eigen::MatrixXd& w_next = kernels[n + 1];
        if (w.cols() != w_next.cols()) {
            rep.fail_step = n;
            rep.reason = "kernel dimension changes across step";
            return rep;
        }
        if (w.cols() == 0) continue;  // zero kernel: vacuously isomorphic

        Eigen::MatrixXd image = sys.coeff(n) * w;
        // containment in the next kernel: the component of the image outside
        // span(w_next) must vanish relative to the image size
        Eigen::MatrixXd outside = image - w_next * (w_next.transpose() * image);
        double scale = std::max(1.0, image.norm());
        double containment = outside.norm() / scale;
        rep.worst_containment = std::max(rep.worst_containment, containment);
        if (containment > std::max(tol, 1e-9)) {
            rep.fail_step = n;
            rep.reason = "image leaves the kernel of the next step";
            return rep;
        }

        Eigen::JacobiSVD<Eigen::MatrixXd> svd(image);
        double smax = svd.singularValues()(0);
        double smin = svd.singularValues().tail(1)(0);
        step_sigma_min[static_cast<std::size_t>(n)] = smin;
        rep.min_restricted_sigma = std::min(rep.min_restricted_sigma, smin);
        // scale-free rank decision: a strongly contracting but invertible
        // restriction must not be mistaken for a singular one
        if (!(smin > tol * smax)) {
            rep.fail_step = n;
            rep.reason = "restriction loses rank (sigma_min <= tol * sigma_max)";
            return rep;
        }
    }

    // multi-step spot checks: sigma_min of the composed restriction must not
    // fall below the product of per-step lower bounds (rounding slack 0.5)
    std::vector<std::pair<int, int>> samples;
    if (window >= 1) samples.emplace_back(window, 0);
    if (window >= 4) samples.emplace_back(3 * window / 4, window / 4);
    for (int n = 0; n + 2 <= window; n += std::max(1, window / 4)) samples.emplace_back(n + 2, n);
    for (auto [m, n] : samples) {
        const Eigen::MatrixXd& w = kernels[n];
        if (w.cols() == 0) continue;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(tc.mat(m, n) * w);
        double smin = svd.singularValues().tail(1)(0);
        double expected = 1.0;
        for (int j = n; j < m; ++j) expected *= step_sigma_min[static_cast<std::size_t>(j)];
        if (smin < 0.5 * expected) {
            rep.fail_step = n;
            rep.reason = "multi-step restriction below composed per-step bound";
            return rep;
        }
    }

    rep.pass = true;
    return rep;
}

BoundParams::BoundParams(double K_, double a_, double b_, double eps_, RateSequence h_,
                         RateSequence k_, RateSequence mu_, RateSequence nu_)
    : K(K_), a(a_), b(b_), eps(eps_), h(std::move(h_)), k(std::move(k_)),
      mu(std::move(mu_)), nu(std::move(nu_)) {
    if (!(K > 0.0)) throw std::invalid_argument("BoundParams: K must be positive");
    if (!(a > 0.0)) throw std::invalid_argument("BoundParams: a must be positive");
    if (!(b >= 0.0)) throw std::invalid_argument("BoundParams: b must be nonnegative");
    if (!(eps >= 0.0)) throw std::invalid_argument("BoundParams: eps must be nonnegative");
}

DichotomyParams::DichotomyParams(double K_, double c_, double eps_, RateSequence h_,
                                 RateSequence mu_, RateSequence nu_)
    : K(K_), c(c_), eps(eps_), h(std::move(h_)), mu(std::move(mu_)), nu(std::move(nu_)) {
    if (!(K > 0.0)) throw std::invalid_argument("DichotomyParams: K must be positive");
    if (!(c > 0.0)) throw std::invalid_argument("DichotomyParams: c must be positive");
    if (!(eps >= 0.0)) throw std::invalid_argument("DichotomyParams: eps must be nonnegative");
}

namespace {

double finite_max(double acc, const KminEntry& e) {
    if (e.vacuous) return acc;
    return std::max(acc, e.kmin);
}

}  // namespace

TrichotomyReport verify_trichotomy(const LtvSystem& sys, const TriProjectionFamily& fam,
                                   const BoundParams& params, int window, ExecPolicy policy,
                                   double verdict_tol) {
    TrichotomyReport rep;
    rep.window = window;
    rep.verdict_tol = verdict_tol;
    rep.declared_K = params.K;

    rep.family = validate_tri(fam);
    rep.invariance = check_invariance(sys, fam);
    if (!rep.family.pass || !rep.invariance.pass) {
        rep.flags.push_back(!rep.family.pass ? "family-invalid" : "family-not-invariant");
        return rep;
    }

    TransitionCache tc(sys);
    tc.prepopulate(window);

    const MatSeq* components[] = {&fam.stable, &fam.unstable, &fam.central};
    double worst = 0.0;
    for (const InequalityPattern& pat :
         trichotomy_patterns(params.h, params.k, params.mu, params.nu, params.a, params.b,
                             params.eps)) {
        const MatSeq& proj = *components[pat.component - 1];
        KminEntry e = pat.direction == BoundDirection::ForwardUpper
                          ? kmin_forward(tc, proj, pat.envelope, window, policy)
                          : kmin_backward(tc, proj, pat.envelope, window, policy);
        e.pattern = pat.name;
        worst = finite_max(worst, e);
        if (e.vacuous) rep.flags.push_back(e.pattern + ":vacuous");
        rep.bounds.push_back(std::move(e));
    }
    rep.max_kmin = worst;

    rep.kernel_iso_unstable = check_kernel_isomorphism(tc, fam.unstable, window, 1e-10, 2);
    rep.kernel_iso_central = check_kernel_isomorphism(tc, fam.central, window, 1e-10, 3);
    if (rep.kernel_iso_unstable.whole_space || rep.kernel_iso_central.whole_space) {
        rep.flags.push_back("reversibility-consequence");
    }

    rep.pass = rep.max_kmin <= params.K * (1.0 + verdict_tol) &&
               rep.kernel_iso_unstable.pass && rep.kernel_iso_central.pass;
    return rep;
}

DichotomyReport verify_dichotomy(const LtvSystem& sys, const DiProjectionFamily& fam,
                                 const DichotomyParams& params, int window, ExecPolicy policy,
                                 double verdict_tol) {
    DichotomyReport rep;
    rep.window = window;
    rep.verdict_tol = verdict_tol;
    rep.declared_K = params.K;

    rep.family = validate_di(fam);
    rep.invariance = check_invariance(sys, fam);
    if (!rep.family.pass || !rep.invariance.pass) {
        rep.flags.push_back(!rep.family.pass ? "family-invalid" : "family-not-invariant");
        return rep;
    }

    TransitionCache tc(sys);
    tc.prepopulate(window);

    rep.forward = kmin_forward(tc, fam.p1,
                               make_decay_envelope(params.h, params.c, params.mu, params.eps),
                               window, policy);
    rep.forward.pattern = "dichotomy-forward";
    rep.backward = kmin_backward(
        tc, fam.p2, make_di_backward_envelope(params.h, params.c, params.nu, params.eps),
        window, policy);
    rep.backward.pattern = "dichotomy-backward";

    if (rep.forward.vacuous) rep.flags.push_back("dichotomy-forward:vacuous");
    if (rep.backward.vacuous) rep.flags.push_back("dichotomy-backward:vacuous");

    rep.max_kmin = finite_max(finite_max(0.0, rep.forward), rep.backward);

    rep.kernel_iso = check_kernel_isomorphism(tc, fam.p2, window, 1e-10, 2);
    if (rep.kernel_iso.whole_space) rep.flags.push_back("reversibility-consequence");

    rep.pass = rep.max_kmin <= params.K * (1.0 + verdict_tol) && rep.kernel_iso.pass;
    return rep;
}

namespace {

bool grid_point_better(const GridPointResult& x, const GridPointResult& y) {
    if (x.log_kmin != y.log_kmin) return x.log_kmin < y.log_kmin;
    if (x.eps != y.eps) return x.eps < y.eps;
    if (x.a != y.a) return x.a > y.a;
    return x.b > y.b;
}

}  // namespace

EstimateResult estimate_exponents(const LtvSystem& sys, const TriProjectionFamily& fam,
                                  const RateSequence& h, const RateSequence& k,
                                  const RateSequence& mu, const RateSequence& nu,
                                  const ExponentGrid& grid, int window, ExecPolicy policy) {
    if (grid.a.empty() || grid.b.empty() || grid.eps.empty()) {
        throw std::invalid_argument("estimate_exponents: empty grid dimension");
    }
    for (double a : grid.a) {
        if (!(a > 0.0)) throw std::invalid_argument("estimate_exponents: a candidates must be positive");
    }
    for (double b : grid.b) {
        if (!(b >= 0.0)) throw std::invalid_argument("estimate_exponents: b candidates must be nonnegative");
    }
    for (double e : grid.eps) {
        if (!(e >= 0.0)) throw std::invalid_argument("estimate_exponents: eps candidates must be nonnegative");
    }

    FamilyVerdict fv = validate_tri(fam);
    if (!fv.pass) throw std::invalid_argument("estimate_exponents: family fails validation");

    TransitionCache tc(sys);
    tc.prepopulate(window);

    const MatSeq* components[] = {&fam.stable, &fam.unstable, &fam.central};
    EstimateResult result;
    bool have_best = false;
    for (double eps : grid.eps) {
        for (double a : grid.a) {
            for (double b : grid.b) {
                double log_kmin = -kInf;
                for (const InequalityPattern& pat :
                     trichotomy_patterns(h, k, mu, nu, a, b, eps)) {
                    const MatSeq& proj = *components[pat.component - 1];
                    KminEntry e = pat.direction == BoundDirection::ForwardUpper
                                      ? kmin_forward(tc, proj, pat.envelope, window, policy)
                                      : kmin_backward(tc, proj, pat.envelope, window, policy);
                    if (!e.vacuous) log_kmin = std::max(log_kmin, e.log_kmin);
                }
                GridPointResult gp{a, b, eps, std::exp(log_kmin), log_kmin};
                result.table.push_back(gp);
                if (!have_best || grid_point_better(gp, result.best)) {
                    result.best = gp;
                    have_best = true;
                }
            }
        }
    }
    return result;
}

}  // namespace trilab
