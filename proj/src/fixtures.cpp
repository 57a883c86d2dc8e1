#include "trilab/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace trilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// per-block scalar entry at step n, in log space
struct BlockEntries {
    std::vector<double> log_entry;  // size horizon
    std::vector<double> log_prefix; // size horizon + 1, log of the product up to n
};

BlockEntries accumulate(std::vector<double> log_entries) {
    BlockEntries be;
    be.log_prefix.assign(log_entries.size() + 1, 0.0);
    for (std::size_t n = 0; n < log_entries.size(); ++n) {
        be.log_prefix[n + 1] = be.log_prefix[n] + log_entries[n];
    }
    be.log_entry = std::move(log_entries);
    return be;
}

double sweep_max(int window, const std::function<double(int, int)>& log_ratio) {
    double best = -kInf;
    for (int n = 0; n <= window; ++n) {
        for (int m = n; m <= window; ++m) best = std::max(best, log_ratio(m, n));
    }
    return std::exp(best);
}

}  // namespace

FixtureTriple gen_block_diagonal(const GeneratorSpec& spec) {
    if (spec.blocks.empty()) throw std::invalid_argument("gen_block_diagonal: no blocks");
    if (spec.horizon < 1) throw std::invalid_argument("gen_block_diagonal: horizon must be >= 1");
    int dim = 0;
    for (const BlockSpec& blk : spec.blocks) {
        if (blk.dim < 1) throw std::invalid_argument("gen_block_diagonal: block dim must be >= 1");
        dim += blk.dim;
    }

    const int N = spec.horizon;
    std::vector<std::string> notes;

    RateSequence h = spec.h;
    RateSequence mu = spec.mu;
    RateSequence nu = spec.nu;
    double a = spec.a;
    double eps = 0.0;
    if (spec.nonuniform.has_value()) {
        const NonuniformSpec& nu_spec = *spec.nonuniform;
        if (!(nu_spec.eps > 0.0) || !(nu_spec.eps < nu_spec.a)) {
            throw std::invalid_argument("gen_block_diagonal: need 0 < eps < a for the oscillating block");
        }
        h = RateSequence::exponential(std::exp(1.0));
        mu = h;
        nu = h;
        a = nu_spec.a - nu_spec.eps;
        eps = 2.0 * nu_spec.eps;
        notes.push_back("oscillating stable block: rates forced to e^n");
        notes.push_back("tight pairs: m even, n odd");
    }
    const double b = spec.b;
    if (!(a > 0.0)) throw std::invalid_argument("gen_block_diagonal: a must be positive");
    if (!(b >= 0.0)) throw std::invalid_argument("gen_block_diagonal: b must be nonnegative");

    // per-role scalar entries; exponential rates have a constant increment,
    // computed once so every step gets the identical double
    const bool h_exp = h.kind() == RateSequence::Kind::Exponential;
    const bool k_exp = spec.k.kind() == RateSequence::Kind::Exponential;
    const double stable_inc = a * (h.log_at(0) - h.log_at(1));
    const double unstable_inc = b * (spec.k.log_at(1) - spec.k.log_at(0));
    std::vector<double> log_stable(N), log_unstable(N), log_central(N);
    for (int n = 0; n < N; ++n) {
        if (spec.nonuniform.has_value()) {
            const NonuniformSpec& s = *spec.nonuniform;
            double sign = (n % 2 == 0) ? -1.0 : 1.0;  // (-1)^{n+1}
            log_stable[n] = -s.a + s.eps * sign * (2.0 * n + 1.0);
        } else {
            log_stable[n] = h_exp ? stable_inc : a * (h.log_at(n) - h.log_at(n + 1));
        }
        log_unstable[n] = k_exp ? unstable_inc : b * (spec.k.log_at(n + 1) - spec.k.log_at(n));
        log_central[n] = spec.central == CentralKind::Identity
                             ? 0.0
                             : (n % 2 == 0 ? std::log(2.0) : -std::log(2.0));
    }
    BlockEntries stable = accumulate(log_stable);
    BlockEntries unstable = accumulate(log_unstable);
    BlockEntries central = accumulate(log_central);

    // assemble coefficients and coordinate projections
    std::vector<Eigen::MatrixXd> coeffs(static_cast<std::size_t>(N),
                                        Eigen::MatrixXd::Zero(dim, dim));
    Eigen::MatrixXd p_stable = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd p_unstable = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::MatrixXd p_central = Eigen::MatrixXd::Zero(dim, dim);
    bool has_stable = false, has_unstable = false, has_central = false;
    int offset = 0;
    for (const BlockSpec& blk : spec.blocks) {
        const std::vector<double>* entries = nullptr;
        Eigen::MatrixXd* proj = nullptr;
        switch (blk.role) {
            case BlockRole::Stable:
                entries = &stable.log_entry;
                proj = &p_stable;
                has_stable = true;
                break;
            case BlockRole::Unstable:
                entries = &unstable.log_entry;
                proj = &p_unstable;
                has_unstable = true;
                break;
            case BlockRole::Central:
                entries = &central.log_entry;
                proj = &p_central;
                has_central = true;
                break;
        }
        for (int i = 0; i < blk.dim; ++i) {
            proj->operator()(offset + i, offset + i) = 1.0;
            for (int n = 0; n < N; ++n) {
                coeffs[static_cast<std::size_t>(n)](offset + i, offset + i) =
                    std::exp((*entries)[static_cast<std::size_t>(n)]);
            }
        }
        offset += blk.dim;
    }

    TriProjectionFamily fam;
    fam.stable.assign(static_cast<std::size_t>(N) + 1, p_stable);
    fam.unstable.assign(static_cast<std::size_t>(N) + 1, p_unstable);
    fam.central.assign(static_cast<std::size_t>(N) + 1, p_central);

    // certificate K: exact scalar sweep of every present bound ratio
    double K = 1.0;
    auto prod = [](const BlockEntries& be, int m, int n) {
        return be.log_prefix[static_cast<std::size_t>(m)] -
               be.log_prefix[static_cast<std::size_t>(n)];
    };
    if (has_stable) {
        K = std::max(K, sweep_max(N, [&](int m, int n) {
                return prod(stable, m, n) -
                       (a * (h.log_at(n) - h.log_at(m)) + eps * mu.log_at(n));
            }));
    }
    if (has_unstable) {
        K = std::max(K, sweep_max(N, [&](int m, int n) {
                return -prod(unstable, m, n) -
                       (b * (spec.k.log_at(n) - spec.k.log_at(m)) + eps * nu.log_at(m));
            }));
    }
    if (has_central) {
        K = std::max(K, sweep_max(N, [&](int m, int n) {
                return prod(central, m, n) -
                       (a * (h.log_at(m) - h.log_at(n)) + eps * mu.log_at(n));
            }));
        K = std::max(K, sweep_max(N, [&](int m, int n) {
                return -prod(central, m, n) -
                       (b * (spec.k.log_at(m) - spec.k.log_at(n)) + eps * nu.log_at(m));
            }));
    }

    FixtureTriple triple{LtvSystem(dim, std::move(coeffs)), std::move(fam),
                         BoundParams(K, a, b, eps, h, spec.k, mu, nu), std::move(notes)};
    if (spec.rotation_seed.has_value()) {
        triple = rotate_fixture(triple, *spec.rotation_seed);
    }
    if (spec.corruption.has_value()) {
        triple = corrupt_fixture(triple, defect_from_name(*spec.corruption));
    }
    return triple;
}

FixtureTriple gen_nonuniform_scalar(double a, double eps, int horizon) {
    GeneratorSpec spec;
    spec.blocks = {{BlockRole::Stable, 1}};
    spec.horizon = horizon;
    spec.nonuniform = NonuniformSpec{a, eps};
    spec.b = 1.0;
    spec.k = RateSequence::exponential(std::exp(1.0));
    return gen_block_diagonal(spec);
}

FixtureTriple canonical_diagonal_fixture(int horizon) {
    GeneratorSpec spec;
    spec.blocks = {{BlockRole::Stable, 1}, {BlockRole::Unstable, 1}, {BlockRole::Central, 1}};
    spec.horizon = horizon;
    spec.h = RateSequence::exponential(2.0);
    spec.k = RateSequence::exponential(2.0);
    spec.mu = RateSequence::polynomial(1.0);
    spec.nu = RateSequence::polynomial(1.0);
    spec.a = 1.0;
    spec.b = 1.0;
    return gen_block_diagonal(spec);
}

FixtureTriple oscillating_scalar_fixture(int horizon) {
    return gen_nonuniform_scalar(1.0, 0.25, horizon);
}

FixtureTriple embedded_oscillating_fixture(int horizon) {
    GeneratorSpec spec;
    spec.blocks = {{BlockRole::Stable, 1}, {BlockRole::Unstable, 1}, {BlockRole::Central, 1}};
    spec.horizon = horizon;
    spec.nonuniform = NonuniformSpec{1.0, 0.25};
    spec.b = 1.0;
    spec.k = RateSequence::exponential(std::exp(1.0));
    return gen_block_diagonal(spec);
}

namespace {

Eigen::MatrixXd random_orthogonal(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd g(dim, dim);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) g(i, j) = gauss(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    // fix the sign so the factorization (and thus the sample) is unique
    for (int j = 0; j < dim; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    return q;
}

}  // namespace

FixtureTriple rotate_fixture(const FixtureTriple& base, std::uint64_t seed) {
    const int d = base.sys.dim();
    const int N = base.sys.horizon();
    std::mt19937_64 rng(seed);
    std::vector<Eigen::MatrixXd> u(static_cast<std::size_t>(N) + 1);
    for (int n = 0; n <= N; ++n) u[static_cast<std::size_t>(n)] = random_orthogonal(d, rng);

    std::vector<Eigen::MatrixXd> coeffs(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        coeffs[static_cast<std::size_t>(n)] =
            u[static_cast<std::size_t>(n) + 1] * base.sys.coeff(n) *
            u[static_cast<std::size_t>(n)].transpose();
    }
    auto conjugate = [&](const MatSeq& seq) {
        MatSeq out(seq.size());
        for (std::size_t n = 0; n < seq.size(); ++n) out[n] = u[n] * seq[n] * u[n].transpose();
        return out;
    };
    FixtureTriple out{LtvSystem(d, std::move(coeffs)),
                      {conjugate(base.fam.stable), conjugate(base.fam.unstable),
                       conjugate(base.fam.central)},
                      base.params,
                      base.notes};
    out.notes.push_back("rotated with seed " + std::to_string(seed));
    return out;
}

Defect defect_from_name(const std::string& name) {
    if (name == "break-annihilation") return Defect::BreakAnnihilation;
    if (name == "break-invariance") return Defect::BreakInvariance;
    if (name == "kill-kernel-direction") return Defect::KillKernelDirection;
    if (name == "skew-projections") return Defect::SkewProjections;
    throw std::invalid_argument("unknown defect: " + name);
}

std::string defect_name(Defect d) {
    switch (d) {
        case Defect::BreakAnnihilation: return "break-annihilation";
        case Defect::BreakInvariance: return "break-invariance";
        case Defect::KillKernelDirection: return "kill-kernel-direction";
        case Defect::SkewProjections: return "skew-projections";
    }
    throw std::logic_error("bad defect");
}

namespace {

Eigen::VectorXd first_range_direction(const Eigen::MatrixXd& p) {
    Eigen::MatrixXd basis = range_basis(p);
    if (basis.cols() == 0) {
        throw std::invalid_argument("corrupt_fixture: projection has empty range");
    }
    return basis.col(0);
}

// rebuilds the touched components from their perturbed step-0 values by
// conjugating forward; the base system must be reversible
void propagate_from_zero(const LtvSystem& sys, MatSeq& seq) {
    for (int n = 0; n < sys.horizon(); ++n) {
        const Eigen::MatrixXd& a = sys.coeff(n);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
        if (!lu.isInvertible()) {
            throw std::invalid_argument("corrupt_fixture: base system must be reversible");
        }
        seq[static_cast<std::size_t>(n) + 1] = a * seq[static_cast<std::size_t>(n)] * lu.inverse();
    }
}

}  // namespace

FixtureTriple corrupt_fixture(const FixtureTriple& base, Defect defect) {
    FixtureTriple out = base;
    out.notes.push_back("corrupted: " + defect_name(defect));
    const int d = base.sys.dim();
    const int N = base.sys.horizon();

    switch (defect) {
        case Defect::BreakAnnihilation: {
            Eigen::VectorXd u = first_range_direction(base.fam.stable[0]);
            Eigen::VectorXd v = first_range_direction(base.fam.unstable[0]);
            out.fam.stable[0] += u * v.transpose();
            propagate_from_zero(base.sys, out.fam.stable);
            return out;
        }
        case Defect::SkewProjections: {
            Eigen::VectorXd u = first_range_direction(base.fam.stable[0]);
            Eigen::VectorXd v = first_range_direction(base.fam.unstable[0]);
            out.fam.stable[0] += u * v.transpose();
            out.fam.unstable[0] -= u * v.transpose();
            propagate_from_zero(base.sys, out.fam.stable);
            propagate_from_zero(base.sys, out.fam.unstable);
            return out;
        }
        case Defect::BreakInvariance: {
            if (d < 2) throw std::invalid_argument("corrupt_fixture: need dim >= 2");
            int n0 = std::min(3, N);
            Eigen::MatrixXd g = Eigen::MatrixXd::Identity(d, d);
            g(0, 0) = 0.0;
            g(0, 1) = -1.0;
            g(1, 0) = 1.0;
            g(1, 1) = 0.0;
            auto rotate_step = [&](MatSeq& seq) {
                seq[static_cast<std::size_t>(n0)] =
                    g * seq[static_cast<std::size_t>(n0)] * g.transpose();
            };
            rotate_step(out.fam.stable);
            rotate_step(out.fam.unstable);
            rotate_step(out.fam.central);
            return out;
        }
        case Defect::KillKernelDirection: {
            int n0 = std::min(3, N - 1);
            // prefer a central direction so the unstable kernel loses rank
            Eigen::MatrixXd central_range =
                range_basis(base.fam.central[static_cast<std::size_t>(n0)]);
            Eigen::VectorXd w;
            if (central_range.cols() > 0) {
                w = central_range.col(0);
            } else {
                Eigen::MatrixXd kernel =
                    kernel_basis(base.fam.unstable[static_cast<std::size_t>(n0)]);
                if (kernel.cols() == 0) {
                    throw std::invalid_argument("corrupt_fixture: unstable kernel is trivial");
                }
                w = kernel.col(0);
            }
            std::vector<Eigen::MatrixXd> coeffs = base.sys.coeffs();
            coeffs[static_cast<std::size_t>(n0)] =
                coeffs[static_cast<std::size_t>(n0)] *
                (Eigen::MatrixXd::Identity(d, d) - w * w.transpose());
            out.sys = LtvSystem(d, std::move(coeffs));
            return out;
        }
    }
    throw std::logic_error("bad defect");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

double sampled_kmin_lower_bound(const TransitionCache& tc, const MatSeq& proj,
                                const Envelope& env, BoundDirection dir, int window,
                                int samples, std::uint64_t seed, ExecPolicy policy,
                                double rank_tol) {
    if (samples < 1) throw std::invalid_argument("sampled_kmin_lower_bound: samples must be >= 1");
    tc.prepopulate(window);

    std::vector<Eigen::MatrixXd> bases(static_cast<std::size_t>(window) + 1);
    for (int n = 0; n <= window; ++n) bases[n] = range_basis(proj[n], rank_tol);

    std::vector<std::pair<int, int>> pairs;
    for (int span = 0; span <= window; ++span) {
        for (int n = 0; n + span <= window; ++n) pairs.emplace_back(n + span, n);
    }

    auto pair_best = [&](int m, int n) -> double {
        const Eigen::MatrixXd& basis = bases[n];
        if (basis.cols() == 0) return 0.0;
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(
                                                  (static_cast<std::uint64_t>(m) << 32) ^
                                                  static_cast<std::uint64_t>(n))));
        std::normal_distribution<double> gauss(0.0, 1.0);
        const Eigen::MatrixXd& t = tc.mat(m, n);
        double env_value = std::exp(env.log_value(m, n));
        double best = 0.0;
        for (int s = 0; s < samples; ++s) {
            Eigen::VectorXd g(basis.cols());
            for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = gauss(rng);
            double gn = g.norm();
            if (gn == 0.0) continue;
            Eigen::VectorXd v = basis * (g / gn);
            double image = (t * v).norm();
            double ratio;
            if (dir == BoundDirection::ForwardUpper) {
                ratio = image / env_value;
            } else {
                ratio = image == 0.0 ? kInf : 1.0 / (env_value * image);
            }
            best = std::max(best, ratio);
        }
        return best;
    };

    double best = 0.0;
    if (policy == ExecPolicy::Serial) {
        for (const auto& [m, n] : pairs) best = std::max(best, pair_best(m, n));
    } else {
#pragma omp parallel
        {
            double local = 0.0;
#pragma omp for schedule(static)
            for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i) {
                local = std::max(local, pair_best(pairs[static_cast<std::size_t>(i)].first,
                                                  pairs[static_cast<std::size_t>(i)].second));
            }
#pragma omp critical(trilab_oracle_reduce)
            {
                best = std::max(best, local);
            }
        }
    }
    return best;
}

}  // namespace trilab
