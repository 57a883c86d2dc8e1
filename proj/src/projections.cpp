#include "trilab/projections.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace trilab {

namespace {

void require_consistent(const std::vector<const MatSeq*>& seqs, const char* who) {
    if (seqs.empty() || seqs.front()->empty()) {
        throw std::invalid_argument(std::string(who) + ": empty projection family");
    }
    const std::size_t len = seqs.front()->size();
    const Eigen::Index d = seqs.front()->front().rows();
    for (const MatSeq* s : seqs) {
        if (s->size() != len) {
            throw std::invalid_argument(std::string(who) + ": component length mismatch");
        }
        for (const Eigen::MatrixXd& p : *s) {
            if (p.rows() != d || p.cols() != d) {
                throw std::invalid_argument(std::string(who) + ": non-square or mismatched matrix");
            }
            if (!p.allFinite()) {
                throw std::invalid_argument(std::string(who) + ": non-finite entry");
            }
        }
    }
}

// Tracks the worst violation per clause; a clause fails when its worst
// value exceeds tol.
class ClauseTracker {
public:
    explicit ClauseTracker(double tol) : tol_(tol) {}

    void record(const std::string& clause, double violation, int step) {
        worst_ = std::max(worst_, violation);
        auto it = std::find_if(viols_.begin(), viols_.end(),
                               [&](const ClauseViolation& v) { return v.clause == clause; });
        if (it == viols_.end()) {
            viols_.push_back({clause, violation, step});
        } else if (violation > it->worst) {
            it->worst = violation;
            it->step = step;
        }
    }

    FamilyVerdict verdict() const {
        FamilyVerdict v;
        v.tol = tol_;
        v.worst = worst_;
        for (const ClauseViolation& c : viols_) {
            if (c.worst > tol_) v.failures.push_back(c);
        }
        v.pass = v.failures.empty();
        return v;
    }

private:
    double tol_;
    double worst_ = 0.0;
    std::vector<ClauseViolation> viols_;
};

double dev(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

bool FamilyVerdict::clause_failed(const std::string& name) const {
    return std::any_of(failures.begin(), failures.end(),
                       [&](const ClauseViolation& v) { return v.clause == name; });
}

FamilyVerdict validate_tri(const TriProjectionFamily& fam, double tol) {
    require_consistent({&fam.stable, &fam.unstable, &fam.central}, "validate_tri");
    const int d = fam.dim();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    ClauseTracker t(tol);
    for (int n = 0; n <= fam.steps(); ++n) {
        const Eigen::MatrixXd* p[3] = {&fam.stable[n], &fam.unstable[n], &fam.central[n]};
        for (int i = 0; i < 3; ++i) {
            t.record("idempotence", dev(*p[i] * *p[i] - *p[i]), n);
        }
        t.record("resolution", dev(*p[0] + *p[1] + *p[2] - id), n);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if (i != j) t.record("annihilation", dev(*p[i] * *p[j]), n);
            }
        }
    }
    return t.verdict();
}

FamilyVerdict validate_di(const DiProjectionFamily& fam, double tol) {
    require_consistent({&fam.p1, &fam.p2}, "validate_di");
    const int d = fam.dim();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    ClauseTracker t(tol);
    for (int n = 0; n <= fam.steps(); ++n) {
        const Eigen::MatrixXd& a = fam.p1[n];
        const Eigen::MatrixXd& b = fam.p2[n];
        t.record("idempotence", std::max(dev(a * a - a), dev(b * b - b)), n);
        t.record("resolution", dev(a + b - id), n);
        t.record("annihilation", std::max(dev(a * b), dev(b * a)), n);
    }
    return t.verdict();
}

FamilyVerdict validate_quad(const QuadProjectionFamily& fam, double tol) {
    require_consistent({&fam.stable, &fam.unstable, &fam.stable_plus_central,
                        &fam.unstable_plus_central},
                       "validate_quad");
    const int d = fam.dim();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    ClauseTracker t(tol);
    for (int n = 0; n <= fam.steps(); ++n) {
        const Eigen::MatrixXd& r1 = fam.stable[n];
        const Eigen::MatrixXd& r2 = fam.unstable[n];
        const Eigen::MatrixXd& r3 = fam.stable_plus_central[n];
        const Eigen::MatrixXd& r4 = fam.unstable_plus_central[n];
        t.record("idempotence",
                 std::max({dev(r1 * r1 - r1), dev(r2 * r2 - r2), dev(r3 * r3 - r3),
                           dev(r4 * r4 - r4)}),
                 n);
        t.record("resolution", std::max(dev(r1 + r4 - id), dev(r2 + r3 - id)), n);
        t.record("annihilation", std::max(dev(r1 * r2), dev(r2 * r1)), n);
        t.record("commutation", dev(r3 * r4 - r4 * r3), n);
    }
    return t.verdict();
}

namespace {

InvarianceVerdict check_invariance_impl(const LtvSystem& sys,
                                        const std::vector<const MatSeq*>& comps, double tol) {
    require_consistent(comps, "check_invariance");
    const int fam_steps = static_cast<int>(comps.front()->size()) - 1;
    if (fam_steps < sys.horizon()) {
        throw std::invalid_argument("check_invariance: family shorter than system horizon");
    }
    if (comps.front()->front().rows() != sys.dim()) {
        throw std::invalid_argument("check_invariance: dimension mismatch with system");
    }

    InvarianceVerdict v;
    v.tol = tol;
    for (int n = 0; n < sys.horizon(); ++n) {
        const Eigen::MatrixXd& a = sys.coeff(n);
        double scale = std::max(1.0, a.norm());
        for (std::size_t c = 0; c < comps.size(); ++c) {
            const Eigen::MatrixXd& pn = (*comps[c])[n];
            const Eigen::MatrixXd& pn1 = (*comps[c])[n + 1];
            double err = (a * pn - pn1 * a).norm() / scale;
            if (err > v.worst) {
                v.worst = err;
                v.step = n;
                v.component = static_cast<int>(c) + 1;
            }
        }
    }

    // sampled multi-step identity mat(m,n) P_n = P_m mat(m,n)
    TransitionCache tc(sys);
    const int N = sys.horizon();
    std::vector<std::pair<int, int>> pairs = {{N, 0}};
    if (N >= 2) pairs.push_back({N / 2 + 1, N / 2 - 1});
    for (int n = 0; n + 2 <= N; n += std::max(1, N / 5)) pairs.push_back({n + 2, n});
    for (auto [m, n] : pairs) {
        const Eigen::MatrixXd& t = tc.mat(m, n);
        double scale = std::max(1.0, t.norm());
        for (const MatSeq* comp : comps) {
            double err = (t * (*comp)[n] - (*comp)[m] * t).norm() / scale;
            v.multi_step_worst = std::max(v.multi_step_worst, err);
        }
    }

    v.pass = v.worst <= tol && v.multi_step_worst <= tol;
    return v;
}

}  // namespace

InvarianceVerdict check_invariance(const LtvSystem& sys, const TriProjectionFamily& fam,
                                   double tol) {
    return check_invariance_impl(sys, {&fam.stable, &fam.unstable, &fam.central}, tol);
}

InvarianceVerdict check_invariance(const LtvSystem& sys, const DiProjectionFamily& fam,
                                   double tol) {
    return check_invariance_impl(sys, {&fam.p1, &fam.p2}, tol);
}

namespace {

void require_valid_tri(const TriProjectionFamily& fam, double tol, const char* who) {
    FamilyVerdict v = validate_tri(fam, tol);
    if (!v.pass) {
        throw std::invalid_argument(std::string(who) + ": input family fails validation (" +
                                    v.failures.front().clause + ")");
    }
}

MatSeq seq_sum(const MatSeq& a, const MatSeq& b) {
    MatSeq out(a.size());
    for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] + b[n];
    return out;
}

}  // namespace

DiProjectionFamily tri_to_two(const TriProjectionFamily& fam, double tol) {
    require_valid_tri(fam, tol, "tri_to_two");
    return {fam.stable, seq_sum(fam.unstable, fam.central)};
}

QuadProjectionFamily tri_to_four(const TriProjectionFamily& fam, double tol) {
    require_valid_tri(fam, tol, "tri_to_four");
    return {fam.stable, fam.unstable, seq_sum(fam.stable, fam.central),
            seq_sum(fam.unstable, fam.central)};
}

TriProjectionFamily four_to_tri(const QuadProjectionFamily& quad, double tol) {
    FamilyVerdict v = validate_quad(quad, tol);
    if (!v.pass) {
        throw std::invalid_argument("four_to_tri: input family fails validation (" +
                                    v.failures.front().clause + ")");
    }
    TriProjectionFamily out;
    out.stable = quad.stable;
    out.unstable = quad.unstable;
    out.central.resize(quad.stable.size());
    for (std::size_t n = 0; n < quad.stable.size(); ++n) {
        out.central[n] = quad.stable_plus_central[n] * quad.unstable_plus_central[n];
    }
    return out;
}

TriProjectionFamily tri_from_pair(const MatSeq& q1, const MatSeq& q2) {
    require_consistent({&q1, &q2}, "tri_from_pair");
    const Eigen::Index d = q1.front().rows();
    TriProjectionFamily out;
    out.stable = q1;
    out.unstable = q2;
    out.central.resize(q1.size());
    for (std::size_t n = 0; n < q1.size(); ++n) {
        out.central[n] = Eigen::MatrixXd::Identity(d, d) - q1[n] - q2[n];
    }
    return out;
}

FamilyVerdict validate_pair_orthogonality(const MatSeq& q1, const MatSeq& q2, double tol) {
    require_consistent({&q1, &q2}, "validate_pair_orthogonality");
    ClauseTracker t(tol);
    for (std::size_t n = 0; n < q1.size(); ++n) {
        t.record("idempotence",
                 std::max(dev(q1[n] * q1[n] - q1[n]), dev(q2[n] * q2[n] - q2[n])),
                 static_cast<int>(n));
        t.record("annihilation", std::max(dev(q1[n] * q2[n]), dev(q2[n] * q1[n])),
                 static_cast<int>(n));
    }
    return t.verdict();
}

DiProjectionFamily make_stable_split(const TriProjectionFamily& fam, double tol) {
    require_valid_tri(fam, tol, "make_stable_split");
    return {fam.stable, seq_sum(fam.unstable, fam.central)};
}

DiProjectionFamily make_unstable_split(const TriProjectionFamily& fam, double tol) {
    require_valid_tri(fam, tol, "make_unstable_split");
    return {seq_sum(fam.stable, fam.central), fam.unstable};
}

FamilyVerdict check_split_compatibility(const DiProjectionFamily& S,
                                        const DiProjectionFamily& T, double tol) {
    require_consistent({&S.p1, &S.p2, &T.p1, &T.p2}, "check_split_compatibility");
    const int d = S.dim();
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    ClauseTracker t(tol);
    for (int n = 0; n <= S.steps(); ++n) {
        const Eigen::MatrixXd& s1 = S.p1[n];
        const Eigen::MatrixXd& s2 = S.p2[n];
        const Eigen::MatrixXd& t1 = T.p1[n];
        const Eigen::MatrixXd& t2 = T.p2[n];

        t.record("resolution", std::max(dev(s1 + s2 - id), dev(t1 + t2 - id)), n);
        t.record("annihilation",
                 std::max({dev(s1 * s2), dev(s2 * s1), dev(t1 * t2), dev(t2 * t1)}), n);
        t.record("stable-absorption", std::max(dev(s1 * t1 - s1), dev(t1 * s1 - s1)), n);
        const Eigen::MatrixXd mid = s2 - t2;  // = t1 - s1 when compatible
        t.record("central-consistency",
                 std::max({dev(s2 * t1 - mid), dev(t1 * s2 - mid), dev((t1 - s1) - mid)}), n);
        t.record("unstable-absorption", std::max(dev(t2 * s2 - t2), dev(s2 * t2 - t2)), n);
        t.record("cross-orthogonality", std::max(dev(t2 * s1), dev(s1 * t2)), n);
        t.record("idempotence",
                 std::max({dev(s1 * s1 - s1), dev(s2 * s2 - s2), dev(t1 * t1 - t1),
                           dev(t2 * t2 - t2)}),
                 n);
    }
    return t.verdict();
}

TriProjectionFamily merge_splits(const DiProjectionFamily& S, const DiProjectionFamily& T,
                                 double tol) {
    FamilyVerdict compat = check_split_compatibility(S, T, tol);
    if (!compat.pass) {
        throw std::invalid_argument("merge_splits: splits are incompatible (" +
                                    compat.failures.front().clause + ")");
    }
    TriProjectionFamily out;
    out.stable = S.p1;
    out.unstable = T.p2;
    out.central.resize(S.p1.size());
    for (std::size_t n = 0; n < S.p1.size(); ++n) out.central[n] = T.p1[n] * S.p2[n];
    return out;
}

namespace {

RangeOrthVerdict check_range_orth_impl(const std::vector<const MatSeq*>& comps, double tol,
                                       std::uint64_t seed, int samples_per_step) {
    require_consistent(comps, "check_range_orthogonality");
    const int d = static_cast<int>(comps.front()->front().rows());
    const int steps = static_cast<int>(comps.front()->size()) - 1;

    RangeOrthVerdict v;
    v.tol = tol;

    for (int n = 0; n <= steps; ++n) {
        for (std::size_t i = 0; i < comps.size(); ++i) {
            for (std::size_t j = 0; j < comps.size(); ++j) {
                if (i == j) continue;
                double err = dev((*comps[i])[n].transpose() * (*comps[j])[n]);
                if (err > v.worst_product) {
                    v.worst_product = err;
                    v.step = n;
                }
            }
        }
    }
    v.products_orthogonal = v.worst_product <= tol;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int n = 0; n <= steps; ++n) {
        for (int s = 0; s < samples_per_step; ++s) {
            Eigen::VectorXd x(d);
            for (int r = 0; r < d; ++r) x(r) = gauss(rng);
            double nx = x.norm();
            if (nx == 0.0) continue;
            x /= nx;
            // Pythagoras over every complementary-in-pair combination
            for (std::size_t i = 0; i < comps.size(); ++i) {
                for (std::size_t j = i + 1; j < comps.size(); ++j) {
                    Eigen::VectorXd yi = (*comps[i])[n] * x;
                    Eigen::VectorXd yj = (*comps[j])[n] * x;
                    double lhs = (yi + yj).squaredNorm();
                    double rhs = yi.squaredNorm() + yj.squaredNorm();
                    double err = std::abs(lhs - rhs) / std::max(1.0, rhs);
                    if (err > v.worst_pythagoras) v.worst_pythagoras = err;
                }
            }
        }
    }
    v.pythagoras_holds = v.worst_pythagoras <= tol;
    v.pass = v.products_orthogonal && v.pythagoras_holds;
    return v;
}

}  // namespace

RangeOrthVerdict check_range_orthogonality(const TriProjectionFamily& fam, double tol,
                                           std::uint64_t seed, int samples_per_step) {
    return check_range_orth_impl({&fam.stable, &fam.unstable, &fam.central}, tol, seed,
                                 samples_per_step);
}

RangeOrthVerdict check_range_orthogonality(const DiProjectionFamily& fam, double tol,
                                           std::uint64_t seed, int samples_per_step) {
    return check_range_orth_impl({&fam.p1, &fam.p2}, tol, seed, samples_per_step);
}

}  // namespace trilab
