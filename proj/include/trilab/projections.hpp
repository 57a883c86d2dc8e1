#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "trilab/ltv_system.hpp"

namespace trilab {

// One matrix per step n = 0..N (N+1 entries).
using MatSeq = std::vector<Eigen::MatrixXd>;

// Three-way splitting (stable / unstable / central) per step.
struct TriProjectionFamily {
    MatSeq stable;    // P^1
    MatSeq unstable;  // P^2
    MatSeq central;   // P^3

    int steps() const noexcept { return static_cast<int>(stable.size()) - 1; }
    int dim() const { return stable.empty() ? 0 : static_cast<int>(stable.front().rows()); }
};

// Complementary pair: p1 + p2 = I, mutually annihilating.
struct DiProjectionFamily {
    MatSeq p1;
    MatSeq p2;

    int steps() const noexcept { return static_cast<int>(p1.size()) - 1; }
    int dim() const { return p1.empty() ? 0 : static_cast<int>(p1.front().rows()); }
};

// Four-sequence reformulation of the same splitting.
struct QuadProjectionFamily {
    MatSeq stable;                // R^1 = P^1
    MatSeq unstable;              // R^2 = P^2
    MatSeq stable_plus_central;   // R^3 = P^1 + P^3
    MatSeq unstable_plus_central; // R^4 = P^2 + P^3

    int steps() const noexcept { return static_cast<int>(stable.size()) - 1; }
    int dim() const { return stable.empty() ? 0 : static_cast<int>(stable.front().rows()); }
};

struct ClauseViolation {
    std::string clause;
    double worst = 0.0;
    int step = -1;
};

struct FamilyVerdict {
    bool pass = false;
    double worst = 0.0;  // max violation across clauses
    std::vector<ClauseViolation> failures;
    double tol = 0.0;

    bool clause_failed(const std::string& name) const;
};

// Idempotence, resolution of identity, mutual annihilation.
FamilyVerdict validate_tri(const TriProjectionFamily& fam, double tol = 1e-9);
FamilyVerdict validate_di(const DiProjectionFamily& fam, double tol = 1e-9);
FamilyVerdict validate_quad(const QuadProjectionFamily& fam, double tol = 1e-9);

struct InvarianceVerdict {
    bool pass = false;
    double worst = 0.0;
    int step = -1;
    int component = -1;       // 1-based component of the worst violation
    double multi_step_worst = 0.0;
    double tol = 0.0;
};

// A_n P_n = P_{n+1} A_n for every step and component, plus sampled
// multi-step checks mat(m,n) P_n = P_m mat(m,n).
InvarianceVerdict check_invariance(const LtvSystem& sys, const TriProjectionFamily& fam,
                                   double tol = 1e-9);
InvarianceVerdict check_invariance(const LtvSystem& sys, const DiProjectionFamily& fam,
                                   double tol = 1e-9);

// (Q^1, Q^2) = (stable, unstable + central). Input must validate.
DiProjectionFamily tri_to_two(const TriProjectionFamily& fam, double tol = 1e-9);

// Four-sequence form and back; the round trip is the identity.
QuadProjectionFamily tri_to_four(const TriProjectionFamily& fam, double tol = 1e-9);
TriProjectionFamily four_to_tri(const QuadProjectionFamily& quad, double tol = 1e-9);

// (Q^1, Q^2, I - Q^1 - Q^2) from an arbitrary pair of sequences; no
// validation, used to test the two-sequence reformulation both ways.
TriProjectionFamily tri_from_pair(const MatSeq& q1, const MatSeq& q2);

// Idempotence + mutual annihilation of an arbitrary pair (no sum-to-identity
// requirement).
FamilyVerdict validate_pair_orthogonality(const MatSeq& q1, const MatSeq& q2,
                                          double tol = 1e-9);

// Splittings used by the coupled systems: the stable split isolates the
// stable component, the unstable split isolates the unstable one.
DiProjectionFamily make_stable_split(const TriProjectionFamily& fam, double tol = 1e-9);    // (P^1, P^2+P^3)
DiProjectionFamily make_unstable_split(const TriProjectionFamily& fam, double tol = 1e-9);  // (P^1+P^3, P^2)

// The algebra tying the two splits together: sums to identity, mutual
// annihilation within each split, absorption between them, and orthogonality
// of the (stable-side, unstable-side) pair.
FamilyVerdict check_split_compatibility(const DiProjectionFamily& S,
                                        const DiProjectionFamily& T,
                                        double tol = 1e-9);

// Rebuilds the three-way splitting (S^1, T^2, T^1 S^2) from compatible
// splits; throws std::invalid_argument when compatibility fails.
TriProjectionFamily merge_splits(const DiProjectionFamily& S, const DiProjectionFamily& T,
                                 double tol = 1e-9);

struct RangeOrthVerdict {
    bool pass = false;
    bool products_orthogonal = false;  // (P^i)^T P^j == 0 for i != j
    bool pythagoras_holds = false;     // on sampled vectors
    double worst_product = 0.0;
    double worst_pythagoras = 0.0;
    int step = -1;
    double tol = 0.0;
};

// Mutual orthogonality of the projection ranges; strictly stronger than the
// algebraic annihilation P^i P^j = 0 (oblique splittings satisfy the latter
// but not the former).
RangeOrthVerdict check_range_orthogonality(const TriProjectionFamily& fam, double tol = 1e-9,
                                           std::uint64_t seed = 7, int samples_per_step = 100);
RangeOrthVerdict check_range_orthogonality(const DiProjectionFamily& fam, double tol = 1e-9,
                                           std::uint64_t seed = 7, int samples_per_step = 100);

}  // namespace trilab
