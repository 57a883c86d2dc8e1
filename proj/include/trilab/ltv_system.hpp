#pragma once

#include <Eigen/Dense>

#include <deque>
#include <map>
#include <shared_mutex>
#include <vector>

#include "trilab/parallel.hpp"

namespace trilab {

// Discrete-time linear time-varying system x_{n+1} = A_n x_n over R^d,
// with coefficients given for n = 0 .. horizon-1. Immutable after
// construction.
class LtvSystem {
public:
    // Validates shape and finiteness; throws std::invalid_argument on
    // malformed input.
    LtvSystem(int dim, std::vector<Eigen::MatrixXd> coeffs);

    int dim() const noexcept { return dim_; }
    int horizon() const noexcept { return static_cast<int>(coeffs_.size()); }
    const Eigen::MatrixXd& coeff(int n) const;
    const std::vector<Eigen::MatrixXd>& coeffs() const noexcept { return coeffs_; }

private:
    int dim_;
    std::vector<Eigen::MatrixXd> coeffs_;
};

struct ReversibilityReport {
    bool reversible = false;
    std::vector<int> singular_steps;        // steps with sigma_min <= tol
    std::vector<double> step_sigma_min;     // per step, size horizon
    double tol = 0.0;
};

// True iff every coefficient is invertible (sigma_min > tol).
ReversibilityReport is_reversible(const LtvSystem& sys, double tol = 1e-12);

struct PropagatorReport {
    bool pass = false;
    double worst_relative_error = 0.0;
    int worst_m = 0, worst_n = 0, worst_p = 0;
    int window = 0;
    double tol = 0.0;
};

// Memoized transition matrices of the system: mat(m, n) = A_{m-1} ... A_n,
// identity at m = n. Built by the left-multiplication recurrence and cached;
// safe for concurrent readers with at-most-once insertion per key.
class TransitionCache {
public:
    explicit TransitionCache(const LtvSystem& sys) : sys_(&sys) {}

    const LtvSystem& system() const noexcept { return *sys_; }
    int dim() const noexcept { return sys_->dim(); }

    // Requires 0 <= n <= m <= horizon; throws std::out_of_range otherwise.
    const Eigen::MatrixXd& mat(int m, int n) const;

    // mat(m, n) * x with dimension validation.
    Eigen::VectorXd apply(int m, int n, const Eigen::VectorXd& x) const;

    // Fills every pair 0 <= n <= m <= window.
    void prepopulate(int window) const;

    // Checks mat(m,n) * mat(n,p) == mat(m,p) over all 0 <= p <= n <= m <= window
    // and reports the worst relative Frobenius deviation. Serial and parallel
    // variants reduce with the same total order and agree bit-for-bit.
    PropagatorReport check_propagator(int window, double tol = 1e-10,
                                      ExecPolicy policy = ExecPolicy::Parallel) const;

private:
    void validate_pair(int m, int n) const;

    const LtvSystem* sys_;
    mutable std::shared_mutex mutex_;
    // rows_[n][j] = mat(n + j, n); deque keeps element references stable
    // while another thread extends a row.
    mutable std::map<int, std::deque<Eigen::MatrixXd>> rows_;
};

}  // namespace trilab
