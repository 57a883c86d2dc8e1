#include "trilab/ltv_system.hpp"

#include <cmath>
#include <mutex>
#include <stdexcept>
#include <string>

namespace trilab {

LtvSystem::LtvSystem(int dim, std::vector<Eigen::MatrixXd> coeffs)
    : dim_(dim), coeffs_(std::move(coeffs)) {
    if (dim_ < 1) throw std::invalid_argument("LtvSystem: dim must be positive");
    if (coeffs_.empty()) throw std::invalid_argument("LtvSystem: empty coefficient sequence");
    for (std::size_t n = 0; n < coeffs_.size(); ++n) {
        const Eigen::MatrixXd& a = coeffs_[n];
        if (a.rows() != dim_ || a.cols() != dim_) {
            throw std::invalid_argument("LtvSystem: coefficient " + std::to_string(n) +
                                        " is not " + std::to_string(dim_) + "x" + std::to_string(dim_));
        }
        if (!a.allFinite()) {
            throw std::invalid_argument("LtvSystem: non-finite entry in coefficient " +
                                        std::to_string(n));
        }
    }
}

const Eigen::MatrixXd& LtvSystem::coeff(int n) const {
    if (n < 0 || n >= horizon()) {
        throw std::out_of_range("LtvSystem: coefficient index " + std::to_string(n) +
                                " outside [0, " + std::to_string(horizon()) + ")");
    }
    return coeffs_[static_cast<std::size_t>(n)];
}

ReversibilityReport is_reversible(const LtvSystem& sys, double tol) {
    ReversibilityReport rep;
    rep.tol = tol;
    rep.step_sigma_min.reserve(static_cast<std::size_t>(sys.horizon()));
    for (int n = 0; n < sys.horizon(); ++n) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.coeff(n));
        double smin = svd.singularValues().tail(1)(0);
        rep.step_sigma_min.push_back(smin);
        if (!(smin > tol)) rep.singular_steps.push_back(n);
    }
    rep.reversible = rep.singular_steps.empty();
    return rep;
}

void TransitionCache::validate_pair(int m, int n) const {
    if (n < 0 || m < n) {
        throw std::out_of_range("TransitionCache: pair (" + std::to_string(m) + "," +
                                std::to_string(n) + ") is not admissible (need 0 <= n <= m)");
    }
    if (m > sys_->horizon()) {
        throw std::out_of_range("TransitionCache: step " + std::to_string(m) +
                                " beyond horizon " + std::to_string(sys_->horizon()));
    }
}

const Eigen::MatrixXd& TransitionCache::mat(int m, int n) const {
    validate_pair(m, n);
    const std::size_t need = static_cast<std::size_t>(m - n);
    {
        std::shared_lock lock(mutex_);
        auto it = rows_.find(n);
        if (it != rows_.end() && it->second.size() > need) return it->second[need];
    }
    std::unique_lock lock(mutex_);
    std::deque<Eigen::MatrixXd>& row = rows_[n];
    if (row.empty()) row.emplace_back(Eigen::MatrixXd::Identity(sys_->dim(), sys_->dim()));
    // left-multiplication recurrence: mat(j+1, n) = A_j * mat(j, n)
    while (row.size() <= need) {
        int j = n + static_cast<int>(row.size()) - 1;
        row.emplace_back(sys_->coeff(j) * row.back());
    }
    return row[need];
}

Eigen::VectorXd TransitionCache::apply(int m, int n, const Eigen::VectorXd& x) const {
    if (x.size() != sys_->dim()) {
        throw std::invalid_argument("TransitionCache::apply: vector size " +
                                    std::to_string(x.size()) + " != dim " +
                                    std::to_string(sys_->dim()));
    }
    return mat(m, n) * x;
}

void TransitionCache::prepopulate(int window) const {
    validate_pair(window, 0);
    for (int n = 0; n <= window; ++n) mat(window, n);
}

namespace {

struct WorstTriple {
    double err = -1.0;
    int m = 0, n = 0, p = 0;
};

bool worse_triple(const WorstTriple& a, const WorstTriple& b) {
    if (a.err != b.err) return a.err > b.err;
    if (a.m != b.m) return a.m < b.m;
    if (a.n != b.n) return a.n < b.n;
    return a.p < b.p;
}

}  // namespace

PropagatorReport TransitionCache::check_propagator(int window, double tol,
                                                   ExecPolicy policy) const {
    validate_pair(window, 0);
    prepopulate(window);
    PropagatorReport rep;
    rep.window = window;
    rep.tol = tol;

    auto scan_m = [&](int m, WorstTriple& acc) {
        for (int n = 0; n <= m; ++n) {
            for (int p = 0; p <= n; ++p) {
                const Eigen::MatrixXd& whole = mat(m, p);
                double denom = whole.norm();
                double err = (mat(m, n) * mat(n, p) - whole).norm() /
                             (denom > 1.0 ? denom : 1.0);
                WorstTriple cand{err, m, n, p};
                if (worse_triple(cand, acc)) acc = cand;
            }
        }
    };

    WorstTriple global;
    if (policy == ExecPolicy::Serial) {
        for (int m = 0; m <= window; ++m) scan_m(m, global);
    } else {
#pragma omp parallel
        {
            WorstTriple local;
#pragma omp for schedule(static)
            for (int m = 0; m <= window; ++m) scan_m(m, local);
#pragma omp critical(trilab_propagator_reduce)
            {
                if (worse_triple(local, global)) global = local;
            }
        }
    }

    rep.worst_relative_error = global.err < 0.0 ? 0.0 : global.err;
    rep.worst_m = global.m;
    rep.worst_n = global.n;
    rep.worst_p = global.p;
    rep.pass = rep.worst_relative_error <= tol;
    return rep;
}

}  // namespace trilab
