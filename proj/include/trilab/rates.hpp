#pragma once

#include <optional>
#include <string>
#include <vector>

namespace trilab {

// Positive sequence n -> r_n, held in log space so that exponential rates
// survive long windows. Three kinds: exponential lambda^n, polynomial
// (n+1)^p, and tabulated values.
class RateSequence {
public:
    enum class Kind { Exponential, Polynomial, Tabulated };

    static RateSequence exponential(double lambda);
    static RateSequence polynomial(double degree);
    static RateSequence tabulated(const std::vector<double>& values);
    static RateSequence tabulated_log(std::vector<double> log_values);

    Kind kind() const noexcept { return kind_; }
    double exponential_base() const;
    double polynomial_degree() const;

    // log r_n; throws std::out_of_range when a tabulated rate is asked
    // beyond its table.
    double log_at(int n) const;
    double at(int n) const;

    // Last defined step for tabulated rates; nullopt for functional kinds.
    std::optional<int> horizon() const noexcept;

    const std::vector<double>& log_values() const noexcept { return logs_; }

private:
    RateSequence() = default;

    Kind kind_ = Kind::Tabulated;
    double log_lambda_ = 0.0;
    double degree_ = 0.0;
    std::vector<double> logs_;
};

struct GrowthRateVerdict {
    bool pass = false;
    // first violated axiom, empty when pass
    std::string reason;
    int violation_step = -1;
    double end_value = 0.0;
    double floor = 0.0;
    int window = 0;
    // the divergence axiom is only approximated by the end-of-window floor
    bool heuristic = true;
};

// Growth-rate axioms on [0, window]: r(0) = 1 exactly, nondecreasing, and
// r(window) >= floor as a finite-window stand-in for divergence.
GrowthRateVerdict validate_growth_rate(const RateSequence& r, int window,
                                       double floor = 10.0);

// Tabulated rate with log value a*log h(n) - b*log k(n), n = 0..horizon.
RateSequence make_tilde_h(const RateSequence& h, const RateSequence& k,
                          double a, double b, int horizon);

// Pointwise reciprocal. Tabulated input is negated in place (involution,
// bit-for-bit); functional input needs an explicit horizon to materialize.
RateSequence make_bar_h(const RateSequence& th,
                        std::optional<int> horizon = std::nullopt);

}  // namespace trilab
