#include "trilab/rates.hpp"

#include <cmath>
#include <stdexcept>

namespace trilab {

RateSequence RateSequence::exponential(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("RateSequence::exponential: base must be positive and finite");
    }
    RateSequence r;
    r.kind_ = Kind::Exponential;
    r.log_lambda_ = std::log(lambda);
    return r;
}

RateSequence RateSequence::polynomial(double degree) {
    if (!(degree > 0.0) || !std::isfinite(degree)) {
        throw std::invalid_argument("RateSequence::polynomial: degree must be positive and finite");
    }
    RateSequence r;
    r.kind_ = Kind::Polynomial;
    r.degree_ = degree;
    return r;
}

RateSequence RateSequence::tabulated(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("RateSequence::tabulated: empty table");
    std::vector<double> logs;
    logs.reserve(values.size());
    for (double v : values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("RateSequence::tabulated: values must be positive and finite");
        }
        logs.push_back(std::log(v));
    }
    return tabulated_log(std::move(logs));
}

RateSequence RateSequence::tabulated_log(std::vector<double> log_values) {
    if (log_values.empty()) throw std::invalid_argument("RateSequence::tabulated_log: empty table");
    for (double lv : log_values) {
        if (!std::isfinite(lv)) {
            throw std::invalid_argument("RateSequence::tabulated_log: non-finite log value");
        }
    }
    RateSequence r;
    r.kind_ = Kind::Tabulated;
    r.logs_ = std::move(log_values);
    return r;
}

double RateSequence::exponential_base() const {
    if (kind_ != Kind::Exponential) throw std::logic_error("RateSequence: not exponential");
    return std::exp(log_lambda_);
}

double RateSequence::polynomial_degree() const {
    if (kind_ != Kind::Polynomial) throw std::logic_error("RateSequence: not polynomial");
    return degree_;
}

double RateSequence::log_at(int n) const {
    if (n < 0) throw std::out_of_range("RateSequence: negative step");
    switch (kind_) {
        case Kind::Exponential:
            return static_cast<double>(n) * log_lambda_;
        case Kind::Polynomial:
            return degree_ * std::log(static_cast<double>(n) + 1.0);
        case Kind::Tabulated:
            if (static_cast<std::size_t>(n) >= logs_.size()) {
                throw std::out_of_range("RateSequence: step " + std::to_string(n) +
                                        " beyond tabulated horizon " +
                                        std::to_string(logs_.size() - 1));
            }
            return logs_[static_cast<std::size_t>(n)];
    }
    throw std::logic_error("RateSequence: bad kind");
}

double RateSequence::at(int n) const { return std::exp(log_at(n)); }

std::optional<int> RateSequence::horizon() const noexcept {
    if (kind_ == Kind::Tabulated) return static_cast<int>(logs_.size()) - 1;
    return std::nullopt;
}

GrowthRateVerdict validate_growth_rate(const RateSequence& r, int window, double floor) {
    if (window < 2) throw std::invalid_argument("validate_growth_rate: window must be >= 2");
    GrowthRateVerdict v;
    v.window = window;
    v.floor = floor;

    if (r.at(0) != 1.0) {
        v.reason = "value at 0 is not 1";
        v.violation_step = 0;
        return v;
    }
    for (int n = 1; n <= window; ++n) {
        if (r.log_at(n) < r.log_at(n - 1)) {
            v.reason = "not nondecreasing";
            v.violation_step = n;
            return v;
        }
    }
    v.end_value = r.at(window);
    if (!(v.end_value >= floor)) {
        v.reason = "divergence floor not reached";
        v.violation_step = window;
        return v;
    }
    v.pass = true;
    return v;
}

RateSequence make_tilde_h(const RateSequence& h, const RateSequence& k,
                          double a, double b, int horizon) {
    if (!(a > 0.0)) throw std::invalid_argument("make_tilde_h: a must be positive");
    if (!(b >= 0.0)) throw std::invalid_argument("make_tilde_h: b must be nonnegative");
    if (horizon < 0) throw std::invalid_argument("make_tilde_h: negative horizon");
    std::vector<double> logs(static_cast<std::size_t>(horizon) + 1);
    for (int n = 0; n <= horizon; ++n) {
        logs[static_cast<std::size_t>(n)] = a * h.log_at(n) - b * k.log_at(n);
    }
    return RateSequence::tabulated_log(std::move(logs));
}

RateSequence make_bar_h(const RateSequence& th, std::optional<int> horizon) {
    if (th.kind() == RateSequence::Kind::Tabulated) {
        std::vector<double> logs = th.log_values();
        for (double& lv : logs) lv = -lv;
        return RateSequence::tabulated_log(std::move(logs));
    }
    if (!horizon.has_value()) {
        throw std::invalid_argument("make_bar_h: functional rate needs an explicit horizon");
    }
    std::vector<double> logs(static_cast<std::size_t>(*horizon) + 1);
    for (int n = 0; n <= *horizon; ++n) logs[static_cast<std::size_t>(n)] = -th.log_at(n);
    return RateSequence::tabulated_log(std::move(logs));
}

}  // namespace trilab
