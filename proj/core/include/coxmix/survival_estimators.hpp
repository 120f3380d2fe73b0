#pragma once

#include <span>
#include <vector>

namespace coxmix {

// Right-continuous, non-increasing step survival function with S(t) = 1 before
// the first knot. Stored as a cumulative hazard Lambda per knot (possibly +inf
// once the curve reaches zero); survival is exp(-Lambda).
class StepSurvivalCurve {
public:
    StepSurvivalCurve() = default;

    // knots strictly increasing, cumulative_hazard non-decreasing and >= 0.
    static StepSurvivalCurve from_cumulative_hazard(std::vector<double> knots,
                                                    std::vector<double> cumulative_hazard);
    static StepSurvivalCurve from_survival(std::vector<double> knots,
                                           std::vector<double> survival);

    // S(t): value at the largest knot <= t.
    double operator()(double t) const { return eval(t); }
    double eval(double t) const;
    // S(t-): value at the largest knot < t.
    double eval_left(double t) const;
    double cumulative_hazard(double t) const;

    std::size_t size() const noexcept { return knots_.size(); }
    bool empty() const noexcept { return knots_.empty(); }
    const std::vector<double>& knots() const noexcept { return knots_; }
    const std::vector<double>& cumulative_hazards() const noexcept { return cumhaz_; }
    std::vector<double> survival_values() const;

private:
    std::vector<double> knots_;
    std::vector<double> cumhaz_;
};

inline double eval_left(const StepSurvivalCurve& curve, double t) { return curve.eval_left(t); }

// Product-limit estimate with knots at the distinct event times. Censorings
// tied with events at the same time stay in that time's risk set.
StepSurvivalCurve kaplan_meier(std::span<const double> times, std::span<const int> events);

// Kaplan-Meier of the censoring distribution G: kaplan_meier with the
// indicator flipped to 1 - event.
StepSurvivalCurve censoring_km(std::span<const double> times, std::span<const int> events);

// Breslow baseline: Lambda0 jumps by d_j / sum_{l : t_l >= t_j} exp(f_l) at each
// distinct event time t_j (common denominator for tied events).
StepSurvivalCurve breslow(std::span<const double> times, std::span<const int> events,
                          std::span<const double> log_hazards);

}  // namespace coxmix
