#pragma once

#include <vector>

#include "coxmix/survival_estimators.hpp"

namespace coxmix {

inline constexpr double kSurvivalFloor = 1e-10;  // lower clamp on interpolated survival
inline constexpr double kDensityFloor = 1e-10;   // lower clamp on implied event density

// Piecewise-cubic survival curve S~(t) interpolating a step curve at its knots.
//
// On [knots[i], knots[i+1]] the value is a[i] + b[i] u + c[i] u^2 + d[i] u^3 with
// u = t - knots[i]. Past the last knot the curve continues with a constant
// hazard `tail_hazard`. Inside a piece the value is the running minimum of the
// cubic since the piece's left knot, held between the two knot values, so eval
// is non-increasing and still passes through every knot. Values are clamped to
// [kSurvivalFloor, 1]. derivative is the cubic's own slope capped at
// -kDensityFloor, so it only hits the floor where the cubic rises.
class SplineSurvivalCurve {
public:
    struct Coefficients {
        std::vector<double> knots;
        std::vector<double> a, b, c, d;  // d.size() == knots.size() - 1 (a has one per knot)
        double tail_hazard = 0.0;
        bool fallback = false;
    };

    SplineSurvivalCurve();
    explicit SplineSurvivalCurve(Coefficients coefficients);

    double operator()(double t) const { return eval(t); }
    double eval(double t) const;
    double derivative(double t) const;

    // Unclamped polynomial value (diagnostics and tests).
    double raw_eval(double t) const;
    double raw_derivative(double t) const;

    const Coefficients& coefficients() const noexcept { return coef_; }
    const std::vector<double>& knots() const noexcept { return coef_.knots; }
    double first_knot() const { return coef_.knots.front(); }
    double last_knot() const { return coef_.knots.back(); }
    double tail_hazard() const noexcept { return coef_.tail_hazard; }
    // True when the source step curve had fewer than two knots.
    bool is_fallback() const noexcept { return coef_.fallback; }

private:
    std::size_t interval(double t) const;
    double tail_value(double t) const;
    double banded(double t) const;

    Coefficients coef_;
};

inline constexpr int kDefaultMaxKnots = 100;

// Not-a-knot cubic interpolant through the step curve's (knot, S(knot)) pairs.
// A point (0, 1) is prepended when the first knot is positive. Curves with more
// than `max_knots` knots are thinned to `max_knots` evenly spaced ranks, keeping
// the first and last. Step curves with fewer than two knots give a flagged
// constant-hazard fallback.
SplineSurvivalCurve fit_spline(const StepSurvivalCurve& curve, int max_knots = kDefaultMaxKnots);

inline double spline_eval(const SplineSurvivalCurve& s, double t) { return s.eval(t); }
inline double spline_derivative(const SplineSurvivalCurve& s, double t) {
    return s.derivative(t);
}

// Event density under the Cox model with baseline S~ and log hazard ratio f:
//   p(t) = -exp(f) * S~(t)^(exp(f) - 1) * dS~/dt,   floored at kDensityFloor.
double density_given_cluster(const SplineSurvivalCurve& s, double log_hazard, double t);

// log of density_given_cluster, computed without leaving log space.
double log_density_given_cluster(const SplineSurvivalCurve& s, double log_hazard, double t);

// log S~(t)^exp(f) = exp(f) log S~(t).
double log_survival_given_cluster(const SplineSurvivalCurve& s, double log_hazard, double t);

}  // namespace coxmix
