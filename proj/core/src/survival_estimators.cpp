#include "coxmix/survival_estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "coxmix/error.hpp"

namespace coxmix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_inputs(std::span<const double> times, std::span<const int> events) {
    if (times.empty()) throw DataError("survival estimator called with no observations");
    if (times.size() != events.size()) throw DataError("times and events differ in length");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0) || !std::isfinite(times[i])) {
            throw DataError(fmt::format("invalid time {} at position {}", times[i], i));
        }
        if (events[i] != 0 && events[i] != 1) {
            throw DataError(fmt::format("event flag {} at position {} is not 0/1", events[i], i));
        }
    }
}

std::vector<std::size_t> ascending_order(std::span<const double> times) {
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
    return order;
}

// Product-limit over the rows flagged by `is_event(i)`; every row sharing a
// time with an event is in that time's risk set.
template <class IsEvent>
StepSurvivalCurve product_limit(std::span<const double> times, IsEvent is_event) {
    const auto order = ascending_order(times);
    const std::size_t n = times.size();
    std::vector<double> knots;
    std::vector<double> cumhaz;
    double lambda = 0.0;
    std::size_t at_risk = n;
    std::size_t p = 0;
    while (p < n) {
        const double t = times[order[p]];
        std::size_t q = p;
        std::size_t d = 0;
        while (q < n && times[order[q]] == t) {
            if (is_event(order[q])) ++d;
            ++q;
        }
        if (d > 0) {
            if (d == at_risk) {
                lambda = kInf;
            } else if (std::isfinite(lambda)) {
                lambda -= std::log1p(-static_cast<double>(d) / static_cast<double>(at_risk));
            }
            knots.push_back(t);
            cumhaz.push_back(lambda);
        }
        at_risk -= q - p;
        p = q;
    }
    return StepSurvivalCurve::from_cumulative_hazard(std::move(knots), std::move(cumhaz));
}

}  // namespace

StepSurvivalCurve StepSurvivalCurve::from_cumulative_hazard(std::vector<double> knots,
                                                            std::vector<double> cumulative_hazard) {
    if (knots.size() != cumulative_hazard.size()) {
        throw DataError("step curve knots and values differ in length");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
        if (i > 0 && !(knots[i] > knots[i - 1])) {
            throw DataError("step curve knots must be strictly increasing");
        }
        if (!(cumulative_hazard[i] >= 0.0) ||
            (i > 0 && cumulative_hazard[i] < cumulative_hazard[i - 1])) {
            throw DataError("step curve cumulative hazard must be non-negative and non-decreasing");
        }
    }
    StepSurvivalCurve c;
    c.knots_ = std::move(knots);
    c.cumhaz_ = std::move(cumulative_hazard);
    return c;
}

StepSurvivalCurve StepSurvivalCurve::from_survival(std::vector<double> knots,
                                                   std::vector<double> survival) {
    std::vector<double> cumhaz(survival.size());
    for (std::size_t i = 0; i < survival.size(); ++i) {
        if (!(survival[i] >= 0.0 && survival[i] <= 1.0)) {
            throw DataError("survival values must lie in [0, 1]");
        }
        cumhaz[i] = survival[i] > 0.0 ? -std::log(survival[i]) : kInf;
    }
    return from_cumulative_hazard(std::move(knots), std::move(cumhaz));
}

double StepSurvivalCurve::cumulative_hazard(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return 0.0;
    return cumhaz_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

double StepSurvivalCurve::eval(double t) const { return std::exp(-cumulative_hazard(t)); }

double StepSurvivalCurve::eval_left(double t) const {
    auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return 1.0;
    return std::exp(-cumhaz_[static_cast<std::size_t>(it - knots_.begin()) - 1]);
}

std::vector<double> StepSurvivalCurve::survival_values() const {
    std::vector<double> out(cumhaz_.size());
    std::transform(cumhaz_.begin(), cumhaz_.end(), out.begin(),
                   [](double h) { return std::exp(-h); });
    return out;
}

StepSurvivalCurve kaplan_meier(std::span<const double> times, std::span<const int> events) {
    check_inputs(times, events);
    return product_limit(times, [&](std::size_t i) { return events[i] == 1; });
}

StepSurvivalCurve censoring_km(std::span<const double> times, std::span<const int> events) {
    check_inputs(times, events);
    return product_limit(times, [&](std::size_t i) { return events[i] == 0; });
}

StepSurvivalCurve breslow(std::span<const double> times, std::span<const int> events,
                          std::span<const double> log_hazards) {
    check_inputs(times, events);
    if (log_hazards.size() != times.size()) {
        throw DataError("log hazards and times differ in length");
    }
    for (double f : log_hazards) {
        if (!std::isfinite(f)) throw DataError("breslow: non-finite log hazard");
    }
    const double shift = *std::max_element(log_hazards.begin(), log_hazards.end());
    const auto order = ascending_order(times);
    const std::size_t n = times.size();

    // suffix[p] = sum over order[p..n) of exp(f - shift)
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t p = n; p-- > 0;) {
        suffix[p] = suffix[p + 1] + std::exp(log_hazards[order[p]] - shift);
    }

    std::vector<double> knots;
    std::vector<double> cumhaz;
    double lambda = 0.0;
    std::size_t p = 0;
    while (p < n) {
        const double t = times[order[p]];
        std::size_t q = p;
        std::size_t d = 0;
        while (q < n && times[order[q]] == t) {
            d += static_cast<std::size_t>(events[order[q]]);
            ++q;
        }
        if (d > 0) {
            lambda += static_cast<double>(d) * std::exp(-shift) / suffix[p];
            knots.push_back(t);
            cumhaz.push_back(lambda);
        }
        p = q;
    }
    return StepSurvivalCurve::from_cumulative_hazard(std::move(knots), std::move(cumhaz));
}

}  // namespace coxmix
