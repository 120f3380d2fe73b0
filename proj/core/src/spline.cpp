#include "coxmix/spline.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "coxmix/error.hpp"

namespace coxmix {

namespace {

// Second derivatives at the knots of the not-a-knot interpolant.
Eigen::VectorXd not_a_knot_moments(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    if (n < 3) return m;  // straight line

    std::vector<double> h(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) h[i] = x[i + 1] - x[i];

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 1; i + 1 < n; ++i) {
        const auto iu = static_cast<std::size_t>(i);
        a(i, i - 1) = h[iu - 1];
        a(i, i) = 2.0 * (h[iu - 1] + h[iu]);
        a(i, i + 1) = h[iu];
        rhs(i) = 6.0 * ((y[iu + 1] - y[iu]) / h[iu] - (y[iu] - y[iu - 1]) / h[iu - 1]);
    }
    if (n == 3) {
        // Single parabola: constant second derivative.
        a(0, 0) = 1.0;
        a(0, 1) = -1.0;
        a(2, 1) = 1.0;
        a(2, 2) = -1.0;
    } else {
        // Third derivative continuous across the second and second-to-last knots.
        a(0, 0) = h[1];
        a(0, 1) = -(h[0] + h[1]);
        a(0, 2) = h[0];
        const auto k = static_cast<std::size_t>(n - 1);
        a(n - 1, n - 3) = h[k - 1];
        a(n - 1, n - 2) = -(h[k - 2] + h[k - 1]);
        a(n - 1, n - 1) = h[k - 2];
    }
    return a.partialPivLu().solve(rhs);
}

double clamp_survival(double s) { return std::clamp(s, kSurvivalFloor, 1.0); }

}  // namespace

SplineSurvivalCurve::SplineSurvivalCurve() {
    coef_.knots = {0.0};
    coef_.a = {1.0};
    coef_.fallback = true;
}

SplineSurvivalCurve::SplineSurvivalCurve(Coefficients coefficients) : coef_(std::move(coefficients)) {
    const std::size_t n = coef_.knots.size();
    if (n == 0 || coef_.a.size() != n || coef_.b.size() + 1 != n || coef_.c.size() + 1 != n ||
        coef_.d.size() + 1 != n) {
        throw DataError("spline coefficient arrays have inconsistent sizes");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(coef_.knots[i] > coef_.knots[i - 1])) {
            throw DataError("spline knots must be strictly increasing");
        }
    }
    if (!(coef_.tail_hazard >= 0.0) || !std::isfinite(coef_.tail_hazard)) {
        throw DataError("spline tail hazard must be finite and non-negative");
    }
}

std::size_t SplineSurvivalCurve::interval(double t) const {
    const auto& k = coef_.knots;
    auto it = std::upper_bound(k.begin(), k.end(), t);
    return static_cast<std::size_t>(it - k.begin()) - 1;
}

double SplineSurvivalCurve::tail_value(double t) const {
    const double s_last = clamp_survival(coef_.a.back());
    return s_last * std::exp(-coef_.tail_hazard * (t - last_knot()));
}

double SplineSurvivalCurve::raw_eval(double t) const {
    if (t < first_knot()) return 1.0;
    if (t >= last_knot()) return tail_value(t);
    const std::size_t i = interval(t);
    const double u = t - coef_.knots[i];
    return coef_.a[i] + u * (coef_.b[i] + u * (coef_.c[i] + u * coef_.d[i]));
}

double SplineSurvivalCurve::raw_derivative(double t) const {
    if (t < first_knot()) return 0.0;
    if (t >= last_knot()) return -coef_.tail_hazard * tail_value(t);
    const std::size_t i = interval(t);
    const double u = t - coef_.knots[i];
    return coef_.b[i] + u * (2.0 * coef_.c[i] + 3.0 * u * coef_.d[i]);
}

double SplineSurvivalCurve::banded(double t) const {
    if (t < first_knot() || t >= last_knot()) return raw_eval(t);
    const std::size_t i = interval(t);
    const double u = t - coef_.knots[i];
    const double b = coef_.b[i];
    const double c = coef_.c[i];
    const double d = coef_.d[i];
    auto cubic = [&](double v) { return coef_.a[i] + v * (b + v * (c + v * d)); };
    // Lowest point of the piece on [knot_i, t]: an endpoint or a stationary point.
    double low = std::min(coef_.a[i], cubic(u));
    auto consider = [&](double r) {
        if (r > 0.0 && r < u) low = std::min(low, cubic(r));
    };
    if (d != 0.0) {
        const double disc = 4.0 * c * c - 12.0 * d * b;
        if (disc >= 0.0) {
            const double root = std::sqrt(disc);
            consider((-2.0 * c + root) / (6.0 * d));
            consider((-2.0 * c - root) / (6.0 * d));
        }
    } else if (c != 0.0) {
        consider(-b / (2.0 * c));
    }
    const double lo = std::min(coef_.a[i], coef_.a[i + 1]);
    const double hi = std::max(coef_.a[i], coef_.a[i + 1]);
    return std::clamp(low, lo, hi);
}

double SplineSurvivalCurve::eval(double t) const { return clamp_survival(banded(t)); }

double SplineSurvivalCurve::derivative(double t) const {
    return std::min(raw_derivative(t), -kDensityFloor);
}

SplineSurvivalCurve fit_spline(const StepSurvivalCurve& curve, int max_knots) {
    if (max_knots < 2) throw DataError("fit_spline: max_knots must be at least 2");

    SplineSurvivalCurve::Coefficients coef;
    if (curve.size() < 2) {
        coef.knots = {0.0};
        coef.a = {1.0};
        coef.fallback = true;
        if (curve.size() == 1) {
            const double t1 = curve.knots().front();
            const double s1 = clamp_survival(curve.eval(t1));
            if (t1 > 0.0) {
                coef.tail_hazard = -std::log(s1) / t1;
            } else {
                coef.a = {s1};
            }
        }
        return SplineSurvivalCurve(std::move(coef));
    }

    const auto& all_knots = curve.knots();
    const auto values = curve.survival_values();
    std::vector<std::size_t> picks;
    const std::size_t m = all_knots.size();
    const auto cap = static_cast<std::size_t>(max_knots);
    if (m > cap) {
        picks.reserve(cap);
        for (std::size_t i = 0; i < cap; ++i) {
            const double pos = static_cast<double>(i) * static_cast<double>(m - 1) /
                               static_cast<double>(cap - 1);
            picks.push_back(static_cast<std::size_t>(std::llround(pos)));
        }
        picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
    } else {
        picks.resize(m);
        for (std::size_t i = 0; i < m; ++i) picks[i] = i;
    }

    std::vector<double> x;
    std::vector<double> y;
    x.reserve(picks.size() + 1);
    y.reserve(picks.size() + 1);
    if (all_knots[picks.front()] > 0.0) {
        x.push_back(0.0);
        y.push_back(1.0);
    }
    for (std::size_t p : picks) {
        x.push_back(all_knots[p]);
        y.push_back(values[p]);
    }

    const auto moments = not_a_knot_moments(x, y);
    const std::size_t n = x.size();
    coef.knots = x;
    coef.a = y;
    coef.b.resize(n - 1);
    coef.c.resize(n - 1);
    coef.d.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = x[i + 1] - x[i];
        const double mi = moments(static_cast<Eigen::Index>(i));
        const double mj = moments(static_cast<Eigen::Index>(i + 1));
        coef.b[i] = (y[i + 1] - y[i]) / h - h * (2.0 * mi + mj) / 6.0;
        coef.c[i] = mi / 2.0;
        coef.d[i] = (mj - mi) / (6.0 * h);
    }
    const double s_prev = clamp_survival(y[n - 2]);
    const double s_last = clamp_survival(y[n - 1]);
    coef.tail_hazard = std::max(0.0, (std::log(s_prev) - std::log(s_last)) / (x[n - 1] - x[n - 2]));
    return SplineSurvivalCurve(std::move(coef));
}

double log_survival_given_cluster(const SplineSurvivalCurve& s, double log_hazard, double t) {
    return std::exp(log_hazard) * std::log(s.eval(t));
}

double log_density_given_cluster(const SplineSurvivalCurve& s, double log_hazard, double t) {
    const double base = s.eval(t);
    const double slope = s.derivative(t);  // <= -kDensityFloor
    const double log_p = log_hazard + std::expm1(log_hazard) * std::log(base) + std::log(-slope);
    return std::max(log_p, std::log(kDensityFloor));
}

double density_given_cluster(const SplineSurvivalCurve& s, double log_hazard, double t) {
    return std::max(std::exp(log_density_given_cluster(s, log_hazard, t)), kDensityFloor);
}

}  // namespace coxmix
