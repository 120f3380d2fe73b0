#include <doctest.h>

#include <cmath>
#include <random>

#include "coxmix/error.hpp"
#include "coxmix/spline.hpp"
#include "oracles.hpp"

using namespace coxmix;

namespace {

SplineSurvivalCurve exp_fixture(double step = 0.5, double end = 5.0) {
    std::vector<double> t;
    std::vector<double> s;
    for (double u = 0.0; u <= end + 1e-12; u += step) {
        t.push_back(u);
        s.push_back(std::exp(-u));
    }
    return fit_spline(StepSurvivalCurve::from_survival(t, s));
}

// A single cubic piece that rises above 1 and has positive slope near 0.
SplineSurvivalCurve wiggly() {
    SplineSurvivalCurve::Coefficients c;
    c.knots = {0.0, 1.0};
    c.a = {1.0, 0.5};
    c.b = {1.0};
    c.c = {0.0};
    c.d = {-1.5};
    return SplineSurvivalCurve(c);
}

}  // namespace

TEST_SUITE("spline") {

TEST_CASE("exp(-t) fixture: values and derivative") {
    const auto s = exp_fixture();
    for (double m = 0.25; m < 5.0; m += 0.5) CHECK(std::abs(s(m) - std::exp(-m)) < 1e-3);
    CHECK(std::abs(spline_eval(s, 2.25) - std::exp(-2.25)) < 1e-3);
    CHECK(std::abs(spline_derivative(s, 1.0) + std::exp(-1.0)) < 1e-2);
    CHECK(spline_eval(s, 0.0) == 1.0);
    CHECK_FALSE(s.is_fallback());
}

TEST_CASE("interpolation reproduces every knot") {
    std::mt19937_64 rng(21);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = oracle::continuous_instance(60, 1, rng);
        const auto km = kaplan_meier(inst.times, inst.events);
        const auto s = fit_spline(km);
        for (double k : km.knots()) {
            const double v = km(k);
            if (v < kSurvivalFloor) continue;
            CHECK(std::abs(s.raw_eval(k) - v) < 1e-8);
        }
    }
}

TEST_CASE("single-knot curves give a flagged fallback") {
    const auto one = fit_spline(StepSurvivalCurve::from_survival({2.0}, {0.5}));
    CHECK(one.is_fallback());
    CHECK(one(0.0) == 1.0);
    CHECK(one(2.0) == doctest::Approx(0.5));
    CHECK(one(4.0) == doctest::Approx(0.25));
    const auto none = fit_spline(StepSurvivalCurve{});
    CHECK(none.is_fallback());
    CHECK(none(3.0) == 1.0);
}

TEST_CASE("clamps: values to [eps, 1], slopes to at most -eps") {
    const auto w = wiggly();
    CHECK(w.raw_eval(0.5) > 1.0);
    CHECK(w(0.5) == 1.0);
    CHECK(w.raw_derivative(0.25) > 0.0);
    CHECK(w.derivative(0.25) == -kDensityFloor);
    CHECK(density_given_cluster(w, 0.0, 0.25) == kDensityFloor);
    for (double t = 0.0; t <= 3.0; t += 0.01) {
        CHECK(w(t) >= kSurvivalFloor);
        CHECK(w(t) <= 1.0);
        CHECK(w.derivative(t) <= -kDensityFloor);
    }
}

TEST_CASE("derivative matches central differences away from clamps") {
    const auto s = exp_fixture(0.37, 4.0);
    const double h = 1e-6;
    for (double t = 0.1; t < 3.9; t += 0.13) {
        const double fd = (s.raw_eval(t + h) - s.raw_eval(t - h)) / (2 * h);
        CHECK(std::abs(s.derivative(t) - fd) <= 1e-4 * std::abs(fd));
    }
}

TEST_CASE("constant-hazard tail past the last knot") {
    const auto s = exp_fixture();
    const auto& c = s.coefficients();
    const std::size_t n = c.knots.size();
    const double h_tail =
        std::log(c.a[n - 2] / c.a[n - 1]) / (c.knots[n - 1] - c.knots[n - 2]);
    CHECK(s.tail_hazard() == doctest::Approx(h_tail));
    for (double t : {5.0, 5.5, 7.0, 20.0}) {
        CHECK(s(t) == doctest::Approx(std::max(kSurvivalFloor, c.a[n - 1] * std::exp(-h_tail * (t - 5.0)))));
    }
    CHECK(s.derivative(6.0) == doctest::Approx(-h_tail * s(6.0)));
}

TEST_CASE("density_given_cluster closed forms on exp(-t)") {
    const auto s = exp_fixture(0.25, 6.0);
    for (double t = 0.5; t <= 4.0; t += 0.5) {
        CHECK(density_given_cluster(s, 0.0, t) == doctest::Approx(std::exp(-t)).epsilon(1e-2));
        CHECK(density_given_cluster(s, std::log(2.0), t) ==
              doctest::Approx(2.0 * std::exp(-2.0 * t)).epsilon(2e-2));
        CHECK(log_density_given_cluster(s, 0.3, t) ==
              doctest::Approx(std::log(density_given_cluster(s, 0.3, t))));
        CHECK(log_survival_given_cluster(s, 0.3, t) ==
              doctest::Approx(std::exp(0.3) * std::log(s(t))));
    }
}

TEST_CASE("density integrates to the survival mass lost") {
    const auto s = exp_fixture(0.25, 4.0);
    for (double f : {-0.5, 0.0, 0.7}) {
        const double end = 4.0;
        const int steps = 4000;
        double area = 0.0;
        for (int i = 0; i < steps; ++i) {
            const double a = end * i / steps;
            const double b = end * (i + 1) / steps;
            area += 0.5 * (b - a) * (density_given_cluster(s, f, a) + density_given_cluster(s, f, b));
        }
        const double mass = 1.0 - std::pow(s(end), std::exp(f));
        CHECK(std::abs(area - mass) < 2e-2);
    }
}

TEST_CASE("monotone after clamping on noisy Breslow curves") {
    std::mt19937_64 rng(22);
    for (int rep = 0; rep < 20; ++rep) {
        const auto inst = oracle::continuous_instance(400, 1, rng);
        std::vector<double> f(inst.times.size());
        for (std::size_t i = 0; i < f.size(); ++i) f[i] = 0.5 * inst.x(static_cast<Eigen::Index>(i), 0);
        const auto s = fit_spline(breslow(inst.times, inst.events, f));
        double prev = 1.0;
        for (double t = 0.0; t <= 6.0; t += 0.005) {
            const double v = s(t);
            CHECK(v <= prev + 1e-6);
            prev = std::min(prev, v);
        }
    }
}

TEST_CASE("knot thinning keeps the ends and caps the count") {
    std::vector<double> t;
    std::vector<double> v;
    for (int i = 1; i <= 500; ++i) {
        t.push_back(0.01 * i);
        v.push_back(std::exp(-0.01 * i));
    }
    const auto s = fit_spline(StepSurvivalCurve::from_survival(t, v), 100);
    const auto& k = s.knots();
    CHECK(k.front() == 0.0);  // anchor
    CHECK(k[1] == t.front());
    CHECK(k.back() == t.back());
    CHECK(k.size() == 101);
    CHECK(std::abs(s(2.345) - std::exp(-2.345)) < 1e-4);
    CHECK_THROWS_AS((void)fit_spline(StepSurvivalCurve::from_survival(t, v), 1), Error);
}

}  // TEST_SUITE
