// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero if
// any criterion fails. Criterion 10 needs COXMIX_FLCHAIN_CSV and is otherwise
// reported as skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "coxmix/cox_objective.hpp"
#include "coxmix/dataset.hpp"
#include "coxmix/dcm_model.hpp"
#include "coxmix/log.hpp"
#include "coxmix/metrics.hpp"
#include "coxmix/neural.hpp"
#include "coxmix/spline.hpp"
#include "coxmix/survival_estimators.hpp"
#include "coxmix/synth.hpp"
#include "harness/harness.hpp"
#include "oracles.hpp"

using namespace coxmix;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 10.0;
constexpr double kEstimatorTol = 1e-12;
constexpr double kEstimatorSeconds = 5.0;
constexpr double kBetaTol = 0.1;
constexpr double kCollapseCtdTol = 0.005;
constexpr double kCollapseSeconds = 120.0;
constexpr double kNonPhMargin = 0.02;
constexpr double kNonPhSeconds = 600.0;
constexpr double kRecoveryAccuracy = 0.8;
constexpr double kMetricCollapseTol = 1e-12;
constexpr double kEceBound = 0.02;
constexpr double kMcSes = 3.0;
constexpr double kFlchainCtdLow = 0.77;
constexpr double kFlchainCtdHigh = 0.81;
constexpr double kFlchainEce = 0.03;

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
    bool skipped = false;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, j);
    return v;
}

Eigen::MatrixXd random_gamma(Eigen::Index n, Eigen::Index k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Eigen::MatrixXd g(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) g(i, j) = u(rng);
        g.row(i) /= g.row(i).sum();
    }
    return g;
}

Outcome gradient_exactness() {
    const auto start = Clock::now();
    double worst = 0.0;
    std::mt19937_64 rng(1001);
    const std::vector<std::vector<int>> shapes = {{3}, {3, 5}, {3, 4, 4}};
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 8 + static_cast<std::size_t>(rep % 13);
        const int k = 1 + rep % 3;
        const auto& dims = shapes[static_cast<std::size_t>(rep / 3 % 3)];
        const auto inst = oracle::continuous_instance(n, 3, rng);
        auto params = init_params(dims, k, 2000 + static_cast<std::uint64_t>(rep));
        // Nonzero biases keep every ReLU off its kink; with zero biases a row
        // whose first layer is all inactive feeds exactly 0 to the next one.
        std::uniform_real_distribution<double> ub(-0.5, 0.5);
        for (auto& layer : params.encoder.layers)
            for (auto& b : layer.bias) b = ub(rng);
        for (auto& b : params.heads.f.bias) b = ub(rng);
        for (auto& b : params.heads.g.bias) b = ub(rng);
        const auto gamma = random_gamma(static_cast<Eigen::Index>(n), k, rng);
        std::vector<int> zeta(n);
        for (std::size_t i = 0; i < n; ++i) zeta[i] = static_cast<int>(i % static_cast<std::size_t>(k));

        auto loss = [&] {
            const auto out = heads_forward(params.heads, forward(params.encoder, inst.x));
            return q_hat(inst.times, inst.events, gamma, zeta, out.log_hazards, out.gating_logits).loss;
        };
        ForwardCache cache;
        const auto out = heads_forward(params.heads, forward(params.encoder, inst.x, &cache));
        const auto q = q_hat(inst.times, inst.events, gamma, zeta, out.log_hazards, out.gating_logits);
        const auto grads = backward(params, cache, q.d_log_hazards, q.d_gating_logits);
        auto views = params.tensors();
        const auto g = grads.tensors();
        for (std::size_t ti = 0; ti < views.size(); ++ti) {
            for (std::size_t j = 0; j < views[ti].size(); ++j) {
                const double fd = oracle::central_difference(loss, views[ti][j], 1e-6);
                worst = std::max(worst, std::abs(g[ti][j] - fd) / std::max(std::abs(fd), 1e-3));
            }
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    return {worst < kGradRelTol && secs < kGradSeconds,
            fmt::format("max relative error {:.2e} (< {:.0e}), {:.2f} s (< {} s)", worst, kGradRelTol,
                        secs, kGradSeconds)};
}

Outcome estimator_oracles() {
    const auto start = Clock::now();
    double worst = 0.0;
    std::mt19937_64 rng(1002);
    std::normal_distribution<double> nd(0.0, 0.7);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 5 + static_cast<std::size_t>(rep % 46);
        const auto inst = oracle::tied_instance(n, 1, rng);
        std::vector<double> f(n);
        for (auto& v : f) v = nd(rng);
        const auto km = kaplan_meier(inst.times, inst.events);
        const auto br = breslow(inst.times, inst.events, f);
        std::vector<double> probes = inst.times;
        for (double t : inst.times) probes.push_back(t + 0.5);
        probes.push_back(0.0);
        for (double t : probes) {
            worst = std::max(worst, std::abs(km(t) - oracle::km_survival(inst.times, inst.events, t)));
            worst = std::max(worst, std::abs(br.cumulative_hazard(t) -
                                             oracle::breslow_cumhaz(inst.times, inst.events, f, t)));
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    return {worst <= kEstimatorTol && secs < kEstimatorSeconds,
            fmt::format("max abs difference {:.2e} (<= {:.0e}), {:.2f} s (< {} s)", worst,
                        kEstimatorTol, secs, kEstimatorSeconds)};
}

Outcome collapse_equivalence() {
    const auto start = Clock::now();
    const auto synth = synth_preset("ph", 2000, 0.0, 3001);
    const auto cohort = synthesize(synth);
    const auto res = standardize(cohort.dataset);
    DcmConfig cfg;
    cfg.clusters = 1;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 100;
    cfg.patience = 10;
    cfg.seed = 3002;
    const auto model = fit(res.dataset, cfg);

    const auto& beta = synth.clusters[0].beta;
    double worst_beta = 0.0;
    std::string coefs;
    for (int j = 0; j < 3; ++j) {
        const double raw = model.params.heads.f.weight(0, j) / res.stats.scale[static_cast<std::size_t>(j)];
        worst_beta = std::max(worst_beta, std::abs(raw - beta[static_cast<std::size_t>(j)]));
        coefs += fmt::format("{}{:.3f}", j ? ", " : "", raw);
    }

    // Reference: Newton-Raphson Cox fit with a Breslow baseline.
    const auto x = res.dataset.feature_matrix();
    const auto times = res.dataset.times();
    const auto events = res.dataset.events();
    const Eigen::VectorXd b = oracle::cox_newton(x, times, events);
    const Eigen::VectorXd lp = x * b;
    const std::vector<double> f(lp.data(), lp.data() + lp.size());
    const auto base = breslow(times, events, f);
    const double q75[] = {0.75};
    const double horizon = event_quantiles(times, events, q75)[0];
    std::vector<double> ref(times.size());
    for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = std::exp(-base.cumulative_hazard(horizon) * std::exp(f[i]));
    const auto dcm = column(model.predict_survival(x, std::vector<double>{horizon}), 0);
    const auto g = censoring_km(times, events);
    const double c_dcm = concordance_td(dcm, times, events, g, horizon);
    const double c_ref = concordance_td(ref, times, events, g, horizon);
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool pass = worst_beta <= kBetaTol && std::abs(c_dcm - c_ref) <= kCollapseCtdTol &&
                      secs < kCollapseSeconds;
    return {pass, fmt::format("beta ({}) max error {:.3f} (<= {}); C-td {:.4f} vs reference {:.4f} "
                              "(|diff| <= {}); {:.1f} s (< {} s)",
                              coefs, worst_beta, kBetaTol, c_dcm, c_ref, kCollapseCtdTol, secs,
                              kCollapseSeconds)};
}

struct HeldOutScores {
    double ctd = 0.0;
    double ece = 0.0;
};

// Trains on a cohort and scores at the 75th event quantile of an independent
// test cohort drawn with the same generator.
HeldOutScores crossing_run(int clusters, std::uint64_t seed) {
    const auto train = synthesize(synth_preset("crossing", 4000, 0.3, seed));
    const auto test = synthesize(synth_preset("crossing", 4000, 0.3, seed + 1000));
    const auto res = standardize(train.dataset);
    const auto test_ds = apply_standardization(test.dataset, res.stats);
    DcmConfig cfg;
    cfg.clusters = clusters;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 100;
    cfg.patience = 5;
    cfg.seed = seed + 7;
    const auto model = fit(res.dataset, cfg);
    const auto times = test_ds.times();
    const auto events = test_ds.events();
    const double q75[] = {0.75};
    const double horizon = event_quantiles(times, events, q75)[0];
    const auto s = column(model.predict_survival(test_ds.feature_matrix(), std::vector<double>{horizon}), 0);
    const auto g = censoring_km(times, events);
    return {concordance_td(s, times, events, g, horizon), ece(s, times, events, horizon)};
}

Outcome non_ph_advantage() {
    const auto start = Clock::now();
    std::vector<double> c1, c2, e1, e2;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto one = crossing_run(1, 4000 + seed);
        const auto two = crossing_run(2, 4000 + seed);
        c1.push_back(one.ctd);
        e1.push_back(one.ece);
        c2.push_back(two.ctd);
        e2.push_back(two.ece);
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const double mc1 = median(c1), mc2 = median(c2), me1 = median(e1), me2 = median(e2);
    const bool pass = mc2 >= mc1 + kNonPhMargin && me2 <= me1 && secs < kNonPhSeconds;
    return {pass, fmt::format("median C-td@q75 K=2 {:.4f} vs K=1 {:.4f} (margin {:+.4f}, need >= {}); "
                              "median ECE K=2 {:.4f} vs K=1 {:.4f}; {:.0f} s (< {} s)",
                              mc2, mc1, mc2 - mc1, kNonPhMargin, me2, me1, secs, kNonPhSeconds)};
}

double best_permutation_accuracy(const std::vector<int>& truth, const std::vector<int>& guess) {
    std::size_t same = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) same += truth[i] == guess[i] ? 1 : 0;
    const double a = static_cast<double>(same) / static_cast<double>(truth.size());
    return std::max(a, 1.0 - a);
}

Outcome cluster_recovery() {
    std::vector<double> acc;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto cohort = synthesize(synth_preset("separated", 4000, 0.0, 5000 + seed));
        const auto ds = standardize(cohort.dataset).dataset;
        DcmConfig cfg;
        cfg.clusters = 2;
        cfg.learning_rate = 0.01;
        cfg.max_epochs = 200;
        cfg.patience = 10;
        cfg.seed = 5100 + seed;
        const auto model = fit(ds, cfg);
        const auto gamma = e_step(model, make_batch(ds));
        std::vector<int> guess(ds.size());
        for (std::size_t i = 0; i < guess.size(); ++i) {
            Eigen::Index arg = 0;
            gamma.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
            guess[i] = static_cast<int>(arg);
        }
        acc.push_back(best_permutation_accuracy(cohort.latent, guess));
    }
    std::string all;
    for (double a : acc) all += fmt::format("{}{:.3f}", all.empty() ? "" : " ", a);
    const double m = median(acc);
    return {m >= kRecoveryAccuracy,
            fmt::format("median accuracy {:.3f} (>= {}); per seed {}", m, kRecoveryAccuracy, all)};
}

Outcome metric_collapse() {
    double worst = 0.0;
    for (const char* preset : {"ph", "crossing"}) {
        const auto synth = synth_preset(preset, 500, 0.0, 6001);
        const auto cohort = synthesize(synth);
        const auto times = cohort.dataset.times();
        const auto events = cohort.dataset.events();
        const auto g = censoring_km(times, events);
        const double probs[] = {0.25, 0.5, 0.75};
        for (double h : event_quantiles(times, events, probs)) {
            std::vector<double> s(times.size());
            for (std::size_t i = 0; i < s.size(); ++i) s[i] = true_survival(synth, cohort.dataset[i].features, h);
            const double naive = oracle::concordance(s, times, events, h, [](std::size_t) { return 1.0; });
            worst = std::max(worst, std::abs(concordance_td(s, times, events, g, h) - naive));
            worst = std::max(worst, std::abs(brier_ipcw(s, times, events, g, h) - oracle::mse(s, times, h)));
            worst = std::max(worst, std::abs(auc_ipcw(s, times, events, g, h) -
                                             oracle::mann_whitney_auc(s, times, events, h)));
        }
    }
    return {worst <= kMetricCollapseTol,
            fmt::format("max |IPCW - unweighted| {:.2e} over C-td, Brier, AUC (<= {:.0e})", worst,
                        kMetricCollapseTol)};
}

Outcome calibration_oracle() {
    // One pre-declared fixture.
    const auto synth = synth_preset("crossing", 5000, 0.3, 0);
    const auto cohort = synthesize(synth);
    const auto times = cohort.dataset.times();
    const auto events = cohort.dataset.events();
    const double probs[] = {0.25, 0.5, 0.75};
    bool pass = true;
    std::string detail;
    for (double h : event_quantiles(times, events, probs)) {
        std::vector<double> s(times.size());
        std::vector<double> sq(times.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i] = true_survival(synth, cohort.dataset[i].features, h);
            sq[i] = s[i] * s[i];
        }
        const double e = ece(s, times, events, h);
        const double e2 = ece(sq, times, events, h);
        pass = pass && e < kEceBound && e2 > e;
        detail += fmt::format("{}t={:.3f}: ECE {:.4f}, squared {:.4f}", detail.empty() ? "" : "; ", h, e, e2);
    }
    return {pass, detail + fmt::format(" (ECE < {}, squared strictly larger)", kEceBound)};
}

Outcome mc_unbiasedness() {
    std::mt19937_64 rng(8001);
    const std::size_t n = 12;
    const auto inst = oracle::continuous_instance(n, 1, rng);
    std::vector<double> grid;
    std::vector<double> s1, s3;
    for (double u = 0.0; u <= 8.0; u += 0.25) {
        grid.push_back(u);
        s1.push_back(std::exp(-u));
        s3.push_back(std::exp(-3.0 * u));
    }
    const SplineSurvivalCurve base[] = {fit_spline(StepSurvivalCurve::from_survival(grid, s1)),
                                        fit_spline(StepSurvivalCurve::from_survival(grid, s3))};
    std::normal_distribution<double> nd(0.0, 0.5);
    std::vector<double> f(2 * n);
    for (auto& v : f) v = nd(rng);
    const auto gamma = random_gamma(static_cast<Eigen::Index>(n), 2, rng);

    auto ell = [&](std::size_t i, int k) {
        const double fk = f[2 * i + static_cast<std::size_t>(k)];
        const auto& s = base[k];
        const double t = inst.times[i];
        const double log_s = std::exp(fk) * std::log(s(t));
        if (inst.events[i] == 0) return log_s;
        return std::log(std::exp(fk) * std::pow(s(t), std::exp(fk) - 1.0) * -s.derivative(t));
    };
    double soft = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 2; ++k) soft += gamma(static_cast<Eigen::Index>(i), k) * ell(i, k);

    std::mt19937_64 sampler(8002);
    const int draws = 10000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int d = 0; d < draws; ++d) {
        const auto zeta = sample_assignments(gamma, sampler);
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) v += ell(i, zeta[i]);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sum_sq - draws * mean * mean) / (draws - 1) / draws);
    const double z = std::abs(mean - soft) / se;
    return {z <= kMcSes, fmt::format("MC mean {:.5f}, exact {:.5f}, {:.2f} SE (<= {})", mean, soft, z, kMcSes)};
}

// 5-epoch moving average of the held-out loss must never rise, and the last
// epoch must end below the first.
Outcome training_dynamics() {
    bool pass = true;
    std::string detail;
    const struct {
        const char* preset;
        int clusters;
        std::vector<int> hidden;
        std::uint64_t seed;
    } runs[] = {{"crossing", 2, {}, 9001}, {"separated", 2, {16}, 9002}};
    for (const auto& r : runs) {
        const auto cohort = synthesize(synth_preset(r.preset, 3000, 0.3, r.seed));
        const auto ds = standardize(cohort.dataset).dataset;
        DcmConfig cfg;
        cfg.clusters = r.clusters;
        cfg.hidden_layers = r.hidden;
        cfg.learning_rate = 1e-3;
        cfg.batch_size = 128;
        cfg.max_epochs = 40;
        cfg.patience = 0;
        cfg.seed = r.seed + 1;
        const auto model = fit(ds, cfg);
        std::vector<double> q;
        for (const auto& e : model.training_log) q.push_back(e.validation_loss);
        std::vector<double> avg;
        for (std::size_t i = 4; i < q.size(); ++i) avg.push_back((q[i - 4] + q[i - 3] + q[i - 2] + q[i - 1] + q[i]) / 5.0);
        std::size_t rises = 0;
        double worst_rise = 0.0;
        for (std::size_t i = 1; i < avg.size(); ++i) {
            if (avg[i] > avg[i - 1]) {
                ++rises;
                worst_rise = std::max(worst_rise, avg[i] - avg[i - 1]);
            }
        }
        const bool ok = rises == 0 && q.back() < q.front();
        pass = pass && ok;
        detail += fmt::format("{}{} K={}: Q {:.4f} -> {:.4f}, {} rises in the moving average (largest {:.2e})",
                              detail.empty() ? "" : "; ", r.preset, r.clusters, q.front(), q.back(), rises,
                              worst_rise);
    }
    return {pass, detail};
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(oracle::read_file(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

Outcome flchain_band() {
    const char* path = std::getenv("COXMIX_FLCHAIN_CSV");
    if (!path || !*path) {
        return {true, "skipped: set COXMIX_FLCHAIN_CSV to a preprocessed FLCHAIN export", true};
    }
    oracle::TempDir dir;
    const int rc = cli::run({"coxmix", "--quiet", "cv", "--data", path, "--folds", "5", "--grid",
                             "--horizons", "q75", "--bootstrap", "100", "--seed", "0", "--out",
                             (dir / "cv").string()});
    if (rc != 0) return {false, fmt::format("cv exited with {}", rc)};
    double ctd = std::nan("");
    double e = std::nan("");
    for (const auto& row : read_csv(dir / "cv" / "report.csv")) {
        if (row.size() < 4 || row[2] != kPopulationGroup) continue;
        if (row[0] == "ctd") ctd = std::stod(row[3]);
        if (row[0] == "ece") e = std::stod(row[3]);
    }
    const bool pass = ctd >= kFlchainCtdLow && ctd <= kFlchainCtdHigh && e <= kFlchainEce;
    return {pass, fmt::format("C-td@q75 {:.4f} (in [{}, {}]), ECE {:.4f} (<= {})", ctd, kFlchainCtdLow,
                              kFlchainCtdHigh, e, kFlchainEce)};
}

Outcome cv_determinism() {
    oracle::TempDir dir;
    const auto data = (dir / "synth").string();
    if (cli::run({"coxmix", "--quiet", "synth", "--preset", "crossing", "--n", "800", "--censoring", "0.3",
                  "--group-feature", "2", "--seed", "11", "--out", data}) != 0) {
        return {false, "synth failed"};
    }
    for (const char* out : {"a", "b"}) {
        const int rc = cli::run({"coxmix", "--quiet", "cv", "--data", data + "/cohort.csv", "--group-col", "group",
                                 "--folds", "5", "--k", "2", "--hidden", "16", "--epochs", "10",
                                 "--bootstrap", "50", "--seed", "12", "--out", (dir / out).string()});
        if (rc != 0) return {false, fmt::format("cv exited with {}", rc)};
    }
    std::string detail;
    bool pass = true;
    for (const char* file : {"report.csv", "report.json", "calibration_bins.csv", "folds.csv"}) {
        const bool same = oracle::read_file(dir / "a" / file) == oracle::read_file(dir / "b" / file);
        pass = pass && same;
        detail += fmt::format("{}{} {}", detail.empty() ? "" : ", ", file, same ? "identical" : "DIFFERS");
    }
    return {pass, detail};
}

}  // namespace

int main() {
    log::set_level(log::Level::error);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 gradient exactness", gradient_exactness},
        {"2 estimator oracles", estimator_oracles},
        {"3 K=1 collapse to linear Cox", collapse_equivalence},
        {"4 non-PH advantage", non_ph_advantage},
        {"5 cluster recovery", cluster_recovery},
        {"6 metric collapse without censoring", metric_collapse},
        {"7 calibration oracle", calibration_oracle},
        {"8 Monte Carlo unbiasedness", mc_unbiasedness},
        {"9 held-out loss trajectory", training_dynamics},
        {"10 FLCHAIN band", flchain_band},
        {"11 cv determinism", cv_determinism},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& ex) {
            o = {false, fmt::format("threw: {}", ex.what())};
        }
        const char* tag = o.skipped ? "SKIP" : o.pass ? "PASS" : "FAIL";
        if (!o.pass) ++failures;
        std::cout << fmt::format("{} {}: {}", tag, name, o.detail) << std::endl;
    }
    std::cout << fmt::format("{} of {} criteria failed", failures, criteria.size()) << std::endl;
    return failures == 0 ? 0 : 1;
}
