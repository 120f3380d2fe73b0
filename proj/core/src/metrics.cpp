#include "coxmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "coxmix/error.hpp"
#include "coxmix/log.hpp"

namespace coxmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_lengths(std::span<const double> survival, std::span<const double> times,
                   std::span<const int> events) {
    if (survival.size() != times.size() || times.size() != events.size()) {
        throw MetricError("metric inputs differ in length");
    }
    if (times.empty()) throw MetricError("metric evaluated on an empty sample");
}

void warn_excluded(const char* metric, std::size_t excluded) {
    if (excluded > 0) {
        log::warn(fmt::format("{}: {} record(s) excluded for censoring weight G < {}", metric,
                              excluded, kMinCensoringWeight));
    }
}

// Fenwick tree of counts over prediction ranks.
class RankCounter {
public:
    explicit RankCounter(std::size_t n) : tree_(n + 1, 0) {}
    void add(std::size_t rank) {
        for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
    }
    // number of inserted ranks < rank
    long long below(std::size_t rank) const {
        long long s = 0;
        for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }

private:
    std::vector<long long> tree_;
};

std::mt19937_64 replicate_stream(std::uint64_t seed, int replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), 0xB007u};
    return std::mt19937_64(seq);
}

}  // namespace

double concordance_td(std::span<const double> survival, std::span<const double> times,
                      std::span<const int> events, const StepSurvivalCurve& censoring,
                      double horizon) {
    check_lengths(survival, times, events);
    const std::size_t n = times.size();

    std::vector<double> sorted_pred(survival.begin(), survival.end());
    std::sort(sorted_pred.begin(), sorted_pred.end());
    sorted_pred.erase(std::unique(sorted_pred.begin(), sorted_pred.end()), sorted_pred.end());
    auto rank_of = [&](double p) {
        return static_cast<std::size_t>(
            std::lower_bound(sorted_pred.begin(), sorted_pred.end(), p) - sorted_pred.begin());
    };

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });

    RankCounter counter(sorted_pred.size());
    long long inserted = 0;
    double concordant = 0.0;
    double comparable = 0.0;
    std::size_t excluded = 0;
    std::size_t p = 0;
    while (p < n) {
        std::size_t q = p;
        while (q < n && times[order[q]] == times[order[p]]) ++q;
        // Everyone inserted so far has a strictly later time.
        for (std::size_t r = p; r < q; ++r) {
            const std::size_t i = order[r];
            if (events[i] != 1 || times[i] > horizon || inserted == 0) continue;
            const double g = censoring.eval_left(times[i]);
            if (g < kMinCensoringWeight) {
                ++excluded;
                continue;
            }
            const double w = 1.0 / (g * g);
            const std::size_t rank = rank_of(survival[i]);
            const long long lower = counter.below(rank);
            const long long equal = counter.below(rank + 1) - lower;
            const long long higher = inserted - lower - equal;
            concordant += w * (static_cast<double>(higher) + 0.5 * static_cast<double>(equal));
            comparable += w * static_cast<double>(inserted);
        }
        for (std::size_t r = p; r < q; ++r) {
            counter.add(rank_of(survival[order[r]]));
            ++inserted;
        }
        p = q;
    }
    warn_excluded("concordance_td", excluded);
    if (comparable <= 0.0) throw MetricError("concordance_td: no comparable pairs");
    return concordant / comparable;
}

double auc_ipcw(std::span<const double> survival, std::span<const double> times,
                std::span<const int> events, const StepSurvivalCurve& censoring, double horizon) {
    check_lengths(survival, times, events);
    const std::size_t n = times.size();

    struct Point {
        double pred;
        double case_weight;
        double control;
    };
    std::vector<Point> pts;
    double case_total = 0.0;
    double control_total = 0.0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (times[i] <= horizon && events[i] == 1) {
            const double g = censoring.eval_left(times[i]);
            if (g < kMinCensoringWeight) {
                ++excluded;
                continue;
            }
            const double w = 1.0 / (static_cast<double>(n) * g);
            pts.push_back({survival[i], w, 0.0});
            case_total += w;
        } else if (times[i] > horizon) {
            pts.push_back({survival[i], 0.0, 1.0});
            control_total += 1.0;
        }
    }
    warn_excluded("auc_ipcw", excluded);
    if (case_total <= 0.0) throw MetricError("auc_ipcw: no cases before the horizon");
    if (control_total <= 0.0) throw MetricError("auc_ipcw: no controls beyond the horizon");

    // Lowest predicted survival first: lowering the threshold on the risk score
    // 1 - pi admits these records as positives first.
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.pred < b.pred; });
    double area = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    std::size_t p = 0;
    while (p < pts.size()) {
        double dc = 0.0;
        double dn = 0.0;
        std::size_t q = p;
        while (q < pts.size() && pts[q].pred == pts[p].pred) {
            dc += pts[q].case_weight;
            dn += pts[q].control;
            ++q;
        }
        const double tpr_new = tpr + dc / case_total;
        const double fpr_new = fpr + dn / control_total;
        area += (fpr_new - fpr) * (tpr_new + tpr) / 2.0;
        tpr = tpr_new;
        fpr = fpr_new;
        p = q;
    }
    return area;
}

std::vector<CalibrationBin> calibration_bins(std::span<const double> survival,
                                             std::span<const double> times,
                                             std::span<const int> events, double horizon,
                                             int bins) {
    check_lengths(survival, times, events);
    const std::size_t n = times.size();
    if (bins < 1) throw MetricError("calibration bins: need at least one bin");
    if (n < static_cast<std::size_t>(bins)) {
        throw MetricError(fmt::format("calibration bins: {} records for {} bins", n, bins));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return survival[a] < survival[b]; });

    std::vector<CalibrationBin> out;
    std::vector<double> t;
    std::vector<int> e;
    const auto q = static_cast<std::size_t>(bins);
    for (std::size_t j = 0; j < q; ++j) {
        const std::size_t lo = j * n / q;
        const std::size_t hi = (j + 1) * n / q;
        t.clear();
        e.clear();
        double mean = 0.0;
        double max_time = -std::numeric_limits<double>::infinity();
        for (std::size_t r = lo; r < hi; ++r) {
            const std::size_t i = order[r];
            t.push_back(times[i]);
            e.push_back(events[i]);
            mean += survival[i];
            max_time = std::max(max_time, times[i]);
        }
        CalibrationBin bin;
        bin.bin = static_cast<int>(j);
        bin.count = hi - lo;
        bin.mean_predicted = mean / static_cast<double>(hi - lo);
        const auto km = kaplan_meier(t, e);
        const double s = km.eval(horizon);
        bin.km_observed = s;
        // Past the last observed time the product-limit curve is only known if it hit zero.
        bin.defined = max_time >= horizon || s == 0.0;
        out.push_back(bin);
    }
    return out;
}

double ece(std::span<const double> survival, std::span<const double> times,
           std::span<const int> events, double horizon, int bins) {
    const auto table = calibration_bins(survival, times, events, horizon, bins);
    double total = 0.0;
    int used = 0;
    for (const auto& b : table) {
        if (!b.defined) continue;
        total += std::abs(b.km_observed - b.mean_predicted);
        ++used;
    }
    if (used < static_cast<int>(table.size())) {
        log::warn(fmt::format("ece: {} of {} bins skipped (Kaplan-Meier undefined at t = {})",
                              table.size() - static_cast<std::size_t>(used), table.size(),
                              horizon));
    }
    if (used == 0) throw MetricError("ece: no bin has a defined Kaplan-Meier estimate");
    return total / static_cast<double>(used);
}

double brier_ipcw(std::span<const double> survival, std::span<const double> times,
                  std::span<const int> events, const StepSurvivalCurve& censoring, double horizon) {
    check_lengths(survival, times, events);
    const double g_t = censoring.eval(horizon);
    if (g_t < kMinCensoringWeight) {
        throw MetricError(fmt::format(
            "brier_ipcw: censoring survival G({}) = {} (horizon beyond follow-up)", horizon, g_t));
    }
    const std::size_t n = times.size();
    double total = 0.0;
    std::size_t excluded = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = survival[i];
        if (times[i] <= horizon && events[i] == 1) {
            const double g = censoring.eval_left(times[i]);
            if (g < kMinCensoringWeight) {
                ++excluded;
                continue;
            }
            total += p * p / g;
        } else if (times[i] > horizon) {
            total += (1.0 - p) * (1.0 - p) / g_t;
        }
    }
    warn_excluded("brier_ipcw", excluded);
    return total / static_cast<double>(n);
}

std::vector<BootstrapResult> bootstrap_many(const ResampledMetrics& metrics, std::size_t count,
                                            std::size_t n, int replicates, std::uint64_t seed) {
    if (n < 2) throw MetricError("bootstrap needs at least two records");
    std::vector<std::vector<double>> values(count);
    std::vector<int> dropped(count, 0);
    std::vector<std::size_t> sample(n);
    for (int r = 0; r < replicates; ++r) {
        auto rng = replicate_stream(seed, r);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        for (auto& s : sample) s = pick(rng);
        std::vector<double> out;
        try {
            out = metrics(sample);
        } catch (const Error&) {
            out.assign(count, kNaN);
        }
        if (out.size() != count) throw MetricError("bootstrap: metric closure returned wrong size");
        for (std::size_t m = 0; m < count; ++m) {
            if (std::isfinite(out[m])) {
                values[m].push_back(out[m]);
            } else {
                ++dropped[m];
            }
        }
    }
    std::vector<BootstrapResult> results(count);
    for (std::size_t m = 0; m < count; ++m) {
        auto& res = results[m];
        const auto& v = values[m];
        res.replicates = static_cast<int>(v.size());
        res.dropped = dropped[m];
        if (v.empty()) {
            res.mean = kNaN;
            res.se = kNaN;
            continue;
        }
        // Centre on the first replicate so identical replicates give exactly zero spread.
        double shift = 0.0;
        for (double x : v) shift += x - v.front();
        res.mean = v.front() + shift / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - res.mean) * (x - res.mean);
        res.se = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    return results;
}

BootstrapResult bootstrap_se(const ResampledMetric& metric, std::size_t n, int replicates,
                             std::uint64_t seed) {
    auto wrapped = [&](std::span<const std::size_t> idx) {
        double v = kNaN;
        try {
            v = metric(idx);
        } catch (const Error&) {
        }
        return std::vector<double>{v};
    };
    return bootstrap_many(wrapped, 1, n, replicates, seed).front();
}

namespace {

const char* const kMetricNames[] = {"ctd", "auc", "ece", "brier"};
constexpr std::size_t kMetricCount = 4;

// metrics[m * H + h] for metric m at horizon h; NaN where undefined.
std::vector<double> all_metrics(const RiskMatrix& risk, std::span<const std::size_t> rows,
                                std::span<const double> times, std::span<const int> events,
                                int ece_bins, std::vector<std::string>* notes) {
    const std::size_t h_count = risk.horizons.size();
    std::vector<double> t(rows.size());
    std::vector<int> e(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        t[r] = times[rows[r]];
        e[r] = events[rows[r]];
    }
    const auto g = censoring_km(t, e);
    std::vector<double> out(kMetricCount * h_count, kNaN);
    std::vector<double> pred(rows.size());
    for (std::size_t h = 0; h < h_count; ++h) {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            pred[r] = risk.survival(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(h));
        }
        const double horizon = risk.horizons[h];
        auto attempt = [&](std::size_t m, auto&& fn) {
            try {
                out[m * h_count + h] = fn();
            } catch (const Error& ex) {
                if (notes) (*notes)[m * h_count + h] = ex.what();
            }
        };
        attempt(0, [&] { return concordance_td(pred, t, e, g, horizon); });
        attempt(1, [&] { return auc_ipcw(pred, t, e, g, horizon); });
        attempt(2, [&] { return ece(pred, t, e, horizon, ece_bins); });
        attempt(3, [&] { return brier_ipcw(pred, t, e, g, horizon); });
    }
    return out;
}

}  // namespace

MetricsReport evaluate_by_group(const RiskMatrix& risk, std::span<const double> times,
                                std::span<const int> events,
                                std::span<const std::optional<std::string>> groups,
                                const EvaluationOptions& options) {
    const std::size_t n = times.size();
    if (events.size() != n || static_cast<std::size_t>(risk.survival.rows()) != n ||
        static_cast<std::size_t>(risk.survival.cols()) != risk.horizons.size()) {
        throw MetricError("evaluate_by_group: risk matrix does not match the records");
    }
    if (!groups.empty() && groups.size() != n) {
        throw MetricError("evaluate_by_group: one group label per record required");
    }

    std::vector<std::pair<std::string, std::vector<std::size_t>>> strata;
    {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        strata.emplace_back(kPopulationGroup, std::move(all));
        std::map<std::string, std::vector<std::size_t>> by_label;
        for (std::size_t i = 0; i < groups.size(); ++i) {
            if (groups[i]) by_label[*groups[i]].push_back(i);
        }
        for (auto& [label, idx] : by_label) strata.emplace_back(label, std::move(idx));
    }

    const std::size_t h_count = risk.horizons.size();
    MetricsReport report;
    report.horizons = risk.horizons;
    std::uint64_t stratum_seed = options.seed;
    for (const auto& [label, idx] : strata) {
        ++stratum_seed;
        const bool is_population = label == kPopulationGroup;
        if (!is_population && idx.size() < options.min_group_size) {
            for (std::size_t m = 0; m < kMetricCount; ++m) {
                for (std::size_t h = 0; h < h_count; ++h) {
                    MetricRow row;
                    row.metric = kMetricNames[m];
                    row.horizon = risk.horizons[h];
                    row.group = label;
                    row.estimate = row.bootstrap_mean = row.se = kNaN;
                    row.n = idx.size();
                    row.computed = false;
                    row.note = fmt::format("insufficient: {} < {} records", idx.size(),
                                           options.min_group_size);
                    report.rows.push_back(row);
                }
            }
            continue;
        }

        std::vector<std::string> notes(kMetricCount * h_count);
        const auto point = all_metrics(risk, idx, times, events, options.ece_bins, &notes);
        std::vector<BootstrapResult> boot(kMetricCount * h_count);
        if (options.bootstrap > 0 && idx.size() >= 2) {
            // Replicate-level exclusions would repeat the point-estimate warnings.
            const log::ScopedLevel quiet(log::Level::error);
            auto closure = [&](std::span<const std::size_t> sample) {
                std::vector<std::size_t> rows(sample.size());
                for (std::size_t r = 0; r < sample.size(); ++r) rows[r] = idx[sample[r]];
                return all_metrics(risk, rows, times, events, options.ece_bins, nullptr);
            };
            boot = bootstrap_many(closure, kMetricCount * h_count, idx.size(), options.bootstrap,
                                  stratum_seed);
        }
        for (std::size_t m = 0; m < kMetricCount; ++m) {
            for (std::size_t h = 0; h < h_count; ++h) {
                const std::size_t k = m * h_count + h;
                MetricRow row;
                row.metric = kMetricNames[m];
                row.horizon = risk.horizons[h];
                row.group = label;
                row.estimate = point[k];
                row.bootstrap_mean = options.bootstrap > 0 ? boot[k].mean : kNaN;
                row.se = options.bootstrap > 0 ? boot[k].se : kNaN;
                row.replicates = boot[k].replicates;
                row.n = idx.size();
                row.computed = std::isfinite(point[k]);
                row.note = notes[k];
                report.rows.push_back(row);
            }
        }

        std::vector<std::vector<CalibrationBin>> bins_per_horizon;
        std::vector<double> t(idx.size());
        std::vector<int> e(idx.size());
        std::vector<double> pred(idx.size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            t[r] = times[idx[r]];
            e[r] = events[idx[r]];
        }
        for (std::size_t h = 0; h < h_count; ++h) {
            for (std::size_t r = 0; r < idx.size(); ++r) {
                pred[r] = risk.survival(static_cast<Eigen::Index>(idx[r]), static_cast<Eigen::Index>(h));
            }
            try {
                bins_per_horizon.push_back(
                    calibration_bins(pred, t, e, risk.horizons[h], options.ece_bins));
            } catch (const Error&) {
                bins_per_horizon.emplace_back();
            }
        }
        report.calibration.emplace_back(label, std::move(bins_per_horizon));
    }
    return report;
}

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{}", v);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    return out;
}

}  // namespace

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "metric,horizon,group,estimate,se,n\n";
    for (const auto& r : report.rows) {
        out << r.metric << ',' << num(r.horizon) << ',' << r.group << ',' << num(r.estimate)
            << ',' << num(r.se) << ',' << r.n << '\n';
    }
}

void write_report_json(const MetricsReport& report, const std::filesystem::path& path) {
    using nlohmann::json;
    auto opt = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json rows = json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"metric", r.metric},
                        {"horizon", r.horizon},
                        {"group", r.group},
                        {"estimate", opt(r.estimate)},
                        {"bootstrap_mean", opt(r.bootstrap_mean)},
                        {"se", opt(r.se)},
                        {"n", r.n},
                        {"replicates", r.replicates},
                        {"computed", r.computed},
                        {"note", r.note}});
    }
    auto out = open_out(path);
    out << json{{"rows", rows}}.dump(1) << '\n';
}

void write_calibration_csv(const MetricsReport& report, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "group,horizon,bin,count,mean_predicted,km_observed,defined\n";
    for (const auto& [label, per_h] : report.calibration) {
        for (std::size_t h = 0; h < per_h.size(); ++h) {
            for (const auto& b : per_h[h]) {
                out << label << ',' << num(report.horizons[h]) << ',' << b.bin << ',' << b.count << ','
                    << num(b.mean_predicted) << ',' << num(b.km_observed) << ','
                    << (b.defined ? 1 : 0) << '\n';
            }
        }
    }
}

}  // namespace coxmix
