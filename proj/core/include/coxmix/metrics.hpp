#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coxmix/survival_estimators.hpp"

namespace coxmix {

// IPCW terms whose censoring-survival denominator falls below this are dropped.
inline constexpr double kMinCensoringWeight = 1e-4;
inline constexpr int kDefaultEceBins = 20;

// Predicted survival pi_i(t) for N records (rows) at H horizons (columns).
struct RiskMatrix {
    Eigen::MatrixXd survival;
    std::vector<double> horizons;
};

// All metrics take `survival` = pi_i(t), the predicted probability of
// surviving past the horizon; low values mean high risk.

// Truncated C-index with weights 1 / G(T_i-)^2 over comparable pairs
// (delta_i = 1, T_i < T_j, T_i <= t). Ties in prediction count one half;
// pairs tied in time are not comparable.
double concordance_td(std::span<const double> survival, std::span<const double> times,
                      std::span<const int> events, const StepSurvivalCurve& censoring,
                      double horizon);

// Area under the (1 - Sp, Se) curve at horizon t. Cases (T_i <= t, delta_i = 1)
// carry weights 1 / (n G(T_i-)); controls (T_i > t) are unweighted. The
// classifier flags a record as a case when its risk 1 - pi exceeds the threshold.
double auc_ipcw(std::span<const double> survival, std::span<const double> times,
                std::span<const int> events, const StepSurvivalCurve& censoring, double horizon);

struct CalibrationBin {
    int bin = 0;
    std::size_t count = 0;
    double mean_predicted = 0.0;
    double km_observed = 0.0;
    bool defined = false;  // false when the bin's KM curve does not reach the horizon
};

// Equal-mass bins over the sorted predictions with within-bin Kaplan-Meier.
std::vector<CalibrationBin> calibration_bins(std::span<const double> survival,
                                             std::span<const double> times,
                                             std::span<const int> events, double horizon,
                                             int bins = kDefaultEceBins);

// Mean |KM_j(t) - mean predicted_j| over the defined bins.
double ece(std::span<const double> survival, std::span<const double> times,
           std::span<const int> events, double horizon, int bins = kDefaultEceBins);

// Graf-style IPCW Brier score with G(T_i-) for events and G(t) for survivors.
double brier_ipcw(std::span<const double> survival, std::span<const double> times,
                  std::span<const int> events, const StepSurvivalCurve& censoring, double horizon);

struct BootstrapResult {
    double mean = 0.0;
    double se = 0.0;
    int replicates = 0;  // successful replicates
    int dropped = 0;     // replicates whose metric threw
};

// `metric` receives the resampled record indices (with replacement) and must
// recompute everything it needs, including the censoring curve.
using ResampledMetric = std::function<double(std::span<const std::size_t>)>;
BootstrapResult bootstrap_se(const ResampledMetric& metric, std::size_t n, int replicates,
                             std::uint64_t seed);

// Vector-valued variant sharing one resample across several metrics. A NaN
// entry marks a metric that failed on that replicate.
using ResampledMetrics = std::function<std::vector<double>(std::span<const std::size_t>)>;
std::vector<BootstrapResult> bootstrap_many(const ResampledMetrics& metrics, std::size_t count,
                                            std::size_t n, int replicates, std::uint64_t seed);

struct MetricRow {
    std::string metric;  // ctd | auc | ece | brier
    double horizon = 0.0;
    std::string group;   // "population" or the group label
    double estimate = 0.0;
    double bootstrap_mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
    int replicates = 0;
    bool computed = true;  // false for groups below the size floor or undefined metrics
    std::string note;
};

struct MetricsReport {
    std::vector<double> horizons;
    std::vector<MetricRow> rows;
    std::vector<std::pair<std::string, std::vector<std::vector<CalibrationBin>>>> calibration;
};

struct EvaluationOptions {
    int bootstrap = 100;
    std::uint64_t seed = 0;
    int ece_bins = kDefaultEceBins;
    std::size_t min_group_size = 20;
};

inline const std::string kPopulationGroup = "population";

// Every metric at every horizon for the whole sample and for each group label;
// the censoring curve is re-estimated inside each evaluated stratum.
MetricsReport evaluate_by_group(const RiskMatrix& risk, std::span<const double> times,
                                std::span<const int> events,
                                std::span<const std::optional<std::string>> groups,
                                const EvaluationOptions& options = {});

// metric,horizon,group,estimate,se,n
void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_report_json(const MetricsReport& report, const std::filesystem::path& path);
// group,horizon,bin,count,mean_predicted,km_observed,defined
void write_calibration_csv(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace coxmix
