#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace coxmix {

// One right-censored observation. `event` is 1 when the time is an observed
// event and 0 when it is a censoring time.
struct SurvivalRecord {
    std::vector<double> features;
    double time = 0.0;
    int event = 0;
    std::optional<std::string> group;
};

// Per-feature affine map x -> (x - mean) / scale.
struct FeatureScaling {
    std::vector<double> mean;
    std::vector<double> scale;
};

// Immutable collection of records sharing a feature layout.
class SurvivalDataset {
public:
    SurvivalDataset() = default;
    SurvivalDataset(std::vector<SurvivalRecord> records, std::vector<std::string> feature_names,
                    std::optional<FeatureScaling> standardization = std::nullopt);

    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t dim() const noexcept { return feature_names_.size(); }

    const std::vector<SurvivalRecord>& records() const noexcept { return records_; }
    const SurvivalRecord& operator[](std::size_t i) const { return records_[i]; }
    const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
    const std::optional<FeatureScaling>& standardization() const noexcept { return standardization_; }

    std::vector<double> times() const;
    std::vector<int> events() const;
    std::vector<std::optional<std::string>> groups() const;
    bool has_groups() const;
    std::size_t event_count() const;

    // Row-major n x d copy of the features.
    Eigen::MatrixXd feature_matrix() const;

    SurvivalDataset subset(std::span<const std::size_t> indices) const;
    SurvivalDataset drop_features(std::span<const std::string> names) const;

private:
    std::vector<SurvivalRecord> records_;
    std::vector<std::string> feature_names_;
    std::optional<FeatureScaling> standardization_;
};

// Dense view used by the model code: features, times and events of a set of rows.
struct SurvivalBatch {
    Eigen::MatrixXd features;
    std::vector<double> times;
    std::vector<int> events;

    std::size_t size() const noexcept { return times.size(); }
    SurvivalBatch rows(std::span<const std::size_t> indices) const;
};

SurvivalBatch make_batch(const SurvivalDataset& ds);
SurvivalBatch make_batch(const SurvivalDataset& ds, std::span<const std::size_t> indices);

struct CsvSchema {
    std::string time_col = "time";
    std::string event_col = "event";
    std::optional<std::string> group_col;
    std::vector<std::string> drop_columns;
    // Drop rows containing an empty / NA field instead of failing.
    bool drop_missing = false;
};

// Header row required. Every column other than time, event, group and the
// dropped columns must be numeric and becomes a feature, in file order.
SurvivalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

// Writes the dataset back out with columns features..., time, event[, group].
void write_csv(const SurvivalDataset& ds, const std::filesystem::path& path,
               const std::string& time_col = "time", const std::string& event_col = "event",
               const std::string& group_col = "group");

// Column-wise z-scoring with the N-1 standard deviation. Constant columns get
// mean subtracted and a unit divisor, so they become all zeros.
struct StandardizeResult {
    SurvivalDataset dataset;
    FeatureScaling stats;
};
StandardizeResult standardize(const SurvivalDataset& ds);

// Applies previously fitted stats (e.g. train-fold stats to a test fold).
SurvivalDataset apply_standardization(const SurvivalDataset& ds, const FeatureScaling& stats);

// Lower nearest-rank quantiles of the uncensored times: for m sorted event
// times and probability p the result is the ceil(p * m)-th smallest.
std::vector<double> event_quantiles(std::span<const double> times, std::span<const int> events,
                                    std::span<const double> probs);
std::vector<double> event_quantiles(const SurvivalDataset& ds, std::span<const double> probs);

struct FoldSplit {
    std::vector<int> fold_of;  // one entry per record, in [0, k)
    int k = 0;
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_indices(int fold) const;
    std::vector<std::size_t> train_indices(int fold) const;
};

// Seeded shuffle, then round-robin assignment so fold sizes differ by at most one.
FoldSplit k_fold_split(std::size_t n, int k, std::uint64_t seed);
FoldSplit k_fold_split(const SurvivalDataset& ds, int k, std::uint64_t seed);

}  // namespace coxmix
