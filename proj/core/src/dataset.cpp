#include "coxmix/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "coxmix/error.hpp"
#include "coxmix/log.hpp"

namespace coxmix {

SurvivalDataset::SurvivalDataset(std::vector<SurvivalRecord> records,
                                 std::vector<std::string> feature_names,
                                 std::optional<FeatureScaling> standardization)
    : records_(std::move(records)),
      feature_names_(std::move(feature_names)),
      standardization_(std::move(standardization)) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        if (r.features.size() != feature_names_.size()) {
            throw DataError(fmt::format("record {} has {} features, expected {}", i + 1,
                                        r.features.size(), feature_names_.size()),
                            i + 1);
        }
        if (!(r.time >= 0.0) || !std::isfinite(r.time)) {
            throw DataError(fmt::format("record {} has invalid time {}", i + 1, r.time), i + 1);
        }
        if (r.event != 0 && r.event != 1) {
            throw DataError(fmt::format("record {} has event flag {} (expected 0 or 1)", i + 1,
                                        r.event),
                            i + 1);
        }
        for (double v : r.features) {
            if (!std::isfinite(v)) {
                throw DataError(fmt::format("record {} has a non-finite feature", i + 1), i + 1);
            }
        }
    }
}

std::vector<double> SurvivalDataset::times() const {
    std::vector<double> out(records_.size());
    std::transform(records_.begin(), records_.end(), out.begin(),
                   [](const SurvivalRecord& r) { return r.time; });
    return out;
}

std::vector<int> SurvivalDataset::events() const {
    std::vector<int> out(records_.size());
    std::transform(records_.begin(), records_.end(), out.begin(),
                   [](const SurvivalRecord& r) { return r.event; });
    return out;
}

std::vector<std::optional<std::string>> SurvivalDataset::groups() const {
    std::vector<std::optional<std::string>> out(records_.size());
    std::transform(records_.begin(), records_.end(), out.begin(),
                   [](const SurvivalRecord& r) { return r.group; });
    return out;
}

bool SurvivalDataset::has_groups() const {
    return std::any_of(records_.begin(), records_.end(),
                       [](const SurvivalRecord& r) { return r.group.has_value(); });
}

std::size_t SurvivalDataset::event_count() const {
    return static_cast<std::size_t>(std::count_if(
        records_.begin(), records_.end(), [](const SurvivalRecord& r) { return r.event == 1; }));
}

Eigen::MatrixXd SurvivalDataset::feature_matrix() const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(records_.size()),
                      static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < records_.size(); ++i) {
        for (std::size_t j = 0; j < dim(); ++j) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records_[i].features[j];
        }
    }
    return x;
}

SurvivalDataset SurvivalDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<SurvivalRecord> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(records_.at(i));
    return SurvivalDataset(std::move(out), feature_names_, standardization_);
}

SurvivalDataset SurvivalDataset::drop_features(std::span<const std::string> names) const {
    std::vector<std::size_t> keep;
    std::vector<std::string> kept_names;
    for (std::size_t j = 0; j < feature_names_.size(); ++j) {
        if (std::find(names.begin(), names.end(), feature_names_[j]) == names.end()) {
            keep.push_back(j);
            kept_names.push_back(feature_names_[j]);
        }
    }
    std::vector<SurvivalRecord> out;
    out.reserve(records_.size());
    for (const auto& r : records_) {
        SurvivalRecord copy{{}, r.time, r.event, r.group};
        copy.features.reserve(keep.size());
        for (std::size_t j : keep) copy.features.push_back(r.features[j]);
        out.push_back(std::move(copy));
    }
    std::optional<FeatureScaling> stats;
    if (standardization_) {
        FeatureScaling s;
        for (std::size_t j : keep) {
            s.mean.push_back(standardization_->mean[j]);
            s.scale.push_back(standardization_->scale[j]);
        }
        stats = std::move(s);
    }
    return SurvivalDataset(std::move(out), std::move(kept_names), std::move(stats));
}

SurvivalBatch SurvivalBatch::rows(std::span<const std::size_t> indices) const {
    SurvivalBatch out;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
    out.times.reserve(indices.size());
    out.events.reserve(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto i = indices[r];
        out.features.row(static_cast<Eigen::Index>(r)) =
            features.row(static_cast<Eigen::Index>(i));
        out.times.push_back(times[i]);
        out.events.push_back(events[i]);
    }
    return out;
}

SurvivalBatch make_batch(const SurvivalDataset& ds) {
    return SurvivalBatch{ds.feature_matrix(), ds.times(), ds.events()};
}

SurvivalBatch make_batch(const SurvivalDataset& ds, std::span<const std::size_t> indices) {
    return make_batch(ds).rows(indices);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan" || s == "NULL";
}

std::optional<double> parse_number(const std::string& s) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_number(double v) { return fmt::format("{}", v); }

}  // namespace

SurvivalDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));

    std::string line;
    if (!std::getline(in, line)) throw DataError(fmt::format("'{}' is empty", path.string()));
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    const auto header = split_csv_line(line);

    auto find_col = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto time_idx = find_col(schema.time_col);
    const auto event_idx = find_col(schema.event_col);
    if (!time_idx) throw DataError(fmt::format("time column '{}' not found", schema.time_col));
    if (!event_idx) throw DataError(fmt::format("event column '{}' not found", schema.event_col));
    std::optional<std::size_t> group_idx;
    if (schema.group_col) {
        group_idx = find_col(*schema.group_col);
        if (!group_idx) {
            throw DataError(fmt::format("group column '{}' not found", *schema.group_col));
        }
    }
    for (const auto& d : schema.drop_columns) {
        if (!find_col(d)) throw DataError(fmt::format("drop column '{}' not found", d));
    }

    std::vector<std::size_t> feature_idx;
    std::vector<std::string> feature_names;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == *time_idx || j == *event_idx || (group_idx && j == *group_idx)) continue;
        if (std::find(schema.drop_columns.begin(), schema.drop_columns.end(), header[j]) !=
            schema.drop_columns.end()) {
            continue;
        }
        feature_idx.push_back(j);
        feature_names.push_back(header[j]);
    }

    std::vector<SurvivalRecord> records;
    std::size_t row = 0;
    std::size_t dropped = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++row;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError(fmt::format("row {}: expected {} fields, found {}", row,
                                        header.size(), fields.size()),
                            row);
        }

        bool missing = false;
        auto numeric = [&](std::size_t col, const char* what) -> double {
            const auto& s = fields[col];
            if (is_missing(s)) {
                missing = true;
                return 0.0;
            }
            auto v = parse_number(s);
            if (!v) {
                throw DataError(fmt::format("row {}: non-numeric {} value '{}' in column '{}'",
                                            row, what, s, header[col]),
                                row);
            }
            return *v;
        };

        SurvivalRecord rec;
        rec.time = numeric(*time_idx, "time");
        const double ev = numeric(*event_idx, "event");
        rec.features.reserve(feature_idx.size());
        for (std::size_t j : feature_idx) rec.features.push_back(numeric(j, "feature"));

        if (missing) {
            if (schema.drop_missing) {
                ++dropped;
                continue;
            }
            throw DataError(
                fmt::format("row {}: missing value (use --drop-missing to drop such rows)", row),
                row);
        }
        if (ev != 0.0 && ev != 1.0) {
            throw DataError(fmt::format("row {}: event value '{}' is not 0 or 1", row,
                                        fields[*event_idx]),
                            row);
        }
        if (rec.time < 0.0) {
            throw DataError(fmt::format("row {}: negative time {}", row, rec.time), row);
        }
        rec.event = static_cast<int>(ev);
        if (group_idx) rec.group = fields[*group_idx];
        records.push_back(std::move(rec));
    }
    if (dropped > 0) log::info(fmt::format("dropped {} rows with missing values", dropped));
    return SurvivalDataset(std::move(records), std::move(feature_names));
}

void write_csv(const SurvivalDataset& ds, const std::filesystem::path& path,
               const std::string& time_col, const std::string& event_col,
               const std::string& group_col) {
    std::ofstream out(path);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    const bool groups = ds.has_groups();
    for (const auto& name : ds.feature_names()) out << name << ',';
    out << time_col << ',' << event_col;
    if (groups) out << ',' << group_col;
    out << '\n';
    for (const auto& r : ds.records()) {
        for (double v : r.features) out << format_number(v) << ',';
        out << format_number(r.time) << ',' << r.event;
        if (groups) out << ',' << r.group.value_or("");
        out << '\n';
    }
    if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

// ---------------------------------------------------------------------------
// Standardization

StandardizeResult standardize(const SurvivalDataset& ds) {
    if (ds.empty()) throw DataError("cannot standardize an empty dataset");
    const std::size_t n = ds.size();
    const std::size_t d = ds.dim();
    FeatureScaling stats{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (const auto& r : ds.records()) mean += r.features[j];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (const auto& r : ds.records()) ss += (r.features[j] - mean) * (r.features[j] - mean);
        const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        stats.mean[j] = mean;
        // Columns whose spread is at rounding level are treated as constant.
        stats.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    return {apply_standardization(ds, stats), stats};
}

SurvivalDataset apply_standardization(const SurvivalDataset& ds, const FeatureScaling& stats) {
    if (stats.mean.size() != ds.dim() || stats.scale.size() != ds.dim()) {
        throw DataError("standardization stats do not match the feature dimension");
    }
    std::vector<SurvivalRecord> out = ds.records();
    for (auto& r : out) {
        for (std::size_t j = 0; j < r.features.size(); ++j) {
            r.features[j] = (r.features[j] - stats.mean[j]) / stats.scale[j];
        }
    }
    return SurvivalDataset(std::move(out), ds.feature_names(), stats);
}

// ---------------------------------------------------------------------------
// Quantiles and folds

std::vector<double> event_quantiles(std::span<const double> times, std::span<const int> events,
                                    std::span<const double> probs) {
    if (times.size() != events.size()) throw DataError("times and events differ in length");
    std::vector<double> ev;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (events[i] == 1) ev.push_back(times[i]);
    }
    if (ev.empty()) throw DataError("event quantiles need at least one uncensored record");
    std::sort(ev.begin(), ev.end());
    std::vector<double> out;
    out.reserve(probs.size());
    const double m = static_cast<double>(ev.size());
    for (double p : probs) {
        if (!(p > 0.0 && p < 1.0)) {
            throw DataError(fmt::format("quantile probability {} outside (0, 1)", p));
        }
        auto rank = static_cast<std::size_t>(std::ceil(p * m - 1e-9));
        rank = std::clamp<std::size_t>(rank, 1, ev.size());
        out.push_back(ev[rank - 1]);
    }
    return out;
}

std::vector<double> event_quantiles(const SurvivalDataset& ds, std::span<const double> probs) {
    const auto t = ds.times();
    const auto e = ds.events();
    return event_quantiles(t, e, probs);
}

std::vector<std::size_t> FoldSplit::test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldSplit::train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
}

FoldSplit k_fold_split(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw DataError(fmt::format("k-fold split needs k >= 2 (got {})", k));
    if (static_cast<std::size_t>(k) > n) {
        throw DataError(fmt::format("k-fold split with k = {} exceeds N = {}", k, n));
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    FoldSplit split{std::vector<int>(n, 0), k, seed};
    for (std::size_t p = 0; p < n; ++p) split.fold_of[order[p]] = static_cast<int>(p % k);
    return split;
}

FoldSplit k_fold_split(const SurvivalDataset& ds, int k, std::uint64_t seed) {
    return k_fold_split(ds.size(), k, seed);
}

}  // namespace coxmix
