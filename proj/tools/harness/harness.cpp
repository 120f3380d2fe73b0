#include "harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "coxmix/dataset.hpp"
#include "coxmix/dcm_model.hpp"
#include "coxmix/error.hpp"
#include "coxmix/log.hpp"
#include "coxmix/metrics.hpp"
#include "coxmix/synth.hpp"

namespace fs = std::filesystem;

namespace coxmix::cli {

namespace {

struct DataFlags {
    std::string data;
    std::string time_col = "time";
    std::string event_col = "event";
    std::string group_col;
    std::vector<std::string> drop_columns;
    bool drop_missing = false;

    CsvSchema schema() const {
        CsvSchema s;
        s.time_col = time_col;
        s.event_col = event_col;
        if (!group_col.empty()) s.group_col = group_col;
        s.drop_columns = drop_columns;
        s.drop_missing = drop_missing;
        return s;
    }
};

struct TrainFlags {
    int k = 3;
    std::string layers = "1";
    int hidden = 100;
    double lr = 1e-3;
    int batch = 128;
    int epochs = 50;
    int patience = 3;
    int max_knots = kDefaultMaxKnots;
    double validation = 0.1;
    bool no_prior = false;
};

struct EvalFlags {
    std::string horizons = "q25,q50,q75";
    int bootstrap = 100;
};

// Removes everything it handed out unless commit() was called.
class OutputGuard {
public:
    explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
        if (dir_.empty()) throw Error("--out is required");
        if (!fs::exists(dir_)) {
            fs::create_directories(dir_);
            created_ = true;
        } else if (!fs::is_directory(dir_)) {
            throw Error(fmt::format("output path '{}' is not a directory", dir_.string()));
        }
    }
    OutputGuard(const OutputGuard&) = delete;
    OutputGuard& operator=(const OutputGuard&) = delete;
    ~OutputGuard() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& f : files_) fs::remove(f, ec);
        if (created_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
    }

    fs::path file(const std::string& name) {
        files_.push_back(dir_ / name);
        return files_.back();
    }
    void commit() { committed_ = true; }

private:
    fs::path dir_;
    std::vector<fs::path> files_;
    bool created_ = false;
    bool committed_ = false;
};

std::string num(double v) {
    if (std::isnan(v)) return "NA";
    return fmt::format("{}", v);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << text;
    if (!out) throw Error(fmt::format("failed writing '{}'", path.string()));
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string{} : cur.substr(b, e - b + 1));
    }
    return out;
}

template <class T>
T parse_number(const std::string& s, const char* what) {
    T v{};
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw Error(fmt::format("invalid {} '{}'", what, s));
    }
    return v;
}

// "" or "0" -> linear; "2" -> two layers of `hidden`; "64,32" -> explicit widths.
std::vector<int> parse_layers(const std::string& spec, int hidden) {
    if (spec.empty()) return {};
    if (spec.find(',') != std::string::npos) {
        std::vector<int> widths;
        for (const auto& tok : split(spec, ',')) widths.push_back(parse_number<int>(tok, "layer width"));
        return widths;
    }
    const int count = parse_number<int>(spec, "layer count");
    if (count < 0) throw Error("--layers must be non-negative");
    return std::vector<int>(static_cast<std::size_t>(count), hidden);
}

DcmConfig make_config(const TrainFlags& f, std::uint64_t seed) {
    DcmConfig c;
    c.clusters = f.k;
    c.hidden_layers = parse_layers(f.layers, f.hidden);
    c.learning_rate = f.lr;
    c.batch_size = f.batch;
    c.max_epochs = f.epochs;
    c.patience = f.patience;
    c.seed = seed;
    c.max_knots = f.max_knots;
    c.use_prior_in_estep = !f.no_prior;
    c.validation_fraction = f.validation;
    c.validate();
    return c;
}

// Tokens are either qNN (event-time quantile NN%) or plain non-negative times.
std::vector<double> parse_horizons(const std::string& spec,
                                   const std::function<double(int)>& quantile) {
    std::vector<double> out;
    for (const auto& tok : split(spec, ',')) {
        if (tok.empty()) continue;
        if (tok.front() == 'q' || tok.front() == 'Q') {
            const int p = parse_number<int>(tok.substr(1), "horizon quantile");
            if (p <= 0 || p >= 100) throw Error(fmt::format("horizon quantile '{}' out of range", tok));
            out.push_back(quantile(p));
        } else {
            const double t = parse_number<double>(tok, "horizon");
            if (!(t >= 0.0) || !std::isfinite(t)) {
                throw Error(fmt::format("horizon '{}' must be a finite non-negative time", tok));
            }
            out.push_back(t);
        }
    }
    if (out.empty()) throw Error("no horizons given");
    return out;
}

std::function<double(int)> model_quantiles(const DcmModel& model) {
    return [&model](int p) {
        const int stored[] = {25, 50, 75};
        for (std::size_t i = 0; i < 3 && i < model.horizon_quantiles.size(); ++i) {
            if (stored[i] == p) return model.horizon_quantiles[i];
        }
        throw Error(fmt::format("model stores the q25, q50 and q75 horizons only (asked for q{})", p));
    };
}

std::function<double(int)> data_quantiles(const SurvivalDataset& ds) {
    return [&ds](int p) {
        const double probs[] = {static_cast<double>(p) / 100.0};
        return event_quantiles(ds, probs).front();
    };
}

// Reorders the dataset's columns to the model's layout; errors list the differences.
SurvivalDataset align_features(const SurvivalDataset& ds, const DcmModel& model) {
    const auto& have = ds.feature_names();
    const auto& want = model.feature_names;
    if (have == want) return ds;
    std::vector<std::string> missing;
    std::vector<std::string> extra;
    const std::set<std::string> have_set(have.begin(), have.end());
    const std::set<std::string> want_set(want.begin(), want.end());
    for (const auto& n : want) {
        if (!have_set.count(n)) missing.push_back(n);
    }
    for (const auto& n : have) {
        if (!want_set.count(n)) extra.push_back(n);
    }
    if (!missing.empty() || !extra.empty() || have.size() != want.size()) {
        throw DataError(fmt::format(
            "feature mismatch between data and model: missing [{}], unexpected [{}]",
            fmt::join(missing, ", "), fmt::join(extra, ", ")));
    }
    std::vector<std::size_t> src(want.size());
    for (std::size_t j = 0; j < want.size(); ++j) {
        src[j] = static_cast<std::size_t>(std::find(have.begin(), have.end(), want[j]) - have.begin());
    }
    std::vector<SurvivalRecord> records = ds.records();
    for (auto& r : records) {
        std::vector<double> x(want.size());
        for (std::size_t j = 0; j < want.size(); ++j) x[j] = r.features[src[j]];
        r.features = std::move(x);
    }
    return SurvivalDataset(std::move(records), want);
}

Eigen::MatrixXd model_space(const SurvivalDataset& ds, const DcmModel& model) {
    const auto aligned = align_features(ds, model);
    if (model.standardization) {
        return apply_standardization(aligned, *model.standardization).feature_matrix();
    }
    return aligned.feature_matrix();
}

void write_training_log(const DcmModel& model, const fs::path& path) {
    std::ostringstream out;
    out << "epoch,train_loss,validation_loss,starved_clusters,degenerate_rows\n";
    for (const auto& e : model.training_log) {
        out << e.epoch << ',' << num(e.train_loss) << ',' << num(e.validation_loss) << ','
            << e.starved_clusters << ',' << e.degenerate_rows << '\n';
    }
    write_text(path, out.str());
}

void write_predictions(const Eigen::MatrixXd& s, std::span<const double> horizons,
                       const fs::path& path) {
    std::ostringstream out;
    out << "row";
    for (double h : horizons) out << ",S(" << num(h) << ')';
    out << '\n';
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        out << i;
        for (Eigen::Index h = 0; h < s.cols(); ++h) out << ',' << num(s(i, h));
        out << '\n';
    }
    write_text(path, out.str());
}

std::string describe(const DcmConfig& c) {
    return fmt::format("K={} layers=[{}] lr={} batch={} epochs={} patience={}", c.clusters,
                       fmt::join(c.hidden_layers, ","), c.learning_rate, c.batch_size,
                       c.max_epochs, c.patience);
}

// ---------------------------------------------------------------------------

struct SynthFlags {
    std::string preset = "crossing";
    std::string synth_config;
    std::size_t n = 1000;
    double censoring = 0.3;
    int group_feature = -1;
    double group_threshold = 0.0;
};

void cmd_synth(const SynthFlags& f, std::uint64_t seed, const std::string& out_dir,
               const std::string& echo) {
    SynthConfig cfg;
    if (!f.synth_config.empty()) {
        std::ifstream in(f.synth_config);
        if (!in) throw Error(fmt::format("cannot open '{}'", f.synth_config));
        std::stringstream buf;
        buf << in.rdbuf();
        cfg = synth_config_from_json(buf.str());
    } else {
        cfg = synth_preset(f.preset, f.n, f.censoring, seed);
    }
    if (f.group_feature >= 0) {
        cfg.group_feature = f.group_feature;
        cfg.group_threshold = f.group_threshold;
    }
    OutputGuard guard(out_dir);
    const auto cohort = synthesize(cfg);
    write_csv(cohort.dataset, guard.file("cohort.csv"));
    write_sidecar(cohort, guard.file("truth.json"));
    write_text(guard.file("config.ini"), echo);
    log::info(fmt::format("synth: {} records, {:.3f} censored", cohort.dataset.size(),
                          cohort.censored_fraction));
    guard.commit();
}

void cmd_train(const DataFlags& d, const TrainFlags& t, std::uint64_t seed,
               const std::string& out_dir, const std::string& echo) {
    const auto config = make_config(t, seed);
    const auto raw = load_csv(d.data, d.schema());
    OutputGuard guard(out_dir);
    const auto scaled = standardize(raw);
    log::info(fmt::format("train: {} records, {} features, {}", raw.size(), raw.dim(),
                          describe(config)));
    const auto model = fit(scaled.dataset, config);
    save_model(model, guard.file("model.json"));
    write_training_log(model, guard.file("training_log.csv"));
    write_text(guard.file("config.ini"), echo);
    guard.commit();
}

void write_report(const MetricsReport& report, OutputGuard& guard) {
    write_report_csv(report, guard.file("report.csv"));
    write_report_json(report, guard.file("report.json"));
    write_calibration_csv(report, guard.file("calibration_bins.csv"));
}

void cmd_eval(const DataFlags& d, const EvalFlags& e, const std::string& model_path,
              std::uint64_t seed, const std::string& out_dir, const std::string& echo) {
    const auto model = load_model(model_path);
    const auto ds = load_csv(d.data, d.schema());
    const auto x = model_space(ds, model);
    RiskMatrix risk;
    risk.horizons = parse_horizons(e.horizons, model_quantiles(model));
    OutputGuard guard(out_dir);
    risk.survival = model.predict_survival(x, risk.horizons);
    EvaluationOptions opts;
    opts.bootstrap = e.bootstrap;
    opts.seed = seed;
    const auto times = ds.times();
    const auto events = ds.events();
    const auto groups = ds.groups();
    const auto report = evaluate_by_group(risk, times, events, groups, opts);
    write_report(report, guard);
    write_text(guard.file("config.ini"), echo);
    guard.commit();
}

void cmd_predict(const DataFlags& d, const EvalFlags& e, const std::string& model_path,
                 const std::string& out_dir, const std::string& echo) {
    const auto model = load_model(model_path);
    const auto ds = load_csv(d.data, d.schema());
    const auto x = model_space(ds, model);
    const auto horizons = parse_horizons(e.horizons, model_quantiles(model));
    OutputGuard guard(out_dir);
    write_predictions(model.predict_survival(x, horizons), horizons, guard.file("predictions.csv"));
    write_text(guard.file("config.ini"), echo);
    guard.commit();
}

struct FoldMetric {
    int fold;
    MetricRow row;
};

// Fits on each training fold and predicts its held-out fold at `horizons`.
// With `per_fold`, also scores every held-out fold on its own (no bootstrap).
Eigen::MatrixXd pooled_predictions(const SurvivalDataset& ds, const DcmConfig& config, int folds,
                                   std::uint64_t seed, std::span<const double> horizons,
                                   std::vector<FoldMetric>* per_fold = nullptr) {
    const auto split = k_fold_split(ds, folds, seed);
    Eigen::MatrixXd pooled(static_cast<Eigen::Index>(ds.size()),
                           static_cast<Eigen::Index>(horizons.size()));
    for (int f = 0; f < folds; ++f) {
        const auto train_idx = split.train_indices(f);
        const auto test_idx = split.test_indices(f);
        try {
            const auto scaled = standardize(ds.subset(train_idx));
            const auto model = fit(scaled.dataset, config);
            const auto test = apply_standardization(ds.subset(test_idx), scaled.stats);
            const auto s = model.predict_survival(test.feature_matrix(), horizons);
            for (std::size_t r = 0; r < test_idx.size(); ++r) {
                pooled.row(static_cast<Eigen::Index>(test_idx[r])) = s.row(static_cast<Eigen::Index>(r));
            }
            if (per_fold) {
                EvaluationOptions opts;
                opts.bootstrap = 0;
                const RiskMatrix fold_risk{s, std::vector<double>(horizons.begin(), horizons.end())};
                const auto rep = evaluate_by_group(fold_risk, test.times(), test.events(), {}, opts);
                for (const auto& row : rep.rows) per_fold->push_back({f, row});
            }
        } catch (const DataError& ex) {
            throw DataError(fmt::format("fold {}: {}", f, ex.what()));
        } catch (const TrainingError& ex) {
            throw TrainingError(fmt::format("fold {}: {}", f, ex.what()));
        } catch (const Error& ex) {
            throw Error(fmt::format("fold {}: {}", f, ex.what()));
        }
        log::info(fmt::format("cv: fold {} of {} done", f + 1, folds));
    }
    return pooled;
}

double mean_population_brier(const MetricsReport& report) {
    double s = 0.0;
    int n = 0;
    for (const auto& r : report.rows) {
        if (r.metric == "brier" && r.group == kPopulationGroup && std::isfinite(r.estimate)) {
            s += r.estimate;
            ++n;
        }
    }
    return n > 0 ? s / n : std::numeric_limits<double>::infinity();
}

void cmd_cv(const DataFlags& d, const TrainFlags& t, const EvalFlags& e, int folds, bool grid,
            std::uint64_t seed, const std::string& out_dir, const std::string& echo) {
    if (folds < 2) throw Error("--folds must be at least 2");
    const auto ds = load_csv(d.data, d.schema());
    if (ds.size() < static_cast<std::size_t>(folds)) {
        throw DataError(fmt::format("{} records cannot be split into {} folds", ds.size(), folds));
    }
    RiskMatrix risk;
    risk.horizons = parse_horizons(e.horizons, data_quantiles(ds));
    OutputGuard guard(out_dir);
    const auto times = ds.times();
    const auto events = ds.events();
    const auto groups = ds.groups();

    DcmConfig chosen = make_config(t, seed);
    if (grid) {
        std::ostringstream table;
        table << "clusters,layers,width,mean_brier\n";
        double best = std::numeric_limits<double>::infinity();
        for (int k : {3, 4, 6}) {
            for (int layers : {1, 2}) {
                for (int width : {50, 100}) {
                    TrainFlags g = t;
                    g.k = k;
                    g.layers = std::to_string(layers);
                    g.hidden = width;
                    const auto config = make_config(g, seed);
                    RiskMatrix r{pooled_predictions(ds, config, folds, seed, risk.horizons),
                                 risk.horizons};
                    EvaluationOptions opts;
                    opts.bootstrap = 0;
                    const double brier =
                        mean_population_brier(evaluate_by_group(r, times, events, {}, opts));
                    table << k << ',' << layers << ',' << width << ',' << num(brier) << '\n';
                    log::info(fmt::format("cv grid: {} -> mean Brier {}", describe(config), brier));
                    if (brier < best) {
                        best = brier;
                        chosen = config;
                    }
                }
            }
        }
        write_text(guard.file("grid.csv"), table.str());
    }

    std::vector<FoldMetric> per_fold;
    risk.survival = pooled_predictions(ds, chosen, folds, seed, risk.horizons, &per_fold);
    {
        std::ostringstream table;
        table << "fold,metric,horizon,estimate\n";
        for (const auto& fm : per_fold) {
            table << fm.fold << ',' << fm.row.metric << ',' << num(fm.row.horizon) << ','
                  << (std::isfinite(fm.row.estimate) ? num(fm.row.estimate) : "NA") << '\n';
        }
        write_text(guard.file("folds.csv"), table.str());
    }
    EvaluationOptions opts;
    opts.bootstrap = e.bootstrap;
    opts.seed = seed;
    const auto report = evaluate_by_group(risk, times, events, groups, opts);
    write_report(report, guard);
    write_predictions(risk.survival, risk.horizons, guard.file("predictions.csv"));
    write_text(guard.file("config.ini"), echo);
    guard.commit();
}

void add_data_flags(CLI::App* app, DataFlags& d) {
    app->add_option("--data", d.data, "Input CSV with a header row")->required()->check(CLI::ExistingFile);
    app->add_option("--time-col", d.time_col, "Time column")->capture_default_str();
    app->add_option("--event-col", d.event_col, "Event indicator column (0/1)")->capture_default_str();
    app->add_option("--group-col", d.group_col, "Group label column (not used as a feature)");
    app->add_option("--drop-columns", d.drop_columns, "Columns to ignore")->delimiter(',');
    app->add_flag("--drop-missing", d.drop_missing, "Drop rows with missing values instead of failing");
}

void add_train_flags(CLI::App* app, TrainFlags& t) {
    app->add_option("--k", t.k, "Number of mixture components")->capture_default_str();
    app->add_option("--layers", t.layers,
                    "Hidden layers: a count, a comma list of widths, or \"\" for a linear model")
        ->capture_default_str();
    app->add_option("--hidden", t.hidden, "Width used when --layers is a count")->capture_default_str();
    app->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
    app->add_option("--batch", t.batch, "Minibatch size")->capture_default_str();
    app->add_option("--epochs", t.epochs, "Maximum epochs")->capture_default_str();
    app->add_option("--patience", t.patience, "Early-stopping patience (0 disables)")->capture_default_str();
    app->add_option("--max-knots", t.max_knots, "Spline knot budget")->capture_default_str();
    app->add_option("--validation", t.validation, "Held-out fraction for early stopping")
        ->capture_default_str();
    app->add_flag("--no-prior", t.no_prior, "Leave the gating prior out of the E-step");
}

void add_eval_flags(CLI::App* app, EvalFlags& e, bool bootstrap) {
    app->add_option("--horizons", e.horizons, "Comma list of qNN event quantiles or times")
        ->capture_default_str();
    if (bootstrap) {
        app->add_option("--bootstrap", e.bootstrap, "Bootstrap replicates (0 disables)")
            ->capture_default_str();
    }
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Deep Cox mixture survival models", "coxmix"};
    app.set_config("--config", "", "INI/TOML file with option values");
    app.require_subcommand(1);
    bool verbose = false;
    bool quiet = false;
    std::uint64_t seed = 0;
    std::string out_dir;
    app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");
    app.add_flag("-q,--quiet", quiet, "Errors only");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Random seed")->capture_default_str();
        sub->add_option("--out", out_dir, "Output directory")->required();
    };

    SynthFlags synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort");
    synth_cmd->add_option("--preset", synth.preset, "ph, crossing or separated")->capture_default_str();
    synth_cmd->add_option("--synth-config", synth.synth_config, "JSON cohort description (overrides the preset)");
    synth_cmd->add_option("--n", synth.n, "Records")->capture_default_str();
    synth_cmd->add_option("--censoring", synth.censoring, "Target censored fraction")->capture_default_str();
    synth_cmd->add_option("--group-feature", synth.group_feature,
                          "Label records B when this feature exceeds --group-threshold");
    synth_cmd->add_option("--group-threshold", synth.group_threshold)->capture_default_str();
    add_common(synth_cmd);

    DataFlags train_data;
    TrainFlags train;
    auto* train_cmd = app.add_subcommand("train", "Fit a model");
    add_data_flags(train_cmd, train_data);
    add_train_flags(train_cmd, train);
    add_common(train_cmd);

    DataFlags eval_data;
    EvalFlags eval;
    std::string eval_model;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model");
    eval_cmd->add_option("--model", eval_model, "Model file")->required()->check(CLI::ExistingFile);
    add_data_flags(eval_cmd, eval_data);
    add_eval_flags(eval_cmd, eval, true);
    add_common(eval_cmd);

    DataFlags cv_data;
    TrainFlags cv_train;
    EvalFlags cv_eval;
    int folds = 5;
    bool grid = false;
    auto* cv_cmd = app.add_subcommand("cv", "Cross-validate with pooled held-out predictions");
    add_data_flags(cv_cmd, cv_data);
    add_train_flags(cv_cmd, cv_train);
    add_eval_flags(cv_cmd, cv_eval, true);
    cv_cmd->add_option("--folds", folds, "Number of folds")->capture_default_str();
    cv_cmd->add_flag("--grid", grid, "Sweep K {3,4,6} x layers {1,2} x width {50,100}");
    add_common(cv_cmd);

    DataFlags predict_data;
    EvalFlags predict;
    std::string predict_model;
    auto* predict_cmd = app.add_subcommand("predict", "Predicted survival at horizons");
    predict_cmd->add_option("--model", predict_model, "Model file")->required()->check(CLI::ExistingFile);
    add_data_flags(predict_cmd, predict_data);
    add_eval_flags(predict_cmd, predict, false);
    add_common(predict_cmd);

    std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
    std::reverse(rev.begin(), rev.end());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    const auto saved_level = log::level();
    log::set_level(quiet ? log::Level::error : verbose ? log::Level::info : log::Level::warn);
    struct Restore {
        log::Level level;
        ~Restore() { log::set_level(level); }
    } restore{saved_level};

    try {
        std::string echo;
        for (const auto* sub : app.get_subcommands()) {
            echo += fmt::format("[{}]\n{}", sub->get_name(), sub->config_to_str(true, false));
        }
        if (*synth_cmd) cmd_synth(synth, seed, out_dir, echo);
        if (*train_cmd) cmd_train(train_data, train, seed, out_dir, echo);
        if (*eval_cmd) cmd_eval(eval_data, eval, eval_model, seed, out_dir, echo);
        if (*cv_cmd) cmd_cv(cv_data, cv_train, cv_eval, folds, grid, seed, out_dir, echo);
        if (*predict_cmd) cmd_predict(predict_data, predict, predict_model, out_dir, echo);
        return kOk;
    } catch (const DataError& e) {
        std::cerr << "coxmix: data error: " << e.what() << '\n';
        return kDataError;
    } catch (const ModelFormatError& e) {
        std::cerr << "coxmix: model file error: " << e.what() << '\n';
        return kModelError;
    } catch (const TrainingError& e) {
        std::cerr << "coxmix: training failed: " << e.what() << '\n';
        return kTrainingError;
    } catch (const MetricError& e) {
        std::cerr << "coxmix: metric error: " << e.what() << '\n';
        return kMetricError;
    } catch (const std::exception& e) {
        std::cerr << "coxmix: " << e.what() << '\n';
        return kFailure;
    }
}

int run(int argc, const char* const* argv) {
    return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace coxmix::cli
