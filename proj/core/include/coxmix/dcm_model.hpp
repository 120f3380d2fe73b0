#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coxmix/cox_objective.hpp"
#include "coxmix/dataset.hpp"
#include "coxmix/neural.hpp"
#include "coxmix/spline.hpp"

namespace coxmix {

struct DcmConfig {
    int clusters = 3;
    std::vector<int> hidden_layers;  // widths; empty -> linear model on raw features
    double learning_rate = 1e-3;
    int batch_size = 128;
    int max_epochs = 50;
    int patience = 3;  // <= 0 disables early stopping
    std::uint64_t seed = 0;
    int max_knots = kDefaultMaxKnots;
    int baseline_refresh_epochs = 1;  // Breslow refresh every this many epochs
    bool use_prior_in_estep = true;
    double validation_fraction = 0.1;
    double grad_clip_norm = 10.0;

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;       // mean per-row Q-hat loss over the epoch's minibatches
    double validation_loss = 0.0;  // per-row Q-hat loss on the held-out split (NaN if none)
    int starved_clusters = 0;      // minibatch clusters skipped + baselines kept this epoch
    int degenerate_rows = 0;       // E-step rows reset to uniform
};

// A trained (or in-training) Deep Cox Mixture.
struct DcmModel {
    DcmConfig config;
    ModelParams params;
    std::vector<SplineSurvivalCurve> baselines;  // one per cluster
    std::vector<std::string> feature_names;
    std::optional<FeatureScaling> standardization;
    std::vector<double> horizon_quantiles;  // training event quantiles at 0.25, 0.5, 0.75
    std::vector<EpochLog> training_log;

    int clusters() const { return params.heads.clusters(); }
    int input_dim() const { return params.encoder.input_dim(); }

    HeadOutputs outputs(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd gating_probabilities(const Eigen::MatrixXd& x) const;

    // sum_k softmax_k(g(x)) * S~_k(t)^exp(f_k(x)); rows are records, columns
    // are the requested times. Features must already be in model space
    // (standardised with `standardization`).
    Eigen::MatrixXd predict_survival(const Eigen::MatrixXd& x, std::span<const double> times) const;
    double predict_survival(std::span<const double> x, double t) const;

    // Per-cluster survival S~_k(t)^exp(f_k(x)) for one record.
    Eigen::VectorXd cluster_survival(std::span<const double> x, double t) const;
};

// Builds a model with freshly initialised parameters and every baseline set
// to `initial_baseline`.
DcmModel make_model(const DcmConfig& config, int input_dim,
                    const SplineSurvivalCurve& initial_baseline);

// l_ik = delta_i log p_k(t_i | x_i) + (1 - delta_i) log S_k(t_i | x_i).
Eigen::MatrixXd row_log_likelihoods(const DcmModel& model, const SurvivalBatch& batch,
                                    const HeadOutputs& outputs);

struct PosteriorTable {
    Eigen::MatrixXd gamma;    // n x K, rows on the simplex
    std::vector<int> zeta;    // 0-based hard assignments
};

// Soft counts gamma_ik proportional to exp(l_ik) (times softmax_k(g) when the
// prior is enabled), normalised in log space. Rows that come out non-finite
// are replaced by the uniform row and counted in `degenerate_rows`.
Eigen::MatrixXd e_step(const DcmModel& model, const SurvivalBatch& batch,
                       int* degenerate_rows = nullptr);
Eigen::MatrixXd e_step(const DcmModel& model, const SurvivalBatch& batch,
                       const HeadOutputs& outputs, int* degenerate_rows = nullptr);

// Independent categorical draws, one per row.
std::vector<int> sample_assignments(const Eigen::MatrixXd& gamma, std::mt19937_64& rng);

// One Adam step on Q-hat for the batch. Returns the loss before the update.
QHatLoss m_step(DcmModel& model, AdamState& optimizer, const SurvivalBatch& batch,
                const Eigen::MatrixXd& gamma, std::span<const int> zeta);

// Per-cluster Breslow (using f_k) on the rows assigned to k, then spline fit.
// Clusters with fewer than two events keep their previous baseline. Returns
// the number of such clusters.
int update_baselines(DcmModel& model, const SurvivalBatch& data, std::span<const int> zeta);

// Q-hat loss per row on a held-out batch with assignments sampled from a
// generator seeded with `seed`, so repeated evaluations share random numbers.
double heldout_q_hat(const DcmModel& model, const SurvivalBatch& batch, std::uint64_t seed);

// Called after every epoch with the log entry just appended.
using EpochCallback = std::function<void(const DcmModel&, const EpochLog&)>;

// Monte Carlo EM. `ds` should already be standardised; its feature names and
// standardisation stats are copied into the model.
DcmModel fit(const SurvivalDataset& ds, const DcmConfig& config,
             const EpochCallback& on_epoch = {});

inline constexpr int kModelFormatVersion = 1;

void save_model(const DcmModel& model, const std::filesystem::path& path);
DcmModel load_model(const std::filesystem::path& path);

std::string model_to_string(const DcmModel& model);
DcmModel model_from_string(const std::string& text);

}  // namespace coxmix
