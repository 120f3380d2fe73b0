#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coxmix/dataset.hpp"

namespace coxmix {

enum class BaselineFamily { exponential, weibull };

// One latent subgroup: a proportional-hazards model with a parametric baseline.
//   exponential: Lambda0(t) = rate * t
//   weibull:     Lambda0(t) = (t / scale)^shape
struct LatentCluster {
    BaselineFamily family = BaselineFamily::exponential;
    double rate = 1.0;
    double shape = 1.0;
    double scale = 1.0;
    std::vector<double> beta;    // hazard coefficients, length d
    std::vector<double> gating;  // gating coefficients, length d

    double cumulative_hazard(double t) const;
    double inverse_cumulative_hazard(double h) const;
};

struct SynthConfig {
    std::size_t n = 1000;
    int d = 3;
    std::vector<LatentCluster> clusters;
    double censoring_fraction = 0.0;  // target share of censored records, in [0, 0.95]
    std::uint64_t seed = 0;
    // Records with x[group_feature] > group_threshold get label "B", others "A".
    std::optional<int> group_feature;
    double group_threshold = 0.0;

    int clusters_count() const { return static_cast<int>(clusters.size()); }
    void validate() const;
};

struct SynthCohort {
    SynthConfig config;
    SurvivalDataset dataset;
    std::vector<int> latent;       // 0-based generating cluster per record
    double censoring_rate = 0.0;   // rate of the exponential censoring distribution (0: none)
    double censored_fraction = 0.0;
};

// x ~ N(0, I), z ~ Categorical(softmax(W x)), T | z, x by inverse transform,
// independent exponential censoring with its rate set by bisection.
SynthCohort synthesize(const SynthConfig& config);

// Ground-truth survival sum_k softmax_k(W x) exp(-Lambda0_k(t) exp(beta_k . x)).
double true_survival(const SynthConfig& config, std::span<const double> x, double t);
double true_cluster_survival(const LatentCluster& cluster, std::span<const double> x, double t);
Eigen::VectorXd true_gating(const SynthConfig& config, std::span<const double> x);

// Named fixtures over d = 3 features: "ph", "crossing", "separated".
SynthConfig synth_preset(const std::string& name, std::size_t n, double censoring_fraction,
                         std::uint64_t seed);

// Sidecar with the generating config, censoring rate and latent labels.
void write_sidecar(const SynthCohort& cohort, const std::filesystem::path& path);
std::string synth_config_to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const std::string& text);

}  // namespace coxmix
