#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace coxmix {

// Affine map y = x W^T + b applied row-wise; weight is out x in.
struct DenseLayer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }
};

// Encoder Phi: R^d -> R^h. Hidden layers use ReLU; with no hidden layers the
// encoder is the identity and the heads see the raw features.
struct MlpParams {
    std::vector<int> layer_dims;  // [d, h1, ..., h]
    std::vector<DenseLayer> layers;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
};

// Linear heads on the representation: f gives K log hazard ratios and g gives
// K gating logits.
struct HeadParams {
    DenseLayer f;
    DenseLayer g;

    int clusters() const { return static_cast<int>(f.out_dim()); }
};

// Everything trained by the M-step. Also used as the gradient container.
struct ModelParams {
    MlpParams encoder;
    HeadParams heads;

    // Views over every tensor in a fixed order (encoder layers, then f, then g;
    // weight before bias).
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::size_t parameter_count() const;

    ModelParams zeros_like() const;
    bool all_finite() const;
};

// Glorot-uniform weights (bounds +-sqrt(6 / (fan_in + fan_out))), zero biases.
ModelParams init_params(std::span<const int> layer_dims, int clusters, std::uint64_t seed);

struct ForwardCache {
    std::vector<Eigen::MatrixXd> inputs;          // input to each encoder layer
    std::vector<Eigen::MatrixXd> pre_activations; // x W^T + b of each encoder layer
    Eigen::MatrixXd representation;
};

// x~ = Phi(x) for a batch (one row per record). Throws on a dimension mismatch.
Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& x,
                        ForwardCache* cache = nullptr);

struct HeadOutputs {
    Eigen::MatrixXd log_hazards;    // n x K
    Eigen::MatrixXd gating_logits;  // n x K
};

HeadOutputs heads_forward(const HeadParams& heads, const Eigen::MatrixXd& representation);

// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);
Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits);

// Gradients of a scalar loss with respect to every parameter, given the loss
// gradients with respect to the head outputs of the cached forward pass.
ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& d_log_hazards, const Eigen::MatrixXd& d_gating_logits);

// Scales `grads` in place so its global L2 norm is at most max_norm. Returns
// the norm before clipping.
double clip_global_norm(ModelParams& grads, double max_norm);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    long step = 0;

    static AdamState for_params(const ModelParams& params, AdamConfig config = {});
};

// One bias-corrected Adam update on a flat tensor. `step` is the 1-based
// iteration number already incremented for this update.
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> first_moment, std::span<double> second_moment, long step,
                 const AdamConfig& config);

// Adam step over all tensors. Throws TrainingError on a non-finite gradient
// (parameters are left untouched in that case).
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state);

}  // namespace coxmix
