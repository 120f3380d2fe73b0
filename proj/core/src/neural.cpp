#include "coxmix/neural.hpp"

#include <cmath>
#include <random>
#include <utility>

#include <fmt/format.h>

#include "coxmix/error.hpp"

namespace coxmix {

namespace {

std::span<double> view(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> view(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> view(const Eigen::MatrixXd& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> view(const Eigen::VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

DenseLayer glorot_layer(int in, int out, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
    return layer;
}

DenseLayer zeros_like(const DenseLayer& l) {
    return {Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
            Eigen::VectorXd::Zero(l.bias.size())};
}

Eigen::MatrixXd affine(const DenseLayer& layer, const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out = x * layer.weight.transpose();
    out.rowwise() += layer.bias.transpose();
    return out;
}

void accumulate_layer_grad(DenseLayer& grad, const Eigen::MatrixXd& input,
                           const Eigen::MatrixXd& d_out) {
    grad.weight.noalias() += d_out.transpose() * input;
    grad.bias += d_out.colwise().sum().transpose();
}

}  // namespace

std::vector<std::span<double>> ModelParams::tensors() {
    std::vector<std::span<double>> out;
    for (auto& l : encoder.layers) {
        out.push_back(view(l.weight));
        out.push_back(view(l.bias));
    }
    out.push_back(view(heads.f.weight));
    out.push_back(view(heads.f.bias));
    out.push_back(view(heads.g.weight));
    out.push_back(view(heads.g.bias));
    return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
    std::vector<std::span<const double>> out;
    for (const auto& l : encoder.layers) {
        out.push_back(view(l.weight));
        out.push_back(view(l.bias));
    }
    out.push_back(view(heads.f.weight));
    out.push_back(view(heads.f.bias));
    out.push_back(view(heads.g.weight));
    out.push_back(view(heads.g.bias));
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.size();
    return n;
}

ModelParams ModelParams::zeros_like() const {
    ModelParams z;
    z.encoder.layer_dims = encoder.layer_dims;
    for (const auto& l : encoder.layers) z.encoder.layers.push_back(coxmix::zeros_like(l));
    z.heads.f = coxmix::zeros_like(heads.f);
    z.heads.g = coxmix::zeros_like(heads.g);
    return z;
}

bool ModelParams::all_finite() const {
    for (const auto& t : tensors()) {
        for (double v : t) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

ModelParams init_params(std::span<const int> layer_dims, int clusters, std::uint64_t seed) {
    if (layer_dims.empty()) throw Error("init_params: layer_dims must contain the input dimension");
    if (clusters < 1) throw Error("init_params: need at least one cluster");
    for (int d : layer_dims) {
        if (d < 1) throw Error("init_params: layer dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.encoder.layer_dims.assign(layer_dims.begin(), layer_dims.end());
    for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
        p.encoder.layers.push_back(glorot_layer(layer_dims[i], layer_dims[i + 1], rng));
    }
    const int h = layer_dims.back();
    p.heads.f = glorot_layer(h, clusters, rng);
    p.heads.g = glorot_layer(h, clusters, rng);
    return p;
}

Eigen::MatrixXd forward(const MlpParams& params, const Eigen::MatrixXd& x, ForwardCache* cache) {
    if (x.cols() != params.input_dim()) {
        throw DataError(fmt::format("encoder expects {} features, got {}", params.input_dim(),
                                    x.cols()));
    }
    if (cache) {
        cache->inputs.clear();
        cache->pre_activations.clear();
    }
    Eigen::MatrixXd h = x;
    for (const auto& layer : params.layers) {
        Eigen::MatrixXd z = affine(layer, h);
        if (cache) {
            cache->inputs.push_back(std::move(h));
            cache->pre_activations.push_back(z);
        }
        h = z.cwiseMax(0.0);
    }
    if (cache) cache->representation = h;
    return h;
}

HeadOutputs heads_forward(const HeadParams& heads, const Eigen::MatrixXd& representation) {
    if (representation.cols() != heads.f.in_dim()) {
        throw DataError(fmt::format("heads expect representation width {}, got {}",
                                    heads.f.in_dim(), representation.cols()));
    }
    return {affine(heads.f, representation), affine(heads.g, representation)};
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        out.row(i) = (logits.row(i).array() - m).exp();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

ModelParams backward(const ModelParams& params, const ForwardCache& cache,
                     const Eigen::MatrixXd& d_log_hazards, const Eigen::MatrixXd& d_gating_logits) {
    const auto& rep = cache.representation;
    const int k = params.heads.clusters();
    if (d_log_hazards.rows() != rep.rows() || d_gating_logits.rows() != rep.rows() ||
        d_log_hazards.cols() != k || d_gating_logits.cols() != k) {
        throw DataError("backward: upstream gradient shape does not match the forward pass");
    }
    if (cache.inputs.size() != params.encoder.layers.size()) {
        throw DataError("backward: cache was produced by a different encoder");
    }

    ModelParams grads = params.zeros_like();
    accumulate_layer_grad(grads.heads.f, rep, d_log_hazards);
    accumulate_layer_grad(grads.heads.g, rep, d_gating_logits);

    if (params.encoder.layers.empty()) return grads;

    Eigen::MatrixXd d_h = d_log_hazards * params.heads.f.weight +
                          d_gating_logits * params.heads.g.weight;
    for (std::size_t li = params.encoder.layers.size(); li-- > 0;) {
        const auto& z = cache.pre_activations[li];
        Eigen::MatrixXd d_z = d_h.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
        accumulate_layer_grad(grads.encoder.layers[li], cache.inputs[li], d_z);
        if (li > 0) d_h = d_z * params.encoder.layers[li].weight;
    }
    return grads;
}

double clip_global_norm(ModelParams& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& t : std::as_const(grads).tensors()) {
        for (double g : t) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
        const double scale = max_norm / norm;
        for (auto t : grads.tensors()) {
            for (double& g : t) g *= scale;
        }
    }
    return norm;
}

AdamState AdamState::for_params(const ModelParams& params, AdamConfig config) {
    AdamState s;
    s.config = config;
    for (const auto& t : params.tensors()) {
        s.first_moment.emplace_back(t.size(), 0.0);
        s.second_moment.emplace_back(t.size(), 0.0);
    }
    return s;
}

void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> first_moment, std::span<double> second_moment, long step,
                 const AdamConfig& config) {
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        first_moment[i] = config.beta1 * first_moment[i] + (1.0 - config.beta1) * grad[i];
        second_moment[i] =
            config.beta2 * second_moment[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double m_hat = first_moment[i] / c1;
        const double v_hat = second_moment[i] / c2;
        param[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state) {
    auto p = params.tensors();
    const auto g = grads.tensors();
    if (p.size() != g.size() || p.size() != state.first_moment.size()) {
        throw DataError("adam_step: parameter, gradient and state layouts differ");
    }
    for (std::size_t t = 0; t < p.size(); ++t) {
        if (p[t].size() != g[t].size() || p[t].size() != state.first_moment[t].size()) {
            throw DataError("adam_step: tensor shape mismatch");
        }
        for (double v : g[t]) {
            if (!std::isfinite(v)) throw TrainingError("adam_step: non-finite gradient");
        }
    }
    ++state.step;
    for (std::size_t t = 0; t < p.size(); ++t) {
        adam_update(p[t], g[t], state.first_moment[t], state.second_moment[t], state.step,
                    state.config);
    }
}

}  // namespace coxmix
