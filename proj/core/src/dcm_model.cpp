#include "coxmix/dcm_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "coxmix/error.hpp"
#include "coxmix/log.hpp"
#include "coxmix/survival_estimators.hpp"

namespace coxmix {

namespace {

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

Eigen::MatrixXd uniform_rows(Eigen::Index n, Eigen::Index k) {
    return Eigen::MatrixXd::Constant(n, k, 1.0 / static_cast<double>(k));
}

std::vector<int> layer_dims_for(const DcmConfig& config, int input_dim) {
    std::vector<int> dims{input_dim};
    dims.insert(dims.end(), config.hidden_layers.begin(), config.hidden_layers.end());
    return dims;
}

Eigen::MatrixXd row_as_matrix(std::span<const double> x) {
    Eigen::MatrixXd m(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = x[j];
    return m;
}

}  // namespace

void DcmConfig::validate() const {
    if (clusters < 1) throw Error("DcmConfig: clusters must be >= 1");
    if (batch_size < 2 * clusters) {
        throw Error(fmt::format("DcmConfig: batch_size {} must be at least 2K = {}", batch_size,
                                2 * clusters));
    }
    if (!(learning_rate > 0.0)) throw Error("DcmConfig: learning rate must be positive");
    if (max_epochs < 1) throw Error("DcmConfig: max_epochs must be >= 1");
    if (max_knots < 2) throw Error("DcmConfig: max_knots must be >= 2");
    if (baseline_refresh_epochs < 1) throw Error("DcmConfig: baseline_refresh_epochs must be >= 1");
    if (!(validation_fraction >= 0.0 && validation_fraction < 0.5)) {
        throw Error("DcmConfig: validation_fraction must lie in [0, 0.5)");
    }
    for (int w : hidden_layers) {
        if (w < 1) throw Error("DcmConfig: hidden layer widths must be positive");
    }
}

HeadOutputs DcmModel::outputs(const Eigen::MatrixXd& x) const {
    return heads_forward(params.heads, forward(params.encoder, x));
}

Eigen::MatrixXd DcmModel::gating_probabilities(const Eigen::MatrixXd& x) const {
    return softmax_rows(outputs(x).gating_logits);
}

Eigen::MatrixXd DcmModel::predict_survival(const Eigen::MatrixXd& x,
                                           std::span<const double> times) const {
    const auto out = outputs(x);
    const Eigen::MatrixXd prior = softmax_rows(out.gating_logits);
    const int k = clusters();
    Eigen::MatrixXd result(x.rows(), static_cast<Eigen::Index>(times.size()));
    std::vector<double> log_base(static_cast<std::size_t>(k));
    for (std::size_t h = 0; h < times.size(); ++h) {
        const double t = times[h];
        for (int c = 0; c < k; ++c) {
            log_base[static_cast<std::size_t>(c)] =
                std::log(baselines[static_cast<std::size_t>(c)].eval(t));
        }
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            double s = 0.0;
            for (int c = 0; c < k; ++c) {
                s += prior(i, c) *
                     std::exp(std::exp(out.log_hazards(i, c)) * log_base[static_cast<std::size_t>(c)]);
            }
            result(i, static_cast<Eigen::Index>(h)) = std::clamp(s, 0.0, 1.0);
        }
    }
    return result;
}

double DcmModel::predict_survival(std::span<const double> x, double t) const {
    const double times[] = {t};
    return predict_survival(row_as_matrix(x), times)(0, 0);
}

Eigen::VectorXd DcmModel::cluster_survival(std::span<const double> x, double t) const {
    const auto out = outputs(row_as_matrix(x));
    Eigen::VectorXd s(clusters());
    for (int c = 0; c < clusters(); ++c) {
        s(c) = std::exp(log_survival_given_cluster(baselines[static_cast<std::size_t>(c)],
                                                   out.log_hazards(0, c), t));
    }
    return s;
}

DcmModel make_model(const DcmConfig& config, int input_dim,
                    const SplineSurvivalCurve& initial_baseline) {
    config.validate();
    DcmModel model;
    model.config = config;
    const auto dims = layer_dims_for(config, input_dim);
    model.params = init_params(dims, config.clusters, config.seed);
    model.baselines.assign(static_cast<std::size_t>(config.clusters), initial_baseline);
    return model;
}

Eigen::MatrixXd row_log_likelihoods(const DcmModel& model, const SurvivalBatch& batch,
                                    const HeadOutputs& outputs) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    const int k = model.clusters();
    Eigen::MatrixXd ll(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = batch.times[static_cast<std::size_t>(i)];
        const bool event = batch.events[static_cast<std::size_t>(i)] == 1;
        for (int c = 0; c < k; ++c) {
            const auto& base = model.baselines[static_cast<std::size_t>(c)];
            const double f = outputs.log_hazards(i, c);
            ll(i, c) = event ? log_density_given_cluster(base, f, t)
                             : log_survival_given_cluster(base, f, t);
        }
    }
    return ll;
}

Eigen::MatrixXd e_step(const DcmModel& model, const SurvivalBatch& batch,
                       const HeadOutputs& outputs, int* degenerate_rows) {
    Eigen::MatrixXd logw = row_log_likelihoods(model, batch, outputs);
    if (model.config.use_prior_in_estep) logw += log_softmax_rows(outputs.gating_logits);

    const Eigen::Index k = logw.cols();
    Eigen::MatrixXd gamma(logw.rows(), k);
    int degenerate = 0;
    for (Eigen::Index i = 0; i < logw.rows(); ++i) {
        const double m = logw.row(i).maxCoeff();
        bool ok = std::isfinite(m);
        if (ok) {
            gamma.row(i) = (logw.row(i).array() - m).exp();
            const double s = gamma.row(i).sum();
            ok = std::isfinite(s) && s > 0.0;
            if (ok) gamma.row(i) /= s;
        }
        if (!ok) {
            gamma.row(i).setConstant(1.0 / static_cast<double>(k));
            ++degenerate;
        }
    }
    if (degenerate_rows) *degenerate_rows += degenerate;
    return gamma;
}

Eigen::MatrixXd e_step(const DcmModel& model, const SurvivalBatch& batch, int* degenerate_rows) {
    return e_step(model, batch, model.outputs(batch.features), degenerate_rows);
}

std::vector<int> sample_assignments(const Eigen::MatrixXd& gamma, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::Index k = gamma.cols();
    std::vector<int> zeta(static_cast<std::size_t>(gamma.rows()));
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
        const double u = unit(rng);
        double cum = 0.0;
        int pick = -1;
        int last_positive = 0;
        for (Eigen::Index c = 0; c < k; ++c) {
            if (gamma(i, c) > 0.0) last_positive = static_cast<int>(c);
            cum += gamma(i, c);
            if (pick < 0 && u < cum && gamma(i, c) > 0.0) pick = static_cast<int>(c);
        }
        zeta[static_cast<std::size_t>(i)] = pick >= 0 ? pick : last_positive;
    }
    return zeta;
}

QHatLoss m_step(DcmModel& model, AdamState& optimizer, const SurvivalBatch& batch,
                const Eigen::MatrixXd& gamma, std::span<const int> zeta) {
    ForwardCache cache;
    forward(model.params.encoder, batch.features, &cache);
    const auto out = heads_forward(model.params.heads, cache.representation);
    auto loss = q_hat(batch.times, batch.events, gamma, zeta, out.log_hazards, out.gating_logits);
    if (!std::isfinite(loss.loss)) throw TrainingError("M-step: non-finite Q-hat loss");
    auto grads = backward(model.params, cache, loss.d_log_hazards, loss.d_gating_logits);
    if (model.config.grad_clip_norm > 0.0) clip_global_norm(grads, model.config.grad_clip_norm);
    adam_step(model.params, grads, optimizer);
    if (!model.params.all_finite()) throw TrainingError("M-step: parameters became non-finite");
    return loss;
}

int update_baselines(DcmModel& model, const SurvivalBatch& data, std::span<const int> zeta) {
    if (zeta.size() != data.size()) throw DataError("update_baselines: one assignment per row");
    const auto out = model.outputs(data.features);
    const int k = model.clusters();
    int starved = 0;
    std::vector<double> t;
    std::vector<int> e;
    std::vector<double> f;
    for (int c = 0; c < k; ++c) {
        t.clear();
        e.clear();
        f.clear();
        int events = 0;
        for (std::size_t i = 0; i < zeta.size(); ++i) {
            if (zeta[i] != c) continue;
            t.push_back(data.times[i]);
            e.push_back(data.events[i]);
            f.push_back(out.log_hazards(static_cast<Eigen::Index>(i), c));
            events += data.events[i];
        }
        if (events < 2) {
            ++starved;
            continue;
        }
        model.baselines[static_cast<std::size_t>(c)] =
            fit_spline(breslow(t, e, f), model.config.max_knots);
    }
    return starved;
}

double heldout_q_hat(const DcmModel& model, const SurvivalBatch& batch, std::uint64_t seed) {
    if (batch.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    const auto out = model.outputs(batch.features);
    const auto gamma = e_step(model, batch, out);
    auto rng = stream(seed, 0x51);
    const auto zeta = sample_assignments(gamma, rng);
    const auto loss =
        q_hat(batch.times, batch.events, gamma, zeta, out.log_hazards, out.gating_logits);
    return loss.loss / static_cast<double>(batch.size());
}

DcmModel fit(const SurvivalDataset& ds, const DcmConfig& config, const EpochCallback& on_epoch) {
    config.validate();
    if (ds.empty()) throw DataError("fit: empty dataset");
    if (ds.event_count() == 0) throw DataError("fit: dataset has no events");

    const std::size_t n = ds.size();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> train_idx = all;
    std::vector<std::size_t> val_idx;
    const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction *
                                                           static_cast<double>(n)));
    if (n_val >= 2 && n - n_val >= 2) {
        auto split_rng = stream(config.seed, 0x11);
        std::shuffle(all.begin(), all.end(), split_rng);
        val_idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
        train_idx.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
        std::sort(val_idx.begin(), val_idx.end());
        std::sort(train_idx.begin(), train_idx.end());
    }

    const SurvivalBatch full = make_batch(ds);
    const SurvivalBatch train = full.rows(train_idx);
    const SurvivalBatch val = full.rows(val_idx);
    if (std::accumulate(train.events.begin(), train.events.end(), 0) == 0) {
        throw DataError("fit: training split has no events");
    }

    const auto pooled = fit_spline(kaplan_meier(train.times, train.events), config.max_knots);
    DcmModel model = make_model(config, static_cast<int>(ds.dim()), pooled);
    model.feature_names = ds.feature_names();
    model.standardization = ds.standardization();
    {
        const double probs[] = {0.25, 0.5, 0.75};
        model.horizon_quantiles = event_quantiles(train.times, train.events, probs);
    }

    AdamState optimizer = AdamState::for_params(model.params, {config.learning_rate});
    auto batch_rng = stream(config.seed, 0x21);
    auto assign_rng = stream(config.seed, 0x31);
    const std::uint64_t val_seed = config.seed ^ 0x9E3779B97F4A7C15ULL;
    const int k = config.clusters;
    const auto bs = static_cast<std::size_t>(config.batch_size);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::optional<DcmModel> best;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), batch_rng);
        EpochLog entry;
        entry.epoch = epoch;
        double loss_sum = 0.0;
        std::size_t rows_seen = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const std::size_t stop = std::min(order.size(), start + bs);
            if (stop - start < 2) continue;
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            const SurvivalBatch batch = train.rows(rows);

            Eigen::MatrixXd gamma;
            if (epoch == 0) {
                gamma = uniform_rows(static_cast<Eigen::Index>(batch.size()), k);
            } else {
                gamma = e_step(model, batch, &entry.degenerate_rows);
            }
            const auto zeta = sample_assignments(gamma, assign_rng);
            const auto loss = m_step(model, optimizer, batch, gamma, zeta);
            if (!std::isfinite(loss.loss)) {
                throw TrainingError(fmt::format("non-finite loss at epoch {}, batch starting {}",
                                                epoch, start));
            }
            loss_sum += loss.loss;
            rows_seen += batch.size();
            entry.starved_clusters += loss.starved_clusters;
        }
        entry.train_loss = rows_seen > 0 ? loss_sum / static_cast<double>(rows_seen) : 0.0;

        if ((epoch + 1) % config.baseline_refresh_epochs == 0 || epoch + 1 == config.max_epochs) {
            const auto gamma = e_step(model, train, &entry.degenerate_rows);
            const auto zeta = sample_assignments(gamma, assign_rng);
            entry.starved_clusters += update_baselines(model, train, zeta);
        }

        entry.validation_loss = val.size() > 0 ? heldout_q_hat(model, val, val_seed)
                                               : std::numeric_limits<double>::quiet_NaN();
        if (val.size() > 0 && !std::isfinite(entry.validation_loss)) {
            throw TrainingError(fmt::format("non-finite validation loss at epoch {}", epoch));
        }
        model.training_log.push_back(entry);
        log::debug(fmt::format("epoch {} train {:.6f} validation {:.6f}", epoch, entry.train_loss,
                               entry.validation_loss));
        if (on_epoch) on_epoch(model, entry);

        if (val.size() > 0) {
            if (entry.validation_loss < best_loss) {
                best_loss = entry.validation_loss;
                best = model;
                since_best = 0;
            } else if (config.patience > 0 && ++since_best >= config.patience) {
                break;
            }
        }
    }

    if (best) {
        best->training_log = model.training_log;
        return *std::move(best);
    }
    return model;
}

}  // namespace coxmix
