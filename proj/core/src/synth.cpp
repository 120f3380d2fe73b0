#include "coxmix/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <json.hpp>

#include "coxmix/error.hpp"

namespace coxmix {

using nlohmann::json;

namespace {

constexpr int kMaxBisectionSteps = 60;
constexpr double kCensoringTolerance = 0.02;

double dot(const std::vector<double>& w, std::span<const double> x) {
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
    return s;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return std::mt19937_64(seq);
}

double censored_share(const std::vector<double>& t, const std::vector<double>& e, double rate) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (e[i] / rate < t[i]) ++c;
    }
    return static_cast<double>(c) / static_cast<double>(t.size());
}

}  // namespace

double LatentCluster::cumulative_hazard(double t) const {
    if (t <= 0.0) return 0.0;
    return family == BaselineFamily::exponential ? rate * t : std::pow(t / scale, shape);
}

double LatentCluster::inverse_cumulative_hazard(double h) const {
    return family == BaselineFamily::exponential ? h / rate : scale * std::pow(h, 1.0 / shape);
}

void SynthConfig::validate() const {
    if (n < 2) throw Error("synth: n must be at least 2");
    if (d < 1) throw Error("synth: d must be at least 1");
    if (clusters.empty()) throw Error("synth: at least one latent cluster required");
    if (!(censoring_fraction >= 0.0 && censoring_fraction <= 0.95)) {
        throw Error(fmt::format("synth: censoring fraction {} outside [0, 0.95]", censoring_fraction));
    }
    for (std::size_t k = 0; k < clusters.size(); ++k) {
        const auto& c = clusters[k];
        if (c.beta.size() != static_cast<std::size_t>(d) ||
            c.gating.size() != static_cast<std::size_t>(d)) {
            throw Error(fmt::format("synth: cluster {} coefficients must have length {}", k, d));
        }
        const bool ok = c.family == BaselineFamily::exponential ? c.rate > 0.0
                                                                : c.shape > 0.0 && c.scale > 0.0;
        if (!ok) throw Error(fmt::format("synth: cluster {} baseline parameters must be positive", k));
    }
    if (group_feature && (*group_feature < 0 || *group_feature >= d)) {
        throw Error("synth: group feature index out of range");
    }
}

Eigen::VectorXd true_gating(const SynthConfig& config, std::span<const double> x) {
    const int k_count = config.clusters_count();
    Eigen::VectorXd logits(k_count);
    for (int k = 0; k < k_count; ++k) logits(k) = dot(config.clusters[k].gating, x);
    logits.array() -= logits.maxCoeff();
    Eigen::VectorXd p = logits.array().exp();
    return p / p.sum();
}

double true_cluster_survival(const LatentCluster& cluster, std::span<const double> x, double t) {
    return std::exp(-cluster.cumulative_hazard(t) * std::exp(dot(cluster.beta, x)));
}

double true_survival(const SynthConfig& config, std::span<const double> x, double t) {
    const auto p = true_gating(config, x);
    double s = 0.0;
    for (int k = 0; k < config.clusters_count(); ++k) {
        s += p(k) * true_cluster_survival(config.clusters[k], x, t);
    }
    return s;
}

SynthCohort synthesize(const SynthConfig& config) {
    config.validate();
    const std::size_t n = config.n;
    const auto d = static_cast<std::size_t>(config.d);
    auto rng_x = stream(config.seed, 1);
    auto rng_z = stream(config.seed, 2);
    auto rng_t = stream(config.seed, 3);
    auto rng_c = stream(config.seed, 4);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif;
    std::exponential_distribution<double> expo(1.0);

    std::vector<std::vector<double>> xs(n, std::vector<double>(d));
    std::vector<int> z(n);
    std::vector<double> t(n);
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : xs[i]) v = normal(rng_x);
        const auto p = true_gating(config, xs[i]);
        const double u = unif(rng_z);
        double acc = 0.0;
        int k = config.clusters_count() - 1;
        for (int j = 0; j < config.clusters_count(); ++j) {
            acc += p(j);
            if (u < acc) {
                k = j;
                break;
            }
        }
        z[i] = k;
        const auto& c = config.clusters[k];
        t[i] = c.inverse_cumulative_hazard(expo(rng_t) / std::exp(dot(c.beta, xs[i])));
        e[i] = expo(rng_c);
    }

    SynthCohort out;
    out.config = config;
    out.latent = z;
    if (config.censoring_fraction > 0.0) {
        // Share censored grows with the rate; bisect on log rate.
        double lo = -30.0;
        double hi = 30.0;
        double rate = 1.0;
        double share = 0.0;
        bool converged = false;
        for (int step = 0; step < kMaxBisectionSteps; ++step) {
            const double mid = 0.5 * (lo + hi);
            rate = std::exp(mid);
            share = censored_share(t, e, rate);
            if (std::abs(share - config.censoring_fraction) <= 0.25 * kCensoringTolerance) {
                converged = true;
                break;
            }
            (share < config.censoring_fraction ? lo : hi) = mid;
        }
        if (!converged && std::abs(share - config.censoring_fraction) > kCensoringTolerance) {
            throw Error(fmt::format(
                "synth: censoring calibration did not reach {} within {} bisection steps (got {})",
                config.censoring_fraction, kMaxBisectionSteps, share));
        }
        out.censoring_rate = rate;
    }

    std::vector<SurvivalRecord> records(n);
    std::size_t censored = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = records[i];
        r.features = xs[i];
        r.time = t[i];
        r.event = 1;
        if (out.censoring_rate > 0.0) {
            const double c = e[i] / out.censoring_rate;
            if (c < t[i]) {
                r.time = c;
                r.event = 0;
                ++censored;
            }
        }
        if (config.group_feature) {
            r.group = xs[i][static_cast<std::size_t>(*config.group_feature)] > config.group_threshold
                          ? "B"
                          : "A";
        }
    }
    out.censored_fraction = static_cast<double>(censored) / static_cast<double>(n);

    std::vector<std::string> names(d);
    for (std::size_t j = 0; j < d; ++j) names[j] = fmt::format("x{}", j);
    out.dataset = SurvivalDataset(std::move(records), std::move(names));
    return out;
}

SynthConfig synth_preset(const std::string& name, std::size_t n, double censoring_fraction,
                         std::uint64_t seed) {
    SynthConfig c;
    c.n = n;
    c.d = 3;
    c.censoring_fraction = censoring_fraction;
    c.seed = seed;
    auto cluster = [](double rate, std::vector<double> beta, std::vector<double> gating) {
        LatentCluster k;
        k.rate = rate;
        k.beta = std::move(beta);
        k.gating = std::move(gating);
        return k;
    };
    if (name == "ph") {
        c.clusters = {cluster(1.0, {1.0, -0.5, 0.25}, {0.0, 0.0, 0.0})};
    } else if (name == "crossing") {
        // The fast cluster is strongly heterogeneous in x1, so its pooled curve
        // flattens out and crosses the slow, homogeneous one.
        c.clusters = {cluster(1.0, {0.0, 0.0, 0.0}, {2.0, 0.0, 0.0}),
                      cluster(3.0, {0.0, 2.0, 0.0}, {-2.0, 0.0, 0.0})};
    } else if (name == "separated") {
        c.clusters = {cluster(0.1, {0.0, 0.0, 0.0}, {3.0, 0.0, 0.0}),
                      cluster(10.0, {0.0, 0.0, 0.0}, {-3.0, 0.0, 0.0})};
    } else {
        throw Error(fmt::format("unknown synthetic preset '{}' (expected ph, crossing, separated)",
                                name));
    }
    return c;
}

namespace {

json cluster_to_json(const LatentCluster& c) {
    json j = {{"family", c.family == BaselineFamily::exponential ? "exponential" : "weibull"},
              {"beta", c.beta},
              {"gating", c.gating}};
    if (c.family == BaselineFamily::exponential) {
        j["rate"] = c.rate;
    } else {
        j["shape"] = c.shape;
        j["scale"] = c.scale;
    }
    return j;
}

json config_json(const SynthConfig& c) {
    json clusters = json::array();
    for (const auto& k : c.clusters) clusters.push_back(cluster_to_json(k));
    json j = {{"n", c.n},
              {"d", c.d},
              {"clusters", clusters},
              {"censoring_fraction", c.censoring_fraction},
              {"seed", c.seed}};
    if (c.group_feature) {
        j["group_feature"] = *c.group_feature;
        j["group_threshold"] = c.group_threshold;
    }
    return j;
}

}  // namespace

std::string synth_config_to_json(const SynthConfig& config) { return config_json(config).dump(1); }

SynthConfig synth_config_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        SynthConfig c;
        c.n = j.value("n", c.n);
        c.d = j.value("d", c.d);
        c.censoring_fraction = j.value("censoring_fraction", c.censoring_fraction);
        c.seed = j.value("seed", c.seed);
        if (j.contains("group_feature")) {
            c.group_feature = j["group_feature"].get<int>();
            c.group_threshold = j.value("group_threshold", 0.0);
        }
        for (const auto& k : j.at("clusters")) {
            LatentCluster lc;
            const auto family = k.value("family", std::string{"exponential"});
            if (family == "exponential") {
                lc.family = BaselineFamily::exponential;
                lc.rate = k.at("rate").get<double>();
            } else if (family == "weibull") {
                lc.family = BaselineFamily::weibull;
                lc.shape = k.at("shape").get<double>();
                lc.scale = k.at("scale").get<double>();
            } else {
                throw Error(fmt::format("synth config: unknown baseline family '{}'", family));
            }
            lc.beta = k.at("beta").get<std::vector<double>>();
            lc.gating = k.value("gating", std::vector<double>(static_cast<std::size_t>(c.d), 0.0));
            c.clusters.push_back(std::move(lc));
        }
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(fmt::format("synth config: {}", e.what()));
    }
}

void write_sidecar(const SynthCohort& cohort, const std::filesystem::path& path) {
    json j = {{"config", config_json(cohort.config)},
              {"censoring_rate", cohort.censoring_rate},
              {"censored_fraction", cohort.censored_fraction},
              {"latent", cohort.latent}};
    std::ofstream out(path);
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    out << j.dump(1) << '\n';
}

}  // namespace coxmix
