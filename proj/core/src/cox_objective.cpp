#include "coxmix/cox_objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "coxmix/error.hpp"
#include "coxmix/neural.hpp"

namespace coxmix {

RiskSetIndex::RiskSetIndex(std::span<const double> times, std::span<const int> events) {
    if (times.size() != events.size()) throw DataError("times and events differ in length");
    order_.resize(times.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(),
                     [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
    std::size_t p = 0;
    while (p < order_.size()) {
        const double t = times[order_[p]];
        std::size_t q = p;
        int d = 0;
        while (q < order_.size() && times[order_[q]] == t) {
            d += events[order_[q]];
            ++q;
        }
        groups_.push_back({p, q, t, d});
        event_count_ += static_cast<std::size_t>(d);
        p = q;
    }
}

LogLikelihood partial_log_likelihood(std::span<const double> log_hazards,
                                     std::span<const double> times, std::span<const int> events) {
    const std::size_t n = times.size();
    if (log_hazards.size() != n || events.size() != n) {
        throw DataError("partial likelihood inputs differ in length");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(log_hazards[i]) || !std::isfinite(times[i])) {
            throw DataError("partial likelihood: non-finite input");
        }
        if (events[i] != 0 && events[i] != 1) {
            throw DataError("partial likelihood: event flags must be 0/1");
        }
    }

    LogLikelihood out{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
    const RiskSetIndex index(times, events);
    if (index.event_count() == 0) return out;

    const auto& order = index.order();
    const auto& groups = index.groups();

    // Descending pass: log of the risk-set sum at each tie group.
    std::vector<double> log_risk(groups.size());
    double lse = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t p = groups[g].begin; p < groups[g].end; ++p) {
            const double f = log_hazards[order[p]];
            const double hi = std::max(lse, f);
            lse = hi + std::log(std::exp(lse - hi) + std::exp(f - hi));
        }
        log_risk[g] = lse;
        for (std::size_t p = groups[g].begin; p < groups[g].end; ++p) {
            const std::size_t i = order[p];
            if (events[i] == 1) out.value += log_hazards[i] - lse;
        }
    }

    // Ascending pass: row i is in the risk set of every event group with time
    // <= t_i, so its gradient is delta_i - exp(f_i) * sum_g d_g / R_g. The sum is
    // kept as a scaled log-sum-exp to survive very negative risk-set logs.
    double log_cum = -std::numeric_limits<double>::infinity();  // log sum_g d_g / R_g
    for (std::size_t g = groups.size(); g-- > 0;) {
        if (groups[g].events > 0) {
            const double term = std::log(static_cast<double>(groups[g].events)) - log_risk[g];
            const double hi = std::max(log_cum, term);
            log_cum = hi + std::log(std::exp(log_cum - hi) + std::exp(term - hi));
        }
        for (std::size_t p = groups[g].begin; p < groups[g].end; ++p) {
            const std::size_t i = order[p];
            const double weight = std::isfinite(log_cum) ? std::exp(log_hazards[i] + log_cum) : 0.0;
            out.gradient(static_cast<Eigen::Index>(i)) = events[i] - weight;
        }
    }
    return out;
}

GatingLogLikelihood gating_cross_entropy(const Eigen::MatrixXd& gamma,
                                         const Eigen::MatrixXd& gating_logits) {
    if (gamma.rows() != gating_logits.rows() || gamma.cols() != gating_logits.cols()) {
        throw DataError("gating: gamma and logits differ in shape");
    }
    for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
        const double s = gamma.row(i).sum();
        if (std::abs(s - 1.0) > 1e-6 || gamma.row(i).minCoeff() < -1e-12) {
            throw DataError(fmt::format("gating: gamma row {} is not on the simplex (sum {})", i, s));
        }
    }
    const Eigen::MatrixXd log_p = log_softmax_rows(gating_logits);
    GatingLogLikelihood out;
    out.value = (gamma.array() * log_p.array()).sum();
    out.gradient = gamma - log_p.array().exp().matrix();
    return out;
}

QHatLoss q_hat(std::span<const double> times, std::span<const int> events,
               const Eigen::MatrixXd& gamma, std::span<const int> zeta,
               const Eigen::MatrixXd& log_hazards, const Eigen::MatrixXd& gating_logits) {
    const auto n = static_cast<Eigen::Index>(times.size());
    const Eigen::Index k = log_hazards.cols();
    if (events.size() != times.size() || zeta.size() != times.size() || log_hazards.rows() != n ||
        gating_logits.rows() != n || gating_logits.cols() != k) {
        throw DataError("q_hat: inconsistent batch shapes");
    }

    const auto gating = gating_cross_entropy(gamma, gating_logits);
    QHatLoss out;
    out.loss = -gating.value;
    out.d_gating_logits = -gating.gradient;
    out.d_log_hazards = Eigen::MatrixXd::Zero(n, k);

    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < zeta.size(); ++i) {
        if (zeta[i] < 0 || zeta[i] >= k) {
            throw DataError(fmt::format("q_hat: assignment {} out of range [0, {})", zeta[i], k));
        }
        members[static_cast<std::size_t>(zeta[i])].push_back(i);
    }

    std::vector<double> t_sub;
    std::vector<int> e_sub;
    std::vector<double> f_sub;
    for (Eigen::Index c = 0; c < k; ++c) {
        const auto& rows = members[static_cast<std::size_t>(c)];
        int ev = 0;
        for (std::size_t i : rows) ev += events[i];
        if (rows.size() < 2 || ev == 0) {
            ++out.starved_clusters;
            continue;
        }
        t_sub.clear();
        e_sub.clear();
        f_sub.clear();
        for (std::size_t i : rows) {
            t_sub.push_back(times[i]);
            e_sub.push_back(events[i]);
            f_sub.push_back(log_hazards(static_cast<Eigen::Index>(i), c));
        }
        const auto pl = partial_log_likelihood(f_sub, t_sub, e_sub);
        out.loss -= pl.value;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out.d_log_hazards(static_cast<Eigen::Index>(rows[r]), c) =
                -pl.gradient(static_cast<Eigen::Index>(r));
        }
    }
    return out;
}

}  // namespace coxmix
