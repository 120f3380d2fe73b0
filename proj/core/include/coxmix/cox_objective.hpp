#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace coxmix {

// Rows ordered by time, descending, with runs of equal times grouped.
class RiskSetIndex {
public:
    struct TieGroup {
        std::size_t begin;  // positions into order()
        std::size_t end;
        double time;
        int events;
    };

    explicit RiskSetIndex(std::span<const double> times, std::span<const int> events);

    const std::vector<std::size_t>& order() const noexcept { return order_; }
    const std::vector<TieGroup>& groups() const noexcept { return groups_; }
    std::size_t event_count() const noexcept { return event_count_; }

private:
    std::vector<std::size_t> order_;
    std::vector<TieGroup> groups_;
    std::size_t event_count_ = 0;
};

// Value and gradient of a log-likelihood-type objective (to be maximised).
struct LogLikelihood {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

// Breslow-tied Cox partial log-likelihood
//   sum_{i: event} [ f_i - log sum_{j: t_j >= t_i} exp(f_j) ]
// computed with a running log-sum-exp over descending times. With no events the
// value and gradient are zero.
LogLikelihood partial_log_likelihood(std::span<const double> log_hazards,
                                     std::span<const double> times, std::span<const int> events);

struct GatingLogLikelihood {
    double value = 0.0;
    Eigen::MatrixXd gradient;  // gamma - softmax(logits)
};

// sum_i sum_k gamma_ik log softmax_k(logits_i). Rows of gamma must lie on the
// simplex to within 1e-6.
GatingLogLikelihood gating_cross_entropy(const Eigen::MatrixXd& gamma,
                                         const Eigen::MatrixXd& gating_logits);

// The minibatch M-step loss  -[ gating term + sum_k log PL(rows with zeta = k, column k) ].
struct QHatLoss {
    double loss = 0.0;
    Eigen::MatrixXd d_log_hazards;
    Eigen::MatrixXd d_gating_logits;
    int starved_clusters = 0;  // clusters skipped for having < 2 rows or no events
};

// zeta holds 0-based cluster indices. Clusters with fewer than two assigned
// rows or no assigned events contribute nothing.
QHatLoss q_hat(std::span<const double> times, std::span<const int> events,
               const Eigen::MatrixXd& gamma, std::span<const int> zeta,
               const Eigen::MatrixXd& log_hazards, const Eigen::MatrixXd& gating_logits);

}  // namespace coxmix
