#pragma once

#include "jmsched/hazard_grid.hpp"
#include "jmsched/random.hpp"

#include <utility>
#include <vector>

namespace jms {

/// What a new subject's random effects are conditioned on: survival past
/// `survival_until`, the measurements of the history, and optional
/// hypothetical extra measurements (time, value).
struct ReCondition {
    double survival_until = 0.0;
    std::vector<std::pair<double, double>> extra;
};

/// log p(b | condition, theta) up to a constant:
///   sum_l log p(y_l | b) - int_0^c h(s | b) ds + log N(b; 0, D).
/// Bind parameters with set_parameters before evaluating.
class ReTarget {
public:
    ReTarget(const JointModel& model, const Subject& history, const ReCondition& condition);

    void set_parameters(const Parameters& theta);
    const Parameters& parameters() const noexcept { return theta_; }
    const JointModel& model() const noexcept { return *model_; }
    int dim() const noexcept { return model_->num_random(); }

    /// -inf when a log hazard exceeds the clamp.
    double log_density(const Eigen::VectorXd& b) const;

private:
    const JointModel* model_;
    Eigen::MatrixXd X_, Z_;
    Eigen::VectorXd y_;
    HazardGrid grid_;
    Parameters theta_;
    bool bound_ = false;
    Eigen::VectorXd xb_;        // fixed part of the linear predictor at the measurements
    Eigen::VectorXd lh_fixed_;  // log hazard at b = 0
    Eigen::MatrixXd lh_slope_;  // d(log hazard)/db, nodes x q
    Eigen::LLT<Eigen::MatrixXd> D_llt_;
    double D_log_det_ = 0.0;
};

struct ReMode {
    Eigen::VectorXd location;
    Eigen::MatrixXd covariance;
    int iterations = 0;
    bool repaired = false;  // Hessian needed a ridge
    bool fallback = false;  // optimization failed; location 0, covariance D
};

/// Newton iterations on finite-difference derivatives from b = 0; covariance
/// is the inverse negative Hessian (step 1e-4, symmetrized).
ReMode posterior_mode_re(const ReTarget& target);

/// Independence Metropolis-Hastings with a multivariate Student-t proposal
/// centred at the mode with the mode covariance as scale.
class ReSampler {
public:
    static constexpr double kDefaultDf = 4.0;

    ReSampler(const ReTarget& target, const ReMode& mode, double df = kDefaultDf);

    const Eigen::VectorXd& state() const noexcept { return state_; }
    /// Re-evaluate the current state; call after the target's parameters change.
    void refresh();
    void reset(const Eigen::VectorXd& b);
    bool step(Rng& rng);
    void run(Rng& rng, int steps) {
        for (int k = 0; k < steps; ++k) step(rng);
    }
    long accepted() const noexcept { return accepted_; }
    long proposed() const noexcept { return proposed_; }

private:
    double proposal_log_kernel(const Eigen::VectorXd& b) const;

    const ReTarget* target_;
    Eigen::VectorXd location_;
    Eigen::MatrixXd chol_;
    double df_;
    Eigen::VectorXd state_;
    double state_log_weight_ = 0.0;  // log target - log proposal
    long accepted_ = 0, proposed_ = 0;
};

struct ReDraws {
    Eigen::MatrixXd draws;  // n_draws x q
    ReMode mode;
    double acceptance = 0.0;
};

inline constexpr int kReWarmup = 500;

/// Draws from p(b | condition, theta) after a warm-up of `warmup` iterations.
ReDraws sample_random_effects(const JointModel& model, const Subject& history, const ReCondition& condition,
                              const Parameters& theta, int n_draws, Rng& rng, int warmup = kReWarmup,
                              int steps_per_draw = 1);

}  // namespace jms
