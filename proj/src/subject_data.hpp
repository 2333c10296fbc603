#pragma once

#include "jmsched/hazard_grid.hpp"

namespace jms::detail {

/// Parameter-independent designs of one subject: measurement rows and the
/// hazard grid over [0, T], with the event time appended as a zero-weight node
/// when the subject had an event.
struct SubjectData {
    const Subject* subject = nullptr;
    BoundCovariates cov;
    Eigen::MatrixXd X, Z;
    Eigen::VectorXd y;
    HazardGrid grid;
    bool event = false;

    SubjectData(const JointModel& model, const Subject& s);

    double long_loglik(const JointModel& model, const Parameters& theta, const Eigen::VectorXd& eta) const;
    /// delta * log h(T) - int_0^T h; false when a log hazard hits the clamp.
    bool surv_loglik(const Eigen::VectorXd& log_hazards, double& out) const;

    Eigen::VectorXd eta(const Parameters& theta, const Eigen::VectorXd& b) const { return X * theta.beta + Z * b; }
    /// long + survival log-likelihood; throws NumericError on clamp.
    double loglik(const JointModel& model, const Parameters& theta, const Eigen::VectorXd& b) const;
};

}  // namespace jms::detail
