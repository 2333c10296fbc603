#pragma once

#include "jmsched/model.hpp"

#include <cmath>
#include <limits>

namespace jms {

/// Composite GK15 nodes over [a, b] with every parameter-independent design
/// row precomputed, so that hazard integrals for many (theta, b) pairs reduce
/// to a few matrix-vector products.
///
/// The log hazard at the nodes decomposes as
///   baseline_part(gamma_h0) + w.gamma + (fixed_signals(beta) + random_signals(b)) * alpha
/// where the signal columns are the trajectory features of the association form.
class HazardGrid {
public:
    struct Integral {
        double value = 0.0;
        /// Time of the first node whose log hazard exceeded the clamp, NaN if none.
        double clamped_at = std::numeric_limits<double>::quiet_NaN();
        bool clamped() const noexcept { return !std::isnan(clamped_at); }
    };

    HazardGrid() = default;
    HazardGrid(const JointModel& model, const BoundCovariates& cov, double a, double b);
    /// Grid at explicit points with zero weights (e.g. the event time).
    static HazardGrid at_points(const JointModel& model, const BoundCovariates& cov, const std::vector<double>& times);
    /// Appends a zero-weight node at t (the last node afterwards).
    void add_point(const JointModel& model, const BoundCovariates& cov, double t);

    int size() const noexcept { return static_cast<int>(times_.size()); }
    double lower() const noexcept { return a_; }
    double upper() const noexcept { return b_; }
    const Eigen::VectorXd& times() const noexcept { return times_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }

    const Eigen::MatrixXd& baseline_basis() const noexcept { return basis_; }
    const Eigen::VectorXd& covariates() const noexcept { return w_; }
    Eigen::VectorXd baseline_part(const Eigen::VectorXd& gamma_h0) const { return basis_ * gamma_h0; }
    double covariate_part(const Eigen::VectorXd& gamma) const { return w_.size() > 0 ? w_.dot(gamma) : 0.0; }
    Eigen::MatrixXd fixed_signals(const JointModel& model, const Eigen::VectorXd& beta) const;
    Eigen::MatrixXd random_signals(const JointModel& model, const Eigen::VectorXd& b) const;

    /// Unclamped log hazards at the nodes.
    Eigen::VectorXd log_hazards(const JointModel& model, const Parameters& theta, const Eigen::VectorXd& b) const;
    /// Integral of the clamped hazard over [a, b].
    Integral integrate(const JointModel& model, const Parameters& theta, const Eigen::VectorXd& b) const;
    /// Weighted sum of exp(clamped log hazards).
    Integral integrate_log_hazards(const Eigen::VectorXd& log_hazards) const;

private:
    void fill(const JointModel& model, const BoundCovariates& cov);

    double a_ = 0.0, b_ = 0.0;
    Eigen::VectorXd times_, weights_;
    Eigen::VectorXd w_;
    Eigen::MatrixXd basis_, x_, z_, dx_, dz_, ix_, iz_;
};

}  // namespace jms
