#pragma once

#include "jmsched/model.hpp"

#include <vector>

namespace jms {

/// Diffuse normals on the regression blocks, inverse-gamma on the residual
/// variance, inverse-Wishart on D, and the P-spline prior on the baseline
/// coefficients with a gamma hierarchy on its precision.
struct PriorSet {
    double beta_variance = 100.0;
    double gamma_variance = 100.0;
    double alpha_variance = 100.0;
    double sigma2_shape = 0.01;
    double sigma2_scale = 0.01;
    double D_extra_df = 2.0;  // df = q + D_extra_df
    Eigen::MatrixXd D_scale;  // empty means identity
    double tau_h_shape = 1.0;
    double tau_h_delta_shape = 1e-3;
    double tau_h_delta_rate = 1e-3;
    /// Used for gamma_h0 when the basis is too small to carry a difference penalty.
    double gamma_h0_variance = 100.0;

    void validate() const;
    Eigen::MatrixXd D_scale_for(int q) const;
    double D_df(int q) const { return q + D_extra_df; }
};

/// True when the baseline coefficients carry the P-spline prior.
bool has_spline_penalty(const JointModel& model);

/// log p(theta), including all normalizing constants of proper components.
double log_prior(const Parameters& theta, const JointModel& model, const PriorSet& priors);

/// log N(b; 0, D) + long + survival contributions of one subject.
double subject_log_joint(const Parameters& theta, const JointModel& model, const Subject& subject,
                         const Eigen::VectorXd& b);

/// Sum over subjects of the subject terms plus log_prior. `random_effects[i]` belongs to `data.subjects[i]`.
double log_posterior_unnormalized(const Parameters& theta, const JointModel& model, const Dataset& data,
                                  const std::vector<Eigen::VectorXd>& random_effects, const PriorSet& priors);

/// log density of IW(df, scale) at X.
double inverse_wishart_log_density(const Eigen::MatrixXd& X, double df, const Eigen::MatrixXd& scale);

}  // namespace jms
