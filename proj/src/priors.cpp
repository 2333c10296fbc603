#include "jmsched/priors.hpp"

#include "jmsched/error.hpp"

#include <cmath>
#include <numbers>

namespace jms {

namespace {

double normal_block(const Eigen::VectorXd& x, double variance) {
    const double n = static_cast<double>(x.size());
    return -0.5 * n * std::log(2.0 * std::numbers::pi * variance) - 0.5 * x.squaredNorm() / variance;
}

double gamma_log_density(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_multigamma(double a, int p) {
    double out = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
    for (int j = 0; j < p; ++j) out += std::lgamma(a - 0.5 * j);
    return out;
}

double log_det_spd(const Eigen::MatrixXd& A) {
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success) throw DomainError("matrix is not positive definite");
    return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
}

}  // namespace

void PriorSet::validate() const {
    for (double v : {beta_variance, gamma_variance, alpha_variance, sigma2_shape, sigma2_scale, tau_h_shape,
                     tau_h_delta_shape, tau_h_delta_rate, gamma_h0_variance})
        if (!(v > 0.0)) throw ConfigError("prior hyperparameters must be positive");
    if (!(D_extra_df > 0.0)) throw ConfigError("inverse-Wishart extra degrees of freedom must be positive");
}

Eigen::MatrixXd PriorSet::D_scale_for(int q) const {
    if (D_scale.size() == 0) return Eigen::MatrixXd::Identity(q, q);
    if (D_scale.rows() != q || D_scale.cols() != q) throw ConfigError("inverse-Wishart scale has wrong dimension");
    return D_scale;
}

bool has_spline_penalty(const JointModel& model) { return model.num_baseline() > model.penalty_order; }

double inverse_wishart_log_density(const Eigen::MatrixXd& X, double df, const Eigen::MatrixXd& scale) {
    const int p = static_cast<int>(X.rows());
    const double ld_x = log_det_spd(X), ld_s = log_det_spd(scale);
    const double tr = (scale * X.llt().solve(Eigen::MatrixXd::Identity(p, p))).trace();
    return 0.5 * df * ld_s - 0.5 * df * p * std::numbers::ln2 - log_multigamma(0.5 * df, p) -
           0.5 * (df + p + 1) * ld_x - 0.5 * tr;
}

double log_prior(const Parameters& theta, const JointModel& model, const PriorSet& priors) {
    theta.validate(model);
    double out = normal_block(theta.beta, priors.beta_variance) + normal_block(theta.gamma, priors.gamma_variance) +
                 normal_block(theta.alpha, priors.alpha_variance);
    if (model.longitudinal.family.has_dispersion()) {
        const double a = priors.sigma2_shape, s = priors.sigma2_scale;
        out += a * std::log(s) - std::lgamma(a) - (a + 1.0) * std::log(theta.sigma2) - s / theta.sigma2;
    }
    const int q = model.num_random();
    out += inverse_wishart_log_density(theta.D, priors.D_df(q), priors.D_scale_for(q));
    if (has_spline_penalty(model)) {
        const auto pen = model.penalty();
        const Eigen::MatrixXd K = penalty_matrix(pen);
        const double rho = pen.penalty_rank();
        out += 0.5 * rho * std::log(theta.tau_h) - 0.5 * theta.tau_h * theta.gamma_h0.dot(K * theta.gamma_h0);
        out += gamma_log_density(theta.tau_h, priors.tau_h_shape, theta.tau_h_delta);
        out += gamma_log_density(theta.tau_h_delta, priors.tau_h_delta_shape, priors.tau_h_delta_rate);
    } else {
        out += normal_block(theta.gamma_h0, priors.gamma_h0_variance);
    }
    return out;
}

double subject_log_joint(const Parameters& theta, const JointModel& model, const Subject& subject,
                         const Eigen::VectorXd& b) {
    return long_log_likelihood(theta, model, subject, b) + surv_log_density(theta, model, subject, b) +
           random_effects_log_density(theta.D, b);
}

double log_posterior_unnormalized(const Parameters& theta, const JointModel& model, const Dataset& data,
                                  const std::vector<Eigen::VectorXd>& random_effects, const PriorSet& priors) {
    if (random_effects.size() != data.subjects.size())
        throw ConfigError("one random-effects vector per subject is required");
    double out = log_prior(theta, model, priors);
    for (size_t i = 0; i < data.subjects.size(); ++i)
        out += subject_log_joint(theta, model, data.subjects[i], random_effects[i]);
    return out;
}

}  // namespace jms
