#include "subject_data.hpp"

#include "jmsched/error.hpp"

#include <cmath>
#include <numbers>

namespace jms::detail {

SubjectData::SubjectData(const JointModel& model, const Subject& s)
    : subject(&s), cov(bind_covariates(model, s)), event(s.event == 1) {
    const auto& spec = model.longitudinal;
    const auto n = static_cast<Eigen::Index>(s.times.size());
    X.resize(n, spec.fixed_size());
    Z.resize(n, spec.random_size());
    y.resize(n);
    for (Eigen::Index l = 0; l < n; ++l) {
        const double t = s.times[static_cast<size_t>(l)];
        X.row(l) = spec.fixed_row(cov.longitudinal, t).transpose();
        Z.row(l) = spec.random_row(t).transpose();
        y(l) = s.values[static_cast<size_t>(l)];
    }
    grid = HazardGrid(model, cov, 0.0, s.event_time);
    if (event) grid.add_point(model, cov, s.event_time);
}

double SubjectData::long_loglik(const JointModel& model, const Parameters& theta, const Eigen::VectorXd& eta) const {
    if (y.size() == 0) return 0.0;
    const auto& fam = model.longitudinal.family;
    if (fam.family == Family::gaussian)
        return -0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi * theta.sigma2) -
               0.5 * (y - eta).squaredNorm() / theta.sigma2;
    double out = 0.0;
    for (Eigen::Index l = 0; l < y.size(); ++l) out += long_log_density(fam, y(l), eta(l), 1.0);
    return out;
}

bool SubjectData::surv_loglik(const Eigen::VectorXd& lh, double& out) const {
    const auto integral = grid.integrate_log_hazards(lh);
    if (integral.clamped()) return false;
    out = (event ? lh(lh.size() - 1) : 0.0) - integral.value;
    return true;
}

double SubjectData::loglik(const JointModel& model, const Parameters& theta, const Eigen::VectorXd& b) const {
    double surv = 0.0;
    const Eigen::VectorXd lh = grid.log_hazards(model, theta, b);
    if (!surv_loglik(lh, surv)) throw NumericError("hazard overflow", grid.integrate_log_hazards(lh).clamped_at);
    return long_loglik(model, theta, eta(theta, b)) + surv;
}

}  // namespace jms::detail
