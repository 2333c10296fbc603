#include "jmsched/hazard_grid.hpp"

#include "jmsched/error.hpp"

#include <algorithm>

namespace jms {

HazardGrid::HazardGrid(const JointModel& model, const BoundCovariates& cov, double a, double b)
    : a_(a), b_(b), w_(cov.survival) {
    if (b < a) throw DomainError("hazard grid requires a <= b");
    const auto& rule = QuadratureRule::gauss_kronrod15();
    if (b > a) {
        const auto bps = model.hazard_breakpoints();
        const auto panels = composite_panels(a, b, bps, model.max_panel_width());
        const auto n = static_cast<Eigen::Index>((panels.size() - 1) * rule.nodes.size());
        times_.resize(n);
        weights_.resize(n);
        Eigen::Index k = 0;
        for (size_t p = 1; p < panels.size(); ++p) {
            const double half = 0.5 * (panels[p] - panels[p - 1]);
            const double mid = 0.5 * (panels[p] + panels[p - 1]);
            for (size_t j = 0; j < rule.nodes.size(); ++j, ++k) {
                times_(k) = mid + half * rule.nodes[j];
                weights_(k) = half * rule.weights[j];
            }
        }
    }
    fill(model, cov);
}

HazardGrid HazardGrid::at_points(const JointModel& model, const BoundCovariates& cov, const std::vector<double>& times) {
    HazardGrid g;
    g.w_ = cov.survival;
    g.times_ = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(times.size()));
    g.weights_ = Eigen::VectorXd::Zero(g.times_.size());
    if (!times.empty()) {
        g.a_ = *std::min_element(times.begin(), times.end());
        g.b_ = *std::max_element(times.begin(), times.end());
    }
    g.fill(model, cov);
    return g;
}

void HazardGrid::add_point(const JointModel& model, const BoundCovariates& cov, double t) {
    const Eigen::Index n = times_.size();
    times_.conservativeResize(n + 1);
    weights_.conservativeResize(n + 1);
    times_(n) = t;
    weights_(n) = 0.0;
    fill(model, cov);
}

void HazardGrid::fill(const JointModel& model, const BoundCovariates& cov) {
    const Eigen::Index n = times_.size();
    const auto& spec = model.longitudinal;
    basis_.resize(n, model.num_baseline());
    x_.resize(n, spec.fixed_size());
    z_.resize(n, spec.random_size());
    if (model.association.needs_slope()) {
        dx_.resize(n, spec.fixed_size());
        dz_.resize(n, spec.random_size());
    }
    if (model.association.needs_integral()) {
        ix_.resize(n, spec.fixed_size());
        iz_.resize(n, spec.random_size());
    }
    for (Eigen::Index k = 0; k < n; ++k) {
        const HazardRow row = make_hazard_row(model, cov, times_(k));
        basis_.row(k) = row.baseline.transpose();
        x_.row(k) = row.x.transpose();
        z_.row(k) = row.z.transpose();
        if (dx_.size() > 0) {
            dx_.row(k) = row.dx.transpose();
            dz_.row(k) = row.dz.transpose();
        }
        if (ix_.size() > 0) {
            ix_.row(k) = row.ix.transpose();
            iz_.row(k) = row.iz.transpose();
        }
    }
}

Eigen::MatrixXd HazardGrid::fixed_signals(const JointModel& model, const Eigen::VectorXd& beta) const {
    using K = AssociationForm::Kind;
    const Eigen::Index n = times_.size();
    switch (model.association.kind) {
        case K::current_value: return x_ * beta;
        case K::slope: return dx_ * beta;
        case K::cumulative: return ix_ * beta;
        case K::value_and_slope: {
            Eigen::MatrixXd s(n, 2);
            s.col(0) = x_ * beta;
            s.col(1) = dx_ * beta;
            return s;
        }
        case K::shared_random_effects: return Eigen::MatrixXd::Zero(n, model.num_random());
    }
    return {};
}

Eigen::MatrixXd HazardGrid::random_signals(const JointModel& model, const Eigen::VectorXd& b) const {
    using K = AssociationForm::Kind;
    const Eigen::Index n = times_.size();
    switch (model.association.kind) {
        case K::current_value: return z_ * b;
        case K::slope: return dz_ * b;
        case K::cumulative: return iz_ * b;
        case K::value_and_slope: {
            Eigen::MatrixXd s(n, 2);
            s.col(0) = z_ * b;
            s.col(1) = dz_ * b;
            return s;
        }
        case K::shared_random_effects: return Eigen::VectorXd::Ones(n) * b.transpose();
    }
    return {};
}

Eigen::VectorXd HazardGrid::log_hazards(const JointModel& model, const Parameters& theta,
                                        const Eigen::VectorXd& b) const {
    Eigen::VectorXd lh = baseline_part(theta.gamma_h0);
    lh.array() += covariate_part(theta.gamma);
    lh.noalias() += (fixed_signals(model, theta.beta) + random_signals(model, b)) * theta.alpha;
    return lh;
}

HazardGrid::Integral HazardGrid::integrate(const JointModel& model, const Parameters& theta,
                                           const Eigen::VectorXd& b) const {
    if (size() == 0) return {};
    return integrate_log_hazards(log_hazards(model, theta, b));
}

HazardGrid::Integral HazardGrid::integrate_log_hazards(const Eigen::VectorXd& lh) const {
    Integral out;
    double sum = 0.0;
    for (Eigen::Index k = 0; k < lh.size(); ++k) {
        double v = lh(k);
        if (!(v <= kLogHazardClamp)) {  // also catches NaN
            if (!out.clamped()) out.clamped_at = times_(k);
            v = kLogHazardClamp;
        }
        sum += weights_(k) * std::exp(std::max(v, -kLogHazardClamp));
    }
    out.value = sum;
    return out;
}

}  // namespace jms
