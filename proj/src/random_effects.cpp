#include "jmsched/random_effects.hpp"

#include "jmsched/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace jms {

ReTarget::ReTarget(const JointModel& model, const Subject& history, const ReCondition& condition)
    : model_(&model) {
    if (!(condition.survival_until >= 0.0)) throw DomainError("condition time must be nonnegative");
    const auto cov = bind_covariates(model, history);
    const auto& spec = model.longitudinal;
    const auto n = static_cast<Eigen::Index>(history.times.size() + condition.extra.size());
    X_.resize(n, spec.fixed_size());
    Z_.resize(n, spec.random_size());
    y_.resize(n);
    Eigen::Index r = 0;
    auto add = [&](double t, double y) {
        if (!(t >= 0.0)) throw DomainError("measurement time must be nonnegative");
        X_.row(r) = spec.fixed_row(cov.longitudinal, t).transpose();
        Z_.row(r) = spec.random_row(t).transpose();
        y_(r++) = y;
    };
    for (size_t l = 0; l < history.times.size(); ++l) add(history.times[l], history.values[l]);
    for (const auto& [t, y] : condition.extra) add(t, y);
    grid_ = HazardGrid(model, cov, 0.0, condition.survival_until);
}

void ReTarget::set_parameters(const Parameters& theta) {
    theta.validate(*model_);
    theta_ = theta;
    xb_ = X_ * theta.beta;
    lh_fixed_ = grid_.baseline_part(theta.gamma_h0);
    lh_fixed_.array() += grid_.covariate_part(theta.gamma);
    lh_fixed_.noalias() += grid_.fixed_signals(*model_, theta.beta) * theta.alpha;
    const int q = dim();
    lh_slope_.resize(grid_.size(), q);
    for (int j = 0; j < q; ++j)
        lh_slope_.col(j) = grid_.random_signals(*model_, Eigen::VectorXd::Unit(q, j)) * theta.alpha;
    D_llt_.compute(theta.D);
    D_log_det_ = 2.0 * Eigen::MatrixXd(D_llt_.matrixL()).diagonal().array().log().sum();
    bound_ = true;
}

double ReTarget::log_density(const Eigen::VectorXd& b) const {
    if (!bound_) throw PreconditionError("random-effects target has no parameters bound");
    const auto& fam = model_->longitudinal.family;
    double out = 0.0;
    if (y_.size() > 0) {
        const Eigen::VectorXd eta = xb_ + Z_ * b;
        if (fam.family == Family::gaussian) {
            out += -0.5 * static_cast<double>(y_.size()) * std::log(2.0 * std::numbers::pi * theta_.sigma2) -
                   0.5 * (y_ - eta).squaredNorm() / theta_.sigma2;
        } else {
            for (Eigen::Index l = 0; l < y_.size(); ++l) out += long_log_density(fam, y_(l), eta(l), 1.0);
        }
    }
    if (grid_.size() > 0) {
        const auto integral = grid_.integrate_log_hazards(lh_fixed_ + lh_slope_ * b);
        if (integral.clamped()) return -std::numeric_limits<double>::infinity();
        out -= integral.value;
    }
    const Eigen::VectorXd z = D_llt_.matrixL().solve(b);
    out += -0.5 * static_cast<double>(b.size()) * std::log(2.0 * std::numbers::pi) - 0.5 * D_log_det_ -
           0.5 * z.squaredNorm();
    return out;
}

// --- mode ---------------------------------------------------------------------

namespace {

constexpr double kHessianStep = 1e-4;
constexpr double kGradientStep = 1e-5;

Eigen::VectorXd fd_gradient(const ReTarget& f, const Eigen::VectorXd& b) {
    Eigen::VectorXd g(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        const double h = kGradientStep * (1.0 + std::abs(b(j)));
        Eigen::VectorXd p = b, m = b;
        p(j) += h;
        m(j) -= h;
        g(j) = (f.log_density(p) - f.log_density(m)) / (2.0 * h);
    }
    return g;
}

Eigen::MatrixXd fd_hessian(const ReTarget& f, const Eigen::VectorXd& b, double f0) {
    const Eigen::Index q = b.size();
    const double h = kHessianStep;
    Eigen::MatrixXd H(q, q);
    for (Eigen::Index j = 0; j < q; ++j) {
        Eigen::VectorXd p = b, m = b;
        p(j) += h;
        m(j) -= h;
        H(j, j) = (f.log_density(p) - 2.0 * f0 + f.log_density(m)) / (h * h);
        for (Eigen::Index k = 0; k < j; ++k) {
            Eigen::VectorXd pp = b, pm = b, mp = b, mm = b;
            pp(j) += h, pp(k) += h;
            pm(j) += h, pm(k) -= h;
            mp(j) -= h, mp(k) += h;
            mm(j) -= h, mm(k) -= h;
            H(j, k) = H(k, j) =
                (f.log_density(pp) - f.log_density(pm) - f.log_density(mp) + f.log_density(mm)) / (4.0 * h * h);
        }
    }
    return 0.5 * (H + H.transpose());
}

/// Cholesky of -H, adding a ridge from 1e-6 up to 1e-2 when needed.
bool repaired_precision(const Eigen::MatrixXd& H, Eigen::LLT<Eigen::MatrixXd>& llt, bool& repaired) {
    const Eigen::Index q = H.rows();
    llt.compute(-H);
    if (llt.info() == Eigen::Success) return true;
    for (double ridge = 1e-6; ridge <= 1e-2 * (1.0 + 1e-12); ridge *= 10.0) {
        llt.compute(-H + ridge * Eigen::MatrixXd::Identity(q, q));
        if (llt.info() == Eigen::Success) {
            repaired = true;
            return true;
        }
    }
    return false;
}

}  // namespace

ReMode posterior_mode_re(const ReTarget& target) {
    const int q = target.dim();
    ReMode out;
    auto fallback = [&]() {
        out.location = Eigen::VectorXd::Zero(q);
        out.covariance = target.parameters().D;
        out.fallback = true;
        return out;
    };

    Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
    double fb = target.log_density(b);
    if (!std::isfinite(fb)) return fallback();

    constexpr int kMaxIter = 100;
    bool converged = false;
    for (int it = 1; it <= kMaxIter && !converged; ++it) {
        out.iterations = it;
        const Eigen::VectorXd g = fd_gradient(target, b);
        const Eigen::MatrixXd H = fd_hessian(target, b, fb);
        if (!g.allFinite() || !H.allFinite()) return fallback();
        Eigen::LLT<Eigen::MatrixXd> llt;
        bool ridge_used = false;
        Eigen::VectorXd step;
        if (repaired_precision(H, llt, ridge_used)) {
            step = llt.solve(g);
        } else {
            step = g / std::max(1.0, g.norm());  // gradient ascent when curvature is unusable
        }
        double scale = 1.0;
        Eigen::VectorXd cand = b + step;
        double fc = target.log_density(cand);
        int halvings = 0;
        while (!(fc >= fb - 1e-12 * std::abs(fb)) && halvings < 40) {
            scale *= 0.5;
            cand = b + scale * step;
            fc = target.log_density(cand);
            ++halvings;
        }
        if (!(fc >= fb - 1e-12 * std::abs(fb))) {
            converged = true;  // no ascent direction left at this resolution
            break;
        }
        const double moved = (scale * step).lpNorm<Eigen::Infinity>();
        b = cand;
        fb = fc;
        if (moved < 1e-9 * (1.0 + b.lpNorm<Eigen::Infinity>())) converged = true;
    }
    if (!b.allFinite()) return fallback();

    const Eigen::MatrixXd H = fd_hessian(target, b, fb);
    Eigen::LLT<Eigen::MatrixXd> llt;
    bool repaired = false;
    if (!H.allFinite() || !repaired_precision(H, llt, repaired)) return fallback();
    out.location = b;
    const Eigen::MatrixXd V = llt.solve(Eigen::MatrixXd::Identity(q, q));
    out.covariance = 0.5 * (V + V.transpose());
    out.repaired = repaired;
    return out;
}

// --- sampler ------------------------------------------------------------------

ReSampler::ReSampler(const ReTarget& target, const ReMode& mode, double df)
    : target_(&target), location_(mode.location), df_(df) {
    if (!(df > 0.0)) throw ConfigError("Student-t degrees of freedom must be positive");
    Eigen::LLT<Eigen::MatrixXd> llt(mode.covariance);
    if (llt.info() != Eigen::Success) throw NumericError("proposal scale is not positive definite", 0.0);
    chol_ = llt.matrixL();
    reset(location_);
}

double ReSampler::proposal_log_kernel(const Eigen::VectorXd& b) const {
    return student_t_log_kernel(b, location_, chol_, df_);
}

void ReSampler::reset(const Eigen::VectorXd& b) {
    state_ = b;
    refresh();
}

void ReSampler::refresh() { state_log_weight_ = target_->log_density(state_) - proposal_log_kernel(state_); }

bool ReSampler::step(Rng& rng) {
    ++proposed_;
    const Eigen::VectorXd cand = student_t_draw(rng, location_, chol_, df_);
    const double lp = target_->log_density(cand);
    const double u = uniform_open(rng);
    if (!std::isfinite(lp)) return false;
    const double w = lp - proposal_log_kernel(cand);
    if (std::log(u) < w - state_log_weight_) {
        state_ = cand;
        state_log_weight_ = w;
        ++accepted_;
        return true;
    }
    return false;
}

ReDraws sample_random_effects(const JointModel& model, const Subject& history, const ReCondition& condition,
                              const Parameters& theta, int n_draws, Rng& rng, int warmup, int steps_per_draw) {
    if (n_draws < 0 || warmup < 0 || steps_per_draw < 1) throw ConfigError("invalid random-effects sampler counts");
    ReTarget target(model, history, condition);
    target.set_parameters(theta);
    ReDraws out;
    out.mode = posterior_mode_re(target);
    ReSampler sampler(target, out.mode);
    sampler.run(rng, warmup);
    out.draws.resize(n_draws, target.dim());
    const long acc0 = sampler.accepted(), prop0 = sampler.proposed();
    for (int k = 0; k < n_draws; ++k) {
        sampler.run(rng, steps_per_draw);
        out.draws.row(k) = sampler.state().transpose();
    }
    const long prop = sampler.proposed() - prop0;
    out.acceptance = prop > 0 ? static_cast<double>(sampler.accepted() - acc0) / static_cast<double>(prop) : 0.0;
    return out;
}

}  // namespace jms
