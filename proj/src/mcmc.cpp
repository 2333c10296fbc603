#include "jmsched/mcmc.hpp"

#include "jmsched/error.hpp"
#include "subject_data.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace jms {

using detail::SubjectData;

void McmcConfig::validate() const {
    if (chains < 1) throw ConfigError("mcmc.chains must be >= 1");
    if (thin < 1) throw ConfigError("mcmc.thin must be >= 1");
    if (burn_in < 0 || iterations <= burn_in) throw ConfigError("mcmc.burn_in must be >= 0 and < mcmc.iterations");
    if (adapt_window < 1) throw ConfigError("mcmc.adapt_window must be >= 1");
    if (fixed_tau_h && !(*fixed_tau_h > 0.0)) throw ConfigError("fixed tau_h must be positive");
}

// --- flattening ---------------------------------------------------------------

std::vector<std::string> parameter_names(const JointModel& model) {
    std::vector<std::string> out;
    auto idx = [](const char* base, int k) { return std::string(base) + "[" + std::to_string(k) + "]"; };
    for (int k = 0; k < model.num_fixed(); ++k) out.push_back(idx("beta", k));
    if (model.longitudinal.family.has_dispersion()) out.push_back("sigma2");
    for (int i = 0; i < model.num_random(); ++i)
        for (int j = 0; j <= i; ++j) out.push_back("D[" + std::to_string(i) + "," + std::to_string(j) + "]");
    for (int k = 0; k < model.num_gamma(); ++k) out.push_back(idx("gamma", k));
    for (int k = 0; k < model.num_alpha(); ++k) out.push_back(idx("alpha", k));
    for (int k = 0; k < model.num_baseline(); ++k) out.push_back(idx("gamma_h0", k));
    out.push_back("tau_h");
    out.push_back("tau_h_delta");
    return out;
}

Eigen::VectorXd flatten(const Parameters& theta, const JointModel& model) {
    std::vector<double> v;
    for (int k = 0; k < model.num_fixed(); ++k) v.push_back(theta.beta(k));
    if (model.longitudinal.family.has_dispersion()) v.push_back(theta.sigma2);
    for (int i = 0; i < model.num_random(); ++i)
        for (int j = 0; j <= i; ++j) v.push_back(theta.D(i, j));
    for (int k = 0; k < model.num_gamma(); ++k) v.push_back(theta.gamma(k));
    for (int k = 0; k < model.num_alpha(); ++k) v.push_back(theta.alpha(k));
    for (int k = 0; k < model.num_baseline(); ++k) v.push_back(theta.gamma_h0(k));
    v.push_back(theta.tau_h);
    v.push_back(theta.tau_h_delta);
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Parameters unflatten(const Eigen::VectorXd& values, const JointModel& model) {
    const auto expected = static_cast<Eigen::Index>(parameter_names(model).size());
    if (values.size() != expected) throw ConfigError("flattened parameter vector has the wrong length");
    Parameters t;
    Eigen::Index k = 0;
    t.beta = values.segment(k, model.num_fixed());
    k += model.num_fixed();
    t.sigma2 = model.longitudinal.family.has_dispersion() ? values(k++) : 1.0;
    const int q = model.num_random();
    t.D.resize(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j <= i; ++j) t.D(i, j) = t.D(j, i) = values(k++);
    t.gamma = values.segment(k, model.num_gamma());
    k += model.num_gamma();
    t.alpha = values.segment(k, model.num_alpha());
    k += model.num_alpha();
    t.gamma_h0 = values.segment(k, model.num_baseline());
    k += model.num_baseline();
    t.tau_h = values(k++);
    t.tau_h_delta = values(k++);
    return t;
}

Parameters PosteriorSamples::posterior_mean() const {
    if (draws.empty()) throw PreconditionError("posterior has no draws");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(flatten(draws.front(), model).size());
    for (const auto& d : draws) acc += flatten(d, model);
    return unflatten(acc / static_cast<double>(draws.size()), model);
}

PosteriorSamples point_mass(const JointModel& model, const Parameters& theta, int copies, int subjects) {
    theta.validate(model);
    if (copies < 1) throw ConfigError("point mass needs at least one copy");
    PosteriorSamples s;
    s.model = model;
    for (int g = 0; g < copies; ++g) {
        s.draws.push_back(theta);
        s.chain.push_back(0);
        s.iteration.push_back(g);
        if (subjects > 0) s.random_effects.push_back(Eigen::MatrixXd::Zero(subjects, model.num_random()));
    }
    return s;
}

// --- conjugate updates ----------------------------------------------------------

double draw_sigma2(Rng& rng, const PriorSet& priors, double ssr, long n_obs) {
    return inverse_gamma_draw(rng, priors.sigma2_shape + 0.5 * static_cast<double>(n_obs),
                              priors.sigma2_scale + 0.5 * ssr);
}

Eigen::MatrixXd draw_D(Rng& rng, const PriorSet& priors, const std::vector<Eigen::VectorXd>& bs, int q) {
    Eigen::MatrixXd S = priors.D_scale_for(q);
    for (const auto& b : bs) S.noalias() += b * b.transpose();
    return inverse_wishart_draw(rng, priors.D_df(q) + static_cast<double>(bs.size()), S);
}

double draw_tau_h(Rng& rng, const PriorSet& priors, double tau_h_delta, double quad_form, int rank) {
    return gamma_draw(rng, priors.tau_h_shape + 0.5 * rank, tau_h_delta + 0.5 * quad_form);
}

double draw_tau_h_delta(Rng& rng, const PriorSet& priors, double tau_h) {
    return gamma_draw(rng, priors.tau_h_delta_shape + priors.tau_h_shape, priors.tau_h_delta_rate + tau_h);
}

// --- convergence diagnostics ------------------------------------------------------

namespace {

double mean_of(const std::vector<double>& x) { return std::accumulate(x.begin(), x.end(), 0.0) / x.size(); }

double var_of(const std::vector<double>& x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return x.size() > 1 ? s / (x.size() - 1) : 0.0;
}

}  // namespace

double split_rhat(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
        const size_t h = c.size() / 2;
        if (h < 2) continue;
        halves.emplace_back(c.begin(), c.begin() + static_cast<long>(h));
        halves.emplace_back(c.end() - static_cast<long>(h), c.end());
    }
    if (halves.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(halves.front().size());
    const double m = static_cast<double>(halves.size());
    std::vector<double> means;
    double W = 0.0;
    for (const auto& h : halves) {
        means.push_back(mean_of(h));
        W += var_of(h, means.back());
    }
    W /= m;
    const double B = n * var_of(means, mean_of(means));
    if (W <= 0.0) return B <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * W + B / n;
    return std::sqrt(var_plus / W);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) return 0.0;
    size_t n = chains.front().size();
    for (const auto& c : chains) n = std::min(n, c.size());
    const double m = static_cast<double>(chains.size());
    if (n < 4) return m * n;
    std::vector<double> means, vars;
    for (const auto& c : chains) {
        std::vector<double> head(c.begin(), c.begin() + static_cast<long>(n));
        means.push_back(mean_of(head));
        vars.push_back(var_of(head, means.back()));
    }
    const double W = mean_of(vars);
    const double B = chains.size() > 1 ? n * var_of(means, mean_of(means)) : 0.0;
    const double var_plus = (n - 1.0) / n * W + B / n;
    if (var_plus <= 0.0) return m * n;

    auto autocov = [&](size_t lag) {
        double acc = 0.0;
        for (size_t c = 0; c < chains.size(); ++c) {
            double s = 0.0;
            for (size_t k = 0; k + lag < n; ++k) s += (chains[c][k] - means[c]) * (chains[c][k + lag] - means[c]);
            acc += s / n;
        }
        return acc / m;
    };
    auto rho = [&](size_t lag) { return 1.0 - (W - autocov(lag)) / var_plus; };

    double sum = 0.0;
    for (size_t t = 1; t + 1 < n; t += 2) {
        const double pair = rho(t) + rho(t + 1);
        if (pair < 0.0) break;
        sum += pair;
    }
    // tau = -1 + 2 * sum of pairs starting at lag 0 (rho_0 = 1)
    const double tau = std::max(1.0 + 2.0 * sum, 1e-3);
    return m * n / tau;
}

// --- sampler ----------------------------------------------------------------------

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Random-walk proposal whose scale follows Robbins-Monro updates and whose
/// shape is learned from the burn-in draws.
class AdaptiveProposal {
public:
    AdaptiveProposal() = default;
    AdaptiveProposal(const Eigen::MatrixXd& cov0, double target_rate)
        : dim_(static_cast<int>(cov0.rows())), target_(target_rate),
          log_scale_(std::log(2.38 / std::sqrt(static_cast<double>(cov0.rows())))) {
        set_shape(cov0);
        mean_ = Eigen::VectorXd::Zero(dim_);
        m2_ = Eigen::MatrixXd::Zero(dim_, dim_);
    }

    Eigen::VectorXd propose(const Eigen::VectorXd& x, Rng& rng) const {
        return x + std::exp(log_scale_) * (chol_ * std_normal_vector(rng, dim_));
    }

    void record(bool accepted) {
        ++window_n_;
        if (accepted) ++window_acc_;
    }

    void observe(const Eigen::VectorXd& x) {
        ++n_obs_;
        const Eigen::VectorXd d = x - mean_;
        mean_ += d / static_cast<double>(n_obs_);
        m2_.noalias() += d * (x - mean_).transpose();
    }

    /// End of an adaptation window. A supplied shape replaces the empirical one.
    void adapt(const Eigen::MatrixXd* shape = nullptr) {
        if (window_n_ == 0) return;
        ++windows_;
        const double rate = static_cast<double>(window_acc_) / window_n_;
        log_scale_ += (rate - target_) / std::sqrt(static_cast<double>(windows_));
        log_scale_ = std::clamp(log_scale_, -30.0, 10.0);
        window_n_ = window_acc_ = 0;
        if (shape) {
            set_shape(*shape, true);
        } else if (n_obs_ >= std::max<long>(20, 5L * dim_)) {
            const Eigen::MatrixXd emp = m2_ / static_cast<double>(n_obs_ - 1);
            if (emp.allFinite() && emp.diagonal().minCoeff() > 0.0) set_shape(emp, true);
        }
    }

    void set_shape(const Eigen::MatrixXd& cov, bool keep_on_failure = false) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
        if (es.info() != Eigen::Success) {
            if (keep_on_failure) return;
            chol_ = Eigen::MatrixXd::Identity(dim_, dim_) * 0.1;
            return;
        }
        Eigen::VectorXd ev = es.eigenvalues();
        const double top = std::max(ev.maxCoeff(), 1e-12);
        for (Eigen::Index k = 0; k < ev.size(); ++k) ev(k) = std::max(ev(k), 1e-8 * top);
        const Eigen::MatrixXd fixed = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        chol_ = Eigen::LLT<Eigen::MatrixXd>(0.5 * (fixed + fixed.transpose())).matrixL();
    }

    int dim_ = 0;
    double target_ = 0.234;
    double log_scale_ = 0.0;
    Eigen::MatrixXd chol_;
    long window_n_ = 0, window_acc_ = 0, windows_ = 0;
    long n_obs_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd m2_;
};

double target_rate(Eigen::Index dim) { return dim == 1 ? 0.44 : 0.234; }

/// Covariance from the negative inverse of a finite-difference Hessian.
Eigen::MatrixXd hessian_covariance(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x0,
                                   double fallback_var) {
    const Eigen::Index d = x0.size();
    const double f0 = f(x0);
    Eigen::MatrixXd H(d, d);
    std::vector<double> h(static_cast<size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) h[static_cast<size_t>(j)] = 1e-3 * (1.0 + std::abs(x0(j)));
    for (Eigen::Index j = 0; j < d; ++j) {
        const double hj = h[static_cast<size_t>(j)];
        Eigen::VectorXd p = x0, m = x0;
        p(j) += hj;
        m(j) -= hj;
        H(j, j) = (f(p) - 2.0 * f0 + f(m)) / (hj * hj);
        for (Eigen::Index k = 0; k < j; ++k) {
            const double hk = h[static_cast<size_t>(k)];
            Eigen::VectorXd pp = x0, pm = x0, mp = x0, mm = x0;
            pp(j) += hj, pp(k) += hk;
            pm(j) += hj, pm(k) -= hk;
            mp(j) -= hj, mp(k) += hk;
            mm(j) -= hj, mm(k) -= hk;
            H(j, k) = H(k, j) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * hj * hk);
        }
    }
    const Eigen::MatrixXd fallback = Eigen::MatrixXd::Identity(d, d) * fallback_var;
    if (!H.allFinite()) return fallback;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-0.5 * (H + H.transpose()));
    if (es.info() != Eigen::Success) return fallback;
    Eigen::VectorXd ev = es.eigenvalues();
    const double top = ev.maxCoeff();
    if (!(top > 0.0)) return fallback;
    for (Eigen::Index k = 0; k < ev.size(); ++k) ev(k) = 1.0 / std::max(ev(k), 1e-6 * top);
    Eigen::MatrixXd cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (cov + cov.transpose());
}

/// Dynamic per-subject quantities of one chain.
struct SubjectState {
    Eigen::VectorXd b;
    Eigen::VectorXd xb, zb;          // measurement rows times beta / b
    Eigen::VectorXd base;            // baseline log hazard at the grid nodes
    Eigen::MatrixXd fsig, rsig;      // association signals from beta / b
    Eigen::VectorXd lh;              // log hazard at the nodes
    double ll_long = 0.0, ll_surv = 0.0;
};

class Chain {
public:
    Chain(const std::vector<SubjectData>& subjects, const JointModel& model,
          const PriorSet& priors, const McmcConfig& config, int index)
        : subj_(subjects), model_(model), priors_(priors), cfg_(config), index_(index),
          rng_(make_stream(config.seed, {static_cast<std::uint64_t>(index)})) {
        q_ = model.num_random();
        penalized_ = has_spline_penalty(model);
        if (penalized_) {
            const auto pen = model.penalty();
            K_ = penalty_matrix(pen);
            rank_ = pen.penalty_rank();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K_);
            const Eigen::MatrixXd V = es.eigenvectors().rightCols(rank_);
            penalized_projector_ = V * V.transpose();
        }
        for (const auto& s : subj_) n_obs_ += s.y.size();
        initialize();
    }

    void run(PosteriorSamples& out) {
        const int kept_start = cfg_.burn_in;
        for (int it = 0; it < cfg_.iterations; ++it) {
            const bool burning = it < cfg_.burn_in;
            sweep(burning, it);
            if (burning && (it + 1) % cfg_.adapt_window == 0) adapt_all();
            if (!burning && (it - kept_start) % cfg_.thin == 0) record(out, it);
        }
    }

    std::map<std::string, std::pair<long, long>> acceptance() const { return accept_; }

private:
    // ---- evaluation helpers
    Eigen::VectorXd hazard(const SubjectData& d, const Eigen::VectorXd& base, double wg, const Eigen::MatrixXd& fsig,
                           const Eigen::MatrixXd& rsig, const Eigen::VectorXd& alpha) const {
        Eigen::VectorXd lh = base;
        lh.array() += wg;
        if (d.grid.size() > 0) lh.noalias() += (fsig + rsig) * alpha;
        return lh;
    }

    double surv(const SubjectData& d, const Eigen::VectorXd& lh) const {
        double out = 0.0;
        return d.surv_loglik(lh, out) ? out : kNegInf;
    }

    double long_ll(const SubjectData& d, const Eigen::VectorXd& eta, double sigma2) const {
        Parameters tmp;
        tmp.sigma2 = sigma2;
        return d.long_loglik(model_, tmp, eta);
    }

    double log_normal_re(const Eigen::VectorXd& b) const {
        const Eigen::VectorXd z = D_llt_.matrixL().solve(b);
        return -0.5 * D_log_det_ - 0.5 * z.squaredNorm();
    }

    void refresh_D() {
        D_llt_.compute(theta_.D);
        if (D_llt_.info() != Eigen::Success) throw NumericError("random-effects covariance lost positive definiteness", 0.0);
        D_log_det_ = 2.0 * Eigen::MatrixXd(D_llt_.matrixL()).diagonal().array().log().sum();
    }

    void rebuild_subject(size_t i) {
        const auto& d = subj_[i];
        auto& s = st_[i];
        s.xb = d.X * theta_.beta;
        s.zb = d.Z * s.b;
        s.base = d.grid.baseline_part(theta_.gamma_h0);
        s.fsig = d.grid.fixed_signals(model_, theta_.beta);
        s.rsig = d.grid.random_signals(model_, s.b);
        s.lh = hazard(d, s.base, d.grid.covariate_part(theta_.gamma), s.fsig, s.rsig, theta_.alpha);
        s.ll_long = long_ll(d, s.xb + s.zb, theta_.sigma2);
        s.ll_surv = cfg_.include_survival ? surv(d, s.lh) : 0.0;
        if (!std::isfinite(s.ll_surv))
            throw NumericError("log hazard exceeds the clamp at the current state of subject " + d.subject->id,
                               d.grid.integrate_log_hazards(s.lh).clamped_at);
    }

    double prior_normal(const Eigen::VectorXd& x, double var) const { return -0.5 * x.squaredNorm() / var; }

    double h0_prior(const Eigen::VectorXd& g) const {
        if (penalized_) return -0.5 * theta_.tau_h * g.dot(K_ * g);
        return prior_normal(g, priors_.gamma_h0_variance);
    }

    // ---- block targets (log posterior up to terms not involving the block)
    double beta_target(const Eigen::VectorXd& beta, std::vector<SubjectState>* cand) const {
        double out = prior_normal(beta, priors_.beta_variance);
        for (size_t i = 0; i < subj_.size(); ++i) {
            const auto& d = subj_[i];
            const auto& s = st_[i];
            Eigen::VectorXd xb = d.X * beta;
            const double ll = long_ll(d, xb + s.zb, theta_.sigma2);
            double ls = 0.0;
            Eigen::MatrixXd fsig;
            Eigen::VectorXd lh;
            if (cfg_.include_survival) {
                if (model_.association.uses_fixed_effects()) {
                    fsig = d.grid.fixed_signals(model_, beta);
                    lh = hazard(d, s.base, d.grid.covariate_part(theta_.gamma), fsig, s.rsig, theta_.alpha);
                    ls = surv(d, lh);
                    if (!std::isfinite(ls)) return kNegInf;
                } else {
                    ls = s.ll_surv;
                }
            }
            out += ll + ls;
            if (cand) {
                auto& c = (*cand)[i];
                c.xb = std::move(xb);
                c.ll_long = ll;
                c.ll_surv = ls;
                if (cfg_.include_survival && model_.association.uses_fixed_effects()) {
                    c.fsig = std::move(fsig);
                    c.lh = std::move(lh);
                }
            }
        }
        return out;
    }

    // survival block psi = (gamma, alpha, gamma_h0); the log hazard is linear in psi
    int ng() const { return static_cast<int>(theta_.gamma.size()); }
    int na() const { return static_cast<int>(theta_.alpha.size()); }
    int nh() const { return static_cast<int>(theta_.gamma_h0.size()); }

    Eigen::VectorXd pack_survival() const {
        Eigen::VectorXd psi(ng() + na() + nh());
        psi << theta_.gamma, theta_.alpha, theta_.gamma_h0;
        return psi;
    }

    void unpack_survival(const Eigen::VectorXd& psi) {
        theta_.gamma = psi.head(ng());
        theta_.alpha = psi.segment(ng(), na());
        theta_.gamma_h0 = psi.tail(nh());
    }

    double survival_prior(const Eigen::VectorXd& psi) const {
        return prior_normal(psi.head(ng()), priors_.gamma_variance) +
               prior_normal(psi.segment(ng(), na()), priors_.alpha_variance) + h0_prior(psi.tail(nh()));
    }

    double surv_target(const Eigen::VectorXd& psi, std::vector<SubjectState>* cand) const {
        const Eigen::VectorXd gamma = psi.head(ng()), alpha = psi.segment(ng(), na()), h0 = psi.tail(nh());
        double out = survival_prior(psi);
        for (size_t i = 0; i < subj_.size(); ++i) {
            const auto& d = subj_[i];
            const auto& s = st_[i];
            Eigen::VectorXd base = d.grid.baseline_part(h0);
            Eigen::VectorXd lh = hazard(d, base, d.grid.covariate_part(gamma), s.fsig, s.rsig, alpha);
            const double ls = surv(d, lh);
            if (!std::isfinite(ls)) return kNegInf;
            out += ls;
            if (cand) {
                (*cand)[i].base = std::move(base);
                (*cand)[i].lh = std::move(lh);
                (*cand)[i].ll_surv = ls;
            }
        }
        return out;
    }

    /// Analytic gradient and Hessian of surv_target.
    double surv_derivatives(const Eigen::VectorXd& psi, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
        const int dim = static_cast<int>(psi.size());
        const Eigen::VectorXd gamma = psi.head(ng()), alpha = psi.segment(ng(), na()), h0 = psi.tail(nh());
        grad = Eigen::VectorXd::Zero(dim);
        hess = Eigen::MatrixXd::Zero(dim, dim);
        double out = survival_prior(psi);
        grad.head(ng()) -= gamma / priors_.gamma_variance;
        hess.topLeftCorner(ng(), ng()).diagonal().array() -= 1.0 / priors_.gamma_variance;
        grad.segment(ng(), na()) -= alpha / priors_.alpha_variance;
        hess.block(ng(), ng(), na(), na()).diagonal().array() -= 1.0 / priors_.alpha_variance;
        if (penalized_) {
            grad.tail(nh()) -= theta_.tau_h * (K_ * h0);
            hess.bottomRightCorner(nh(), nh()) -= theta_.tau_h * K_;
        } else {
            grad.tail(nh()) -= h0 / priors_.gamma_h0_variance;
            hess.bottomRightCorner(nh(), nh()).diagonal().array() -= 1.0 / priors_.gamma_h0_variance;
        }
        for (size_t i = 0; i < subj_.size(); ++i) {
            const auto& d = subj_[i];
            const auto& s = st_[i];
            const Eigen::Index n = d.grid.size();
            if (n == 0) continue;
            Eigen::MatrixXd phi(n, dim);
            if (ng() > 0) phi.leftCols(ng()) = Eigen::VectorXd::Ones(n) * d.grid.covariates().transpose();
            phi.middleCols(ng(), na()) = s.fsig + s.rsig;
            phi.rightCols(nh()) = d.grid.baseline_basis();
            const Eigen::VectorXd lh = phi * psi;
            const auto integral = d.grid.integrate_log_hazards(lh);
            if (integral.clamped()) return kNegInf;
            const Eigen::VectorXd h =
                (d.grid.weights().array() * lh.array().max(-kLogHazardClamp).exp()).matrix();
            out += (d.event ? lh(n - 1) : 0.0) - integral.value;
            if (d.event) grad += phi.row(n - 1).transpose();
            grad.noalias() -= phi.transpose() * h;
            hess.noalias() -= phi.transpose() * h.asDiagonal() * phi;
        }
        return out;
    }

    /// Newton ascent of the survival block from the current state.
    void optimize_survival() {
        Eigen::VectorXd psi = pack_survival();
        Eigen::VectorXd g;
        Eigen::MatrixXd H;
        double f = surv_derivatives(psi, g, H);
        if (!std::isfinite(f)) return;
        for (int it = 0; it < 50; ++it) {
            Eigen::LLT<Eigen::MatrixXd> llt(-H);
            if (llt.info() != Eigen::Success) break;
            const Eigen::VectorXd step = llt.solve(g);
            double scale = 1.0;
            Eigen::VectorXd cand = psi + step;
            Eigen::VectorXd g2;
            Eigen::MatrixXd H2;
            double f2 = surv_derivatives(cand, g2, H2);
            while (!(f2 >= f) && scale > 1e-6) {
                scale *= 0.5;
                cand = psi + scale * step;
                f2 = surv_derivatives(cand, g2, H2);
            }
            if (!(f2 >= f)) break;
            const double moved = (scale * step).lpNorm<Eigen::Infinity>();
            psi = cand;
            f = f2;
            g = g2;
            H = H2;
            if (moved < 1e-8) break;
        }
        unpack_survival(psi);
        for (size_t i = 0; i < subj_.size(); ++i) rebuild_subject(i);
        surv_cov0_ = curvature_covariance(H, 1e-2);
        store_likelihood_curvature(H);
    }

    static Eigen::MatrixXd curvature_covariance(const Eigen::MatrixXd& H, double fallback_var) {
        const Eigen::Index d = H.rows();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-0.5 * (H + H.transpose()));
        if (es.info() != Eigen::Success || !H.allFinite()) return Eigen::MatrixXd::Identity(d, d) * fallback_var;
        Eigen::VectorXd ev = es.eigenvalues();
        const double top = ev.maxCoeff();
        if (!(top > 0.0)) return Eigen::MatrixXd::Identity(d, d) * fallback_var;
        for (Eigen::Index k = 0; k < d; ++k) ev(k) = 1.0 / std::max(ev(k), 1e-6 * top);
        const Eigen::MatrixXd cov = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        return 0.5 * (cov + cov.transpose());
    }

    /// Keeps the survival-block curvature without the smoothing term, so the
    /// proposal can follow tau_h between adaptation windows.
    void store_likelihood_curvature(const Eigen::MatrixXd& H) {
        surv_curv_ = H;
        if (penalized_) surv_curv_.bottomRightCorner(nh(), nh()) += theta_.tau_h * K_;
        curv_tau_ = std::numeric_limits<double>::quiet_NaN();
    }

    Eigen::MatrixXd survival_shape() {
        Eigen::MatrixXd H = surv_curv_;
        if (penalized_) H.bottomRightCorner(nh(), nh()) -= theta_.tau_h * K_;
        curv_tau_ = theta_.tau_h;
        return curvature_covariance(H, 1e-2);
    }

    /// Translates the random-term coefficients of beta against every b_i. For
    /// trajectory associations the linear predictor is unchanged, so the move
    /// is an exact Gibbs draw from the Gaussian conditional of the shift.
    void shift_move(bool burning) {
        const size_t n = subj_.size();
        const int q = q_;
        const Eigen::MatrixXd Dinv = D_llt_.solve(Eigen::MatrixXd::Identity(q, q));
        Eigen::VectorXd bsum = Eigen::VectorXd::Zero(q);
        for (const auto& s : st_) bsum += s.b;
        const Eigen::VectorXd beta_r = theta_.beta.head(q);
        const double pv = priors_.beta_variance;
        if (model_.association.uses_fixed_effects() || !cfg_.include_survival) {
            const Eigen::MatrixXd P = static_cast<double>(n) * Dinv + Eigen::MatrixXd::Identity(q, q) / pv;
            Eigen::LLT<Eigen::MatrixXd> llt(P);
            const Eigen::VectorXd mean = llt.solve(Dinv * bsum - beta_r / pv);
            const Eigen::VectorXd delta =
                mean + Eigen::MatrixXd(llt.matrixU()).triangularView<Eigen::Upper>().solve(std_normal_vector(rng_, q));
            theta_.beta.head(q) += delta;
            for (size_t i = 0; i < n; ++i) {
                st_[i].b -= delta;
                rebuild_subject(i);
            }
            return;
        }
        // shared random effects: the hazard sees b directly, so Metropolis-Hastings
        const Eigen::VectorXd delta = std::exp(shift_log_scale_) * std_normal_vector(rng_, q) /
                                      std::sqrt(static_cast<double>(n));
        double cur = prior_normal(beta_r, pv), prop = prior_normal(beta_r + delta, pv);
        std::vector<Eigen::VectorXd> lhs(n);
        for (size_t i = 0; i < n; ++i) {
            const auto& d = subj_[i];
            const auto& s = st_[i];
            const Eigen::VectorXd b2 = s.b - delta;
            cur += log_normal_re(s.b) + s.ll_surv;
            lhs[i] = s.lh - d.grid.random_signals(model_, delta) * theta_.alpha;
            const double ls = surv(d, lhs[i]);
            if (!std::isfinite(ls)) {
                prop = kNegInf;
                break;
            }
            prop += log_normal_re(b2) + ls;
        }
        const bool acc = std::isfinite(prop) && std::log(uniform_open(rng_)) < prop - cur;
        if (burning) shift_log_scale_ += ((acc ? 1.0 : 0.0) - 0.44) / std::sqrt(1.0 + ++shift_updates_);
        if (acc) {
            theta_.beta.head(q) += delta;
            for (size_t i = 0; i < n; ++i) {
                st_[i].b -= delta;
                rebuild_subject(i);
            }
        }
    }

    double b_target(size_t i, const Eigen::VectorXd& b, SubjectState* cand) const {
        const auto& d = subj_[i];
        const auto& s = st_[i];
        Eigen::VectorXd zb = d.Z * b;
        const double ll = long_ll(d, s.xb + zb, theta_.sigma2);
        double ls = 0.0;
        Eigen::MatrixXd rsig;
        Eigen::VectorXd lh;
        if (cfg_.include_survival) {
            rsig = d.grid.random_signals(model_, b);
            lh = hazard(d, s.base, d.grid.covariate_part(theta_.gamma), s.fsig, rsig, theta_.alpha);
            ls = surv(d, lh);
            if (!std::isfinite(ls)) return kNegInf;
        }
        if (cand) {
            cand->zb = std::move(zb);
            cand->ll_long = ll;
            cand->ll_surv = ls;
            if (cfg_.include_survival) {
                cand->rsig = std::move(rsig);
                cand->lh = std::move(lh);
            }
        }
        return ll + ls + log_normal_re(b);
    }

    // ---- initialization
    void initialize() {
        const auto& spec = model_.longitudinal;
        const int p = model_.num_fixed();
        const size_t n = subj_.size();
        theta_.beta = Eigen::VectorXd::Zero(p);
        theta_.sigma2 = 1.0;
        theta_.D = Eigen::MatrixXd::Identity(q_, q_);
        theta_.gamma = Eigen::VectorXd::Zero(model_.num_gamma());
        theta_.alpha = Eigen::VectorXd::Zero(model_.num_alpha());
        theta_.tau_h = cfg_.fixed_tau_h.value_or(1.0);
        theta_.tau_h_delta = 1.0;

        // stacked fixed-effects design
        Eigen::MatrixXd X(n_obs_, p);
        Eigen::VectorXd y(n_obs_);
        Eigen::Index r = 0;
        for (const auto& d : subj_) {
            if (d.y.size() == 0) continue;
            X.middleRows(r, d.y.size()) = d.X;
            y.segment(r, d.y.size()) = d.y;
            r += d.y.size();
        }
        std::vector<Eigen::VectorXd> bs(n, Eigen::VectorXd::Zero(q_));
        const Eigen::MatrixXd ridge = 1e-6 * Eigen::MatrixXd::Identity(p, p);
        if (spec.family.family == Family::gaussian) {
            if (n_obs_ > 0) {
                theta_.beta = (X.transpose() * X + ridge).ldlt().solve(X.transpose() * y);
                double ssr = 0.0;
                long used = 0;
                for (size_t i = 0; i < n; ++i) {
                    const auto& d = subj_[i];
                    if (d.y.size() == 0) continue;
                    const Eigen::VectorXd res = d.y - d.X * theta_.beta;
                    const Eigen::MatrixXd A = d.Z.transpose() * d.Z + Eigen::MatrixXd::Identity(q_, q_);
                    bs[i] = A.ldlt().solve(d.Z.transpose() * res);
                    ssr += (res - d.Z * bs[i]).squaredNorm();
                    used += d.y.size();
                }
                theta_.sigma2 = std::max(ssr / std::max<long>(1, used), 1e-4);
            }
        } else if (n_obs_ > 0) {
            // IRLS for the logistic fixed effects
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
            for (int it = 0; it < 25; ++it) {
                const Eigen::VectorXd eta = X * beta;
                Eigen::VectorXd w(n_obs_), z(n_obs_);
                for (Eigen::Index k = 0; k < n_obs_; ++k) {
                    const double mu = spec.family.inverse_link(eta(k));
                    w(k) = std::max(mu * (1.0 - mu), 1e-6);
                    z(k) = eta(k) + (y(k) - mu) / w(k);
                }
                const Eigen::VectorXd next =
                    (X.transpose() * w.asDiagonal() * X + ridge).ldlt().solve(X.transpose() * w.asDiagonal() * z);
                if (!next.allFinite()) break;
                const double change = (next - beta).lpNorm<Eigen::Infinity>();
                beta = next;
                if (change < 1e-8) break;
            }
            theta_.beta = beta;
        }
        if (n >= static_cast<size_t>(q_) + 2 && spec.family.family == Family::gaussian && n_obs_ > 0) {
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(q_);
            for (const auto& b : bs) mean += b;
            mean /= static_cast<double>(n);
            Eigen::MatrixXd C = Eigen::MatrixXd::Zero(q_, q_);
            for (const auto& b : bs) C += (b - mean) * (b - mean).transpose();
            C /= static_cast<double>(n - 1);
            C += 1e-3 * Eigen::MatrixXd::Identity(q_, q_);
            if (Eigen::LLT<Eigen::MatrixXd>(C).info() == Eigen::Success) theta_.D = C;
        }

        double events = 0.0, exposure = 0.0;
        for (const auto& d : subj_) {
            events += d.event ? 1.0 : 0.0;
            exposure += d.subject->event_time;
        }
        const double rate = std::max(events, 0.5) / std::max(exposure, 1e-12);
        theta_.gamma_h0 = Eigen::VectorXd::Constant(model_.num_baseline(), std::log(rate));

        if (index_ > 0) {
            for (Eigen::Index k = 0; k < p; ++k) theta_.beta(k) += 0.1 * std_normal(rng_);
            if (spec.family.has_dispersion()) theta_.sigma2 *= std::exp(0.1 * std_normal(rng_));
            if (cfg_.include_survival) {
                for (Eigen::Index k = 0; k < theta_.gamma.size(); ++k) theta_.gamma(k) += 0.05 * std_normal(rng_);
                for (Eigen::Index k = 0; k < theta_.alpha.size(); ++k) theta_.alpha(k) += 0.01 * std_normal(rng_);
                const double shift = 0.1 * std_normal(rng_);
                theta_.gamma_h0.array() += shift;
            }
            for (auto& b : bs)
                for (int j = 0; j < q_; ++j) b(j) += 0.05 * std_normal(rng_);
        }

        refresh_D();
        st_.resize(n);
        for (size_t i = 0; i < n; ++i) {
            st_[i].b = bs[i];
            rebuild_subject(i);
        }
        cand_ = st_;

        // initial proposal shapes from finite-difference curvature
        b_prop_.resize(n);
        for (size_t i = 0; i < n; ++i) {
            auto f = [&, i](const Eigen::VectorXd& b) { return b_target(i, b, nullptr); };
            b_prop_[i] = AdaptiveProposal(hessian_covariance(f, st_[i].b, theta_.D.diagonal().mean()),
                                          target_rate(q_));
        }
        beta_prop_ = AdaptiveProposal(
            hessian_covariance([&](const Eigen::VectorXd& x) { return beta_target(x, nullptr); }, theta_.beta, 1e-2),
            target_rate(p));
        if (cfg_.include_survival) {
            optimize_survival();
            if (index_ > 0) {
                // overdisperse later chains around the survival-block mode
                const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(surv_cov0_).matrixL();
                Eigen::VectorXd psi = pack_survival() + L * std_normal_vector(rng_, surv_cov0_.rows());
                const Eigen::VectorXd keep = pack_survival();
                unpack_survival(psi);
                bool ok = true;
                for (size_t i = 0; i < n && ok; ++i) {
                    try {
                        rebuild_subject(i);
                    } catch (const NumericError&) {
                        ok = false;
                    }
                }
                if (!ok) {
                    unpack_survival(keep);
                    for (size_t i = 0; i < n; ++i) rebuild_subject(i);
                }
            }
            surv_prop_ = AdaptiveProposal(surv_cov0_, target_rate(surv_cov0_.rows()));
        }
    }

    // ---- one sweep
    bool mh(AdaptiveProposal& prop, const Eigen::VectorXd& x, double current, Eigen::VectorXd& proposal_out,
            const std::function<double(const Eigen::VectorXd&)>& target, const char* name, bool burning, int it) {
        proposal_out = prop.propose(x, rng_);
        const double lp = target(proposal_out);
        const double u = uniform_open(rng_);
        const bool acc = std::isfinite(lp) && std::log(u) < lp - current;
        if (burning) {
            prop.record(acc);
        } else {
            auto& a = accept_[name];
            ++a.second;
            if (acc) ++a.first;
        }
        (void)it;
        return acc;
    }

    void sweep(bool burning, int it) {
        const bool observe = burning && it >= cfg_.burn_in / 5;
        const size_t n = subj_.size();
        Eigen::VectorXd prop;

        // random effects
        for (size_t i = 0; i < n; ++i) {
            auto& s = st_[i];
            const double cur = s.ll_long + s.ll_surv + log_normal_re(s.b);
            SubjectState& c = cand_[i];
            if (mh(b_prop_[i], s.b, cur, prop, [&](const Eigen::VectorXd& b) { return b_target(i, b, &c); },
                   "b", burning, it)) {
                s.b = prop;
                s.zb = c.zb;
                s.ll_long = c.ll_long;
                s.ll_surv = c.ll_surv;
                if (cfg_.include_survival) {
                    s.rsig = c.rsig;
                    s.lh = c.lh;
                }
            }
            if (observe) b_prop_[i].observe(s.b);
        }

        // fixed effects
        {
            double cur = prior_normal(theta_.beta, priors_.beta_variance);
            for (const auto& s : st_) cur += s.ll_long + s.ll_surv;
            if (mh(beta_prop_, theta_.beta, cur, prop, [&](const Eigen::VectorXd& x) { return beta_target(x, &cand_); },
                   "beta", burning, it)) {
                theta_.beta = prop;
                for (size_t i = 0; i < n; ++i) {
                    st_[i].xb = cand_[i].xb;
                    st_[i].ll_long = cand_[i].ll_long;
                    st_[i].ll_surv = cand_[i].ll_surv;
                    if (cfg_.include_survival && model_.association.uses_fixed_effects()) {
                        st_[i].fsig = cand_[i].fsig;
                        st_[i].lh = cand_[i].lh;
                    }
                }
            }
            if (observe) beta_prop_.observe(theta_.beta);
        }
        shift_move(burning);

        // residual variance
        if (model_.longitudinal.family.has_dispersion() && n_obs_ > 0) {
            double ssr = 0.0;
            for (size_t i = 0; i < n; ++i) ssr += (subj_[i].y - st_[i].xb - st_[i].zb).squaredNorm();
            theta_.sigma2 = draw_sigma2(rng_, priors_, ssr, n_obs_);
            for (size_t i = 0; i < n; ++i) st_[i].ll_long = long_ll(subj_[i], st_[i].xb + st_[i].zb, theta_.sigma2);
        }

        // random-effects covariance
        {
            std::vector<Eigen::VectorXd> bs;
            bs.reserve(n);
            for (const auto& s : st_) bs.push_back(s.b);
            theta_.D = draw_D(rng_, priors_, bs, q_);
            refresh_D();
        }

        if (!cfg_.include_survival) return;

        {
            if (penalized_ && theta_.tau_h != curv_tau_) surv_prop_.set_shape(survival_shape(), true);
            const Eigen::VectorXd psi = pack_survival();
            double cur = survival_prior(psi);
            for (const auto& s : st_) cur += s.ll_surv;
            if (mh(surv_prop_, psi, cur, prop, [&](const Eigen::VectorXd& x) { return surv_target(x, &cand_); },
                   "survival", burning, it)) {
                unpack_survival(prop);
                for (size_t i = 0; i < n; ++i) {
                    st_[i].base = cand_[i].base;
                    st_[i].lh = cand_[i].lh;
                    st_[i].ll_surv = cand_[i].ll_surv;
                }
            }
            if (observe) surv_prop_.observe(pack_survival());
        }

        if (penalized_) {
            if (!cfg_.fixed_tau_h) {
                theta_.tau_h =
                    draw_tau_h(rng_, priors_, theta_.tau_h_delta, theta_.gamma_h0.dot(K_ * theta_.gamma_h0), rank_);
                if (cfg_.include_survival) rescale_move(burning);
            }
            theta_.tau_h_delta = draw_tau_h_delta(rng_, priors_, theta_.tau_h);
        }
    }

    /// Joint move tau_h -> c * tau_h with the penalized part of gamma_h0
    /// shrunk by 1/sqrt(c), so the smoothing prior is nearly unchanged.
    void rescale_move(bool burning) {
        const double log_c = std::exp(rescale_log_scale_) * std_normal(rng_);
        const double c = std::exp(log_c);
        const Eigen::VectorXd& g = theta_.gamma_h0;
        const Eigen::VectorXd gp = penalized_projector_ * g;
        const Eigen::VectorXd g2 = g - gp + gp / std::sqrt(c);
        const double tau = theta_.tau_h, tau2 = c * tau;
        auto log_tau_terms = [&](double t, const Eigen::VectorXd& h0) {
            return (0.5 * rank_ + priors_.tau_h_shape) * std::log(t) - 0.5 * t * h0.dot(K_ * h0) -
                   theta_.tau_h_delta * t;
        };
        double cur = log_tau_terms(tau, g), prop = log_tau_terms(tau2, g2) - 0.5 * rank_ * log_c;
        const size_t n = subj_.size();
        for (size_t i = 0; i < n; ++i) {
            const auto& d = subj_[i];
            const auto& s = st_[i];
            cur += s.ll_surv;
            cand_[i].base = d.grid.baseline_part(g2);
            cand_[i].lh = s.lh - s.base + cand_[i].base;
            cand_[i].ll_surv = surv(d, cand_[i].lh);
            if (!std::isfinite(cand_[i].ll_surv)) {
                prop = kNegInf;
                break;
            }
            prop += cand_[i].ll_surv;
        }
        const bool acc = std::isfinite(prop) && std::log(uniform_open(rng_)) < prop - cur;
        if (burning) rescale_log_scale_ += ((acc ? 1.0 : 0.0) - 0.44) / std::sqrt(1.0 + ++rescale_updates_);
        if (!acc) return;
        theta_.tau_h = tau2;
        theta_.gamma_h0 = g2;
        for (size_t i = 0; i < n; ++i) {
            st_[i].base = cand_[i].base;
            st_[i].lh = cand_[i].lh;
            st_[i].ll_surv = cand_[i].ll_surv;
        }
    }

    void adapt_all() {
        for (auto& p : b_prop_) p.adapt();
        beta_prop_.adapt();
        if (cfg_.include_survival) {
            Eigen::VectorXd g;
            Eigen::MatrixXd H;
            if (std::isfinite(surv_derivatives(pack_survival(), g, H))) {
                store_likelihood_curvature(H);
                const Eigen::MatrixXd shape = survival_shape();
                surv_prop_.adapt(&shape);
            } else {
                surv_prop_.adapt();
            }
        }
    }

    void record(PosteriorSamples& out, int it) {
        out.draws.push_back(theta_);
        out.chain.push_back(index_);
        out.iteration.push_back(it);
        if (cfg_.store_random_effects) {
            Eigen::MatrixXd B(static_cast<Eigen::Index>(st_.size()), q_);
            for (size_t i = 0; i < st_.size(); ++i) B.row(static_cast<Eigen::Index>(i)) = st_[i].b.transpose();
            out.random_effects.push_back(std::move(B));
        }
    }

    const std::vector<SubjectData>& subj_;
    const JointModel& model_;
    const PriorSet& priors_;
    const McmcConfig& cfg_;
    int index_;
    Rng rng_;
    int q_ = 1;
    bool penalized_ = false;
    Eigen::MatrixXd K_;
    Eigen::MatrixXd penalized_projector_;
    int rank_ = 0;
    double rescale_log_scale_ = 0.0;
    long rescale_updates_ = 0;
    long n_obs_ = 0;

    Parameters theta_;
    Eigen::LLT<Eigen::MatrixXd> D_llt_;
    double D_log_det_ = 0.0;
    std::vector<SubjectState> st_, cand_;
    std::vector<AdaptiveProposal> b_prop_;
    AdaptiveProposal beta_prop_, surv_prop_;
    Eigen::MatrixXd surv_cov0_, surv_curv_;
    double curv_tau_ = std::numeric_limits<double>::quiet_NaN();
    double shift_log_scale_ = 0.0;
    long shift_updates_ = 0;
    std::map<std::string, std::pair<long, long>> accept_;
};

}  // namespace

PosteriorSamples fit(const Dataset& data, const JointModel& model, const PriorSet& priors, const McmcConfig& config) {
    config.validate();
    priors.validate();
    if (data.subjects.empty()) throw DataError("cannot fit an empty dataset");
    for (const auto& s : data.subjects) s.validate();

    std::vector<SubjectData> subjects;
    subjects.reserve(data.subjects.size());
    for (const auto& s : data.subjects) subjects.emplace_back(model, s);

    PosteriorSamples out;
    out.model = model;
    out.priors = priors;
    for (const auto& s : data.subjects) out.subject_ids.push_back(s.id);

    std::map<std::string, std::pair<long, long>> acc;
    for (int c = 0; c < config.chains; ++c) {
        Chain chain(subjects, model, priors, config, c);
        chain.run(out);
        for (const auto& [k, v] : chain.acceptance()) {
            acc[k].first += v.first;
            acc[k].second += v.second;
        }
    }

    auto& diag = out.diagnostics;
    for (const auto& [k, v] : acc)
        diag.acceptance[k] = v.second > 0 ? static_cast<double>(v.first) / static_cast<double>(v.second) : 0.0;
    diag.names = parameter_names(model);
    const size_t np = diag.names.size();
    std::vector<std::vector<std::vector<double>>> series(np, std::vector<std::vector<double>>(config.chains));
    for (size_t g = 0; g < out.draws.size(); ++g) {
        const Eigen::VectorXd v = flatten(out.draws[g], model);
        for (size_t k = 0; k < np; ++k) series[k][static_cast<size_t>(out.chain[g])].push_back(v(static_cast<Eigen::Index>(k)));
    }
    for (size_t k = 0; k < np; ++k) {
        const double r = split_rhat(series[k]);
        diag.rhat.push_back(r);
        diag.ess.push_back(effective_sample_size(series[k]));
        if (std::isfinite(r) && r > 1.1) {
            diag.converged = false;
            diag.flags.push_back("rhat > 1.1 for " + diag.names[k]);
        } else if (std::isinf(r)) {
            diag.converged = false;
            diag.flags.push_back("chains disagree on constant value of " + diag.names[k]);
        }
    }
    bool any_event = false;
    for (const auto& s : data.subjects) any_event = any_event || s.event == 1;
    if (!any_event) diag.flags.push_back("warning: dataset contains no events");
    return out;
}

DicResult dic(const PosteriorSamples& samples, const Dataset& data) {
    if (samples.draws.empty()) throw PreconditionError("DIC needs at least one draw");
    if (!samples.has_random_effects()) throw PreconditionError("DIC needs stored random-effect draws");
    const auto& model = samples.model;
    const auto n = static_cast<Eigen::Index>(data.subjects.size());
    if (samples.random_effects.front().rows() != n) throw DataError("random-effect draws do not match the dataset");

    std::vector<SubjectData> subjects;
    subjects.reserve(data.subjects.size());
    for (const auto& s : data.subjects) subjects.emplace_back(model, s);

    double d_bar = 0.0;
    Eigen::MatrixXd b_mean = Eigen::MatrixXd::Zero(n, model.num_random());
    for (size_t g = 0; g < samples.draws.size(); ++g) {
        const auto& theta = samples.draws[g];
        const auto& B = samples.random_effects[g];
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) ll += subjects[static_cast<size_t>(i)].loglik(model, theta, B.row(i).transpose());
        d_bar += -2.0 * ll;
        b_mean += B;
    }
    const double G = static_cast<double>(samples.draws.size());
    d_bar /= G;
    b_mean /= G;
    const Parameters mean = samples.posterior_mean();
    double ll_hat = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        ll_hat += subjects[static_cast<size_t>(i)].loglik(model, mean, b_mean.row(i).transpose());
    DicResult r;
    r.d_bar = d_bar;
    r.d_hat = -2.0 * ll_hat;
    r.p_d = d_bar - r.d_hat;
    r.dic = d_bar + r.p_d;
    return r;
}

}  // namespace jms
