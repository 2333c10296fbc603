#include "jmsched/dynpred.hpp"

#include "jmsched/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jms {

namespace {

constexpr std::uint64_t kPiStream = 11;
constexpr std::uint64_t kEklStream = 12;
constexpr std::uint64_t kCvDclStream = 13;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

double log_sum_exp(const std::vector<double>& x) {
    const double m = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

double percentile(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const auto j = static_cast<std::size_t>(std::floor(h));
    if (j + 1 >= x.size()) return x.back();
    return x[j] + (h - static_cast<double>(j)) * (x[j + 1] - x[j]);
}

Subject with_extra(const Subject& s, double t, double y) {
    Subject out = s;
    out.times.push_back(t);
    out.values.push_back(y);
    return out;
}

}  // namespace

// --- history --------------------------------------------------------------------

SubjectHistory SubjectHistory::at_landmark(const Subject& s, double t) {
    if (!(t >= 0.0)) throw DomainError("landmark must be nonnegative");
    if (s.event_time < t) {
        if (s.event == 1)
            throw PreconditionError("subject " + s.id + " had an event at " + std::to_string(s.event_time) +
                                    ", before the landmark " + std::to_string(t));
        throw PreconditionError("follow-up of subject " + s.id + " ends before the landmark " + std::to_string(t));
    }
    SubjectHistory h;
    h.landmark = t;
    h.subject = s;
    h.subject.times.clear();
    h.subject.values.clear();
    for (size_t l = 0; l < s.times.size(); ++l)
        if (s.times[l] <= t) {
            h.subject.times.push_back(s.times[l]);
            h.subject.values.push_back(s.values[l]);
        }
    h.subject.event_time = t;
    h.subject.event = 0;
    return h;
}

void SubjectHistory::validate() const {
    if (!(landmark >= 0.0)) throw DomainError("landmark must be nonnegative");
    for (double t : subject.times)
        if (t > landmark) throw DataError("history of subject " + subject.id + " has a measurement after the landmark");
}

void ScheduleConfig::validate() const {
    if (!(kappa > 0.0 && kappa < 1.0)) throw ConfigError("schedule.kappa must lie in (0, 1)");
    if (!(t_max > 0.0)) throw ConfigError("schedule.t_max must be positive");
    if (grid_size < 2) throw ConfigError("schedule.grid_size must be >= 2");
    if (outer < 1 || inner < 1 || pi_draws < 1) throw ConfigError("schedule Monte Carlo counts must be positive");
    if (chains.warmup < 0 || chains.inner_warmup < 0 || chains.steps_per_draw < 1)
        throw ConfigError("invalid random-effects chain settings");
}

// --- conditional survival ------------------------------------------------------------

PiEstimator::PiEstimator(const PosteriorSamples& samples, const SubjectHistory& history, int draws,
                         std::uint64_t seed, const ReChainOptions& options)
    : samples_(&samples), subject_(history.subject), t_(history.landmark) {
    history.validate();
    if (draws < 1) throw ConfigError("conditional survival needs at least one draw");
    if (samples.draws.empty()) throw PreconditionError("posterior has no draws");
    const auto& model = samples.model;
    cov_ = bind_covariates(model, subject_);

    ReTarget target(model, subject_, ReCondition{t_, {}});
    target.set_parameters(samples.posterior_mean());
    const ReMode mode = posterior_mode_re(target);
    ReSampler sampler(target, mode);
    Rng rng = make_stream(seed, {kPiStream});
    for (int g = 0; g < draws; ++g) {
        const std::size_t idx = uniform_index(rng, samples.draws.size());
        target.set_parameters(samples.draws[idx]);
        sampler.refresh();
        sampler.run(rng, g == 0 ? options.warmup : options.steps_per_draw);
        theta_index_.push_back(idx);
        b_.push_back(sampler.state());
    }
}

double PiEstimator::operator()(double u) const {
    if (u < t_) throw DomainError("conditional survival requires u >= t");
    if (u == t_) return 1.0;
    const auto& model = samples_->model;
    const HazardGrid grid(model, cov_, t_, u);
    double acc = 0.0;
    for (std::size_t g = 0; g < b_.size(); ++g) {
        const auto integral = grid.integrate(model, samples_->draws[theta_index_[g]], b_[g]);
        acc += std::exp(-integral.value);
    }
    return std::clamp(acc / static_cast<double>(b_.size()), 0.0, 1.0);
}

double conditional_survival(const SubjectHistory& history, double u, const PosteriorSamples& samples, int draws,
                            std::uint64_t seed) {
    if (u < history.landmark) throw DomainError("conditional survival requires u >= t");
    return PiEstimator(samples, history, draws, seed)(u);
}

// --- cvDCL --------------------------------------------------------------------------

CvDclResult cv_dcl(const PosteriorSamples& samples, const Dataset& data, double t, const CvDclConfig& config) {
    if (samples.draws.empty()) throw PreconditionError("posterior has no draws");
    if (config.re_draws < 1) throw ConfigError("cvdcl.re_draws must be >= 1");
    if (config.reuse_fit_draws && !samples.has_random_effects())
        throw PreconditionError("reusing fitted random effects requires stored draws");
    const auto& model = samples.model;

    std::vector<std::size_t> use;
    const std::size_t G = samples.draws.size();
    if (config.max_draws > 0 && G > static_cast<std::size_t>(config.max_draws)) {
        for (int k = 0; k < config.max_draws; ++k) use.push_back(static_cast<std::size_t>(k) * G / config.max_draws);
    } else {
        for (std::size_t g = 0; g < G; ++g) use.push_back(g);
    }
    const Parameters theta_hat = samples.posterior_mean();

    CvDclResult out;
    for (const auto& s : data.subjects) {
        if (!(s.event_time > t)) continue;
        const auto history = SubjectHistory::at_landmark(s, t);
        const auto cov = bind_covariates(model, s);
        HazardGrid grid(model, cov, t, s.event_time);
        if (s.event == 1) grid.add_point(model, cov, s.event_time);
        auto log_p = [&](const Parameters& theta, const Eigen::VectorXd& b) {
            const Eigen::VectorXd lh = grid.log_hazards(model, theta, b);
            const auto integral = grid.integrate_log_hazards(lh);
            return (s.event == 1 ? std::min(lh(lh.size() - 1), kLogHazardClamp) : 0.0) - integral.value;
        };

        std::vector<double> neg_log_p;
        neg_log_p.reserve(use.size());
        if (config.reuse_fit_draws) {
            const auto it = std::find(samples.subject_ids.begin(), samples.subject_ids.end(), s.id);
            if (it == samples.subject_ids.end()) throw DataError("no fitted random effects for subject " + s.id);
            const auto row = static_cast<Eigen::Index>(it - samples.subject_ids.begin());
            for (std::size_t g : use)
                neg_log_p.push_back(-log_p(samples.draws[g], samples.random_effects[g].row(row).transpose()));
        } else {
            ReTarget target(model, history.subject, ReCondition{t, {}});
            target.set_parameters(theta_hat);
            const ReMode mode = posterior_mode_re(target);
            ReSampler sampler(target, mode);
            Rng rng = make_stream(config.seed, {kCvDclStream, fnv1a(s.id)});
            std::vector<double> terms(static_cast<std::size_t>(config.re_draws));
            bool first = true;
            for (std::size_t g : use) {
                const auto& theta = samples.draws[g];
                target.set_parameters(theta);
                sampler.refresh();
                if (first) sampler.run(rng, config.chains.warmup);
                first = false;
                for (int m = 0; m < config.re_draws; ++m) {
                    sampler.run(rng, config.chains.steps_per_draw);
                    terms[static_cast<std::size_t>(m)] = log_p(theta, sampler.state());
                }
                neg_log_p.push_back(-(log_sum_exp(terms) - std::log(static_cast<double>(config.re_draws))));
            }
        }
        const double lcpo = std::log(static_cast<double>(neg_log_p.size())) - log_sum_exp(neg_log_p);
        out.subject_ids.push_back(s.id);
        out.log_cpo.push_back(lcpo);
        out.sum += lcpo;
    }
    out.n_at_risk = static_cast<int>(out.log_cpo.size());
    if (out.n_at_risk == 0) throw DomainError("no subject is at risk after landmark " + std::to_string(t));
    out.value = out.sum / out.n_at_risk;
    return out;
}

// --- simulation primitives ------------------------------------------------------------

EventTimeDraw simulate_event_time(const JointModel& model, const Parameters& theta, const BoundCovariates& cov,
                                  const Eigen::VectorXd& b, double from, double v, double cap) {
    if (!(v > 0.0)) throw DomainError("inversion requires v in (0, 1]");
    if (v >= 1.0) return {from, false};
    const double target = -std::log(v);
    auto integral = [&](double a, double c) {
        if (c <= a) return 0.0;
        return HazardGrid(model, cov, a, c).integrate(model, theta, b).value;
    };
    double lo = from, h_lo = 0.0, width = 1.0, hi = from;
    for (;;) {
        if (lo >= cap) return {cap, true};
        hi = std::min(lo + width, cap);
        const double seg = integral(lo, hi);
        if (h_lo + seg >= target) break;
        h_lo += seg;
        lo = hi;
        width *= 2.0;
    }
    constexpr double kTol = 1e-6;
    while (hi - lo > kTol) {
        const double mid = 0.5 * (lo + hi);
        const double h_mid = h_lo + integral(lo, mid);
        if (h_mid < target) {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
        }
    }
    return {0.5 * (lo + hi), false};
}

EventTimeDraw simulate_event_time(const JointModel& model, const Parameters& theta, const BoundCovariates& cov,
                                  const Eigen::VectorXd& b, double from, Rng& rng, double cap) {
    return simulate_event_time(model, theta, cov, b, from, uniform_open(rng), cap);
}

double simulate_future_measurement(const JointModel& model, const BoundCovariates& cov, const Eigen::VectorXd& b,
                                   const Parameters& theta, double u, Rng& rng) {
    const auto& spec = model.longitudinal;
    const double eta = spec.fixed_row(cov.longitudinal, u).dot(theta.beta) + spec.random_row(u).dot(b);
    if (spec.family.family == Family::gaussian) return eta + std::sqrt(theta.sigma2) * std_normal(rng);
    return uniform_open(rng) < spec.family.inverse_link(eta) ? 1.0 : 0.0;
}

// --- EKL ----------------------------------------------------------------------------

EklEstimate ekl(const SubjectHistory& history, double u, const PosteriorSamples& samples, const ScheduleConfig& config,
                int u_index) {
    config.validate();
    history.validate();
    const double t = history.landmark;
    if (!(u > t)) throw DomainError("information gain requires u > t");
    if (samples.draws.empty()) throw PreconditionError("posterior has no draws");
    const auto& model = samples.model;
    const auto cov = bind_covariates(model, history.subject);
    const Parameters theta_hat = samples.posterior_mean();
    const auto& opt = config.chains;
    const double cap = t + 100.0 * config.t_max;
    const std::size_t G = samples.draws.size();
    const int L = config.inner;

    ReTarget base(model, history.subject, ReCondition{t, {}});
    base.set_parameters(theta_hat);
    const ReMode base_mode = posterior_mode_re(base);
    ReSampler base_sampler(base, base_mode);

    EklEstimate out;
    out.replicates.reserve(static_cast<std::size_t>(config.outer));
    int zeros = 0;
    std::vector<Parameters const*> breve(static_cast<std::size_t>(L));
    std::vector<Eigen::VectorXd> b_breve(static_cast<std::size_t>(L));
    std::vector<double> terms(static_cast<std::size_t>(L));
    for (int q = 0; q < config.outer; ++q) {
        Rng rng = make_stream(config.seed, {kEklStream, static_cast<std::uint64_t>(u_index), static_cast<std::uint64_t>(q)});
        // Step 1
        const Parameters& th_tilde = samples.draws[uniform_index(rng, G)];
        const Parameters& th_ddot = samples.draws[uniform_index(rng, G)];
        for (int l = 0; l < L; ++l) breve[static_cast<std::size_t>(l)] = &samples.draws[uniform_index(rng, G)];
        // Step 2
        base.set_parameters(th_tilde);
        base_sampler.reset(base_mode.location);
        base_sampler.run(rng, opt.inner_warmup);
        const Eigen::VectorXd b_tilde = base_sampler.state();
        // Step 3
        const double y_u = simulate_future_measurement(model, cov, b_tilde, th_tilde, u, rng);
        const Subject augmented = with_extra(history.subject, u, y_u);
        // Step 4
        ReTarget cond_t(model, augmented, ReCondition{t, {}});
        cond_t.set_parameters(theta_hat);
        const ReMode mode_t = posterior_mode_re(cond_t);
        cond_t.set_parameters(th_ddot);
        ReSampler s_t(cond_t, mode_t);
        s_t.run(rng, opt.inner_warmup);
        const Eigen::VectorXd b_ddot = s_t.state();

        ReTarget cond_u(model, augmented, ReCondition{u, {}});
        cond_u.set_parameters(theta_hat);
        const ReMode mode_u = posterior_mode_re(cond_u);
        ReSampler s_u(cond_u, mode_u);
        for (int l = 0; l < L; ++l) {
            cond_u.set_parameters(*breve[static_cast<std::size_t>(l)]);
            s_u.refresh();
            s_u.run(rng, l == 0 ? opt.inner_warmup : opt.steps_per_draw);
            b_breve[static_cast<std::size_t>(l)] = s_u.state();
        }
        // Step 5
        const auto T = simulate_event_time(model, th_ddot, cov, b_ddot, t, rng, cap);
        // Step 6
        double value = 0.0;
        if (T.time > u) {
            HazardGrid grid(model, cov, u, T.time);
            grid.add_point(model, cov, T.time);
            for (int l = 0; l < L; ++l) {
                const auto idx = static_cast<std::size_t>(l);
                const Eigen::VectorXd lh = grid.log_hazards(model, *breve[idx], b_breve[idx]);
                const auto integral = grid.integrate_log_hazards(lh);
                terms[idx] = std::min(lh(lh.size() - 1), kLogHazardClamp) - integral.value;
            }
            value = log_sum_exp(terms) - std::log(static_cast<double>(L));
        } else {
            ++zeros;
        }
        out.replicates.push_back(value);
    }
    const double n = static_cast<double>(out.replicates.size());
    double mean = 0.0;
    for (double v : out.replicates) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : out.replicates) var += (v - mean) * (v - mean);
    var = n > 1 ? var / (n - 1) : 0.0;
    out.estimate = mean;
    out.std_error = std::sqrt(var / n);
    out.lower = percentile(out.replicates, 0.025);
    out.upper = percentile(out.replicates, 0.975);
    out.zero_fraction = zeros / n;
    return out;
}

// --- scheduling -------------------------------------------------------------------------

std::optional<std::size_t> select_next(const std::vector<double>& grid, const std::vector<double>& ekl_values,
                                       const std::vector<double>& pi, double kappa) {
    if (grid.size() != ekl_values.size() || grid.size() != pi.size())
        throw ConfigError("grid, ekl and pi must have equal lengths");
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!(pi[k] >= kappa)) continue;
        if (!best || ekl_values[k] > ekl_values[*best]) best = k;
    }
    return best;
}

SchedulePlan schedule_next(const SubjectHistory& history, const PosteriorSamples& samples,
                           const ScheduleConfig& config) {
    config.validate();
    history.validate();
    const double t = history.landmark;
    const PiEstimator pi(samples, history, config.pi_draws, config.seed, config.chains);

    SchedulePlan plan;
    plan.t = t;
    constexpr double kMinSpacing = 1e-3;
    constexpr double kProbTol = 1e-3;
    double hi = t + config.t_max;
    if (pi(hi) >= config.kappa) {
        plan.t_up = hi;
    } else {
        // pi(lo) >= kappa > pi(hi) throughout
        double lo = t;
        double pi_lo = 1.0;
        while (pi_lo - config.kappa >= kProbTol && hi - lo > 1e-9) {
            const double mid = 0.5 * (lo + hi);
            const double p = pi(mid);
            if (p >= config.kappa) {
                lo = mid;
                pi_lo = p;
            } else {
                hi = mid;
            }
        }
        plan.t_up = lo;
    }
    if (plan.t_up - t < kMinSpacing) {
        plan.flags.push_back(kInterveneFlag);
        return plan;
    }
    const double span = plan.t_up == t + config.t_max ? config.t_max : plan.t_up - t;
    std::vector<double> ekl_values;
    for (int k = 1; k <= config.grid_size; ++k) {
        const double u = t + span * k / config.grid_size;
        plan.grid.push_back(u);
        plan.pi.push_back(pi(u));
        plan.ekl.push_back(ekl(history, u, samples, config, k - 1));
        ekl_values.push_back(plan.ekl.back().estimate);
    }
    plan.selected = select_next(plan.grid, ekl_values, plan.pi, config.kappa);
    if (!plan.selected) plan.flags.push_back("no grid point satisfies the survival constraint");
    return plan;
}

}  // namespace jms
