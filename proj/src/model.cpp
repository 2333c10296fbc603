#include "jmsched/model.hpp"

#include "jmsched/error.hpp"
#include "jmsched/hazard_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace jms {

double ExponentialFamily::link(double mean) const {
    if (family == Family::gaussian) return mean;
    if (!(mean > 0.0 && mean < 1.0)) throw DomainError("logit link requires a mean in (0, 1)");
    return std::log(mean / (1.0 - mean));
}

double ExponentialFamily::inverse_link(double eta) const {
    if (family == Family::gaussian) return eta;
    return eta >= 0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

std::string to_string(Family f) { return f == Family::gaussian ? "gaussian" : "bernoulli"; }

Family family_from_string(const std::string& s) {
    if (s == "gaussian") return Family::gaussian;
    if (s == "bernoulli") return Family::bernoulli;
    throw ConfigError("unknown family '" + s + "' (valid: gaussian, bernoulli)");
}

double long_log_density(const ExponentialFamily& family, double y, double eta, double phi) {
    if (family.family == Family::gaussian) {
        if (!(phi > 0.0)) throw DomainError("gaussian dispersion must be positive");
        const double r = y - eta;
        return -0.5 * std::log(2.0 * std::numbers::pi * phi) - 0.5 * r * r / phi;
    }
    if (y != 0.0 && y != 1.0) throw DomainError("bernoulli outcome must be 0 or 1");
    // log(1 + e^eta) without overflow
    const double softplus = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    return y * eta - softplus;
}

// --- TimeBasis --------------------------------------------------------------

TimeBasis TimeBasis::polynomial(int degree) {
    if (degree < 1) throw ConfigError("polynomial time basis needs degree >= 1");
    TimeBasis tb;
    tb.impl_ = Polynomial{degree};
    return tb;
}

TimeBasis TimeBasis::natural_cubic(NaturalCubicBasis basis) {
    TimeBasis tb;
    tb.impl_ = std::move(basis);
    return tb;
}

int TimeBasis::size() const {
    if (auto p = std::get_if<Polynomial>(&impl_)) return p->degree;
    return std::get<NaturalCubicBasis>(impl_).size();
}

int TimeBasis::polynomial_degree() const {
    if (auto p = std::get_if<Polynomial>(&impl_)) return p->degree;
    return 0;
}

Eigen::VectorXd TimeBasis::eval(double t) const {
    if (auto p = std::get_if<Polynomial>(&impl_)) {
        Eigen::VectorXd out(p->degree);
        double pw = 1.0;
        for (int k = 0; k < p->degree; ++k) out(k) = (pw *= t);
        return out;
    }
    return std::get<NaturalCubicBasis>(impl_).eval(t);
}

Eigen::VectorXd TimeBasis::deriv(double t) const {
    if (auto p = std::get_if<Polynomial>(&impl_)) {
        Eigen::VectorXd out(p->degree);
        double pw = 1.0;
        for (int k = 0; k < p->degree; ++k) {
            out(k) = (k + 1) * pw;
            pw *= t;
        }
        return out;
    }
    return std::get<NaturalCubicBasis>(impl_).deriv(t);
}

Eigen::VectorXd TimeBasis::integral(double t) const {
    if (auto p = std::get_if<Polynomial>(&impl_)) {
        Eigen::VectorXd out(p->degree);
        double pw = t;
        for (int k = 0; k < p->degree; ++k) {
            pw *= t;
            out(k) = pw / (k + 2);
        }
        return out;
    }
    // Piecewise cubic between knots and linear outside: GK15 per panel is exact.
    const auto& ncs = std::get<NaturalCubicBasis>(impl_);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(ncs.size());
    if (t == 0.0) return out;
    const double lo = std::min(0.0, t), hi = std::max(0.0, t);
    const auto bps = ncs.breakpoints();
    const auto panels = composite_panels(lo, hi, bps);
    const auto& rule = QuadratureRule::gauss_kronrod15();
    for (size_t k = 1; k < panels.size(); ++k) {
        const double half = 0.5 * (panels[k] - panels[k - 1]);
        const double mid = 0.5 * (panels[k] + panels[k - 1]);
        for (size_t j = 0; j < rule.nodes.size(); ++j) out += (half * rule.weights[j]) * ncs.eval(mid + half * rule.nodes[j]);
    }
    return t >= 0 ? out : Eigen::VectorXd(-out);
}

std::vector<double> TimeBasis::breakpoints() const {
    if (auto n = std::get_if<NaturalCubicBasis>(&impl_)) return n->breakpoints();
    return {};
}

// --- LongitudinalSpec ---------------------------------------------------------

Eigen::VectorXd LongitudinalSpec::fixed_row(const Eigen::VectorXd& cov, double t) const {
    const int k = time.size();
    Eigen::VectorXd row(fixed_size());
    row(0) = 1.0;
    row.segment(1, k) = time.eval(t);
    row.tail(cov.size()) = cov;
    return row;
}

Eigen::VectorXd LongitudinalSpec::fixed_deriv_row(double t) const {
    const int k = time.size();
    Eigen::VectorXd row = Eigen::VectorXd::Zero(fixed_size());
    row.segment(1, k) = time.deriv(t);
    return row;
}

Eigen::VectorXd LongitudinalSpec::fixed_integral_row(const Eigen::VectorXd& cov, double t) const {
    const int k = time.size();
    Eigen::VectorXd row(fixed_size());
    row(0) = t;
    row.segment(1, k) = time.integral(t);
    row.tail(cov.size()) = cov * t;
    return row;
}

Eigen::VectorXd LongitudinalSpec::random_row(double t) const {
    Eigen::VectorXd row(random_size());
    row(0) = 1.0;
    if (random_time_terms > 0) row.tail(random_time_terms) = time.eval(t).head(random_time_terms);
    return row;
}

Eigen::VectorXd LongitudinalSpec::random_deriv_row(double t) const {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(random_size());
    if (random_time_terms > 0) row.tail(random_time_terms) = time.deriv(t).head(random_time_terms);
    return row;
}

Eigen::VectorXd LongitudinalSpec::random_integral_row(double t) const {
    Eigen::VectorXd row(random_size());
    row(0) = t;
    if (random_time_terms > 0) row.tail(random_time_terms) = time.integral(t).head(random_time_terms);
    return row;
}

// --- Association / model ------------------------------------------------------

int AssociationForm::arity(int random_size) const {
    switch (kind) {
        case Kind::current_value:
        case Kind::slope:
        case Kind::cumulative: return 1;
        case Kind::value_and_slope: return 2;
        case Kind::shared_random_effects: return random_size;
    }
    return 0;
}

std::string to_string(AssociationForm::Kind k) {
    using K = AssociationForm::Kind;
    switch (k) {
        case K::current_value: return "current_value";
        case K::slope: return "slope";
        case K::value_and_slope: return "value_and_slope";
        case K::cumulative: return "cumulative";
        case K::shared_random_effects: return "shared_random_effects";
    }
    return "?";
}

AssociationForm::Kind association_from_string(const std::string& s) {
    using K = AssociationForm::Kind;
    for (K k : {K::current_value, K::slope, K::value_and_slope, K::cumulative, K::shared_random_effects})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown association variant '" + s +
                      "' (valid: current_value, slope, value_and_slope, cumulative, shared_random_effects)");
}

std::vector<double> JointModel::hazard_breakpoints() const {
    std::vector<double> out = baseline.breakpoints();
    const auto tb = longitudinal.time.breakpoints();
    out.insert(out.end(), tb.begin(), tb.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

double JointModel::max_panel_width() const {
    const auto spans = static_cast<double>(baseline.interior_knots().size() + 1);
    return (baseline.upper() - baseline.lower()) / spans;
}

Eigen::VectorXd JointModel::baseline_row(double t) const {
    return baseline.eval(std::clamp(t, baseline.lower(), baseline.upper()));
}

// --- Parameters / data --------------------------------------------------------

void Parameters::validate(const JointModel& model) const {
    auto dim = [](const char* name, Eigen::Index got, int want) {
        if (got != want) {
            std::ostringstream os;
            os << "parameter " << name << " has dimension " << got << ", model expects " << want;
            throw ConfigError(os.str());
        }
    };
    dim("beta", beta.size(), model.num_fixed());
    dim("gamma", gamma.size(), model.num_gamma());
    dim("alpha", alpha.size(), model.num_alpha());
    dim("gamma_h0", gamma_h0.size(), model.num_baseline());
    dim("D rows", D.rows(), model.num_random());
    dim("D cols", D.cols(), model.num_random());
    if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
    if (!(tau_h > 0.0) || !(tau_h_delta > 0.0)) throw DomainError("smoothing parameters must be positive");
    if ((D - D.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, D.cwiseAbs().maxCoeff()))
        throw DomainError("D must be symmetric");
    if (Eigen::LLT<Eigen::MatrixXd>(D).info() != Eigen::Success) throw DomainError("D must be positive definite");
}

void Subject::validate() const {
    if (times.size() != values.size()) throw DataError("subject " + id + ": times and values differ in length");
    if (event != 0 && event != 1) throw DataError("subject " + id + ": event indicator must be 0 or 1");
    if (!(event_time > 0.0) || !std::isfinite(event_time))
        throw DataError("subject " + id + ": event time must be positive and finite");
    for (size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] >= 0.0)) throw DataError("subject " + id + ": negative measurement time");
        if (k > 0 && times[k] < times[k - 1]) throw DataError("subject " + id + ": measurement times not ascending");
        if (times[k] > event_time) throw DataError("subject " + id + ": measurement after event time");
        if (!std::isfinite(values[k])) throw DataError("subject " + id + ": non-finite measurement");
    }
}

const Subject& Dataset::find(const std::string& id) const {
    for (const auto& s : subjects)
        if (s.id == id) return s;
    throw DataError("unknown subject '" + id + "'");
}

std::vector<double> Dataset::event_times() const {
    std::vector<double> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) out.push_back(s.event_time);
    return out;
}

BoundCovariates bind_covariates(const JointModel& model, const Subject& subject) {
    auto lookup = [&](const std::vector<std::string>& names) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(names.size()));
        for (size_t k = 0; k < names.size(); ++k) {
            auto it = subject.covariates.find(names[k]);
            if (it == subject.covariates.end())
                throw DataError("subject " + subject.id + " has no covariate '" + names[k] + "'");
            v(static_cast<Eigen::Index>(k)) = it->second;
        }
        return v;
    };
    return {lookup(model.longitudinal.covariates), lookup(model.survival_covariates)};
}

// --- Evaluation -----------------------------------------------------------------

namespace {

Eigen::VectorXd long_covariates(const LongitudinalSpec& spec, const Subject& subject) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(spec.covariates.size()));
    for (size_t k = 0; k < spec.covariates.size(); ++k) {
        auto it = subject.covariates.find(spec.covariates[k]);
        if (it == subject.covariates.end())
            throw DataError("subject " + subject.id + " has no covariate '" + spec.covariates[k] + "'");
        v(static_cast<Eigen::Index>(k)) = it->second;
    }
    return v;
}

void check_dims(const LongitudinalSpec& spec, const Eigen::VectorXd& b, const Eigen::VectorXd& beta) {
    if (beta.size() != spec.fixed_size() || b.size() != spec.random_size())
        throw ConfigError("linear predictor dimension mismatch");
}

}  // namespace

double linear_predictor(const LongitudinalSpec& spec, const Subject& subject, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& beta, double t) {
    check_dims(spec, b, beta);
    if (t < 0.0) throw DomainError("linear predictor requires t >= 0");
    return spec.fixed_row(long_covariates(spec, subject), t).dot(beta) + spec.random_row(t).dot(b);
}

double predictor_slope(const LongitudinalSpec& spec, const Subject& subject, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& beta, double t) {
    check_dims(spec, b, beta);
    (void)subject;
    if (t < 0.0) throw DomainError("predictor slope requires t >= 0");
    return spec.fixed_deriv_row(t).dot(beta) + spec.random_deriv_row(t).dot(b);
}

double predictor_integral(const LongitudinalSpec& spec, const Subject& subject, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& beta, double t) {
    check_dims(spec, b, beta);
    if (t < 0.0) throw DomainError("predictor integral requires t >= 0");
    return spec.fixed_integral_row(long_covariates(spec, subject), t).dot(beta) + spec.random_integral_row(t).dot(b);
}

HazardRow make_hazard_row(const JointModel& model, const BoundCovariates& cov, double t) {
    HazardRow row;
    row.time = t;
    row.baseline = model.baseline_row(t);
    const auto& spec = model.longitudinal;
    row.x = spec.fixed_row(cov.longitudinal, t);
    row.z = spec.random_row(t);
    if (model.association.needs_slope()) {
        row.dx = spec.fixed_deriv_row(t);
        row.dz = spec.random_deriv_row(t);
    }
    if (model.association.needs_integral()) {
        row.ix = spec.fixed_integral_row(cov.longitudinal, t);
        row.iz = spec.random_integral_row(t);
    }
    return row;
}

double log_hazard_at(const JointModel& model, const Parameters& theta, const BoundCovariates& cov,
                     const HazardRow& row, const Eigen::VectorXd& b) {
    using K = AssociationForm::Kind;
    double lh = row.baseline.dot(theta.gamma_h0);
    if (cov.survival.size() > 0) lh += cov.survival.dot(theta.gamma);
    const auto& a = theta.alpha;
    switch (model.association.kind) {
        case K::current_value: lh += a(0) * (row.x.dot(theta.beta) + row.z.dot(b)); break;
        case K::slope: lh += a(0) * (row.dx.dot(theta.beta) + row.dz.dot(b)); break;
        case K::value_and_slope:
            lh += a(0) * (row.x.dot(theta.beta) + row.z.dot(b)) + a(1) * (row.dx.dot(theta.beta) + row.dz.dot(b));
            break;
        case K::cumulative: lh += a(0) * (row.ix.dot(theta.beta) + row.iz.dot(b)); break;
        case K::shared_random_effects: lh += a.dot(b); break;
    }
    return lh;
}

double log_hazard(const Parameters& theta, const JointModel& model, const Subject& subject, const Eigen::VectorXd& b,
                  double t) {
    if (!(t > 0.0)) throw DomainError("log hazard requires t > 0");
    if (b.size() != model.num_random()) throw ConfigError("random-effects dimension mismatch");
    const auto cov = bind_covariates(model, subject);
    return log_hazard_at(model, theta, cov, make_hazard_row(model, cov, t), b);
}

double cumulative_hazard(const Parameters& theta, const JointModel& model, const BoundCovariates& cov,
                         const Eigen::VectorXd& b, double a, double t) {
    if (t < a) throw DomainError("cumulative hazard requires a <= t");
    if (t == a) return 0.0;
    const HazardGrid grid(model, cov, a, t);
    const auto res = grid.integrate(model, theta, b);
    if (res.clamped()) throw NumericError("hazard overflow", res.clamped_at);
    return res.value;
}

double survival(const Parameters& theta, const JointModel& model, const Subject& subject, const Eigen::VectorXd& b,
                double t) {
    if (!(t >= 0.0)) throw DomainError("survival requires t >= 0");
    if (t == 0.0) return 1.0;
    return std::exp(-cumulative_hazard(theta, model, bind_covariates(model, subject), b, 0.0, t));
}

double surv_log_density(const Parameters& theta, const JointModel& model, const Subject& subject,
                        const Eigen::VectorXd& b) {
    if (!(subject.event_time > 0.0)) throw DomainError("survival density requires T > 0");
    const auto cov = bind_covariates(model, subject);
    double out = -cumulative_hazard(theta, model, cov, b, 0.0, subject.event_time);
    if (subject.event == 1) {
        const double lh = log_hazard_at(model, theta, cov, make_hazard_row(model, cov, subject.event_time), b);
        if (lh > kLogHazardClamp) throw NumericError("hazard overflow", subject.event_time);
        out += lh;
    }
    return out;
}

double long_log_likelihood(const Parameters& theta, const JointModel& model, const Subject& subject,
                           const Eigen::VectorXd& b) {
    const auto& spec = model.longitudinal;
    const auto cov = long_covariates(spec, subject);
    double out = 0.0;
    for (size_t l = 0; l < subject.times.size(); ++l) {
        const double t = subject.times[l];
        const double eta = spec.fixed_row(cov, t).dot(theta.beta) + spec.random_row(t).dot(b);
        out += long_log_density(spec.family, subject.values[l], eta, theta.sigma2);
    }
    return out;
}

double random_effects_log_density(const Eigen::MatrixXd& D, const Eigen::VectorXd& b) {
    Eigen::LLT<Eigen::MatrixXd> llt(D);
    if (llt.info() != Eigen::Success) throw DomainError("random-effects covariance is not positive definite");
    const Eigen::VectorXd z = llt.matrixL().solve(b);
    const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * static_cast<double>(b.size()) * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * z.squaredNorm();
}

}  // namespace jms

namespace jms {

JointModel build_model(const ModelSpec& spec, const Dataset& data) {
    double t_max = 0.0;
    std::vector<double> events, follow_up, visits;
    for (const auto& s : data.subjects) {
        t_max = std::max(t_max, s.event_time);
        follow_up.push_back(s.event_time);
        if (s.event == 1) events.push_back(s.event_time);
        visits.insert(visits.end(), s.times.begin(), s.times.end());
    }
    if (!(t_max > 0.0)) t_max = 1.0;

    JointModel m;
    m.longitudinal.family.family = spec.family;
    m.longitudinal.covariates = spec.long_covariates;
    if (spec.natural_spline_time) {
        const double lo = spec.time_lower;
        const double hi = spec.time_upper > lo ? spec.time_upper : t_max;
        std::vector<double> knots = spec.time_knots;
        if (knots.empty()) {
            // a cubic of degree 3 with num_knots interior knots yields num_knots + 4 B-splines
            const auto b = BSplineBasis::from_quantiles(visits, spec.time_num_knots + 4, 3, lo, hi);
            knots = b.interior_knots();
        }
        m.longitudinal.time = TimeBasis::natural_cubic(NaturalCubicBasis(knots, lo, hi));
    } else {
        m.longitudinal.time = TimeBasis::polynomial(spec.time_degree);
    }
    if (spec.random_time_terms < 0 || spec.random_time_terms > m.longitudinal.time.size())
        throw ConfigError("random_time_terms must lie in [0, number of time features]");
    m.longitudinal.random_time_terms = spec.random_time_terms;
    m.association.kind = spec.association;
    m.survival_covariates = spec.surv_covariates;
    m.penalty_order = spec.penalty_order;

    const double upper = spec.baseline_upper > 0.0 ? spec.baseline_upper : t_max;
    if (!spec.baseline_knots.empty()) {
        m.baseline = BSplineBasis(spec.baseline_degree, spec.baseline_knots, 0.0, upper);
    } else {
        const auto& src = events.size() >= 2 ? events : follow_up;
        m.baseline = BSplineBasis::from_quantiles(src, spec.baseline_basis, spec.baseline_degree, 0.0, upper);
    }
    if (m.penalty_order < 1) throw ConfigError("penalty order must be at least 1");
    return m;
}

ModelSpec describe_model(const JointModel& model) {
    ModelSpec spec;
    const auto& lon = model.longitudinal;
    spec.family = lon.family.family;
    spec.association = model.association.kind;
    if (const auto* ncs = lon.time.natural_cubic_basis()) {
        spec.natural_spline_time = true;
        spec.time_knots = ncs->interior_knots();
        spec.time_num_knots = static_cast<int>(spec.time_knots.size());
        spec.time_lower = ncs->lower();
        spec.time_upper = ncs->upper();
    } else {
        spec.time_degree = lon.time.polynomial_degree();
    }
    spec.random_time_terms = lon.random_time_terms;
    spec.long_covariates = lon.covariates;
    spec.surv_covariates = model.survival_covariates;
    spec.baseline_basis = model.baseline.size();
    spec.baseline_degree = model.baseline.degree();
    spec.baseline_knots = model.baseline.interior_knots();
    spec.baseline_upper = model.baseline.upper();
    spec.penalty_order = model.penalty_order;
    return spec;
}

}  // namespace jms
