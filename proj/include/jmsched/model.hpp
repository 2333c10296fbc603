#pragma once

#include "jmsched/numerics.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace jms {

// ---------------------------------------------------------------------------
// Longitudinal submodel

enum class Family { gaussian, bernoulli };

/// Exponential-family member with its canonical link: identity for gaussian,
/// logit for bernoulli. The dispersion of the bernoulli family is fixed at 1.
struct ExponentialFamily {
    Family family = Family::gaussian;

    double link(double mean) const;
    double inverse_link(double eta) const;
    bool has_dispersion() const noexcept { return family == Family::gaussian; }
};

std::string to_string(Family f);
Family family_from_string(const std::string& s);

/// log p(y | eta, phi). Gaussian: N(eta, phi). Bernoulli: y*eta - log(1 + e^eta).
double long_log_density(const ExponentialFamily& family, double y, double eta, double phi);

/// Time features entering both designs: either t, t^2, ..., t^d or a natural
/// cubic spline basis.
class TimeBasis {
public:
    struct Polynomial {
        int degree = 1;
    };

    TimeBasis() : impl_(Polynomial{1}) {}
    static TimeBasis polynomial(int degree);
    static TimeBasis natural_cubic(NaturalCubicBasis basis);

    int size() const;
    bool is_polynomial() const noexcept { return std::holds_alternative<Polynomial>(impl_); }
    const NaturalCubicBasis* natural_cubic_basis() const noexcept { return std::get_if<NaturalCubicBasis>(&impl_); }
    int polynomial_degree() const;

    Eigen::VectorXd eval(double t) const;
    Eigen::VectorXd deriv(double t) const;
    /// Componentwise integral over [0, t].
    Eigen::VectorXd integral(double t) const;
    /// Knot locations where the features lose smoothness (empty for polynomials).
    std::vector<double> breakpoints() const;

private:
    std::variant<Polynomial, NaturalCubicBasis> impl_;
};

/// Fixed row x(t) = [1, f(t), covariates]; random row z(t) = [1, f_1(t), ..., f_r(t)].
/// Covariates are time-invariant subject attributes looked up by name.
struct LongitudinalSpec {
    ExponentialFamily family;
    TimeBasis time;
    std::vector<std::string> covariates;
    int random_time_terms = 0;

    int fixed_size() const { return 1 + time.size() + static_cast<int>(covariates.size()); }
    int random_size() const { return 1 + random_time_terms; }

    Eigen::VectorXd fixed_row(const Eigen::VectorXd& covariate_values, double t) const;
    Eigen::VectorXd fixed_deriv_row(double t) const;
    Eigen::VectorXd fixed_integral_row(const Eigen::VectorXd& covariate_values, double t) const;
    Eigen::VectorXd random_row(double t) const;
    Eigen::VectorXd random_deriv_row(double t) const;
    Eigen::VectorXd random_integral_row(double t) const;
};

// ---------------------------------------------------------------------------
// Survival submodel

/// Functional of the longitudinal trajectory entering the log hazard.
struct AssociationForm {
    enum class Kind { current_value, slope, value_and_slope, cumulative, shared_random_effects };
    Kind kind = Kind::current_value;

    /// Number of association parameters; `random_size` matters only for
    /// shared random effects.
    int arity(int random_size) const;
    bool needs_value() const noexcept { return kind == Kind::current_value || kind == Kind::value_and_slope; }
    bool needs_slope() const noexcept { return kind == Kind::slope || kind == Kind::value_and_slope; }
    bool needs_integral() const noexcept { return kind == Kind::cumulative; }
    /// True when the hazard depends on beta (any trajectory-based form).
    bool uses_fixed_effects() const noexcept { return kind != Kind::shared_random_effects; }
};

std::string to_string(AssociationForm::Kind k);
/// Throws ConfigError listing the valid variants.
AssociationForm::Kind association_from_string(const std::string& s);

/// Full joint model definition. The baseline log hazard is sum_q gamma_h0[q] B_q(t)
/// over a full B-spline basis; the constant level lives in the partition of unity.
/// Beyond the upper boundary knot the baseline log hazard is held at its
/// boundary value.
struct JointModel {
    LongitudinalSpec longitudinal;
    AssociationForm association;
    BSplineBasis baseline;
    int penalty_order = 2;
    std::vector<std::string> survival_covariates;

    int num_fixed() const { return longitudinal.fixed_size(); }
    int num_random() const { return longitudinal.random_size(); }
    int num_baseline() const { return baseline.size(); }
    int num_gamma() const { return static_cast<int>(survival_covariates.size()); }
    int num_alpha() const { return association.arity(num_random()); }

    DifferencePenalty penalty() const { return DifferencePenalty{penalty_order, num_baseline()}; }
    /// Breakpoints for composite quadrature of hazard integrals.
    std::vector<double> hazard_breakpoints() const;
    /// Largest panel width used when integrating the hazard.
    double max_panel_width() const;
    Eigen::VectorXd baseline_row(double t) const;
};

// ---------------------------------------------------------------------------
// Parameters and data

struct Parameters {
    Eigen::VectorXd beta;
    double sigma2 = 1.0;  // gaussian residual variance; fixed at 1 for bernoulli
    Eigen::MatrixXd D;
    Eigen::VectorXd gamma;
    Eigen::VectorXd alpha;
    Eigen::VectorXd gamma_h0;
    double tau_h = 1.0;
    double tau_h_delta = 1.0;

    /// Throws ConfigError on dimension mismatch, DomainError when D is not
    /// symmetric positive definite or a variance is not positive.
    void validate(const JointModel& model) const;
};

struct Subject {
    std::string id;
    std::vector<double> times;   // ascending, >= 0
    std::vector<double> values;  // one per time
    std::map<std::string, double> covariates;
    double event_time = 0.0;
    int event = 0;

    /// Throws DataError on a violated invariant.
    void validate() const;
};

struct Dataset {
    std::vector<Subject> subjects;
    std::vector<std::string> longitudinal_covariates;  // extra columns of the longitudinal file
    std::vector<std::string> survival_covariates;      // extra columns of the survival file

    const Subject& find(const std::string& id) const;
    std::vector<double> event_times() const;
};

/// Covariate vectors of a subject resolved against a model.
struct BoundCovariates {
    Eigen::VectorXd longitudinal;  // in model.longitudinal.covariates order
    Eigen::VectorXd survival;      // w, in model.survival_covariates order
};

BoundCovariates bind_covariates(const JointModel& model, const Subject& subject);

/// User-facing model options; knots left empty are placed from the data by build_model.
struct ModelSpec {
    Family family = Family::gaussian;
    AssociationForm::Kind association = AssociationForm::Kind::current_value;
    bool natural_spline_time = false;
    int time_degree = 1;              // polynomial time basis
    int time_num_knots = 1;           // natural spline: interior knots at quantiles of visit times
    std::vector<double> time_knots;   // natural spline: explicit interior knots
    double time_lower = 0.0;
    double time_upper = 0.0;          // <= time_lower means "max observed time"
    int random_time_terms = 1;
    std::vector<std::string> long_covariates;
    std::vector<std::string> surv_covariates;
    int baseline_basis = 15;
    int baseline_degree = 3;
    std::vector<double> baseline_knots;  // explicit interior knots
    double baseline_upper = 0.0;         // <= 0 means "max observed time"
    int penalty_order = 2;
};

/// Baseline knots at quantiles of event times (all follow-up times when there
/// are fewer than two events); time basis knots at quantiles of visit times.
JointModel build_model(const ModelSpec& spec, const Dataset& data);

/// The spec with every data-dependent choice made explicit; building it
/// against any dataset reproduces `model`.
ModelSpec describe_model(const JointModel& model);

// ---------------------------------------------------------------------------
// Evaluation

double linear_predictor(const LongitudinalSpec& spec, const Subject& subject, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& beta, double t);
double predictor_slope(const LongitudinalSpec& spec, const Subject& subject, const Eigen::VectorXd& b,
                       const Eigen::VectorXd& beta, double t);
double predictor_integral(const LongitudinalSpec& spec, const Subject& subject, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& beta, double t);

/// Log hazards are clamped to this magnitude before exponentiation.
inline constexpr double kLogHazardClamp = 700.0;

/// Parameter-independent design quantities at one time point.
struct HazardRow {
    double time = 0.0;
    Eigen::VectorXd baseline;
    Eigen::VectorXd x, z;    // value rows
    Eigen::VectorXd dx, dz;  // slope rows (filled when the association needs them)
    Eigen::VectorXd ix, iz;  // integral rows (filled when the association needs them)
};

HazardRow make_hazard_row(const JointModel& model, const BoundCovariates& cov, double t);

/// Unclamped log hazard at a prepared row.
double log_hazard_at(const JointModel& model, const Parameters& theta, const BoundCovariates& cov,
                     const HazardRow& row, const Eigen::VectorXd& b);

double log_hazard(const Parameters& theta, const JointModel& model, const Subject& subject, const Eigen::VectorXd& b,
                  double t);

/// Cumulative hazard over [a, b]; composite GK15 over the model breakpoints.
/// Throws NumericError naming the node where the log hazard exceeds the clamp.
double cumulative_hazard(const Parameters& theta, const JointModel& model, const BoundCovariates& cov,
                         const Eigen::VectorXd& b, double a, double t);

double survival(const Parameters& theta, const JointModel& model, const Subject& subject, const Eigen::VectorXd& b,
                double t);

/// delta * log h(T) - int_0^T h(s) ds
double surv_log_density(const Parameters& theta, const JointModel& model, const Subject& subject,
                        const Eigen::VectorXd& b);

/// Sum of longitudinal log densities of the subject's measurements.
double long_log_likelihood(const Parameters& theta, const JointModel& model, const Subject& subject,
                           const Eigen::VectorXd& b);

/// log N(b; 0, D). Throws DomainError when D is not positive definite.
double random_effects_log_density(const Eigen::MatrixXd& D, const Eigen::VectorXd& b);

}  // namespace jms
