#pragma once

#include "jmsched/mcmc.hpp"
#include "jmsched/random_effects.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jms {

/// A subject known to be event-free at `landmark`, with the measurements
/// recorded up to it.
struct SubjectHistory {
    Subject subject;  // measurements restricted to times <= landmark
    double landmark = 0.0;

    /// Truncates the measurements at t. Throws PreconditionError when the
    /// subject's follow-up ends before t.
    static SubjectHistory at_landmark(const Subject& s, double t);
    void validate() const;
};

/// Counts and warm-ups of the conditional random-effects chains.
struct ReChainOptions {
    int warmup = kReWarmup;  // first draw of a chain
    int inner_warmup = 50;   // chains restarted inside each outer EKL replicate
    int steps_per_draw = 1;  // MH steps between recorded draws / after a parameter change
};

/// Scheduling knobs. Utility weights of the compound criterion are represented
/// only through kappa.
struct ScheduleConfig {
    double kappa = 0.8;
    double t_max = 5.0;
    int grid_size = 5;
    int outer = 2000;     // outer Monte Carlo replicates of the EKL scheme
    int inner = 50;       // inner replicates per outer replicate
    int pi_draws = 2000;  // (theta, b) pairs for the conditional survival estimate
    std::uint64_t seed = 0;
    ReChainOptions chains;

    void validate() const;
};

/// pi(u | t) = mean over pairs of S(u | b, theta) / S(t | b, theta), with
/// theta drawn from the posterior and b from [b | T* > t, Y(t), theta].
/// The pairs are drawn once, so repeated calls share random numbers.
class PiEstimator {
public:
    PiEstimator(const PosteriorSamples& samples, const SubjectHistory& history, int draws, std::uint64_t seed,
                const ReChainOptions& options = {});

    /// Throws DomainError for u < t; exactly 1 at u = t.
    double operator()(double u) const;
    double landmark() const noexcept { return t_; }
    int size() const noexcept { return static_cast<int>(b_.size()); }

private:
    const PosteriorSamples* samples_;
    Subject subject_;
    BoundCovariates cov_;
    double t_;
    std::vector<std::size_t> theta_index_;
    std::vector<Eigen::VectorXd> b_;
};

double conditional_survival(const SubjectHistory& history, double u, const PosteriorSamples& samples, int draws,
                            std::uint64_t seed);

struct CvDclConfig {
    int re_draws = 25;         // fresh b draws per (subject, theta) pair
    int max_draws = 0;         // thin the posterior to at most this many draws (0 = all)
    bool reuse_fit_draws = false;
    std::uint64_t seed = 0;
    ReChainOptions chains;
};

struct CvDclResult {
    double value = 0.0;  // mean log CPO over subjects at risk; larger is better
    double sum = 0.0;
    int n_at_risk = 0;
    std::vector<std::string> subject_ids;
    std::vector<double> log_cpo;
};

/// Cross-validated dynamic conditional likelihood at landmark t. Throws
/// DomainError when no subject is at risk after t.
CvDclResult cv_dcl(const PosteriorSamples& samples, const Dataset& data, double t, const CvDclConfig& config = {});

struct EventTimeDraw {
    double time = 0.0;
    bool capped = false;
};

/// Solves S(T) / S(from) = v by horizon doubling and bisection (tolerance 1e-6 in time).
EventTimeDraw simulate_event_time(const JointModel& model, const Parameters& theta, const BoundCovariates& cov,
                                  const Eigen::VectorXd& b, double from, double v, double cap);
EventTimeDraw simulate_event_time(const JointModel& model, const Parameters& theta, const BoundCovariates& cov,
                                  const Eigen::VectorXd& b, double from, Rng& rng, double cap);

/// One draw of y(u) from the mixed model.
double simulate_future_measurement(const JointModel& model, const BoundCovariates& cov, const Eigen::VectorXd& b,
                                   const Parameters& theta, double u, Rng& rng);

struct EklEstimate {
    double estimate = 0.0;
    double lower = 0.0;  // 2.5% Monte Carlo percentile
    double upper = 0.0;  // 97.5% Monte Carlo percentile
    double std_error = 0.0;
    double zero_fraction = 0.0;  // share of replicates where the event preceded u
    std::vector<double> replicates;
};

/// Expected information gain (log-numerator term) of measuring at u > t.
EklEstimate ekl(const SubjectHistory& history, double u, const PosteriorSamples& samples, const ScheduleConfig& config,
                int u_index = 0);

struct SchedulePlan {
    double t = 0.0;
    double t_up = 0.0;
    std::vector<double> grid;
    std::vector<EklEstimate> ekl;
    std::vector<double> pi;
    std::optional<std::size_t> selected;
    std::vector<std::string> flags;
};

inline constexpr const char* kInterveneFlag = "intervene: survival constraint immediately binding";

/// Index of the largest ekl among points with pi >= kappa, earliest on ties.
std::optional<std::size_t> select_next(const std::vector<double>& grid, const std::vector<double>& ekl,
                                       const std::vector<double>& pi, double kappa);

SchedulePlan schedule_next(const SubjectHistory& history, const PosteriorSamples& samples,
                           const ScheduleConfig& config);

}  // namespace jms
