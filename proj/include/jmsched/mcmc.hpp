#pragma once

#include "jmsched/priors.hpp"
#include "jmsched/random.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jms {

struct McmcConfig {
    int chains = 2;
    int iterations = 7000;
    int burn_in = 2000;
    int thin = 1;
    std::uint64_t seed = 0;
    int adapt_window = 50;
    /// false fits the longitudinal submodel alone (survival blocks stay at their start values)
    bool include_survival = true;
    /// holds tau_h fixed instead of updating it
    std::optional<double> fixed_tau_h;
    bool store_random_effects = true;

    void validate() const;
    int draws_per_chain() const { return (iterations - burn_in + thin - 1) / thin; }
};

struct Diagnostics {
    std::vector<std::string> names;
    std::vector<double> rhat;
    std::vector<double> ess;
    std::map<std::string, double> acceptance;  // post-burn-in acceptance per sampler block
    std::vector<std::string> flags;
    bool converged = true;
};

/// Draws theta^(g) with aligned per-subject random effects.
struct PosteriorSamples {
    JointModel model;
    PriorSet priors;
    std::vector<Parameters> draws;
    std::vector<int> chain;
    std::vector<int> iteration;
    std::vector<std::string> subject_ids;
    /// One (subjects x q) matrix per draw; empty when not stored.
    std::vector<Eigen::MatrixXd> random_effects;
    Diagnostics diagnostics;

    std::size_t size() const noexcept { return draws.size(); }
    bool has_random_effects() const noexcept { return !random_effects.empty(); }
    Parameters posterior_mean() const;
};

/// Scalar names in flattening order: beta[k], sigma2 (gaussian only),
/// D[i,j] (lower triangle, row-major), gamma[k], alpha[k], gamma_h0[q], tau_h, tau_h_delta.
std::vector<std::string> parameter_names(const JointModel& model);
Eigen::VectorXd flatten(const Parameters& theta, const JointModel& model);
Parameters unflatten(const Eigen::VectorXd& values, const JointModel& model);

/// Every draw equal to theta; random effects zero when `subjects` > 0.
PosteriorSamples point_mass(const JointModel& model, const Parameters& theta, int copies = 1, int subjects = 0);

PosteriorSamples fit(const Dataset& data, const JointModel& model, const PriorSet& priors, const McmcConfig& config);

struct DicResult {
    double dic = 0.0;
    double p_d = 0.0;
    double d_bar = 0.0;
    double d_hat = 0.0;
};

/// Requires stored random effects aligned with `data.subjects`.
DicResult dic(const PosteriorSamples& samples, const Dataset& data);

/// Full conditional of the gaussian residual variance: IG(a + n/2, s + ssr/2).
double draw_sigma2(Rng& rng, const PriorSet& priors, double ssr, long n_obs);
/// Full conditional of D: IW(df0 + n, scale0 + sum b b^T).
Eigen::MatrixXd draw_D(Rng& rng, const PriorSet& priors, const std::vector<Eigen::VectorXd>& random_effects, int q);
/// Gamma(shape + rank/2, tau_h_delta + gamma_h0^T K gamma_h0 / 2).
double draw_tau_h(Rng& rng, const PriorSet& priors, double tau_h_delta, double quad_form, int rank);
/// Gamma(shape + tau_h_shape, rate + tau_h).
double draw_tau_h_delta(Rng& rng, const PriorSet& priors, double tau_h);

/// Split-chain potential scale reduction.
double split_rhat(const std::vector<std::vector<double>>& chains);
/// Multi-chain effective sample size with Geyer's initial positive sequence.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

}  // namespace jms
